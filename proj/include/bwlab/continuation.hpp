#ifndef BWLAB_CONTINUATION_HPP
#define BWLAB_CONTINUATION_HPP

#include <optional>
#include <string>
#include <vector>

#include "bwlab/eigen.hpp"

namespace bwlab {

// The traced parameter is the family's own: hbar for Hbar/KDelta (as k),
// beta for BetaTilde, alpha for AlphaHat.
ModelSpec with_param(const ModelSpec& base, cplx param);
cplx param_of(const ModelSpec& spec);

struct BranchCurve {
    ModelSpec base;
    std::vector<cplx> params;
    std::vector<EigenPair> points;
    int label = -1;
    double max_step_de = 0.0; // continuity certificate
    bool ended_early = false;
    std::string end_diagnostic;

    std::string to_csv() const;
    std::string to_json() const;
};

struct TraceOptions {
    int max_refine = 12;
    double rel_tol = 1e-12;
    double coalesce_tol_scale = 1e-6;
    bool attach_labels_at_ends = false;
    uint64_t seed = 0;
};

// Quadratic predictor + Newton corrector along the parameter grid, refining
// the grid (factor 2, up to max_refine levels) where the step test fails.
BranchCurve trace_branch(const EigenPair& start, const std::vector<cplx>& grid,
                         const TraceOptions& opts = {});

struct SqrtFit {
    double a = 0.0;        // |a| of  dE ~ a (hb - hb_n)^{1/2} + b (hb - hb_n)
    double b = 0.0;
    double exponent = 0.0; // log-log regression slope
    double exponent_r2 = 0.0;
    double fit_residual = 0.0;
};

struct BranchPoint {
    int n = 0;
    double hbar_n = 0.0;
    double E_c = 0.0;
    int m_minus = 0, m_plus = 1;
    SqrtFit fit;
    double im_s_max = 0.0;       // max |Im s| over the bracket samples
    double re_s_linear_r2 = 0.0; // linearity of Re s through the branch point
    std::vector<std::pair<double, cplx>> s_samples; // (hbar, (E+ - E-)^2)
    std::vector<double> secondary_coalescences;     // |s| dips found above hbar_n
    double hbar_start = 0.0;

    std::string to_json() const;
    static std::string csv_header();
    std::string to_csv_row() const;
};

struct LocateOptions {
    double hbar_start = 1.0;
    double rel_tol = 1e-12;
    uint64_t seed = 0;
    double march_factor = 0.88;
};

// Traces E_{2n} and E_{2n+1} downward from hbar_start, brackets the
// coalescence by the sign of Re (dE)^2, refines hbar_n from the linear zero
// of the analytic function s(hbar) = (dE)^2, and fits the square-root law.
// Throws Error(NotFound) if no coalescence occurs in (0, hbar_start].
BranchPoint locate_branch_point(int n, const LocateOptions& opts = {});

struct MonodromyResult {
    int n = 0;
    double radius = 0.0;
    // images of (m-, m+) after one loop, as indices {0,1} -> position
    std::vector<int> permutation;
    bool is_transposition = false;
    bool double_loop_identity = false;
    std::vector<std::pair<cplx, cplx>> track_mplus; // (hbar, E) along the loop
    std::string to_json() const;
};

// Continues both levels around the circle hbar_n + radius e^{i theta}; the
// circle must stay inside the sector C0 and enclose only this branch point
// (verified by the double-loop identity).
MonodromyResult monodromy_loop(const BranchPoint& bp, double radius, const LocateOptions& opts = {});

struct EdgeCheck {
    double hbar_test;
    double eps;
    cplx m_minus_above; // E_{m-}(hbar + i eps) continued from above the cut
    cplx plus_below;    // E_n^+(hbar) from the small-hbar branch
    cplx m_plus_above;
    cplx minus_below;
    double diff_minus_plus; // |m_minus_above - plus_below|
    double diff_plus_minus;
};

// Eq.-(SON)-style edge assignment: continue E_{m-+} above the cut to
// fraction*hbar_n and compare against the small-hbar branches.
EdgeCheck edge_assignment_check(const BranchPoint& bp, double fraction = 0.8, double eps = 1e-3,
                                const LocateOptions& opts = {});

struct CrossingReport {
    std::vector<BranchPoint> rows;
    double E_critical = 0.0;
    double J2_critical = 0.0;
    std::vector<double> J2_at_Ec; // J2(E_n^c, 0) per row
    std::string to_markdown() const;
    std::string to_json() const;
};

// Table of (n, hbar_n, E_n^c, 2n hbar_n, J2(E_n^c,0)) with the trend targets
// E^c and J2^c; rows computed concurrently (BWLAB_THREADS).
CrossingReport crossing_report(int n_max, const LocateOptions& opts = {});

} // namespace bwlab

#endif
