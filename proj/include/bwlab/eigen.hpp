#ifndef BWLAB_EIGEN_HPP
#define BWLAB_EIGEN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bwlab/ode.hpp"

namespace bwlab {

enum class LabelScheme { NodeCount, PerturbativeN };
enum class Branch { Plus, Minus, RealPositive };

const char* branch_name(Branch b);
const char* label_scheme_name(LabelScheme s);

struct EigenPair {
    ModelSpec spec;
    cplx E{0.0, 0.0};
    int label = -1; // -1 when labeling was not requested
    LabelScheme label_scheme = LabelScheme::NodeCount;
    Branch branch = Branch::RealPositive;
    double residual_w = 0.0;     // |W| relative to the off-resonance scale
    double quantization_residual = -1.0; // filled by semiclassics, -1 = unset
    int nodes_lower = -1;
    int nodes_upper = -1;
    int nodes_imag = -1;
    int iterations = 0;
    double tol = 0.0;
    double shoot_L = 0.0;
    bool duplicate = false;

    std::string to_json() const;
};

// L = max(8, 4 (|E|+10)^{1/3}), enlarged if needed so that the recessive
// anchor satisfies |V(L)| >= 100 |E|.
double default_shoot_L(const ModelSpec& spec, cplx E);

struct ShootingOptions {
    double L = 0.0;        // 0 = default_shoot_L
    double rel_tol = 1e-12;
    // matching point on the real axis; unset = automatic (0 for real levels,
    // the inner edge of the node-side turning cluster for complex ones)
    std::optional<double> match;
};

double default_match_point(const ModelSpec& spec, cplx E);

// Bidirectional-shooting mismatch W(E) = psi+ psi-' - psi+' psi- at the match
// point. Normalized by an E-independent reference scale fixed at the first
// evaluation, so W is an analytic function of E and O(1) off resonance.
class WronskianEvaluator {
public:
    WronskianEvaluator(ModelSpec spec, ShootingOptions opts = {});

    cplx operator()(cplx E) const;

    struct Shot {
        WaveState plus;  // from +L, at the match point
        WaveState minus; // from -L, at the match point
        cplx w_raw;
        double sigma; // log_scale sum before rescaling by the reference
    };
    Shot shoot(cplx E) const;

    double L(cplx E) const;
    const ModelSpec& spec() const { return spec_; }
    double match_point() const { return match_fixed_ ? *match_fixed_ : 0.0; }

private:
    ModelSpec spec_;
    ShootingOptions opts_;
    // frozen at the first evaluation so W is one fixed analytic function of E
    mutable std::optional<double> L_fixed_;
    mutable std::optional<double> match_fixed_;
    mutable std::optional<double> sigma_ref_;
};

cplx wronskian_mismatch(const ModelSpec& spec, cplx E, double L, double tol);

struct SolveOptions {
    ShootingOptions shooting;
    int max_iter = 60;
    double tol_w = 1e-9;
    bool attach_labels = true;
    uint64_t seed = 0;
};

// Complex Newton iteration on W (derivative by one-sided complex finite
// difference h = 1e-6 (1+|E|)); throws Error(Convergence) with the iterate
// trace on failure. Node-count labels come from the zeros module.
EigenPair solve_eigenvalue(const ModelSpec& spec, cplx guess, const SolveOptions& opts = {});

struct ScanOptions {
    int max_levels = 64;
    uint64_t seed = 0;
    double rel_tol = 1e-12;
    bool attach_labels = false;
    double merge_tol_rel = 1e-8;
};

// All eigenvalues inside the window, by argument-principle counting of W's
// zeros with recursive subdivision (<= 1 zero per cell), then polishing.
std::vector<EigenPair> spectrum_scan(const ModelSpec& spec, const Rect& window,
                                     const ScanOptions& opts = {});

// Number of eigenvalues inside the window (argument principle only, no
// polishing).
int count_levels_in_window(const ModelSpec& spec, const Rect& window, double rel_tol = 1e-12);

// Assembled two-sided eigenfunction at a converged energy; evaluation off the
// real axis re-integrates the ODE along straight segments from the stored
// real-axis solution.
class EigenfunctionEvaluator {
public:
    struct Options {
        double L = 0.0;
        double rel_tol = 1e-12;
        std::optional<double> match; // unset = automatic
    };

    EigenfunctionEvaluator(ModelSpec spec, cplx E);
    EigenfunctionEvaluator(ModelSpec spec, cplx E, Options opts);

    struct Value {
        cplx psi;
        cplx dpsi;
        double log_scale;
    };
    Value at(cplx z) const;

    struct LoopResult {
        double winding;     // (1/2pi) total arg increment of psi around the loop
        double min_psi_dist; // min |psi/psi'| along the loop (distance to nearest zero)
        double closure_err; // relative mismatch of psi after the closed loop
    };
    LoopResult loop_winding(const Rect& rect) const;
    LoopResult loop_winding(const ComplexPath& loop) const;

    std::vector<DenseSample> axis_profile(double y_from, double y_to, double max_step = 0.0) const;

    double matching_defect() const { return matching_defect_; }
    cplx energy() const { return E_; }
    const ModelSpec& model() const { return spec_; }
    double L() const { return L_; }

private:
    ModelSpec spec_;
    cplx E_;
    double L_;
    double tol_;
    double match_x_;
    std::vector<WaveState> right_chain_; // along the real axis, +L down to match
    std::vector<WaveState> left_chain_;  // -L up to match
    cplx left_scale_;
    double left_log_offset_;
    double matching_defect_;

    Value transport(const WaveState& from, cplx to, bool left_side) const;
    const WaveState& pick_start(cplx z, bool& left_side) const;
};

double env_max_threads();

} // namespace bwlab

#endif
