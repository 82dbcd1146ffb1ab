#ifndef BWLAB_SEMICLASSICS_HPP
#define BWLAB_SEMICLASSICS_HPP

#include <optional>
#include <string>
#include <vector>

#include "bwlab/eigen.hpp"
#include "bwlab/models.hpp"

namespace bwlab {

struct StokesLine {
    int source_tp = -1;
    int dir_index = 0;
    std::vector<cplx> points;
    enum class Terminus { InfinitySector, HitsTurningPoint, Truncated };
    Terminus terminus = Terminus::Truncated;
    int terminus_sector = -1; // index into diagram sectors
    int terminus_tp = -1;
    double action_drift = 0.0; // max drift of Re int sqrt(V-E) dz along the line
    double arc_length = 0.0;
};

struct StokesDiagram {
    ModelSpec spec;
    cplx E{0.0, 0.0};
    TurningPointSet tps;
    std::vector<double> sectors; // asymptote directions (sorted, radians)
    std::vector<StokesLine> lines;
    // oscillatory range: polyline when I- and I+ are Stokes-connected, the
    // merged double point when they coincide, absent when broken
    std::optional<std::vector<cplx>> rho;
    std::optional<std::vector<cplx>> eta;
    std::string topology;
    bool degenerate_perturbed = false;

    std::string to_csv() const;       // line_id, re, im
    std::string topology_json() const;
};

struct StokesTraceOptions {
    double max_arc = 40.0;
    double capture_radius = 1e-4;
    double r_max = 0.0;   // 0 = automatic
    double rel_tol = 1e-11;
    double min_trace_height = 0.0; // extend r_max so eta reaches this height
};

StokesDiagram trace_stokes_lines(const ModelSpec& spec, cplx E, const StokesTraceOptions& opts = {});

struct EscapeFit {
    double fitted_c;  // mean of x(y) (y^2 + 1/2) over the window
    double residual;  // max deviation over the window
    double y_min, y_max;
};

// pre: the escape line is traceable to y ~ 20; fits over y in [10, 20].
EscapeFit escape_line_asymptote(const ModelSpec& spec, cplx E);

struct CriticalEnergy {
    double value;
    double bracket_lo, bracket_hi; // indicator certificate
    std::vector<double> flips;     // all indicator sign changes in the window
};

// Bisection on the Stokes-topology indicator (is the line leaving I+ captured
// by I-, or does it escape past I0's separatrix?), refined by the gap between
// the connection's axis crossing and I0.
CriticalEnergy critical_energy(const ModelSpec& spec, double window_lo = 0.05,
                               double window_hi = 1.0, double tol = 1e-5);

enum class ContourTag { GammaPlus, GammaMinus, GammaM };
const char* contour_tag_name(ContourTag t);

enum class ActionMethod { WkbQuadrature, ExactLogDerivative };

struct ActionValue {
    cplx E{0.0, 0.0};
    double hbar = 0.0;
    ContourTag tag = ContourTag::GammaM;
    cplx J{0.0, 0.0};
    ActionMethod method = ActionMethod::WkbQuadrature;
    double err_estimate = 0.0;
};

// J = (1/2 pi i) oint sqrt(V - E) dz around the designated turning pair
// (GammaPlus: the two rightmost, GammaMinus: the two leftmost, GammaM: sum of
// both halves), branch-tracked trapezoid with node doubling.
ActionValue action_integral(const ModelSpec& spec, cplx E, double hbar, ContourTag tag);

// Direct single-contour J2 around {I-, I+} excluding I0; admissible only when
// I0 clears the contour. Used as the dual route to GammaM.
ActionValue action_integral_direct_gamma(const ModelSpec& spec, cplx E, double hbar);

enum class WkbScheme { CC1, CC3 };

// Root of J(E) = hbar (label + 1/2) by Newton; CC1 uses the gamma+ half
// contour (plus branch), CC3 the full two-half sum.
cplx solve_wkb_level(const ModelSpec& spec, int label, double hbar, WkbScheme scheme,
                     std::optional<cplx> guess = std::nullopt);

// | (hb/2 pi i) oint psi'/psi dz + hb/2 - hb (label + 1/2) | on a contour
// around the designated node set.
double exact_quantization_residual(const EigenfunctionEvaluator& ef, int label, ContourTag tag);
double exact_quantization_residual_loop(const EigenfunctionEvaluator& ef, const ComplexPath& loop,
                                        int label);

struct DivergenceCheck {
    double k;        // |E|^{-5/6} hbar
    double mismatch; // |J2_unit - k (m + 1/2)| for the unit-energy operator
};

// Rescaled quantization mismatch of the boundedness argument: the unit-energy
// action stays O(1) while the right-hand side vanishes as k -> 0.
DivergenceCheck divergence_exclusion_check(double E_magnitude, int label, double hbar,
                                           double arg_E = 0.0);

std::string action_values_csv(const std::vector<ActionValue>& rows);

} // namespace bwlab

#endif
