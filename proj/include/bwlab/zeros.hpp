#ifndef BWLAB_ZEROS_HPP
#define BWLAB_ZEROS_HPP

#include <string>
#include <vector>

#include "bwlab/eigen.hpp"

namespace bwlab {

enum class ZeroClass { NodeLower, NodeUpper, ImaginaryNode, EscapeZero, Unclassified };

const char* zero_class_name(ZeroClass c);

struct Zero {
    cplx z;
    ZeroClass cls = ZeroClass::Unclassified;
    double residual = 0.0; // final Newton step size |psi/psi'|
};

struct ZeroSet {
    ModelSpec spec;
    cplx E{0.0, 0.0};
    std::vector<Zero> zeros;
    // counts per cone (CRE) and per half-plane (Re z < 0 / > 0)
    int count_rho = 0;
    int count_eta = 0;
    int count_left = 0;
    int count_right = 0;
    int expected = -1;
    bool count_mismatch = false;

    std::string to_csv() const;
};

// Exact integer winding (1/2 pi i) oint psi'/psi over the rectangle boundary.
// Auto-jitters the rectangle (seeded) when a zero sits within ~1e-6 of the
// boundary; retries once with tightened tolerance before failing.
int count_zeros_in_rectangle(const EigenfunctionEvaluator& ef, const Rect& rect, uint64_t seed = 0);

// Recursive subdivision + argument principle + Newton polish. A count
// different from `expected` is reported in the result, not raised.
ZeroSet locate_zeros(const EigenfunctionEvaluator& ef, const Rect& region, int expected,
                     uint64_t seed = 0);

// Zeros hugging the imaginary axis (the large escape zeros): located from the
// minima of |psi(iy)| followed by a 2-d Newton polish. Winding rectangles are
// useless there (the action varies too steeply across the axis).
ZeroSet locate_axis_zeros(const EigenfunctionEvaluator& ef, double y_from, double y_to);

// Classification by cone membership in the AlphaHat frame for PT-symmetric
// (real-E) states, by branch half-plane for complex-E states.
void classify_zeros(ZeroSet& zs, const EigenfunctionEvaluator& ef);

struct AxisProfile {
    std::vector<double> y;
    std::vector<cplx> phi;        // psi(iy), phase-rotated for PT states
    std::vector<double> log_scale;
    cplx phase_rotation{1.0, 0.0};
    double min_abs = 0.0;  // min scale-free zero proximity |phi|/(|phi| + 0.1 |phi'|)
    int sign_changes = 0;  // sign changes of Re phi on y < y0
    double y0 = 0.0;       // imaginary turning point height (real E), else 0
};

// Profile phi(y) = psi(iy); for PT-symmetric states the global phase is fixed
// so Im phi(i y_ref) = 0 at y_ref = y0 - 1.
AxisProfile imaginary_axis_profile(const EigenfunctionEvaluator& ef, double y_from, double y_to);

struct LoeffelMartinResult {
    double lhs;      // hb^2 Im(conj(phi) phi')(y)
    double rhs;      // -Im E * int_y^inf |phi|^2
    double tail;     // fitted WKB tail beyond the truncation
    double rel_err;
};

LoeffelMartinResult loeffel_martin_check(const EigenfunctionEvaluator& ef, double y,
                                         double y_trunc = 12.0);

struct AxisWkbFit {
    cplx A, B;      // phi ~ q^{-1/4} (A e^{iS/hb} + B e^{-iS/hb}) on the upper axis
    cplx theta;     // (log A - log B)/(2i), anchor-dependent up to a real shift
    double residual;
};

// Least-squares fit of the oscillatory asymptotics on y in [y_a, y_b]
// (y_a must be above the turning height so q = V(iy) - E is oscillatory).
AxisWkbFit fit_axis_wkb(const EigenfunctionEvaluator& ef, double y_a, double y_b);

// Bounded window containing the node set: a lower-half box below the escape
// structure for PT (real-E) states, the branch half-plane box for complex
// levels.
Rect default_node_box(const ModelSpec& spec, cplx E);

// Locate and classify the zeros inside the default node box.
ZeroSet node_zero_set(const EigenfunctionEvaluator& ef, uint64_t seed = 0);

// Node-count labels for a converged eigenpair (Lemma-3.1-style counting:
// bounded lower region for PT states, branch half-plane for complex levels).
void attach_node_labels(EigenPair& pair, uint64_t seed = 0);

// Cone membership helpers (CRE cones in the AlphaHat frame).
bool in_cone_rho(cplx z_alpha, double band = 0.0);
bool in_cone_eta(cplx z_alpha, double band = 0.0);
cplx to_alpha_frame(const ModelSpec& spec, cplx z);

} // namespace bwlab

#endif
