#ifndef BWLAB_ODE_HPP
#define BWLAB_ODE_HPP

#include <vector>

#include "bwlab/models.hpp"
#include "bwlab/path.hpp"

namespace bwlab {

// State of psi'' = hb^{-2} (V(z) - E) psi at a point. The stored (psi, dpsi)
// carry an exponential offset: the true values are psi * exp(log_scale).
struct WaveState {
    cplx z{0.0, 0.0};
    cplx psi{1.0, 0.0};
    cplx dpsi{0.0, 0.0}; // d psi / dz
    double log_scale = 0.0;
};

struct DenseSample {
    double arc_fraction;
    cplx z;
    cplx psi;
    cplx dpsi;
    double log_scale;
};

struct IntegrateOptions {
    double rel_tol = 1e-12;
    // 0 = automatic; otherwise hard cap on the arc-length step
    double max_step = 0.0;
    bool fixed_step = false;
    double fixed_h = 1e-3;
    // track the continuous argument of psi (for winding counts); steps are
    // capped so the phase advances by less than ~1 rad per step
    bool phase_track = false;
    bool dense = false;
    long max_steps = 100000000;
};

struct IntegrationStats {
    long accepted = 0;
    long rejected = 0;
    int renormalizations = 0;
};

struct IntegrationResult {
    WaveState state;
    double phase = 0.0; // accumulated arg(psi) along the path (phase_track)
    std::vector<DenseSample> samples;
    IntegrationStats stats;
};

// Adaptive Dormand-Prince 5(4) along the (piecewise linear) path. Linear in
// the initial data; overflow is absorbed into log_scale, never wrapped.
// Throws Error(Stiffness) on step-size underflow (message carries the last
// good position).
IntegrationResult integrate(const ModelSpec& spec, cplx E, const ComplexPath& path,
                            const WaveState& init, const IntegrateOptions& opts = {});

// States at the requested arc fractions (ascending, in [0, 1]); the path is
// split there so the values are exact integration endpoints.
std::vector<WaveState> integrate_at_fractions(const ModelSpec& spec, cplx E,
                                              const ComplexPath& path, const WaveState& init,
                                              const std::vector<double>& fractions,
                                              const IntegrateOptions& opts = {});

// CSV rows: arc_fraction, re z, im z, re psi, im psi, log_scale
std::string dense_csv(const std::vector<DenseSample>& samples);

// Asymptotic directions where Stokes lines may run to infinity, from the
// leading coefficient of V: theta_k = (pi + 2k pi - arg a)/(deg + 2).
std::vector<double> stokes_asymptote_directions(const ModelSpec& spec);

// True if the direction lies strictly inside a sector (bounded away from all
// Stokes asymptotes), so a recessive solution is well defined along it.
bool in_decaying_sector(const ModelSpec& spec, cplx dir, double margin = 0.03);

struct AsymptoticFrame {
    cplx energy;
    cplx anchor;
    cplx p0;        // branch-fixed sqrt(V(anchor) - E), Re(p0 dir / hb) > 0
    cplx prefactor; // p0^{-1/2}
    int branch_sign = +1;
};

// WKB-recessive data at the ray's anchor, normalized to |psi| = 1 there (the
// true exponential magnitude is bookkept by the caller's log_scale offsets).
// pre: |V(anchor)| >= 30 |E| and the ray direction is in a decaying sector.
WaveState recessive_init(const ModelSpec& spec, cplx E, const ComplexPath& ray,
                         AsymptoticFrame* frame = nullptr);

// Leading large-|w| antiderivative of sqrt(w^3 + w - E) (the rotated-frame
// action): (2/5) w^{5/2} + w^{1/2} + E w^{-1/2}.
cplx action_asymptotic_w(cplx w, cplx E);

} // namespace bwlab

#endif
