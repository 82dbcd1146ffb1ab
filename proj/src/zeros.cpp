#include "bwlab/zeros.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>

namespace bwlab {

namespace {

uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double hash01(uint64_t a, uint64_t b) {
    return double(splitmix(a ^ splitmix(b)) >> 11) / double(1ULL << 53);
}

double scale_of(cplx z) { return 1.0 + std::abs(z); }

} // namespace

const char* zero_class_name(ZeroClass c) {
    switch (c) {
        case ZeroClass::NodeLower: return "node-lower";
        case ZeroClass::NodeUpper: return "node-upper";
        case ZeroClass::ImaginaryNode: return "imaginary-node";
        case ZeroClass::EscapeZero: return "escape-zero";
        case ZeroClass::Unclassified: return "unclassified";
    }
    return "?";
}

bool in_cone_rho(cplx z, double band) {
    double x = z.real(), y = z.imag();
    return y < -band && std::abs(x) < -std::sqrt(3.0) * y - band;
}

bool in_cone_eta(cplx z, double band) {
    double x = z.real(), y = z.imag();
    return y > band && std::abs(x) < std::sqrt(3.0) * y - band;
}

cplx to_alpha_frame(const ModelSpec& spec, cplx z) {
    switch (spec.family) {
        case Family::Hbar:
        case Family::KDelta:
        case Family::AlphaHat:
        case Family::RealCubic:
            return z; // positive dilations leave the cones invariant
        case Family::BetaTilde: {
            if (std::abs(spec.beta) == 0.0) return z;
            cplx sb = pow_continued(spec.beta, 0.5, spec.beta_arg);
            cplx b110 = pow_continued(spec.beta, 0.1, spec.beta_arg);
            return b110 * (z - cplx(0.0, 1.0) / (3.0 * sb));
        }
    }
    return z;
}

int count_zeros_in_rectangle(const EigenfunctionEvaluator& ef, const Rect& rect, uint64_t seed) {
    Rect r = rect;
    const double d = r.diameter();
    bool tightened = false;
    const EigenfunctionEvaluator* use = &ef;
    std::unique_ptr<EigenfunctionEvaluator> tight;
    for (int attempt = 0; attempt < 7; ++attempt) {
        auto lr = use->loop_winding(r);
        double dev = std::abs(lr.winding - std::lround(lr.winding));
        if (lr.min_psi_dist > 1e-6 && dev <= 0.05 && lr.closure_err < 0.05)
            return static_cast<int>(std::lround(lr.winding));
        if (dev > 0.05 && !tightened && lr.min_psi_dist > 1e-6) {
            // non-integer contour value: tighten tolerance and retry once
            EigenfunctionEvaluator::Options o;
            o.rel_tol = 1e-13;
            tight = std::make_unique<EigenfunctionEvaluator>(use->model(), use->energy(), o);
            use = tight.get();
            tightened = true;
            continue;
        }
        // zero too close to the boundary: deterministic jitter
        double jx = 2e-5 * d * (1.0 + hash01(seed, 2 * attempt));
        double jy = 2e-5 * d * (1.0 + hash01(seed, 2 * attempt + 1));
        r.lo -= cplx(jx, jy);
        r.hi += cplx(0.5 * jx, 0.7 * jy);
    }
    throw Error(ErrorCode::Accuracy, "argument-principle count did not stabilize on an integer");
}

namespace {

std::optional<Zero> polish_zero(const EigenfunctionEvaluator& ef, cplx z0, const Rect& confine) {
    cplx z = z0;
    double cap = 0.6 * confine.diameter();
    for (int it = 0; it < 60; ++it) {
        auto v = ef.at(z);
        if (std::abs(v.dpsi) == 0.0) return std::nullopt;
        cplx step = v.psi / v.dpsi;
        if (std::abs(step) > cap) step *= cap / std::abs(step);
        z -= step;
        if (!confine.contains(z)) return std::nullopt;
        if (std::abs(step) < 1e-12 * scale_of(z)) break;
    }
    auto v = ef.at(z);
    if (std::abs(v.dpsi) == 0.0) return std::nullopt;
    double res = std::abs(v.psi / v.dpsi);
    if (res > 1e-8 * scale_of(z)) return std::nullopt;
    return Zero{z, ZeroClass::Unclassified, res};
}

void locate_rec(const EigenfunctionEvaluator& ef, Rect r, int count, int depth, uint64_t seed,
                std::vector<Zero>& out) {
    if (count <= 0) return;
    if (count == 1) {
        // polish inside a slightly padded cell; try a few deterministic starts
        Rect pad{r.lo - cplx(0.02 * r.width(), 0.02 * r.height()),
                 r.hi + cplx(0.02 * r.width(), 0.02 * r.height())};
        std::vector<cplx> starts = {r.center(),
                                    r.center() + cplx(0.2 * r.width(), 0.1 * r.height()),
                                    r.center() - cplx(0.2 * r.width(), 0.1 * r.height()),
                                    r.center() + cplx(-0.1 * r.width(), 0.2 * r.height()),
                                    r.center() + cplx(0.1 * r.width(), -0.2 * r.height())};
        for (cplx s0 : starts) {
            if (auto z = polish_zero(ef, s0, pad)) {
                out.push_back(*z);
                return;
            }
        }
        if (r.diameter() < 1e-9 * scale_of(r.center()))
            throw Error(ErrorCode::Accuracy, "zero polish failed in a collapsed cell");
        // fall through: halve the cell further to tame the Newton basin
    }
    if (depth >= 20)
        throw Error(ErrorCode::Accuracy, "zero subdivision exceeded its depth budget");
    bool split_x = r.width() >= r.height();
    for (int attempt = 0; attempt < 5; ++attempt) {
        double f = 0.5 + 0.08 * (hash01(seed, depth * 131 + attempt) - 0.5);
        Rect r1 = r, r2 = r;
        if (split_x) {
            double xm = r.lo.real() + f * r.width();
            r1.hi = cplx(xm, r.hi.imag());
            r2.lo = cplx(xm, r.lo.imag());
        } else {
            double ym = r.lo.imag() + f * r.height();
            r1.hi = cplx(r.hi.real(), ym);
            r2.lo = cplx(r.lo.real(), ym);
        }
        int c1, c2;
        try {
            c1 = count_zeros_in_rectangle(ef, r1, splitmix(seed + attempt));
            c2 = count_zeros_in_rectangle(ef, r2, splitmix(seed + attempt) ^ 5);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Accuracy) throw;
            continue;
        }
        if (c1 + c2 != count) continue;
        locate_rec(ef, r1, c1, depth + 1, splitmix(seed), out);
        locate_rec(ef, r2, c2, depth + 1, splitmix(seed) ^ 9, out);
        return;
    }
    throw Error(ErrorCode::Accuracy, "zero subdivision did not stabilize");
}

void dedupe_and_sort(std::vector<Zero>& zs) {
    std::sort(zs.begin(), zs.end(), [](const Zero& a, const Zero& b) {
        if (a.z.imag() != b.z.imag()) return a.z.imag() < b.z.imag();
        return a.z.real() < b.z.real();
    });
    std::vector<Zero> out;
    for (auto& z : zs) {
        bool dup = false;
        for (auto& o : out)
            if (std::abs(o.z - z.z) < 1e-7 * scale_of(z.z)) dup = true;
        if (!dup) out.push_back(z);
    }
    zs.swap(out);
}

} // namespace

ZeroSet locate_zeros(const EigenfunctionEvaluator& ef, const Rect& region, int expected, uint64_t seed) {
    if (expected < 0) throw Error(ErrorCode::Domain, "expected count must be >= 0");
    ZeroSet zs;
    zs.spec = ef.model();
    zs.E = ef.energy();
    zs.expected = expected;
    int count = count_zeros_in_rectangle(ef, region, seed);
    locate_rec(ef, region, count, 0, splitmix(seed ^ 0xabcdef), zs.zeros);
    dedupe_and_sort(zs.zeros);
    zs.count_mismatch = (static_cast<int>(zs.zeros.size()) != expected);
    classify_zeros(zs, ef);
    return zs;
}

ZeroSet locate_axis_zeros(const EigenfunctionEvaluator& ef, double y_from, double y_to) {
    ZeroSet zs;
    zs.spec = ef.model();
    zs.E = ef.energy();
    // Thin strip around the axis, as wide as the contamination budget allows:
    // crossing the strip costs ~ 2 p w / hb e-folds of amplification.
    double hb = std::abs(ef.model().hbar_eff());
    double p_top = std::abs(std::sqrt(ef.model().potential(cplx(0.0, y_to)) - ef.energy()));
    double w = std::clamp(9.0 * hb / std::max(p_top, 1e-6), 1e-3, 0.45);
    Rect strip{cplx(-w, y_from), cplx(w, y_to)};
    int count = count_zeros_in_rectangle(ef, strip, 1234);
    locate_rec(ef, strip, count, 0, splitmix(0x5eed), zs.zeros);
    dedupe_and_sort(zs.zeros);
    classify_zeros(zs, ef);
    return zs;
}

void classify_zeros(ZeroSet& zs, const EigenfunctionEvaluator& ef) {
    const ModelSpec& spec = zs.spec;
    cplx E = zs.E;
    bool real_level = std::abs(E.imag()) <= 1e-8 * (1.0 + std::abs(E));
    double y0 = 0.0;
    if (real_level) {
        try {
            auto tps = turning_points(spec, cplx(E.real(), 0.0));
            if (tps.has(TpLabel::I0)) y0 = tps.get(TpLabel::I0).z.imag();
        } catch (const Error&) {
        }
    }
    zs.count_rho = zs.count_eta = zs.count_left = zs.count_right = 0;
    for (auto& z : zs.zeros) {
        double s = scale_of(z.z);
        double band = 1e-8 * s;
        cplx za = to_alpha_frame(spec, z.z);
        if (z.z.real() < 0) zs.count_left++;
        if (z.z.real() > 0) zs.count_right++;
        if (in_cone_rho(za)) zs.count_rho++;
        if (in_cone_eta(za)) zs.count_eta++;

        if (real_level) {
            if (std::abs(z.z.real()) < band) {
                z.cls = (z.z.imag() < y0) ? ZeroClass::ImaginaryNode : ZeroClass::EscapeZero;
            } else if (in_cone_rho(za, band)) {
                z.cls = ZeroClass::NodeLower;
            } else if (in_cone_eta(za, band)) {
                z.cls = ZeroClass::EscapeZero;
            } else {
                z.cls = ZeroClass::Unclassified;
            }
        } else {
            // complex level: nodes sit in the branch half-plane (C^+ for the
            // plus branch, C^- for minus), everything else follows the escape
            // structure in the mirror half-plane
            bool plus = E.imag() < 0;
            bool node_side = plus ? (z.z.real() > band) : (z.z.real() < -band);
            if (node_side)
                z.cls = z.z.imag() < 0 ? ZeroClass::NodeLower : ZeroClass::NodeUpper;
            else if (std::abs(z.z.real()) <= band)
                z.cls = ZeroClass::Unclassified; // excluded by the imaginary-axis barrier
            else
                z.cls = ZeroClass::EscapeZero;
        }
    }
    (void)ef;
}

AxisProfile imaginary_axis_profile(const EigenfunctionEvaluator& ef, double y_from, double y_to) {
    AxisProfile ap;
    cplx E = ef.energy();
    bool real_level = std::abs(E.imag()) <= 1e-8 * (1.0 + std::abs(E));
    if (real_level) {
        auto tps = turning_points(ef.model(), cplx(E.real(), 0.0));
        if (tps.has(TpLabel::I0)) ap.y0 = tps.get(TpLabel::I0).z.imag();
    }
    auto samples = ef.axis_profile(y_from, y_to, 0.0);
    if (samples.empty()) return ap;

    ap.phase_rotation = cplx(1.0, 0.0);
    if (real_level) {
        double yref = ap.y0 - 1.0;
        auto v = ef.at(cplx(0.0, yref));
        double a = std::arg(v.psi);
        ap.phase_rotation = std::polar(1.0, -a);
    }
    double ls0 = samples.front().log_scale;
    ap.min_abs = 1e300;
    ap.sign_changes = 0;
    double prev_sign = 0.0;
    for (auto& s : samples) {
        ap.y.push_back(s.z.imag());
        ap.phi.push_back(s.psi * ap.phase_rotation);
        ap.log_scale.push_back(s.log_scale - ls0);
        // scale-free proximity to a zero: |phi| relative to |phi| + 0.1 |phi'|
        // (the profile spans hundreds of e-folds, so a global maximum is useless)
        double prox = std::abs(s.psi) / (std::abs(s.psi) + 0.1 * std::abs(s.dpsi) + 1e-300);
        ap.min_abs = std::min(ap.min_abs, prox);
        if (real_level && s.z.imag() < ap.y0) {
            double re = (s.psi * ap.phase_rotation).real();
            double sgn = re == 0.0 ? 0.0 : (re > 0 ? 1.0 : -1.0);
            if (prev_sign != 0.0 && sgn != 0.0 && sgn != prev_sign) ap.sign_changes++;
            if (sgn != 0.0) prev_sign = sgn;
        }
    }
    return ap;
}

LoeffelMartinResult loeffel_martin_check(const EigenfunctionEvaluator& ef, double y, double y_trunc) {
    const ModelSpec& spec = ef.model();
    cplx E = ef.energy();
    cplx hb = spec.hbar_eff();
    double hb2 = std::norm(hb); // real hb assumed for the identity
    auto samples = ef.axis_profile(y, y_trunc, 0.05);
    if (samples.size() < 8) throw Error(ErrorCode::Domain, "axis profile too short");

    double ls0 = samples.front().log_scale;
    auto mag2 = [&](const DenseSample& s) {
        return std::norm(s.psi) * std::exp(2.0 * (s.log_scale - ls0));
    };
    // trapezoid over the adaptive samples
    double integral = 0.0;
    for (size_t i = 1; i < samples.size(); ++i) {
        double dy = samples[i].z.imag() - samples[i - 1].z.imag();
        integral += 0.5 * dy * (mag2(samples[i]) + mag2(samples[i - 1]));
    }
    // WKB tail: |phi|^2 ~ |C|^2 cos^2 / |p0|, averaged cos^2 = 1/2
    double c2sum = 0.0;
    int c2n = 0;
    for (auto& s : samples) {
        double yy = s.z.imag();
        if (yy >= y_trunc - 2.0) {
            double p0 = std::abs(std::sqrt(spec.potential(s.z) - E));
            c2sum += 2.0 * mag2(s) * p0;
            c2n++;
        }
    }
    double C2 = c2n ? c2sum / c2n : 0.0;
    // int_Y^inf dy / (2 |p0(iy)|), log-spaced trapezoid to 1e6 + remainder
    double tail_int = 0.0;
    {
        int N = 2000;
        double a = std::log(y_trunc), b = std::log(1e6);
        double prev = 0.0;
        for (int i = 0; i <= N; ++i) {
            double t = a + (b - a) * i / N;
            double yy = std::exp(t);
            double f = yy / (2.0 * std::abs(std::sqrt(spec.potential(cplx(0.0, yy)) - E)));
            if (i > 0) tail_int += 0.5 * (f + prev) * (b - a) / N;
            prev = f;
        }
        tail_int += 1.0 / std::sqrt(1e6); // asymptotic remainder of 1/(2 y^{3/2})
    }
    double tail = C2 * tail_int;

    auto v = ef.at(cplx(0.0, y));
    // phi'(y) = i psi'(iy); rebase to the profile scale
    double reb = std::exp(2.0 * (v.log_scale - ls0));
    cplx phi = v.psi;
    cplx dphi = cplx(0.0, 1.0) * v.dpsi;
    double lhs = hb2 * std::imag(std::conj(phi) * dphi) * reb;
    double rhs = -E.imag() * (integral + tail);
    double rel = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    return {lhs, rhs, tail, rel};
}

AxisWkbFit fit_axis_wkb(const EigenfunctionEvaluator& ef, double y_a, double y_b) {
    const ModelSpec& spec = ef.model();
    cplx E = ef.energy();
    cplx hb = spec.hbar_eff();
    auto samples = ef.axis_profile(y_a, y_b, 0.02);
    if (samples.size() < 16) throw Error(ErrorCode::Domain, "fit window too short");

    // S(y) = int sqrt(V(iy) - E) dy from y_a, trapezoid on the sample grid
    std::vector<cplx> S(samples.size(), 0.0);
    std::vector<cplx> q(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) q[i] = std::sqrt(spec.potential(samples[i].z) - E);
    for (size_t i = 1; i < samples.size(); ++i) {
        double dy = samples[i].z.imag() - samples[i - 1].z.imag();
        S[i] = S[i - 1] + 0.5 * dy * (q[i] + q[i - 1]);
    }
    // least squares for phi * q^{1/2} = A e^{iS/hb} + B e^{-iS/hb}
    double ls0 = samples.front().log_scale;
    cplx a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
        cplx g = samples[i].psi * std::exp(samples[i].log_scale - ls0) * std::sqrt(q[i]);
        cplx e1 = std::exp(cplx(0.0, 1.0) * S[i] / hb);
        cplx e2 = std::exp(-cplx(0.0, 1.0) * S[i] / hb);
        a11 += std::norm(e1);
        a22 += std::norm(e2);
        a12 += std::conj(e1) * e2;
        b1 += std::conj(e1) * g;
        b2 += std::conj(e2) * g;
    }
    cplx det = a11 * a22 - a12 * std::conj(a12);
    AxisWkbFit fit;
    fit.A = (b1 * a22 - a12 * b2) / det;
    fit.B = (a11 * b2 - std::conj(a12) * b1) / det;
    fit.theta = (std::log(fit.A) - std::log(fit.B)) / cplx(0.0, 2.0);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        cplx g = samples[i].psi * std::exp(samples[i].log_scale - ls0) * std::sqrt(q[i]);
        cplx model = fit.A * std::exp(cplx(0.0, 1.0) * S[i] / hb) + fit.B * std::exp(-cplx(0.0, 1.0) * S[i] / hb);
        num += std::norm(g - model);
        den += std::norm(g);
    }
    fit.residual = std::sqrt(num / den);
    return fit;
}

namespace {

// Largest swing of the WKB exponent 2 Re int sqrt(V-E) dz / hb accumulated
// along the box boundary: the ratio of the two ODE solutions varies by
// e^{swing} around the loop, and past ~15 e-folds the seeded admixture of
// the locally-dominant solution corrupts winding counts.
double boundary_swing(const ModelSpec& spec, cplx E, const Rect& box) {
    double hb = std::abs(spec.hbar_eff());
    std::vector<cplx> pts;
    const int per_edge = 12;
    std::vector<cplx> corners = {box.lo, cplx(box.hi.real(), box.lo.imag()), box.hi,
                                 cplx(box.lo.real(), box.hi.imag()), box.lo};
    for (int e = 0; e < 4; ++e)
        for (int i = 0; i < per_edge; ++i)
            pts.push_back(corners[e] + (corners[e + 1] - corners[e]) * (double(i) / per_edge));
    pts.push_back(pts.front());

    double s = 0.0, s_min = 0.0, s_max = 0.0;
    cplx f_prev = std::sqrt(spec.potential(pts[0]) - E);
    for (size_t i = 1; i < pts.size(); ++i) {
        cplx mid = 0.5 * (pts[i - 1] + pts[i]);
        cplx fm = std::sqrt(spec.potential(mid) - E);
        if (std::abs(fm - f_prev) > std::abs(fm + f_prev)) fm = -fm;
        cplx fe = std::sqrt(spec.potential(pts[i]) - E);
        if (std::abs(fe - fm) > std::abs(fe + fm)) fe = -fe;
        cplx ds = (pts[i] - pts[i - 1]) / 6.0 * (f_prev + 4.0 * fm + fe);
        s += 2.0 * ds.real() / hb;
        s_min = std::min(s_min, s);
        s_max = std::max(s_max, s);
        f_prev = fe;
    }
    return s_max - s_min;
}

Rect shrink_to_budget(const ModelSpec& spec, cplx E, const TurningPointSet& tps, Rect box,
                      cplx keep_center, double budget = 15.0) {
    (void)tps;
    for (int it = 0; it < 60; ++it) {
        if (boundary_swing(spec, E, box) <= budget) break;
        box.lo = keep_center + 0.9 * (box.lo - keep_center);
        box.hi = keep_center + 0.9 * (box.hi - keep_center);
    }
    return box;
}

} // namespace

Rect default_node_box(const ModelSpec& spec, cplx E) {
    bool real_level = std::abs(E.imag()) <= 1e-8 * (1.0 + std::abs(E));
    auto tps = turning_points(spec, E);

    if (real_level) {
        double re_min = 1e300, re_max = -1e300, im_min = 1e300;
        for (auto& t : tps.roots) {
            re_min = std::min(re_min, t.z.real());
            re_max = std::max(re_max, t.z.real());
            im_min = std::min(im_min, t.z.imag());
        }
        double y0 = tps.has(TpLabel::I0) ? tps.get(TpLabel::I0).z.imag() : 0.3;
        double hb = std::abs(spec.hbar_eff());
        double pad = 1.2 + 0.5 * std::pow(hb, 2.0 / 3.0);
        Rect box{cplx(re_min - pad, im_min - pad - std::pow(hb, 2.0 / 3.0)),
                 cplx(re_max + pad, 0.6 * y0)};
        // shrink about a point below the real axis so the node region is kept
        cplx center(0.0, std::min(-0.3, im_min));
        Rect shrunk = shrink_to_budget(spec, E, tps, box, center);
        shrunk.hi = cplx(shrunk.hi.real(), box.hi.imag()); // keep the top edge below y0
        return shrunk;
    }

    // complex level: the nodes cluster around the split turning pair on the
    // branch side; the mirror half-plane holds only escape zeros
    bool plus = E.imag() < 0;
    std::vector<cplx> zs;
    for (auto& t : tps.roots) zs.push_back(t.z);
    // the two mutually closest turning points form the cluster
    cplx a = zs[0], b = zs[1];
    double dmin = 1e300;
    for (size_t i = 0; i < zs.size(); ++i)
        for (size_t j = i + 1; j < zs.size(); ++j)
            if (std::abs(zs[i] - zs[j]) < dmin) {
                dmin = std::abs(zs[i] - zs[j]);
                a = zs[i];
                b = zs[j];
            }
    cplx c = 0.5 * (a + b);
    double w = std::max(0.45, 1.8 * dmin);
    Rect box{c - cplx(w, w), c + cplx(w, w)};
    box = shrink_to_budget(spec, E, tps, box, c);
    // stay inside the branch half-plane (the imaginary-axis barrier)
    double inner = 0.03;
    if (plus && box.lo.real() < inner) box.lo = cplx(inner, box.lo.imag());
    if (!plus && box.hi.real() > -inner) box.hi = cplx(-inner, box.hi.imag());
    return box;
}

ZeroSet node_zero_set(const EigenfunctionEvaluator& ef, uint64_t seed) {
    Rect box = default_node_box(ef.model(), ef.energy());
    int count = count_zeros_in_rectangle(ef, box, seed);
    return locate_zeros(ef, box, count, seed);
}

void attach_node_labels(EigenPair& pair, uint64_t seed) {
    EigenfunctionEvaluator ef(pair.spec, pair.E);
    ZeroSet zs = node_zero_set(ef, seed);
    pair.label = static_cast<int>(zs.zeros.size());
    pair.label_scheme = LabelScheme::NodeCount;
    pair.nodes_lower = pair.nodes_upper = pair.nodes_imag = 0;
    for (auto& z : zs.zeros) {
        switch (z.cls) {
            case ZeroClass::NodeLower: pair.nodes_lower++; break;
            case ZeroClass::NodeUpper: pair.nodes_upper++; break;
            case ZeroClass::ImaginaryNode: pair.nodes_imag++; break;
            default: break;
        }
    }
}

std::string ZeroSet::to_csv() const {
    std::ostringstream os;
    os << "re,im,class,residual\n";
    os.precision(17);
    for (auto& z : zeros)
        os << z.z.real() << "," << z.z.imag() << "," << zero_class_name(z.cls) << "," << z.residual << "\n";
    return os.str();
}

} // namespace bwlab
