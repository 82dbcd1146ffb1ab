#include "bwlab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bwlab {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200,
                 E6 = 22.0 / 525, E7 = -1.0 / 40;

struct Sys {
    const ModelSpec& spec;
    cplx E;
    cplx inv_h2; // 1 / hb_eff^2
    cplx dir;    // current segment unit direction

    // y = (psi, u), u = dpsi/dz;  d/ds psi = u * dir, d/ds u = dir * (V-E)/hb^2 * psi
    inline void rhs(cplx z, cplx psi, cplx u, cplx& dpsi, cplx& du) const {
        dpsi = u * dir;
        du = dir * inv_h2 * (spec.potential(z) - E) * psi;
    }
};

inline double cnorm(cplx a) { return std::abs(a); }

} // namespace

IntegrationResult integrate(const ModelSpec& spec, cplx E, const ComplexPath& path,
                            const WaveState& init, const IntegrateOptions& opts) {
    spec.validate();
    path.validate();
    if (!opts.fixed_step && (opts.rel_tol < 1e-15 || opts.rel_tol > 1e-5))
        throw Error(ErrorCode::Domain, "rel_tol out of range");
    if (init.psi == cplx(0.0) && init.dpsi == cplx(0.0))
        throw Error(ErrorCode::Domain, "zero initial state is invalid for a linear ODE");

    IntegrationResult res;
    cplx hb2 = spec.hbar_eff() * spec.hbar_eff();
    Sys sys{spec, E, 1.0 / hb2, cplx(1.0, 0.0)};

    cplx psi = init.psi, u = init.dpsi;
    double ls = init.log_scale;
    double total_len = path.length();
    double done_len = 0.0;
    double phase = 0.0;
    cplx prev_psi = psi;

    auto emit = [&](cplx z) {
        if (opts.dense)
            res.samples.push_back({total_len > 0 ? done_len / total_len : 0.0, z, psi, u, ls});
    };

    emit(path.vertices.front());

    for (size_t seg = 0; seg + 1 < path.vertices.size(); ++seg) {
        cplx a = path.vertices[seg], b = path.vertices[seg + 1];
        double seg_len = std::abs(b - a);
        sys.dir = (b - a) / seg_len;
        double s = 0.0;

        // initial step guess from the local wavenumber
        double kappa = std::sqrt(std::abs(sys.inv_h2 * (spec.potential(a) - E))) + 1e-12;
        double h = opts.fixed_step ? opts.fixed_h : std::min(0.05 / kappa, seg_len);
        if (opts.max_step > 0) h = std::min(h, opts.max_step);

        while (s < seg_len) {
            double remaining = seg_len - s;
            if (remaining < 1e-13 * (1.0 + std::abs(a) + s)) break; // segment done
            double h_try = std::min(h, remaining);
            if (opts.phase_track) {
                double rate = cnorm(u) / std::max(cnorm(psi), 1e-280) + 1e-12;
                h_try = std::min(h_try, 0.8 / rate);
            }
            if (h_try < 1e-14 * (1.0 + std::abs(a) + s)) {
                std::ostringstream os;
                cplx zlast = a + sys.dir * s;
                os << "step-size underflow at z = (" << zlast.real() << ", " << zlast.imag() << ")";
                throw Error(ErrorCode::Stiffness, os.str());
            }
            h = h_try;
            if (res.stats.accepted + res.stats.rejected > opts.max_steps)
                throw Error(ErrorCode::Accuracy, "integration exceeded the step budget");

            cplx z0 = a + sys.dir * s;
            cplx k1p, k1u, k2p, k2u, k3p, k3u, k4p, k4u, k5p, k5u, k6p, k6u, k7p, k7u;
            sys.rhs(z0, psi, u, k1p, k1u);
            sys.rhs(z0 + sys.dir * (h * A21), psi + h * (A21 * k1p), u + h * (A21 * k1u), k2p, k2u);
            sys.rhs(z0 + sys.dir * (h * 0.3), psi + h * (A31 * k1p + A32 * k2p), u + h * (A31 * k1u + A32 * k2u),
                    k3p, k3u);
            sys.rhs(z0 + sys.dir * (h * 0.8), psi + h * (A41 * k1p + A42 * k2p + A43 * k3p),
                    u + h * (A41 * k1u + A42 * k2u + A43 * k3u), k4p, k4u);
            sys.rhs(z0 + sys.dir * (h * 8.0 / 9.0),
                    psi + h * (A51 * k1p + A52 * k2p + A53 * k3p + A54 * k4p),
                    u + h * (A51 * k1u + A52 * k2u + A53 * k3u + A54 * k4u), k5p, k5u);
            sys.rhs(z0 + sys.dir * h, psi + h * (A61 * k1p + A62 * k2p + A63 * k3p + A64 * k4p + A65 * k5p),
                    u + h * (A61 * k1u + A62 * k2u + A63 * k3u + A64 * k4u + A65 * k5u), k6p, k6u);
            cplx psi5 = psi + h * (B1 * k1p + B3 * k3p + B4 * k4p + B5 * k5p + B6 * k6p);
            cplx u5 = u + h * (B1 * k1u + B3 * k3u + B4 * k4u + B5 * k5u + B6 * k6u);
            sys.rhs(z0 + sys.dir * h, psi5, u5, k7p, k7u);
            cplx errp = h * (E1 * k1p + E3 * k3p + E4 * k4p + E5 * k5p + E6 * k6p + E7 * k7p);
            cplx erru = h * (E1 * k1u + E3 * k3u + E4 * k4u + E5 * k5u + E6 * k6u + E7 * k7u);

            double sc_p = std::max(cnorm(psi), cnorm(psi5)) + 1e-280;
            double sc_u = std::max(cnorm(u), cnorm(u5)) + 1e-280;
            double err = std::max(cnorm(errp) / sc_p, cnorm(erru) / sc_u) / opts.rel_tol;

            bool accept = opts.fixed_step || err <= 1.0;
            if (accept && opts.phase_track) {
                double dth = std::arg(psi5 / psi);
                if (std::abs(dth) > 2.0 && !opts.fixed_step) {
                    accept = false;
                    err = std::max(err, 16.0);
                } else if (accept) {
                    phase += dth;
                }
            }
            if (accept) {
                psi = psi5;
                u = u5;
                s += h;
                res.stats.accepted++;
                double m = std::max(cnorm(psi), cnorm(u));
                if (m > 1e100) {
                    psi /= m;
                    u /= m;
                    prev_psi /= m;
                    ls += std::log(m);
                    res.stats.renormalizations++;
                }
                done_len += h;
                emit(a + sys.dir * s);
            } else {
                res.stats.rejected++;
            }
            if (!opts.fixed_step) {
                double fac = err > 0 ? 0.9 * std::pow(err, -0.2) : 5.0;
                fac = std::min(5.0, std::max(0.2, fac));
                h *= fac;
                if (opts.max_step > 0) h = std::min(h, opts.max_step);
            }
        }
    }

    res.state = {path.vertices.back(), psi, u, ls};
    res.phase = phase;
    return res;
}

std::vector<WaveState> integrate_at_fractions(const ModelSpec& spec, cplx E, const ComplexPath& path,
                                              const WaveState& init, const std::vector<double>& fractions,
                                              const IntegrateOptions& opts) {
    std::vector<WaveState> out;
    WaveState st = init;
    double prev = 0.0;
    for (double f : fractions) {
        if (f < prev || f > 1.0) throw Error(ErrorCode::Domain, "fractions must ascend within [0, 1]");
        if (f > prev) {
            cplx a = path.point_at(prev), b = path.point_at(f);
            std::vector<cplx> pts = {a};
            // keep intermediate vertices of the original path
            double len = path.length();
            double acc = 0.0;
            for (size_t i = 1; i + 1 < path.vertices.size(); ++i) {
                acc += std::abs(path.vertices[i] - path.vertices[i - 1]);
                double fv = acc / len;
                if (fv > prev && fv < f) pts.push_back(path.vertices[i]);
            }
            if (pts.back() != b) pts.push_back(b);
            if (pts.size() >= 2) st = integrate(spec, E, ComplexPath::segments(pts), st, opts).state;
        }
        out.push_back(st);
        prev = f;
    }
    return out;
}

std::string dense_csv(const std::vector<DenseSample>& samples) {
    std::ostringstream os;
    os << "arc_fraction,re_z,im_z,re_psi,im_psi,log_scale\n";
    os.precision(17);
    for (auto& s : samples)
        os << s.arc_fraction << "," << s.z.real() << "," << s.z.imag() << "," << s.psi.real() << ","
           << s.psi.imag() << "," << s.log_scale << "\n";
    return os.str();
}

std::vector<double> stokes_asymptote_directions(const ModelSpec& spec) {
    cplx a = spec.lead_coeff();
    int d = spec.degree();
    std::vector<double> out;
    for (int k = 0; k < d + 2; ++k) {
        double th = (kPi + 2.0 * kPi * k - std::arg(a)) / (d + 2);
        while (th > kPi) th -= 2.0 * kPi;
        while (th <= -kPi) th += 2.0 * kPi;
        out.push_back(th);
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool in_decaying_sector(const ModelSpec& spec, cplx dir, double margin) {
    double th = std::arg(dir);
    for (double s : stokes_asymptote_directions(spec)) {
        double d = std::abs(th - s);
        d = std::min(d, 2.0 * kPi - d);
        if (d < margin) return false;
    }
    return true;
}

WaveState recessive_init(const ModelSpec& spec, cplx E, const ComplexPath& ray, AsymptoticFrame* frame) {
    spec.validate();
    if (ray.kind != ComplexPath::Kind::Ray)
        throw Error(ErrorCode::Domain, "recessive_init expects a ray path");
    cplx anchor = ray.vertices.front();
    cplx dir = ray.ray_dir;
    if (std::abs(spec.potential(anchor)) < 30.0 * std::abs(E))
        throw Error(ErrorCode::Domain, "anchor too close in: need |V| >= 30 |E|");
    if (!in_decaying_sector(spec, dir))
        throw Error(ErrorCode::Domain, "ray direction is not inside a decaying sector");

    cplx q = spec.potential(anchor) - E;
    cplx p = std::sqrt(q);
    cplx hb = spec.hbar_eff();
    int sign = +1;
    // decay along +dir: d/ds log psi = -(p/hb) dir must have negative real part
    if ((p * dir / hb).real() < 0.0) {
        p = -p;
        sign = -1;
    }
    cplx dlog = -p / hb - spec.dpotential(anchor) / (4.0 * q);
    if (frame) {
        frame->energy = E;
        frame->anchor = anchor;
        frame->p0 = p;
        frame->prefactor = std::pow(p, cplx(-0.5));
        frame->branch_sign = sign;
    }
    return WaveState{anchor, cplx(1.0, 0.0), dlog, 0.0};
}

cplx action_asymptotic_w(cplx w, cplx E) {
    cplx w12 = std::sqrt(w);
    return 0.4 * w12 * w12 * w12 * w12 * w12 + w12 + E / w12;
}

} // namespace bwlab
