#include "bwlab/semiclassics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bwlab {

using nlohmann::json;

namespace {

cplx aligned_sqrt(cplx q, cplx prev) {
    cplx f = std::sqrt(q);
    if (std::abs(f - prev) > std::abs(f + prev)) return -f;
    return f;
}

struct Tracer {
    const ModelSpec& spec;
    cplx E;

    cplx field(cplx z, cplx prev) const {
        cplx q = spec.potential(z) - E;
        cplx e = std::polar(1.0, (kPi - std::arg(q)) / 2.0);
        if ((e * std::conj(prev)).real() < 0) e = -e;
        return e;
    }

    // advances (z, action) with action' = sqrt(V-E) * z', branch-aligned
    cplx rk4(cplx z, cplx& d, double h, cplx& action, cplx& f_ref) const {
        auto g = [&](cplx zz, cplx dd) { return aligned_sqrt(spec.potential(zz) - E, f_ref) * dd; };
        cplx k1 = field(z, d);
        cplx g1 = g(z, k1);
        cplx k2 = field(z + 0.5 * h * k1, k1);
        cplx g2 = g(z + 0.5 * h * k1, k2);
        cplx k3 = field(z + 0.5 * h * k2, k2);
        cplx g3 = g(z + 0.5 * h * k2, k3);
        cplx k4 = field(z + h * k3, k3);
        cplx g4 = g(z + h * k3, k4);
        d = k4;
        action += h * (g1 + 2.0 * g2 + 2.0 * g3 + g4) / 6.0;
        f_ref = g4 / k4;
        return z + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }
};

int nearest_sector(const std::vector<double>& sectors, double angle) {
    int best = 0;
    double bd = 1e300;
    for (size_t i = 0; i < sectors.size(); ++i) {
        double d = std::abs(angle - sectors[i]);
        d = std::min(d, 2.0 * kPi - d);
        if (d < bd) {
            bd = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

struct TraceResult {
    StokesLine line;
};

StokesLine trace_one(const ModelSpec& spec, cplx E, const TurningPointSet& tps, int src, int dir_index,
                     double theta, const StokesTraceOptions& opts, const std::vector<double>& sectors,
                     double r_max) {
    Tracer tr{spec, E};
    StokesLine line;
    line.source_tp = src;
    line.dir_index = dir_index;

    const cplx z0 = tps.roots[src].z;
    // start on the local line: offset small against the curvature length
    cplx g = spec.dpotential(z0);
    double eps_fd = 1e-3 * (1.0 + std::abs(z0));
    cplx vpp = (spec.potential(z0 + eps_fd) - 2.0 * spec.potential(z0) + spec.potential(z0 - eps_fd)) /
               (eps_fd * eps_fd);
    double ell = std::abs(vpp) > 0 ? std::abs(g) / std::abs(vpp) : 1.0;
    double r0 = 1e-6 * std::clamp(ell, 0.05, 3.0);
    if (std::abs(g) == 0.0) r0 = 1e-5; // multiple turning point: offset off the degenerate center
    cplx z = z0 + std::polar(r0, theta);
    cplx d = std::polar(1.0, theta);

    line.points.push_back(z0);
    line.points.push_back(z);

    cplx f_ref = std::sqrt(spec.potential(z) - E);
    cplx action = 0.0;
    double drift = 0.0;

    double s = 0.0;
    double h = 1e-4;
    long guard = 0;
    while (s < opts.max_arc) {
        if (++guard > 4000000) throw Error(ErrorCode::Accuracy, "stokes trace exceeded step budget");
        // slow down near turning points
        double dmin = 1e300;
        for (auto& t : tps.roots) dmin = std::min(dmin, std::abs(z - t.z));
        double hcap = std::max(0.25 * dmin, 4.0 * opts.capture_radius);
        hcap = std::min(hcap, 0.05 * (1.0 + std::abs(z) / 4.0));
        h = std::min(h, hcap);

        cplx d1 = d, dh = d;
        cplx a_full = action, a_half = action;
        cplx f1 = f_ref, f2 = f_ref;
        cplx z_full = tr.rk4(z, d1, h, a_full, f1);
        cplx z_half = tr.rk4(z, dh, 0.5 * h, a_half, f2);
        cplx z_half2 = tr.rk4(z_half, dh, 0.5 * h, a_half, f2);
        double err = std::abs(z_full - z_half2);
        if (err > std::max(opts.rel_tol * (1.0 + std::abs(z)), 1e-15)) {
            h *= 0.5;
            if (h < 1e-13 * (1.0 + std::abs(z)))
                throw Error(ErrorCode::Stiffness, "stokes trace step underflow");
            continue;
        }
        action = a_half;
        f_ref = f2;
        drift = std::max(drift, std::abs(action.real()));

        z = z_half2;
        d = dh;
        s += h;
        line.points.push_back(z);
        h = std::min(h * 1.4, 0.08 * (1.0 + std::abs(z) / 4.0));

        for (size_t j = 0; j < tps.roots.size(); ++j) {
            if (static_cast<int>(j) == src && s < 20.0 * opts.capture_radius + 10.0 * r0) continue;
            if (std::abs(z - tps.roots[j].z) < opts.capture_radius) {
                line.points.push_back(tps.roots[j].z);
                line.terminus = StokesLine::Terminus::HitsTurningPoint;
                line.terminus_tp = static_cast<int>(j);
                line.arc_length = s;
                line.action_drift = drift;
                return line;
            }
        }
        if (std::abs(z) > r_max) {
            line.terminus = StokesLine::Terminus::InfinitySector;
            line.terminus_sector = nearest_sector(sectors, std::arg(z));
            line.arc_length = s;
            line.action_drift = drift;
            return line;
        }
    }
    line.terminus = StokesLine::Terminus::Truncated;
    line.arc_length = s;
    line.action_drift = drift;
    return line;
}

} // namespace

StokesDiagram trace_stokes_lines(const ModelSpec& spec, cplx E, const StokesTraceOptions& opts) {
    spec.validate();
    StokesDiagram dg;
    dg.spec = spec;
    dg.E = E;
    dg.tps = turning_points(spec, E);
    dg.sectors = stokes_asymptote_directions(spec);

    double max_tp = 0.0;
    for (auto& t : dg.tps.roots) max_tp = std::max(max_tp, std::abs(t.z));
    double r_max = opts.r_max > 0 ? opts.r_max
                                  : std::max({12.0, 2.5 * std::cbrt(std::abs(E) + 1.0), 2.0 * max_tp + 5.0});
    if (opts.min_trace_height > 0) r_max = std::max(r_max, opts.min_trace_height + 2.0);

    for (size_t i = 0; i < dg.tps.roots.size(); ++i) {
        const auto& tp = dg.tps.roots[i];
        int m = tp.multiplicity;
        int ndir = m + 2;
        // V - E ~ g_m delta^m: directions where arg(g_m) + (m+2) arg(delta) = pi
        cplx gm;
        if (m == 1) {
            gm = spec.dpotential(tp.z);
        } else {
            double eps = 1e-4 * (1.0 + std::abs(tp.z));
            gm = (spec.potential(tp.z + eps) - 2.0 * spec.potential(tp.z) + spec.potential(tp.z - eps)) /
                 (eps * eps * 2.0);
        }
        for (int k = 0; k < ndir; ++k) {
            double theta = (kPi - std::arg(gm) + 2.0 * kPi * k) / ndir;
            dg.lines.push_back(trace_one(spec, E, dg.tps, static_cast<int>(i), k, theta, opts, dg.sectors, r_max));
        }
    }

    // classify rho and eta
    int i0 = -1, im = -1, ip = -1;
    for (size_t i = 0; i < dg.tps.roots.size(); ++i) {
        for (auto l : dg.tps.roots[i].labels) {
            if (l == TpLabel::I0) i0 = static_cast<int>(i);
            if (l == TpLabel::Iminus) im = static_cast<int>(i);
            if (l == TpLabel::Iplus) ip = static_cast<int>(i);
        }
    }
    std::ostringstream topo;
    if (im >= 0 && ip >= 0 && im == ip) {
        dg.rho = std::vector<cplx>{dg.tps.roots[im].z};
        topo << "rho:point(I-=I+)";
    } else {
        for (auto& l : dg.lines) {
            if (l.terminus != StokesLine::Terminus::HitsTurningPoint) continue;
            bool pair_mp = (l.source_tp == im && l.terminus_tp == ip) || (l.source_tp == ip && l.terminus_tp == im);
            if (pair_mp) {
                dg.rho = l.points;
                break;
            }
        }
        topo << (dg.rho ? "rho:connected(I-,I+)" : "rho:broken");
    }
    // escape line: asymptotic to the sector containing +pi/2, preferring I0
    int sec90 = nearest_sector(dg.sectors, kPi / 2.0);
    const StokesLine* eta = nullptr;
    for (auto& l : dg.lines) {
        if (l.terminus == StokesLine::Terminus::InfinitySector && l.terminus_sector == sec90) {
            if (l.source_tp == i0) {
                eta = &l;
                break;
            }
            if (!eta) eta = &l;
        }
    }
    if (eta) {
        dg.eta = eta->points;
        topo << ";eta:tp" << eta->source_tp << "->sector90";
    } else {
        topo << ";eta:none";
    }
    for (auto& l : dg.lines) {
        if (l.terminus == StokesLine::Terminus::HitsTurningPoint)
            topo << ";link(" << l.source_tp << "," << l.terminus_tp << ")";
    }
    dg.topology = topo.str();
    return dg;
}

std::string StokesDiagram::to_csv() const {
    std::ostringstream os;
    os << "line_id,re,im\n";
    os.precision(17);
    for (size_t i = 0; i < lines.size(); ++i)
        for (auto& p : lines[i].points) os << i << "," << p.real() << "," << p.imag() << "\n";
    return os.str();
}

std::string StokesDiagram::topology_json() const {
    json j;
    j["energy"] = {E.real(), E.imag()};
    j["topology"] = topology;
    j["degenerate"] = tps.degenerate;
    json tp = json::array();
    for (auto& t : tps.roots) {
        json e;
        e["re"] = t.z.real();
        e["im"] = t.z.imag();
        e["multiplicity"] = t.multiplicity;
        std::string lab;
        for (auto l : t.labels)
            lab += (l == TpLabel::I0 ? "I0" : l == TpLabel::Iminus ? "I-" : "I+");
        e["label"] = lab;
        tp.push_back(e);
    }
    j["turning_points"] = tp;
    json ls = json::array();
    for (auto& l : lines) {
        json e;
        e["source"] = l.source_tp;
        e["dir"] = l.dir_index;
        e["terminus"] = l.terminus == StokesLine::Terminus::InfinitySector
                            ? "infinity"
                            : (l.terminus == StokesLine::Terminus::HitsTurningPoint ? "turning-point" : "truncated");
        e["sector"] = l.terminus_sector;
        e["hits"] = l.terminus_tp;
        e["action_drift"] = l.action_drift;
        e["arc_length"] = l.arc_length;
        ls.push_back(e);
    }
    j["lines"] = ls;
    j["rho_connected"] = bool(rho);
    j["eta_present"] = bool(eta);
    return j.dump(2);
}

EscapeFit escape_line_asymptote(const ModelSpec& spec, cplx E) {
    StokesTraceOptions o;
    o.max_arc = 60.0;
    o.min_trace_height = 21.0;
    StokesDiagram dg = trace_stokes_lines(spec, E, o);
    if (!dg.eta) throw Error(ErrorCode::Domain, "no escape line traced");
    EscapeFit fit;
    fit.y_min = 10.0;
    fit.y_max = 20.0;
    double sum = 0.0, maxdev = 0.0;
    int n = 0;
    std::vector<double> vals;
    for (auto& p : *dg.eta) {
        double y = p.imag();
        if (y >= fit.y_min && y <= fit.y_max) {
            vals.push_back(p.real() * (y * y + 0.5));
        }
    }
    if (vals.size() < 10) throw Error(ErrorCode::Domain, "escape line did not reach the fit window");
    for (double v : vals) {
        sum += v;
        n++;
    }
    fit.fitted_c = sum / n;
    for (double v : vals) maxdev = std::max(maxdev, std::abs(v - fit.fitted_c));
    fit.residual = maxdev;
    return fit;
}

namespace {

struct Indicator {
    bool connected = false;
    double gap = std::numeric_limits<double>::quiet_NaN(); // y0 - y_cross when crossing exists
};

Indicator topology_indicator(const ModelSpec& spec, double E) {
    auto tps = turning_points(spec, cplx(E, 0.0));
    if (!tps.has(TpLabel::Iplus) || !tps.has(TpLabel::Iminus) || tps.degenerate) {
        return {false, std::numeric_limits<double>::quiet_NaN()};
    }
    int ipi = -1, imi = -1, i0i = -1;
    for (size_t i = 0; i < tps.roots.size(); ++i)
        for (auto l : tps.roots[i].labels) {
            if (l == TpLabel::Iplus) ipi = static_cast<int>(i);
            if (l == TpLabel::Iminus) imi = static_cast<int>(i);
            if (l == TpLabel::I0) i0i = static_cast<int>(i);
        }
    if (ipi == imi) return {false, std::numeric_limits<double>::quiet_NaN()};
    double y0 = i0i >= 0 ? tps.roots[i0i].z.imag() : 0.0;

    StokesTraceOptions o;
    o.capture_radius = 1e-6;
    o.max_arc = 30.0;
    o.rel_tol = 1e-12;
    double max_tp = 0.0;
    for (auto& t : tps.roots) max_tp = std::max(max_tp, std::abs(t.z));
    double r_max = std::max({12.0, 2.0 * max_tp + 5.0});
    auto sectors = stokes_asymptote_directions(spec);

    const cplx zp = tps.roots[ipi].z;
    cplx g = spec.dpotential(zp);
    Indicator best;
    for (int k = 0; k < 3; ++k) {
        double theta = (kPi - std::arg(g) + 2.0 * kPi * k) / 3.0;
        StokesLine l = trace_one(spec, cplx(E, 0.0), tps, ipi, k, theta, o, sectors, r_max);
        if (l.terminus == StokesLine::Terminus::HitsTurningPoint && l.terminus_tp == imi) {
            best.connected = true;
            // crossing height of Re z = 0 (complex families)
            for (size_t i = 1; i < l.points.size(); ++i) {
                if ((l.points[i - 1].real() >= 0) != (l.points[i].real() >= 0)) {
                    double yc = 0.5 * (l.points[i - 1].imag() + l.points[i].imag());
                    best.gap = y0 - yc;
                    break;
                }
            }
            return best;
        }
    }
    return best;
}

} // namespace

CriticalEnergy critical_energy(const ModelSpec& spec, double window_lo, double window_hi, double tol) {
    spec.validate();
    if (!(spec.family == Family::Hbar || spec.family == Family::KDelta || spec.family == Family::RealCubic ||
          spec.family == Family::AlphaHat))
        throw Error(ErrorCode::Config, "critical energy needs a cubic family with real energies");

    // coarse scan for all indicator flips (the instability is supposed unique;
    // we verify rather than assume)
    const int NXS = 32;
    std::vector<char> conn(NXS + 1);
    std::vector<double> xs(NXS + 1);
    for (int i = 0; i <= NXS; ++i) {
        xs[i] = window_lo + (window_hi - window_lo) * i / NXS;
        conn[i] = topology_indicator(spec, xs[i]).connected ? 1 : 0;
    }
    CriticalEnergy out;
    std::vector<std::pair<double, double>> brackets;
    for (int i = 0; i < NXS; ++i)
        if (conn[i] != conn[i + 1]) brackets.push_back({xs[i], xs[i + 1]});
    if (brackets.empty())
        throw Error(ErrorCode::NotFound, "no topology change in the search window");

    for (auto& [blo, bhi] : brackets) {
        double lo = blo, hi = bhi;
        bool lo_conn = topology_indicator(spec, lo).connected;
        while (hi - lo > tol) {
            double mid = 0.5 * (lo + hi);
            if (topology_indicator(spec, mid).connected == lo_conn)
                lo = mid;
            else
                hi = mid;
        }
        out.flips.push_back(0.5 * (lo + hi));
        if (out.flips.size() == 1) {
            out.bracket_lo = lo;
            out.bracket_hi = hi;
        }
    }
    // refine the first flip by the gap between the connection's axis crossing
    // and I0 (linear in E through the instability)
    double ec = out.flips.front();
    double lo = out.bracket_lo, hi = out.bracket_hi;
    auto gap_at = [&](double Eq) {
        Indicator ind = topology_indicator(spec, Eq);
        return ind;
    };
    // find the connected side
    double e1 = std::numeric_limits<double>::quiet_NaN(), g1 = e1, e2 = e1, g2 = e1;
    for (double probe : {hi, hi + 4 * tol, hi + 16 * tol, lo, lo - 4 * tol, lo - 16 * tol}) {
        Indicator ind = gap_at(probe);
        if (ind.connected && std::isfinite(ind.gap)) {
            if (!std::isfinite(e1)) {
                e1 = probe;
                g1 = ind.gap;
            } else if (probe != e1) {
                e2 = probe;
                g2 = ind.gap;
                break;
            }
        }
    }
    if (std::isfinite(e1) && std::isfinite(e2) && g1 != g2) {
        double root = e1 - g1 * (e2 - e1) / (g2 - g1);
        if (root > lo - 4 * tol && root < hi + 4 * tol) ec = root;
    }
    out.value = ec;
    return out;
}

const char* contour_tag_name(ContourTag t) {
    switch (t) {
        case ContourTag::GammaPlus: return "gamma-plus";
        case ContourTag::GammaMinus: return "gamma-minus";
        case ContourTag::GammaM: return "Gamma-m";
    }
    return "?";
}

namespace {

struct Quadrature {
    cplx J;
    cplx dJdE;
    double err;
};

// branch-tracked trapezoid of sqrt(V-E) on an ellipse around two points,
// keeping the listed excluded points strictly outside
Quadrature pair_quadrature(const ModelSpec& spec, cplx E, cplx t1, cplx t2,
                           const std::vector<cplx>& exclude, double clearance = 0.3,
                           double flatten = 0.55) {
    cplx c = 0.5 * (t1 + t2);
    cplx u = 0.5 * (t2 - t1);
    double au = std::abs(u);
    cplx eu = au > 0 ? u / au : cplx(1.0, 0.0);
    cplx ev = cplx(0.0, 1.0) * eu;
    double a = au + clearance;
    double b = flatten * a;

    auto ell_coord = [&](cplx w) {
        cplx d = w - c;
        double xu = (d * std::conj(eu)).real();
        double xv = (d * std::conj(ev)).real();
        return std::sqrt(sq(xu / a) + sq(xv / b));
    };
    for (int shrink = 0; shrink < 30; ++shrink) {
        bool ok = true;
        for (auto& w : exclude)
            if (ell_coord(w) < 1.15) ok = false;
        if (ok) break;
        b *= 0.85;
        if (b < 0.05 * a) {
            a = au + std::max(0.12, clearance * 0.5);
            b = flatten * a * 0.3;
            for (auto& w : exclude)
                if (ell_coord(w) < 1.1)
                    throw Error(ErrorCode::Geometry, "cannot separate contour from the excluded turning point");
            break;
        }
    }

    auto eval = [&](int N, Quadrature& q) {
        cplx J = 0.0, D = 0.0;
        cplx fprev;
        cplx f0;
        for (int i = 0; i < N; ++i) {
            double t = 2.0 * kPi * i / N;
            cplx z = c + a * std::cos(t) * eu + b * std::sin(t) * ev;
            cplx dz = -a * std::sin(t) * eu + b * std::cos(t) * ev;
            cplx f = std::sqrt(spec.potential(z) - E);
            if (i == 0) {
                f0 = f;
                fprev = f;
            } else {
                if (std::abs(f - fprev) > std::abs(f + fprev)) f = -f;
                fprev = f;
            }
            J += f * dz;
            D += dz / f;
        }
        // closure
        {
            cplx f = std::sqrt(spec.potential(c + a * eu) - E);
            if (std::abs(f - fprev) > std::abs(f + fprev)) f = -f;
            if (std::abs(f - f0) > std::abs(f + f0))
                throw Error(ErrorCode::Geometry, "sqrt branch fails to close around the contour");
        }
        q.J = J / cplx(0.0, double(N));
        q.dJdE = -0.5 * D / cplx(0.0, double(N));
    };

    Quadrature q1, q2;
    int N = 256;
    eval(N, q1);
    for (; N <= (1 << 15); N *= 2) {
        eval(2 * N, q2);
        double d = std::abs(q2.J - q1.J);
        if (d < std::max(1e-13, 1e-12 * std::abs(q2.J))) {
            q2.err = d;
            break;
        }
        q1 = q2;
        q2.err = d;
    }
    if (q2.J.real() < 0) {
        q2.J = -q2.J;
        q2.dJdE = -q2.dJdE;
    }
    return q2;
}

struct PairPick {
    cplx t1, t2;
    std::vector<cplx> exclude;
};

PairPick pick_pair(const ModelSpec& spec, cplx E, ContourTag tag) {
    auto tps = turning_points(spec, E);
    if (tps.degenerate)
        throw Error(ErrorCode::Geometry, "turning-point collision energy: contour pair undefined");
    std::vector<cplx> zs;
    for (auto& t : tps.roots) zs.push_back(t.z);
    if (zs.size() == 2) return {zs[0], zs[1], {}};
    std::sort(zs.begin(), zs.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
    if (tag == ContourTag::GammaPlus) return {zs[1], zs[2], {zs[0]}};
    if (tag == ContourTag::GammaMinus) return {zs[0], zs[1], {zs[2]}};
    throw Error(ErrorCode::Geometry, "GammaM is assembled from the two halves");
}

} // namespace

ActionValue action_integral(const ModelSpec& spec, cplx E, double hbar, ContourTag tag) {
    spec.validate();
    ActionValue av;
    av.E = E;
    av.hbar = hbar;
    av.tag = tag;
    av.method = ActionMethod::WkbQuadrature;

    auto tps = turning_points(spec, E);
    bool two_roots = tps.roots.size() == 2 && tps.roots[0].multiplicity == 1;
    if (tag == ContourTag::GammaM && !two_roots) {
        PairPick p = pick_pair(spec, E, ContourTag::GammaPlus);
        PairPick m = pick_pair(spec, E, ContourTag::GammaMinus);
        Quadrature qp = pair_quadrature(spec, E, p.t1, p.t2, p.exclude);
        Quadrature qm = pair_quadrature(spec, E, m.t1, m.t2, m.exclude);
        av.J = qp.J + qm.J;
        av.err_estimate = qp.err + qm.err;
        return av;
    }
    PairPick pick = two_roots ? PairPick{tps.roots[0].z, tps.roots[1].z, {}} : pick_pair(spec, E, tag);
    Quadrature q = pair_quadrature(spec, E, pick.t1, pick.t2, pick.exclude);
    av.J = q.J;
    av.err_estimate = q.err;
    return av;
}

ActionValue action_integral_direct_gamma(const ModelSpec& spec, cplx E, double hbar) {
    spec.validate();
    auto tps = turning_points(spec, E);
    if (!tps.has(TpLabel::Iminus) || !tps.has(TpLabel::Iplus) || tps.degenerate)
        throw Error(ErrorCode::Geometry, "direct Gamma contour needs separated I- and I+");
    cplx tm = tps.get(TpLabel::Iminus).z, tp = tps.get(TpLabel::Iplus).z;
    std::vector<cplx> excl;
    if (tps.has(TpLabel::I0)) excl.push_back(tps.get(TpLabel::I0).z);
    Quadrature q = pair_quadrature(spec, E, tm, tp, excl, 0.3, 0.35);
    ActionValue av;
    av.E = E;
    av.hbar = hbar;
    av.tag = ContourTag::GammaM;
    av.J = q.J;
    av.err_estimate = q.err;
    return av;
}

cplx solve_wkb_level(const ModelSpec& spec, int label, double hbar, WkbScheme scheme,
                     std::optional<cplx> guess) {
    spec.validate();
    if (label < 0) throw Error(ErrorCode::Domain, "label must be >= 0");
    double target = hbar * (label + 0.5);
    ContourTag tag = scheme == WkbScheme::CC1 ? ContourTag::GammaPlus : ContourTag::GammaM;

    cplx E;
    if (guess) {
        E = *guess;
    } else if (spec.family == Family::BetaTilde && std::abs(spec.beta) == 0.0) {
        E = 2.0 * target;
    } else if (scheme == WkbScheme::CC1 && (spec.family == Family::Hbar || spec.family == Family::KDelta)) {
        E = consts::E0 + hbar * consts::c_pm(+1) * double(2 * label + 1);
    } else {
        cplx J1 = action_integral(spec, cplx(1.0, 0.0), hbar, tag).J;
        E = std::pow(target / J1.real(), 1.2);
    }

    std::ostringstream trace;
    for (int it = 0; it < 50; ++it) {
        auto tps = turning_points(spec, E);
        cplx J, dJ;
        if (tag == ContourTag::GammaM && tps.roots.size() == 3) {
            PairPick p = pick_pair(spec, E, ContourTag::GammaPlus);
            PairPick m = pick_pair(spec, E, ContourTag::GammaMinus);
            Quadrature qp = pair_quadrature(spec, E, p.t1, p.t2, p.exclude);
            Quadrature qm = pair_quadrature(spec, E, m.t1, m.t2, m.exclude);
            J = qp.J + qm.J;
            dJ = qp.dJdE + qm.dJdE;
        } else {
            PairPick pk = tps.roots.size() == 2 ? PairPick{tps.roots[0].z, tps.roots[1].z, {}}
                                                : pick_pair(spec, E, tag);
            Quadrature q = pair_quadrature(spec, E, pk.t1, pk.t2, pk.exclude);
            J = q.J;
            dJ = q.dJdE;
        }
        cplx r = J - target;
        trace << "  it " << it << " E=(" << E.real() << "," << E.imag() << ") |J-t|=" << std::abs(r) << "\n";
        if (std::abs(r) < 1e-12 * (1.0 + std::abs(target))) return E;
        cplx step = r / dJ;
        double cap = 0.5 * (1.0 + std::abs(E));
        if (std::abs(step) > cap) step *= cap / std::abs(step);
        E -= step;
        if (std::abs(step) < 1e-14 * (1.0 + std::abs(E))) return E;
    }
    throw Error(ErrorCode::Convergence, "WKB quantization Newton failed; trace:\n" + trace.str());
}

namespace {

ComplexPath ellipse_path(cplx c, cplx eu, double a, double b, int n = 96) {
    cplx ev = cplx(0.0, 1.0) * eu;
    std::vector<cplx> pts;
    for (int i = 0; i <= n; ++i) {
        double t = 2.0 * kPi * i / n;
        pts.push_back(c + a * std::cos(t) * eu + b * std::sin(t) * ev);
    }
    pts.back() = pts.front();
    return ComplexPath::contour(pts);
}

} // namespace

double exact_quantization_residual_loop(const EigenfunctionEvaluator& ef, const ComplexPath& loop,
                                        int label) {
    auto lr = ef.loop_winding(loop);
    double hb = std::abs(ef.model().hbar_eff());
    return hb * std::abs(lr.winding - double(label));
}

double exact_quantization_residual(const EigenfunctionEvaluator& ef, int label, ContourTag tag) {
    const ModelSpec& spec = ef.model();
    cplx E = ef.energy();
    auto tps = turning_points(spec, E);
    PairPick pick;
    if (tps.roots.size() == 2) {
        pick = {tps.roots[0].z, tps.roots[1].z, {}};
    } else if (tag == ContourTag::GammaM) {
        // contour around all nodes: ellipse around I-, I+ excluding I0
        if (!tps.has(TpLabel::Iminus) || !tps.has(TpLabel::Iplus))
            throw Error(ErrorCode::Geometry, "node contour needs labeled I-+");
        pick = {tps.get(TpLabel::Iminus).z, tps.get(TpLabel::Iplus).z, {}};
        if (tps.has(TpLabel::I0)) pick.exclude.push_back(tps.get(TpLabel::I0).z);
    } else {
        pick = pick_pair(spec, E, tag);
    }
    cplx c = 0.5 * (pick.t1 + pick.t2);
    cplx u = 0.5 * (pick.t2 - pick.t1);
    double au = std::abs(u);
    cplx eu = au > 0 ? u / au : cplx(1.0, 0.0);
    double a = au + 0.3;
    double b = (tag == ContourTag::GammaM && !pick.exclude.empty()) ? 0.35 * a : 0.55 * a;
    // keep excluded points out
    for (int it = 0; it < 20; ++it) {
        bool ok = true;
        for (auto& w : pick.exclude) {
            cplx d = w - c;
            double xu = (d * std::conj(eu)).real();
            double xv = (d * std::conj(cplx(0.0, 1.0) * eu)).real();
            if (sq(xu / a) + sq(xv / b) < 1.3) ok = false;
        }
        if (ok) break;
        b *= 0.8;
    }
    return exact_quantization_residual_loop(ef, ellipse_path(c, eu, a, b), label);
}

DivergenceCheck divergence_exclusion_check(double E_magnitude, int label, double hbar, double arg_E) {
    if (E_magnitude < 10.0) throw Error(ErrorCode::Domain, "divergence check needs |E| >= 10");
    double k = std::pow(E_magnitude, -5.0 / 6.0) * hbar;
    // unit-energy operator -d2/dz2 + i z^3 at energy E/|E|
    ModelSpec unit = ModelSpec::alpha_family(0.0);
    cplx Eu = std::polar(1.0, arg_E);
    cplx J2 = action_integral(unit, Eu, hbar, ContourTag::GammaM).J;
    return {k, std::abs(J2 - k * (label + 0.5))};
}

std::string action_values_csv(const std::vector<ActionValue>& rows) {
    std::ostringstream os;
    os << "re_E,im_E,hbar,contour,re_J,im_J,method,err_estimate\n";
    os.precision(17);
    for (auto& r : rows) {
        os << r.E.real() << "," << r.E.imag() << "," << r.hbar << "," << contour_tag_name(r.tag) << ","
           << r.J.real() << "," << r.J.imag() << ","
           << (r.method == ActionMethod::WkbQuadrature ? "wkb-quadrature" : "exact-logderivative") << ","
           << r.err_estimate << "\n";
    }
    return os.str();
}

} // namespace bwlab
