#include "bwlab/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bwlab/semiclassics.hpp"
#include "bwlab/zeros.hpp"

namespace bwlab {

using nlohmann::json;

ModelSpec with_param(const ModelSpec& base, cplx param) {
    ModelSpec m = base;
    switch (base.family) {
        case Family::Hbar:
        case Family::RealCubic: m.hbar = param; break;
        case Family::BetaTilde: m.beta = param; break;
        case Family::AlphaHat: m.alpha = param; break;
        case Family::KDelta:
            if (std::abs(param.imag()) > 0)
                throw Error(ErrorCode::Config, "k must stay real along a KDelta trace");
            m.k = param.real();
            break;
    }
    return m;
}

cplx param_of(const ModelSpec& spec) {
    switch (spec.family) {
        case Family::Hbar:
        case Family::RealCubic: return spec.hbar;
        case Family::BetaTilde: return spec.beta;
        case Family::AlphaHat: return spec.alpha;
        case Family::KDelta: return cplx(spec.k, 0.0);
    }
    return 0.0;
}

namespace {

// quadratic (or lower-order) extrapolation through the last points
cplx predict(const std::vector<cplx>& ps, const std::vector<cplx>& Es, cplx p) {
    size_t n = ps.size();
    if (n == 1) return Es[0];
    if (n == 2) {
        cplx t = (p - ps[0]) / (ps[1] - ps[0]);
        return Es[0] + t * (Es[1] - Es[0]);
    }
    const cplx &p0 = ps[n - 3], &p1 = ps[n - 2], &p2 = ps[n - 1];
    const cplx &e0 = Es[n - 3], &e1 = Es[n - 2], &e2 = Es[n - 1];
    cplx l0 = (p - p1) * (p - p2) / ((p0 - p1) * (p0 - p2));
    cplx l1 = (p - p0) * (p - p2) / ((p1 - p0) * (p1 - p2));
    cplx l2 = (p - p0) * (p - p1) / ((p2 - p0) * (p2 - p1));
    return l0 * e0 + l1 * e1 + l2 * e2;
}

struct Stepper {
    ModelSpec base;
    TraceOptions opts;
    std::vector<cplx> ps;
    std::vector<cplx> Es;

    EigenPair solve_at(cplx p, cplx guess) const {
        SolveOptions so;
        so.shooting.rel_tol = opts.rel_tol;
        so.attach_labels = false;
        so.seed = opts.seed;
        return solve_eigenvalue(with_param(base, p), guess, so);
    }

    // one grid interval, with recursive refinement
    bool advance(cplx target, int depth, std::string& diag) {
        cplx guess = predict(ps, Es, target);
        bool ok = true;
        EigenPair sol;
        try {
            sol = solve_at(target, guess);
        } catch (const Error& e) {
            ok = false;
            diag = e.what();
        }
        if (ok) {
            double step = std::abs(sol.E - Es.back());
            double prev_step = ps.size() >= 2 ? std::abs(Es[Es.size() - 1] - Es[Es.size() - 2]) : 0.0;
            double ratio = ps.size() >= 2
                               ? std::abs(target - ps.back()) / std::max(1e-300, std::abs(ps.back() - ps[ps.size() - 2]))
                               : 1.0;
            double bound = 4.0 * prev_step * ratio + 0.08 * (1.0 + std::abs(sol.E));
            double dev = std::abs(sol.E - guess);
            if (step > bound || dev > 0.5 * bound + 0.02 * (1.0 + std::abs(sol.E))) ok = false;
        }
        if (!ok) {
            if (depth >= opts.max_refine) return false;
            cplx mid = 0.5 * (ps.back() + target);
            if (!advance(mid, depth + 1, diag)) return false;
            return advance(target, depth + 1, diag);
        }
        ps.push_back(target);
        Es.push_back(sol.E);
        return true;
    }
};

} // namespace

BranchCurve trace_branch(const EigenPair& start, const std::vector<cplx>& grid, const TraceOptions& opts) {
    if (grid.empty()) throw Error(ErrorCode::Config, "empty parameter grid");
    if (std::abs(grid.front() - param_of(start.spec)) > 1e-12 * (1.0 + std::abs(grid.front())))
        throw Error(ErrorCode::Config, "grid must begin at the start point's parameter");

    BranchCurve curve;
    curve.base = start.spec;
    curve.label = start.label;
    curve.params.push_back(grid.front());
    curve.points.push_back(start);

    Stepper st{start.spec, opts, {grid.front()}, {start.E}};
    std::string diag;
    for (size_t i = 1; i < grid.size(); ++i) {
        if (!st.advance(grid[i], 0, diag)) {
            curve.ended_early = true;
            curve.end_diagnostic = diag.empty() ? "refinement exhausted" : diag;
            break;
        }
    }
    for (size_t i = 1; i < st.ps.size(); ++i) {
        EigenPair p;
        p.spec = with_param(start.spec, st.ps[i]);
        p.E = st.Es[i];
        p.label = start.label;
        p.label_scheme = start.label_scheme;
        p.branch = std::abs(p.E.imag()) <= 1e-8 * (1.0 + std::abs(p.E)) && p.E.real() > 0
                       ? Branch::RealPositive
                       : (p.E.imag() < 0 ? Branch::Plus : Branch::Minus);
        curve.params.push_back(st.ps[i]);
        curve.points.push_back(p);
        curve.max_step_de = std::max(curve.max_step_de, std::abs(st.Es[i] - st.Es[i - 1]));
    }
    if (opts.attach_labels_at_ends && !curve.points.empty()) {
        attach_node_labels(curve.points.back(), opts.seed);
    }
    return curve;
}

std::string BranchCurve::to_json() const {
    json j;
    j["label"] = label;
    j["max_step_de"] = max_step_de;
    j["ended_early"] = ended_early;
    if (ended_early) j["diagnostic"] = end_diagnostic;
    json pts = json::array();
    for (size_t i = 0; i < params.size(); ++i)
        pts.push_back({{"re_param", params[i].real()},
                       {"im_param", params[i].imag()},
                       {"re_E", points[i].E.real()},
                       {"im_E", points[i].E.imag()},
                       {"branch", branch_name(points[i].branch)}});
    j["points"] = pts;
    return j.dump(2);
}

std::string BranchCurve::to_csv() const {
    std::ostringstream os;
    os << "re_param,im_param,re_E,im_E,branch,label\n";
    os.precision(17);
    for (size_t i = 0; i < params.size(); ++i) {
        os << params[i].real() << "," << params[i].imag() << "," << points[i].E.real() << ","
           << points[i].E.imag() << "," << branch_name(points[i].branch) << "," << points[i].label << "\n";
    }
    return os.str();
}

namespace {

struct PairState {
    double hbar;
    cplx E_lo, E_hi; // real-separated pair above the crossing
    cplx s() const { return (E_hi - E_lo) * (E_hi - E_lo); }
    cplx e1() const { return E_hi + E_lo; }
};

struct PairTracker {
    int n;
    LocateOptions opts;
    ModelSpec base = ModelSpec::hbar_family(1.0);
    std::vector<double> hs;
    std::vector<cplx> Elo, Ehi;

    EigenPair solve_at(cplx hb, cplx guess) const {
        SolveOptions so;
        so.shooting.rel_tol = opts.rel_tol;
        so.attach_labels = false;
        return solve_eigenvalue(with_param(base, hb), guess, so);
    }

    bool real_sep(cplx a, cplx b) const {
        double sc = 1.0 + std::abs(a) + std::abs(b);
        return std::abs(a.imag()) < 1e-7 * sc && std::abs(b.imag()) < 1e-7 * sc &&
               (b - a).real() > 1e-7 * sc;
    }

    // solve the two levels at hbar with predictors; returns false when the
    // pair is no longer real-separated there (i.e. we stepped below hbar_n)
    bool step(double hb, PairState& out) {
        cplx glo = predict_h(hs, Elo, hb);
        cplx ghi = predict_h(hs, Ehi, hb);
        EigenPair plo = solve_at(hb, glo);
        EigenPair phi = solve_at(hb, ghi);
        if (!real_sep(plo.E, phi.E)) return false;
        out = {hb, plo.E, phi.E};
        return true;
    }

    // E_m(hb) ~ hb^{6/5} E_hat(alpha(hb)) with E_hat slowly varying, so the
    // predictor extrapolates the rescaled level and restores the envelope
    static cplx predict_h(const std::vector<double>& hs, const std::vector<cplx>& Es, double h) {
        std::vector<cplx> ps(hs.begin(), hs.end());
        std::vector<cplx> flat(Es.size());
        for (size_t i = 0; i < Es.size(); ++i) flat[i] = Es[i] * std::pow(hs[i], -1.2);
        return predict(ps, flat, cplx(h, 0.0)) * std::pow(h, 1.2);
    }
};

// (E+ - E-)^2 below the crossing from the conjugate pair
cplx pair_s_below(const PairTracker& tr, double hb, cplx center, double imag_seed) {
    double floor_seed = 5e-3 * (1.0 + std::abs(center));
    cplx seed = center - cplx(0.0, std::max(imag_seed, floor_seed));
    EigenPair p = tr.solve_at(hb, seed);
    if (p.E.imag() > -1e-10 * (1.0 + std::abs(p.E)))
        throw Error(ErrorCode::Convergence, "below-crossing solve did not find the complex pair");
    cplx dE = p.E - std::conj(p.E); // E+ - E- for the PT pair
    return dE * dE;
}

struct PairMoments {
    cplx e1;  // z1 + z2
    cplx s;   // (z1 - z2)^2 = 2 p2 - p1^2
};

// Symmetric functions of the two eigenvalues inside a small circle from
// moments of d log W (analytic W; the circle is small enough that the
// reference-scale envelope stays in range). Robust through the coalescence.
PairMoments pair_moments(const WronskianEvaluator& W, cplx center, double radius) {
    for (int grow = 0; grow < 5; ++grow) {
        int N = 96;
        bool done = false;
        cplx p1 = 0, p2 = 0;
        double winding = 0;
        for (; N <= 3072 && !done; N *= 2) {
            p1 = p2 = 0;
            winding = 0;
            cplx prev = W(center + radius);
            bool ok = true;
            for (int k = 1; k <= N; ++k) {
                double th = 2.0 * kPi * k / N;
                cplx E = center + radius * std::polar(1.0, th);
                cplx w = W(E);
                cplx dlog = std::log(w / prev);
                if (std::abs(dlog.imag()) > 1.2) {
                    ok = false;
                    break;
                }
                cplx Em = center + radius * std::polar(1.0, th - kPi / N);
                winding += dlog.imag();
                p1 += Em * dlog;
                p2 += Em * Em * dlog;
                prev = w;
            }
            if (ok) done = true;
        }
        if (done) {
            double w2 = winding / (2.0 * kPi);
            if (std::abs(w2 - 2.0) < 0.05) {
                cplx q1 = p1 / cplx(0.0, 2.0 * kPi);
                cplx q2 = p2 / cplx(0.0, 2.0 * kPi);
                return {q1, 2.0 * q2 - q1 * q1};
            }
            if (w2 < 1.95) {
                radius *= 1.7; // pair not fully enclosed yet
                continue;
            }
            throw Error(ErrorCode::Accuracy, "moment circle encloses more than the pair");
        }
        radius *= 0.8;
    }
    throw Error(ErrorCode::Accuracy, "pair moments did not stabilize");
}

} // namespace

BranchPoint locate_branch_point(int n, const LocateOptions& opts) {
    if (n < 0 || n > 5) throw Error(ErrorCode::Domain, "branch point index limited to n <= 5");
    BranchPoint bp;
    bp.n = n;
    bp.m_minus = 2 * n;
    bp.m_plus = 2 * n + 1;

    PairTracker tr;
    tr.n = n;
    tr.opts = opts;
    ModelSpec spec1 = ModelSpec::hbar_family(opts.hbar_start);

    // anchor above the crossing, seeded by the semiclassical quantization
    double hb = opts.hbar_start;
    EigenPair plo, phi;
    for (int attempt = 0;; ++attempt) {
        cplx seed_lo = solve_wkb_level(with_param(spec1, hb), 2 * n, hb, WkbScheme::CC3);
        cplx seed_hi = solve_wkb_level(with_param(spec1, hb), 2 * n + 1, hb, WkbScheme::CC3);
        plo = tr.solve_at(hb, seed_lo);
        phi = tr.solve_at(hb, seed_hi);
        if (tr.real_sep(plo.E, phi.E)) break;
        hb *= 1.5;
        if (attempt >= 6)
            throw Error(ErrorCode::NotFound, "could not find a real-separated pair above the crossing");
    }
    bp.hbar_start = hb;
    // Selection-rule data: at the anchor every level is real and ordered
    // (C1), so a level's index in the spectrum is its node count. Count the
    // levels strictly below the pair by the argument principle.
    {
        double mid = 0.5 * (plo.E.real() + phi.E.real());
        double gap = phi.E.real() - plo.E.real();
        Rect below{cplx(1e-3, -0.5), cplx(plo.E.real() - 0.45 * gap, 0.5)};
        int idx = count_levels_in_window(with_param(spec1, hb), below, opts.rel_tol);
        Rect upto{cplx(1e-3, -0.5), cplx(mid, 0.5)};
        int idx2 = count_levels_in_window(with_param(spec1, hb), upto, opts.rel_tol);
        if (idx != 2 * n || idx2 != 2 * n + 1) {
            std::ostringstream os;
            os << "anchor pair sits at spectral indices (" << idx << "," << idx2 - 1
               << "), expected (" << 2 * n << "," << 2 * n + 1 << ")";
            throw Error(ErrorCode::Accuracy, os.str());
        }
    }

    tr.hs = {hb};
    tr.Elo = {plo.E};
    tr.Ehi = {phi.E};

    // march down until the pair stops being real-separated
    double h_above = hb;
    double h_below = 0.0;
    std::vector<std::pair<double, cplx>> samples; // (hbar, s)
    samples.push_back({hb, PairState{hb, plo.E, phi.E}.s()});
    double factor = opts.march_factor;
    int consecutive_failures = 0;
    while (true) {
        double hnext = tr.hs.back() * factor;
        if (hnext < 1e-3)
            throw Error(ErrorCode::NotFound, "no coalescence found down to hbar = 1e-3");
        PairState st;
        bool ok = false;
        try {
            ok = tr.step(hnext, st);
        } catch (const Error&) {
            ok = false;
        }
        if (ok) {
            consecutive_failures = 0;
            tr.hs.push_back(hnext);
            tr.Elo.push_back(st.E_lo);
            tr.Ehi.push_back(st.E_hi);
            samples.push_back({hnext, st.s()});
            h_above = hnext;
            // slow down when the gap is collapsing
            double gap = std::abs(st.E_hi - st.E_lo);
            double prev_gap = samples.size() >= 2 ? std::sqrt(std::abs(samples[samples.size() - 2].second)) : gap;
            if (gap < 0.5 * prev_gap && factor < 0.97) factor = std::sqrt(factor);
            continue;
        }
        // a failed step far above the crossing is usually a predictor jump,
        // not the coalescence: halve the step a few times before bracketing
        if (++consecutive_failures <= 3 && factor < 0.995) {
            factor = std::sqrt(factor);
            continue;
        }
        h_below = hnext;
        break;
    }

    // bracket [h_below, h_above]; bisect on the sign of Re s with the
    // symmetric-function samples (e1, s); near the coalescence the moment
    // circle replaces the individual solves
    cplx center = 0.5 * (tr.Elo.back() + tr.Ehi.back());
    double gap_above = std::abs(tr.Ehi.back() - tr.Elo.back());
    cplx s_below;
    try {
        s_below = pair_s_below(tr, h_below, center, 0.5 * gap_above);
    } catch (const Error&) {
        // the complex-seed solve can land on a neighboring real level when
        // other branches are nearby; the moment circle is insensitive to that
        WronskianEvaluator W(with_param(tr.base, h_below));
        double r = std::max(0.8 * gap_above, 2e-3 * (1.0 + std::abs(center)));
        auto pm = pair_moments(W, center, r);
        s_below = pm.s;
        center = 0.5 * pm.e1;
    }
    samples.push_back({h_below, s_below});
    if (!(s_below.real() < 0))
        throw Error(ErrorCode::Accuracy, "below-crossing sample has nonnegative Re (dE)^2");

    double lo = h_below, hi = h_above;
    std::vector<std::pair<double, cplx>> near_samples = {{lo, s_below},
                                                         {hi, samples[samples.size() - 2].second}};
    double sep_est = gap_above;
    while (hi - lo > 1e-7 * hi) {
        double mid = 0.5 * (lo + hi);
        double scale = 1.0 + std::abs(center);
        cplx smid;
        bool got = false;
        if (sep_est > 0.04 * scale) {
            PairState st;
            bool above_ok = false;
            try {
                above_ok = tr.step(mid, st);
            } catch (const Error&) {
                above_ok = false;
            }
            if (above_ok) {
                smid = st.s();
                center = 0.5 * st.e1();
                tr.hs.push_back(mid);
                tr.Elo.push_back(st.E_lo);
                tr.Ehi.push_back(st.E_hi);
                got = true;
            } else {
                try {
                    smid = pair_s_below(tr, mid, center, 0.5 * sep_est);
                    got = true;
                } catch (const Error&) {
                    got = false;
                }
            }
        }
        if (!got) {
            WronskianEvaluator W(with_param(tr.base, mid));
            double r = std::max(2.0 * sep_est, 1.5e-3 * scale);
            r = std::min(r, 0.08 * scale);
            auto pm = pair_moments(W, center, r);
            smid = pm.s;
            center = 0.5 * pm.e1;
        }
        near_samples.push_back({mid, smid});
        sep_est = std::sqrt(std::abs(smid));
        if (smid.real() > 0)
            hi = mid;
        else
            lo = mid;
    }

    // refine hbar_n as the linear zero of Re s over the nearest samples
    std::sort(near_samples.begin(), near_samples.end(),
              [&](auto& a, auto& b) { return std::abs(a.first - 0.5 * (lo + hi)) < std::abs(b.first - 0.5 * (lo + hi)); });
    size_t nfit = std::min<size_t>(8, near_samples.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < nfit; ++i) {
        double x = near_samples[i].first, y = near_samples[i].second.real();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double slope = (nfit * sxy - sx * sy) / (nfit * sxx - sx * sx);
    double icpt = (sy - slope * sx) / nfit;
    bp.hbar_n = -icpt / slope;
    if (!(bp.hbar_n > lo - 0.01 && bp.hbar_n < hi + 0.01)) bp.hbar_n = 0.5 * (lo + hi);

    // diagnostics across the bracket: |Im s| and linearity of Re s
    {
        double ssr = 0, sst = 0, mean = sy / nfit;
        bp.im_s_max = 0;
        for (size_t i = 0; i < nfit; ++i) {
            double x = near_samples[i].first, y = near_samples[i].second.real();
            double f = slope * x + icpt;
            ssr += sq(y - f);
            sst += sq(y - mean);
            bp.im_s_max = std::max(bp.im_s_max, std::abs(near_samples[i].second.imag()));
        }
        bp.re_s_linear_r2 = sst > 0 ? 1.0 - ssr / sst : 1.0;
    }
    bp.s_samples = near_samples;

    // E_c: extrapolate the analytic symmetric function (E_lo + E_hi)/2 to hbar_n
    {
        size_t m = tr.hs.size();
        size_t k0 = m >= 4 ? m - 4 : 0;
        double sx2 = 0, sy2 = 0, sxx2 = 0, sxy2 = 0;
        int cnt = 0;
        for (size_t i = k0; i < m; ++i) {
            double x = tr.hs[i];
            double y = 0.5 * (tr.Elo[i] + tr.Ehi[i]).real();
            sx2 += x;
            sy2 += y;
            sxx2 += x * x;
            sxy2 += x * y;
            cnt++;
        }
        double sl = (cnt * sxy2 - sx2 * sy2) / (cnt * sxx2 - sx2 * sx2);
        double ic = (sy2 - sl * sx2) / cnt;
        bp.E_c = ic + sl * bp.hbar_n;
    }
    if (!(bp.E_c > 0)) throw Error(ErrorCode::Accuracy, "limit level E_c is not positive");

    // square-root fit over two decades above hbar_n
    {
        std::vector<double> ds, des;
        for (int j = 0; j < 9; ++j) {
            double eps = std::pow(10.0, -4.0 + 2.0 * j / 8.0); // 1e-4 .. 1e-2
            double hbv = bp.hbar_n * (1.0 + eps);
            PairState st;
            if (!tr.step(hbv, st)) continue;
            ds.push_back(hbv - bp.hbar_n);
            des.push_back(std::abs(st.E_hi - st.E_lo));
        }
        if (ds.size() < 5) throw Error(ErrorCode::Accuracy, "too few square-root fit samples");
        double lx = 0, ly = 0, lxx = 0, lxy = 0;
        int m = static_cast<int>(ds.size());
        for (int i = 0; i < m; ++i) {
            double x = std::log(ds[i]), y = std::log(des[i]);
            lx += x;
            ly += y;
            lxx += x * x;
            lxy += x * y;
        }
        bp.fit.exponent = (m * lxy - lx * ly) / (m * lxx - lx * lx);
        double ic = (ly - bp.fit.exponent * lx) / m;
        double ssr = 0, sst = 0, mean = ly / m;
        for (int i = 0; i < m; ++i) {
            double y = std::log(des[i]);
            double f = ic + bp.fit.exponent * std::log(ds[i]);
            ssr += sq(y - f);
            sst += sq(y - mean);
        }
        bp.fit.exponent_r2 = sst > 0 ? 1.0 - ssr / sst : 1.0;
        // least squares dE = a sqrt(d) + b d
        double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
        for (int i = 0; i < m; ++i) {
            double r = std::sqrt(ds[i]);
            a11 += r * r;
            a12 += r * ds[i];
            a22 += ds[i] * ds[i];
            b1 += r * des[i];
            b2 += ds[i] * des[i];
        }
        double det = a11 * a22 - a12 * a12;
        bp.fit.a = (b1 * a22 - a12 * b2) / det;
        bp.fit.b = (a11 * b2 - a12 * b1) / det;
        double res = 0, den = 0;
        for (int i = 0; i < m; ++i) {
            double f = bp.fit.a * std::sqrt(ds[i]) + bp.fit.b * ds[i];
            res += sq(des[i] - f);
            den += sq(des[i]);
        }
        bp.fit.fit_residual = std::sqrt(res / den);
    }

    // secondary coalescence candidates above hbar_n (uniqueness is assumed by
    // the theory only for simplicity; we report rather than assume)
    for (size_t i = 1; i + 1 < samples.size(); ++i) {
        double s0 = std::abs(samples[i - 1].second);
        double s1 = std::abs(samples[i].second);
        double s2 = std::abs(samples[i + 1].second);
        if (s1 < 0.2 * s0 && s1 < 0.2 * s2 && samples[i].first > bp.hbar_n * 1.05)
            bp.secondary_coalescences.push_back(samples[i].first);
    }

    if (bp.fit.exponent < 0.45 || bp.fit.exponent > 0.55)
        throw Error(ErrorCode::Accuracy, "square-root exponent outside [0.45, 0.55]");
    return bp;
}

std::string BranchPoint::to_json() const {
    json j;
    j["n"] = n;
    j["hbar_n"] = hbar_n;
    j["E_c"] = E_c;
    j["pair"] = {m_minus, m_plus};
    j["sqrt_fit"] = {{"a", fit.a}, {"b", fit.b}, {"exponent", fit.exponent},
                     {"exponent_r2", fit.exponent_r2}, {"residual", fit.fit_residual}};
    j["im_s_max"] = im_s_max;
    j["re_s_linear_r2"] = re_s_linear_r2;
    j["hbar_start"] = hbar_start;
    json ss = json::array();
    for (auto& [h, s] : s_samples) ss.push_back({h, s.real(), s.imag()});
    j["s_samples"] = ss;
    j["secondary_coalescences"] = secondary_coalescences;
    return j.dump(2);
}

std::string BranchPoint::csv_header() {
    return "n,hbar_n,E_c,m_minus,m_plus,sqrt_exponent,fit_a,fit_b,fit_residual";
}

std::string BranchPoint::to_csv_row() const {
    std::ostringstream os;
    os.precision(17);
    os << n << "," << hbar_n << "," << E_c << "," << m_minus << "," << m_plus << ","
       << fit.exponent << "," << fit.a << "," << fit.b << "," << fit.fit_residual;
    return os.str();
}

MonodromyResult monodromy_loop(const BranchPoint& bp, double radius, const LocateOptions& opts) {
    if (!(radius > 0) || radius >= 0.7 * bp.hbar_n)
        throw Error(ErrorCode::Domain, "loop radius must be positive and keep the circle inside C0");

    MonodromyResult mr;
    mr.n = bp.n;
    mr.radius = radius;

    PairTracker tr;
    tr.n = bp.n;
    tr.opts = opts;
    double h0 = bp.hbar_n + radius;
    // the square-root expansion around the branch point provides the seeds
    double dr = std::sqrt(radius);
    cplx seed_lo = cplx(bp.E_c - 0.5 * (bp.fit.a * dr + bp.fit.b * radius), 0.0);
    cplx seed_hi = cplx(bp.E_c + 0.5 * (bp.fit.a * dr + bp.fit.b * radius), 0.0);
    EigenPair plo = tr.solve_at(h0, seed_lo);
    EigenPair phi = tr.solve_at(h0, seed_hi);
    cplx E0_lo = plo.E, E0_hi = phi.E;

    auto run_loop = [&](cplx a, cplx b, int loops) {
        // continue both branches along theta in [0, 2 pi loops]
        std::vector<cplx> hsp = {cplx(h0, 0.0)};
        std::vector<cplx> Ea = {a}, Eb = {b};
        int N = 48 * loops;
        int i = 1;
        double dth = 2.0 * kPi * loops / N;
        int refine = 0;
        double th = 0.0;
        while (th < 2.0 * kPi * loops - 1e-12) {
            double tnext = std::min(th + dth, 2.0 * kPi * loops);
            cplx hb = bp.hbar_n + radius * std::polar(1.0, tnext);
            cplx ga = predict(hsp, Ea, hb);
            cplx gb = predict(hsp, Eb, hb);
            try {
                EigenPair pa = tr.solve_at(hb, ga);
                EigenPair pb = tr.solve_at(hb, gb);
                double sc = 1.0 + std::abs(pa.E);
                bool jump = std::abs(pa.E - ga) > 0.3 * std::abs(pa.E - pb.E) + 0.02 * sc ||
                            std::abs(pb.E - gb) > 0.3 * std::abs(pa.E - pb.E) + 0.02 * sc;
                if (std::abs(pa.E - pb.E) < 1e-9 * sc)
                    throw Error(ErrorCode::Accuracy, "branches collided on the loop");
                if (jump) throw Error(ErrorCode::Accuracy, "predictor jump");
                hsp.push_back(hb);
                Ea.push_back(pa.E);
                Eb.push_back(pb.E);
                if (loops == 1) mr.track_mplus.push_back({hb, pb.E});
                th = tnext;
                refine = 0;
                ++i;
            } catch (const Error&) {
                dth *= 0.5;
                if (++refine > 14) throw Error(ErrorCode::Geometry, "monodromy continuation failed");
            }
        }
        return std::pair<cplx, cplx>(Ea.back(), Eb.back());
    };

    auto [end_lo, end_hi] = run_loop(E0_lo, E0_hi, 1);
    double sc = 1.0 + std::abs(E0_lo) + std::abs(E0_hi);
    bool lo_to_hi = std::abs(end_lo - E0_hi) < 1e-5 * sc;
    bool hi_to_lo = std::abs(end_hi - E0_lo) < 1e-5 * sc;
    bool lo_fixed = std::abs(end_lo - E0_lo) < 1e-5 * sc;
    bool hi_fixed = std::abs(end_hi - E0_hi) < 1e-5 * sc;
    if (lo_to_hi && hi_to_lo) {
        mr.permutation = {1, 0};
        mr.is_transposition = true;
    } else if (lo_fixed && hi_fixed) {
        mr.permutation = {0, 1};
        mr.is_transposition = false;
    } else {
        throw Error(ErrorCode::Geometry,
                    "loop endpoints match neither the identity nor the transposition; "
                    "the circle likely encloses a different number of branch points");
    }

    auto [end2_lo, end2_hi] = run_loop(E0_lo, E0_hi, 2);
    mr.double_loop_identity =
        std::abs(end2_lo - E0_lo) < 1e-5 * sc && std::abs(end2_hi - E0_hi) < 1e-5 * sc;
    if (!mr.double_loop_identity)
        throw Error(ErrorCode::Geometry, "double loop is not the identity: enclosed branch points != 1");
    return mr;
}

std::string MonodromyResult::to_json() const {
    json j;
    j["n"] = n;
    j["radius"] = radius;
    j["permutation"] = permutation;
    j["is_transposition"] = is_transposition;
    j["double_loop_identity"] = double_loop_identity;
    json t = json::array();
    for (auto& [h, e] : track_mplus) t.push_back({h.real(), h.imag(), e.real(), e.imag()});
    j["track_mplus"] = t;
    return j.dump(2);
}

EdgeCheck edge_assignment_check(const BranchPoint& bp, double fraction, double eps,
                                const LocateOptions& opts) {
    if (!(fraction > 0 && fraction < 1)) throw Error(ErrorCode::Domain, "fraction must be in (0,1)");
    EdgeCheck ec;
    ec.hbar_test = fraction * bp.hbar_n;
    ec.eps = eps;

    PairTracker tr;
    tr.n = bp.n;
    tr.opts = opts;
    double ha = 1.25 * bp.hbar_n;
    double da = std::sqrt(ha - bp.hbar_n);
    cplx seed_lo = cplx(bp.E_c - 0.5 * (bp.fit.a * da + bp.fit.b * (ha - bp.hbar_n)), 0.0);
    cplx seed_hi = cplx(bp.E_c + 0.5 * (bp.fit.a * da + bp.fit.b * (ha - bp.hbar_n)), 0.0);
    EigenPair plo = tr.solve_at(ha, seed_lo);
    EigenPair phi = tr.solve_at(ha, seed_hi);

    // path above the cut: ha -> ha + i eps -> hbar_test + i eps -> endpoint
    auto continue_above = [&](cplx Estart) {
        std::vector<cplx> hs = {cplx(ha, 0.0)};
        std::vector<cplx> Es = {Estart};
        auto walk = [&](cplx target, int steps) {
            cplx from = hs.back();
            for (int i = 1; i <= steps; ++i) {
                cplx hb = from + (target - from) * (double(i) / steps);
                cplx g = predict(hs, Es, hb);
                EigenPair p = tr.solve_at(hb, g);
                hs.push_back(hb);
                Es.push_back(p.E);
            }
        };
        walk(cplx(ha, eps), 4);
        walk(cplx(ec.hbar_test, eps), 30);
        return Es.back();
    };
    ec.m_minus_above = continue_above(plo.E);
    ec.m_plus_above = continue_above(phi.E);

    // small-hbar branches up to hbar_test on the real axis (below the crossing)
    auto small_branch = [&](int sign) {
        double hs0 = std::min(0.05, 0.3 * bp.hbar_n);
        cplx seed = consts::E0 * double(sign) + hs0 * consts::c_pm(sign) * double(2 * bp.n + 1);
        EigenPair p = tr.solve_at(hs0, seed);
        std::vector<cplx> hs = {cplx(hs0, 0.0)};
        std::vector<cplx> Es = {p.E};
        int steps = 30;
        for (int i = 1; i <= steps; ++i) {
            double hb = hs0 + (ec.hbar_test - hs0) * i / steps;
            cplx g = predict(hs, Es, cplx(hb, 0.0));
            EigenPair q = tr.solve_at(hb, g);
            hs.push_back(cplx(hb, 0.0));
            Es.push_back(q.E);
        }
        return Es.back();
    };
    ec.plus_below = small_branch(+1);
    ec.minus_below = small_branch(-1);

    ec.diff_minus_plus = std::abs(ec.m_minus_above - ec.plus_below);
    ec.diff_plus_minus = std::abs(ec.m_plus_above - ec.minus_below);
    return ec;
}

CrossingReport crossing_report(int n_max, const LocateOptions& opts) {
    if (n_max < 0 || n_max > 5) throw Error(ErrorCode::Domain, "report limited to n_max <= 5");
    CrossingReport rep;

    int threads = static_cast<int>(env_max_threads());
    std::vector<std::future<BranchPoint>> futs;
    std::vector<BranchPoint> rows(n_max + 1);
    int launched = 0;
    while (launched <= n_max) {
        int batch = std::min(threads, n_max + 1 - launched);
        futs.clear();
        for (int i = 0; i < batch; ++i) {
            int n = launched + i;
            futs.push_back(std::async(std::launch::async, [n, &opts]() { return locate_branch_point(n, opts); }));
        }
        for (int i = 0; i < batch; ++i) rows[launched + i] = futs[i].get();
        launched += batch;
    }
    rep.rows = rows;

    ModelSpec hb1 = ModelSpec::hbar_family(1.0);
    auto ce = critical_energy(hb1);
    rep.E_critical = ce.value;
    rep.J2_critical = action_integral(hb1, cplx(ce.value, 0.0), 1.0, ContourTag::GammaM).J.real();
    for (auto& r : rep.rows)
        rep.J2_at_Ec.push_back(action_integral(hb1, cplx(r.E_c, 0.0), 1.0, ContourTag::GammaM).J.real());
    return rep;
}

std::string CrossingReport::to_markdown() const {
    std::ostringstream os;
    os.precision(10);
    os << "| n | hbar_n | E_n^c | 2n hbar_n | J2(E_n^c, 0) |\n";
    os << "|---|--------|-------|-----------|--------------|\n";
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        os << "| " << r.n << " | " << r.hbar_n << " | " << r.E_c << " | " << 2.0 * r.n * r.hbar_n << " | "
           << J2_at_Ec[i] << " |\n";
    }
    os << "\ntargets: E^c = " << E_critical << ", J2^c = J2(E^c, 0) = " << J2_critical << "\n";
    return os.str();
}

std::string CrossingReport::to_json() const {
    json j;
    j["E_critical"] = E_critical;
    j["J2_critical"] = J2_critical;
    json rr = json::array();
    for (size_t i = 0; i < rows.size(); ++i) {
        json e = json::parse(rows[i].to_json());
        e["two_n_hbar_n"] = 2.0 * rows[i].n * rows[i].hbar_n;
        e["J2_at_Ec"] = J2_at_Ec[i];
        rr.push_back(e);
    }
    j["rows"] = rr;
    return j.dump(2);
}

} // namespace bwlab
