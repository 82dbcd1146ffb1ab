#include "bwlab/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "bwlab/zeros.hpp"

namespace bwlab {

using nlohmann::json;

const char* branch_name(Branch b) {
    switch (b) {
        case Branch::Plus: return "plus";
        case Branch::Minus: return "minus";
        case Branch::RealPositive: return "real-positive";
    }
    return "?";
}

const char* label_scheme_name(LabelScheme s) {
    return s == LabelScheme::NodeCount ? "node-count" : "perturbative-n";
}

double env_max_threads() {
    if (const char* e = std::getenv("BWLAB_THREADS")) {
        int n = std::atoi(e);
        if (n >= 1) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return std::min<unsigned>(hc ? hc : 1, 8);
}

double default_shoot_L(const ModelSpec& spec, cplx E) {
    double aE = std::abs(E);
    double L = std::max(8.0, 4.0 * std::cbrt(aE + 10.0));
    // keep the recessive anchor asymptotic
    for (int it = 0; it < 200 && std::abs(spec.potential(L)) < 40.0 * aE; ++it) L *= 1.1;
    return L;
}

WronskianEvaluator::WronskianEvaluator(ModelSpec spec, ShootingOptions opts)
    : spec_(std::move(spec)), opts_(opts) {
    spec_.validate();
    if (spec_.family == Family::RealCubic)
        throw Error(ErrorCode::Config, "the real cubic form is not L2 at -infinity; no shooting spectrum");
}

double WronskianEvaluator::L(cplx E) const {
    if (opts_.L > 0) return opts_.L;
    if (!L_fixed_) L_fixed_ = default_shoot_L(spec_, E);
    return *L_fixed_;
}

// For complex levels the state localizes around one well and decays again
// between the inner turning point and the origin; matching inside that dip
// amplifies seeded errors by e^{2 dS/hb}. Put the match point at the inner
// edge of the node-side turning cluster instead.
double default_match_point_impl(const ModelSpec& spec, cplx E) {
    if (std::abs(E.imag()) <= 0.02 * (1.0 + std::abs(E))) return 0.0;
    double side = E.imag() < 0 ? 1.0 : -1.0;
    double best = 0.0;
    double best_abs = 1e300;
    try {
        auto tps = turning_points(spec, E);
        for (auto& t : tps.roots) {
            double x = t.z.real();
            if (side * x > 0.05 && std::abs(x) < best_abs) {
                best_abs = std::abs(x);
                best = x;
            }
        }
    } catch (const Error&) {
    }
    return best;
}

double default_match_point(const ModelSpec& spec, cplx E) { return default_match_point_impl(spec, E); }

WronskianEvaluator::Shot WronskianEvaluator::shoot(cplx E) const {
    double L = this->L(E);
    if (!match_fixed_) {
        match_fixed_ = opts_.match ? *opts_.match : default_match_point(spec_, E);
    }
    double xm = *match_fixed_;
    if (L <= std::abs(xm) + 1.0) throw Error(ErrorCode::Domain, "shooting range too small");

    IntegrateOptions io;
    io.rel_tol = opts_.rel_tol;

    auto one_side = [&](double x0, double dir) {
        auto ray = ComplexPath::ray(cplx(x0, 0.0), cplx(dir, 0.0), 1.0);
        WaveState w = recessive_init(spec_, E, ray);
        auto res = integrate(spec_, E, ComplexPath::segments({cplx(x0, 0.0), cplx(xm, 0.0)}), w, io);
        WaveState st = res.state;
        double m = std::max(std::abs(st.psi), std::abs(st.dpsi));
        st.psi /= m;
        st.dpsi /= m;
        st.log_scale += std::log(m);
        return st;
    };

    Shot s;
    s.plus = one_side(L, +1.0);
    s.minus = one_side(-L, -1.0);
    s.w_raw = s.plus.psi * s.minus.dpsi - s.plus.dpsi * s.minus.psi;
    s.sigma = s.plus.log_scale + s.minus.log_scale;
    return s;
}

cplx WronskianEvaluator::operator()(cplx E) const {
    Shot s = shoot(E);
    if (!sigma_ref_) sigma_ref_ = s.sigma;
    double ex = s.sigma - *sigma_ref_;
    if (ex > 600.0) throw Error(ErrorCode::Accuracy, "wronskian scale overflow across evaluations");
    return s.w_raw * std::exp(ex);
}

cplx wronskian_mismatch(const ModelSpec& spec, cplx E, double L, double tol) {
    ShootingOptions so;
    so.L = L;
    so.rel_tol = tol;
    WronskianEvaluator w(spec, so);
    return w(E);
}

namespace {

Branch classify_branch(cplx E) {
    if (std::abs(E.imag()) <= 1e-8 * (1.0 + std::abs(E)) && E.real() > 0) return Branch::RealPositive;
    return E.imag() < 0 ? Branch::Plus : Branch::Minus;
}

struct NewtonResult {
    cplx E;
    double residual;
    int iterations;
};

// Root-finding works on the per-evaluation-normalized mismatch w_raw: it has
// the same zeros and the same phase as the analytic W (the stripped envelope
// e^{sigma} is real positive) but O(1) dynamic range across the search region.
NewtonResult newton_on_w(const WronskianEvaluator& W, cplx guess, double tol_w, int max_iter) {
    cplx E = guess;
    double w_scale = 0.0;
    std::ostringstream trace;
    for (int it = 0; it < max_iter; ++it) {
        auto shot = W.shoot(E);
        cplx w = shot.w_raw;
        w_scale = std::max(w_scale, std::abs(w));
        double h = 1e-6 * (1.0 + std::abs(E));
        auto shot_h = W.shoot(E + cplx(h, 0.0));
        // difference the envelope-stripped values: same zeros, but without the
        // exponential drift term that would pull Newton along the envelope
        cplx w_h = shot_h.w_raw;
        w_scale = std::max(w_scale, std::abs(w_h));
        cplx wp = (w_h - w) / h;
        if (std::abs(wp) == 0.0) throw Error(ErrorCode::Convergence, "wronskian derivative vanished");
        cplx step = w / wp;
        double cap = 0.5 * (1.0 + std::abs(E));
        if (std::abs(step) > cap) step *= cap / std::abs(step);
        E -= step;
        trace << "  it " << it << ": E=(" << E.real() << "," << E.imag() << ") |w|=" << std::abs(w) << "\n";
        if (std::abs(E) > 40.0 * (1.0 + std::abs(guess)))
            throw Error(ErrorCode::Convergence,
                        "iteration ran away from the guess; trace:\n" + trace.str());
        bool fast_path = std::abs(w) <= tol_w * std::max(w_scale, 1e-30) &&
                         std::abs(step) <= 1e-10 * (1.0 + std::abs(E));
        bool tiny_step = std::abs(step) <= 1e-7 * (1.0 + std::abs(E));
        if (fast_path || tiny_step) {
            // the iterate scale alone can be misleading when the seed was
            // already nearly converged: normalize by off-resonance probes
            double scale = w_scale;
            for (cplx off : {cplx(0.15, 0.0), cplx(0.0, 0.1)}) {
                try {
                    auto probe = W.shoot(E + off * (1.0 + std::abs(E)));
                    scale = std::max(scale, std::abs(probe.w_raw));
                } catch (const Error&) {
                }
            }
            double res = std::abs(W.shoot(E).w_raw) / std::max(scale, 1e-30);
            if (res <= tol_w) return {E, res, it + 1};
        }
    }
    throw Error(ErrorCode::Convergence, "eigenvalue iteration did not converge; trace:\n" + trace.str());
}

} // namespace

EigenPair solve_eigenvalue(const ModelSpec& spec, cplx guess, const SolveOptions& opts) {
    WronskianEvaluator W(spec, opts.shooting);
    NewtonResult nr = newton_on_w(W, guess, opts.tol_w, opts.max_iter);

    EigenPair p;
    p.spec = spec;
    p.E = nr.E;
    p.residual_w = nr.residual;
    p.iterations = nr.iterations;
    p.tol = opts.shooting.rel_tol;
    p.shoot_L = W.L(nr.E);
    p.branch = classify_branch(nr.E);
    if (opts.attach_labels) attach_node_labels(p, opts.seed);
    return p;
}

namespace {

uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double hash01(uint64_t a, uint64_t b, uint64_t c) {
    return double(splitmix(a ^ splitmix(b ^ splitmix(c))) >> 11) / double(1ULL << 53);
}

struct BoundaryCount {
    int count;
    double min_w;
};

// Winding of W around the rectangle boundary by adaptive phase sampling.
// Uses the per-evaluation-normalized mismatch: its phase equals the analytic
// W's exactly (the stripped envelope is real positive) and its magnitude has
// O(1) dynamic range, so the near-zero guard is meaningful.
BoundaryCount wronskian_winding(const WronskianEvaluator& W, const Rect& r) {
    std::vector<cplx> pts = {r.lo, cplx(r.hi.real(), r.lo.imag()), r.hi, cplx(r.lo.real(), r.hi.imag()), r.lo};
    struct Node {
        cplx e;
        cplx w;
    };
    auto raw = [&](cplx e) { return W.shoot(e).w_raw; };
    std::vector<Node> nodes;
    for (size_t s = 0; s + 1 < pts.size(); ++s) {
        int n0 = 6;
        for (int i = 0; i < n0; ++i) {
            cplx e = pts[s] + (pts[s + 1] - pts[s]) * (double(i) / n0);
            nodes.push_back({e, raw(e)});
        }
    }
    nodes.push_back({pts.back(), nodes.front().w});

    double wmax = 0.0;
    for (auto& n : nodes) wmax = std::max(wmax, std::abs(n.w));

    // refine intervals until the phase step is resolved
    double total = 0.0;
    double min_w = wmax;
    for (size_t i = 0; i + 1 < nodes.size(); ++i) {
        std::vector<Node> stack = {nodes[i], nodes[i + 1]};
        // resolve [a,b] recursively
        std::vector<Node> work;
        std::vector<std::pair<Node, Node>> todo = {{nodes[i], nodes[i + 1]}};
        int safety = 0;
        while (!todo.empty()) {
            auto [a, b] = todo.back();
            todo.pop_back();
            double dphi = std::arg(b.w / a.w);
            bool small_w = std::min(std::abs(a.w), std::abs(b.w)) < 1e-7 * wmax;
            if ((std::abs(dphi) < 1.2 && !small_w) || std::abs(b.e - a.e) < 1e-9 * (1.0 + std::abs(a.e))) {
                if (small_w) throw Error(ErrorCode::Accuracy, "wronskian nearly vanishes on the scan boundary");
                total += dphi;
                min_w = std::min({min_w, std::abs(a.w), std::abs(b.w)});
                continue;
            }
            if (++safety > 4000) throw Error(ErrorCode::Accuracy, "boundary phase refinement overflow");
            cplx mid = 0.5 * (a.e + b.e);
            Node m{mid, raw(mid)};
            todo.push_back({m, b});
            todo.push_back({a, m});
        }
    }
    double winding = total / (2.0 * kPi);
    int c = static_cast<int>(std::lround(winding));
    if (std::abs(winding - c) > 0.05)
        throw Error(ErrorCode::Accuracy, "non-integer winding over scan cell");
    return {c, min_w / wmax};
}

void scan_cell(const WronskianEvaluator& W, Rect r, int count, int depth, uint64_t seed,
               std::vector<cplx>& found, int max_levels) {
    if (count <= 0) return;
    if (static_cast<int>(found.size()) >= max_levels) return;
    if (count == 1 || depth > 40) {
        // polish must land inside this cell; Newton can escape to a
        // neighboring zero when the basin boundary cuts the cell
        double mx = 1e-7 * (1.0 + r.diameter());
        std::vector<cplx> starts = {r.center(),
                                    r.center() + cplx(0.2 * r.width(), 0.1 * r.height()),
                                    r.center() - cplx(0.2 * r.width(), 0.1 * r.height()),
                                    r.center() + cplx(-0.15 * r.width(), 0.2 * r.height()),
                                    r.center() + cplx(0.15 * r.width(), -0.2 * r.height())};
        for (cplx s0 : starts) {
            try {
                NewtonResult nr = newton_on_w(W, s0, 1e-9, 60);
                Rect padded{r.lo - cplx(mx, mx), r.hi + cplx(mx, mx)};
                if (padded.contains(nr.E)) {
                    found.push_back(nr.E);
                    return;
                }
            } catch (const Error&) {
            }
        }
        if (depth <= 40 && r.diameter() > 1e-6) {
            // keep halving: a small enough cell tames the basin
        } else {
            throw Error(ErrorCode::Accuracy, "cell polish kept escaping the cell");
        }
    }
    bool split_x = r.width() >= r.height();
    for (int attempt = 0; attempt < 5; ++attempt) {
        double f = 0.5 + 0.06 * (hash01(seed, depth * 8191 + attempt, found.size()) - 0.5);
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
        try {
            auto c1 = wronskian_winding(W, r1);
            auto c2 = wronskian_winding(W, r2);
            if (c1.count + c2.count != count) continue; // zero too close to the split line
            scan_cell(W, r1, c1.count, depth + 1, splitmix(seed), found, max_levels);
            scan_cell(W, r2, c2.count, depth + 1, splitmix(seed) ^ 1, found, max_levels);
            return;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Accuracy) throw;
            // jitter the split and retry
        }
    }
    throw Error(ErrorCode::Accuracy, "could not split scan cell cleanly");
}

} // namespace

std::vector<EigenPair> spectrum_scan(const ModelSpec& spec, const Rect& window, const ScanOptions& opts) {
    if (!(window.width() > 0 && window.height() > 0))
        throw Error(ErrorCode::Config, "scan window must have positive area");
    ShootingOptions so;
    so.rel_tol = opts.rel_tol;
    so.L = default_shoot_L(spec, window.lo) ;
    so.L = std::max(so.L, default_shoot_L(spec, window.hi));
    WronskianEvaluator W(spec, so);

    Rect r = window;
    std::vector<cplx> found;
    for (int attempt = 0;; ++attempt) {
        try {
            auto bc = wronskian_winding(W, r);
            scan_cell(W, r, bc.count, 0, splitmix(opts.seed + attempt), found, opts.max_levels);
            break;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Accuracy || attempt >= 4) throw;
            double jx = 1e-4 * r.width() * (1.0 + hash01(opts.seed, attempt, 7));
            double jy = 1e-4 * r.height() * (1.0 + hash01(opts.seed, attempt, 13));
            r.lo -= cplx(jx, jy);
            r.hi += cplx(jx, jy);
            found.clear();
        }
    }

    std::sort(found.begin(), found.end(), [](cplx a, cplx b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    std::vector<EigenPair> out;
    for (cplx e : found) {
        bool dup = false;
        for (auto& p : out)
            if (std::abs(p.E - e) < opts.merge_tol_rel * (1.0 + std::abs(e))) {
                dup = true;
                break;
            }
        EigenPair p;
        p.spec = spec;
        p.E = e;
        p.branch = classify_branch(e);
        p.residual_w = std::abs(W.shoot(e).w_raw);
        p.tol = opts.rel_tol;
        p.shoot_L = W.L(e);
        p.duplicate = dup;
        if (!dup && opts.attach_labels) attach_node_labels(p, opts.seed);
        if (!dup) out.push_back(p);
    }
    return out;
}

int count_levels_in_window(const ModelSpec& spec, const Rect& window, double rel_tol) {
    ShootingOptions so;
    so.rel_tol = rel_tol;
    so.L = std::max(default_shoot_L(spec, window.lo), default_shoot_L(spec, window.hi));
    WronskianEvaluator W(spec, so);
    return wronskian_winding(W, window).count;
}

std::string EigenPair::to_json() const {
    json j;
    j["family"] = family_name(spec.family);
    j["params"] = json::parse(spec.to_json());
    j["re_E"] = E.real();
    j["im_E"] = E.imag();
    j["label"] = label;
    j["label_scheme"] = label_scheme_name(label_scheme);
    j["branch"] = branch_name(branch);
    j["residual_w"] = residual_w;
    j["nodes_lower"] = nodes_lower;
    j["nodes_upper"] = nodes_upper;
    j["nodes_imag"] = nodes_imag;
    if (quantization_residual >= 0) j["quantization_residual"] = quantization_residual;
    return j.dump();
}

EigenfunctionEvaluator::EigenfunctionEvaluator(ModelSpec spec, cplx E)
    : EigenfunctionEvaluator(std::move(spec), E, Options{}) {}

EigenfunctionEvaluator::EigenfunctionEvaluator(ModelSpec spec, cplx E, Options opts)
    : spec_(std::move(spec)), E_(E) {
    spec_.validate();
    L_ = opts.L > 0 ? opts.L : default_shoot_L(spec_, E);
    tol_ = opts.rel_tol;
    match_x_ = opts.match ? *opts.match : default_match_point(spec_, E);

    IntegrateOptions io;
    io.rel_tol = tol_;
    io.dense = true;

    auto shoot_side = [&](double x0) {
        auto ray = ComplexPath::ray(cplx(x0, 0.0), cplx(x0 > 0 ? 1.0 : -1.0, 0.0), 1.0);
        WaveState w = recessive_init(spec_, E_, ray);
        auto res = integrate(spec_, E_, ComplexPath::segments({cplx(x0, 0.0), cplx(match_x_, 0.0)}), w, io);
        std::vector<WaveState> chain;
        chain.reserve(res.samples.size());
        for (auto& s : res.samples) chain.push_back({s.z, s.psi, s.dpsi, s.log_scale});
        return chain;
    };

    right_chain_ = shoot_side(L_);
    left_chain_ = shoot_side(-L_);

    const WaveState& R = right_chain_.back();
    const WaveState& Lst = left_chain_.back();
    // least-squares ratio c with psi_right ~ c * psi_left at the match point
    cplx num = R.psi * std::conj(Lst.psi) + R.dpsi * std::conj(Lst.dpsi);
    double den = std::norm(Lst.psi) + std::norm(Lst.dpsi);
    left_scale_ = num / den;
    left_log_offset_ = R.log_scale - Lst.log_scale;
    double w = std::abs(R.psi * Lst.dpsi - R.dpsi * Lst.psi);
    // normalize by the state norms, not the products (psi may vanish at the
    // matching point for odd-like states)
    double sc = std::hypot(std::abs(R.psi), std::abs(R.dpsi)) *
                    std::hypot(std::abs(Lst.psi), std::abs(Lst.dpsi)) +
                1e-300;
    matching_defect_ = w / sc;
}

const WaveState& EigenfunctionEvaluator::pick_start(cplx z, bool& left_side) const {
    double x = z.real();
    left_side = x < match_x_;
    const auto& chain = left_side ? left_chain_ : right_chain_;
    // chains run from the outer anchor towards the match point
    size_t lo = 0, hi = chain.size() - 1;
    auto outside = [&](const WaveState& w) {
        return left_side ? w.z.real() <= x : w.z.real() >= x;
    };
    if (!outside(chain.front()))
        throw Error(ErrorCode::Domain, "evaluation point outside the shooting range");
    while (lo < hi) {
        size_t mid = (lo + hi + 1) / 2;
        if (outside(chain[mid]))
            lo = mid;
        else
            hi = mid - 1;
    }
    return chain[lo];
}

EigenfunctionEvaluator::Value EigenfunctionEvaluator::transport(const WaveState& from, cplx to,
                                                                bool left_side) const {
    WaveState st = from;
    Value v;
    if (to != st.z) {
        std::vector<cplx> pts;
        pts.push_back(st.z);
        cplx corner = cplx(to.real(), st.z.imag());
        if (corner != st.z && corner != to) pts.push_back(corner);
        pts.push_back(to);
        IntegrateOptions io;
        io.rel_tol = tol_;
        auto res = integrate(spec_, E_, ComplexPath::segments(pts), st, io);
        st = res.state;
    }
    v.psi = st.psi;
    v.dpsi = st.dpsi;
    v.log_scale = st.log_scale;
    if (left_side) {
        v.psi *= left_scale_;
        v.dpsi *= left_scale_;
        v.log_scale += left_log_offset_;
    }
    return v;
}

EigenfunctionEvaluator::Value EigenfunctionEvaluator::at(cplx z) const {
    bool left;
    const WaveState& start = pick_start(z, left);
    return transport(start, z, left);
}

EigenfunctionEvaluator::LoopResult EigenfunctionEvaluator::loop_winding(const Rect& rect) const {
    // start at the boundary point nearest the real axis chain
    int corner = rect.hi.imag() <= 0 ? 3 : 0; // upper-left for submerged rects, lower-left otherwise
    return loop_winding(ComplexPath::rectangle(rect.lo, rect.hi, corner));
}

EigenfunctionEvaluator::LoopResult EigenfunctionEvaluator::loop_winding(const ComplexPath& loop) const {
    if (!loop.closed()) throw Error(ErrorCode::Config, "winding needs a closed loop");
    cplx start = loop.vertices.front();
    bool left;
    const WaveState& anchor = pick_start(start, left);
    Value v0 = transport(anchor, start, left);

    WaveState st{start, v0.psi, v0.dpsi, v0.log_scale};
    IntegrateOptions io;
    io.rel_tol = tol_;
    io.phase_track = true;
    io.dense = true;
    auto res = integrate(spec_, E_, loop, st, io);

    LoopResult lr;
    lr.winding = res.phase / (2.0 * kPi);
    lr.min_psi_dist = 1e300;
    for (auto& s : res.samples) {
        double d = std::abs(s.dpsi) > 0 ? std::abs(s.psi) / std::abs(s.dpsi) : 1e300;
        lr.min_psi_dist = std::min(lr.min_psi_dist, d);
    }
    // after a closed loop the state must reproduce itself; an angular mismatch
    // already shows up as a non-integer winding, so the magnitude part suffices
    double mag = std::log(std::abs(res.state.psi)) + res.state.log_scale -
                 (std::log(std::abs(v0.psi)) + v0.log_scale);
    lr.closure_err = std::abs(mag);
    return lr;
}

std::vector<DenseSample> EigenfunctionEvaluator::axis_profile(double y_from, double y_to,
                                                              double max_step) const {
    bool left;
    const WaveState& anchor = pick_start(cplx(0.0, 0.0), left);
    Value v0 = transport(anchor, cplx(0.0, 0.0), left);
    WaveState st{cplx(0.0, 0.0), v0.psi, v0.dpsi, v0.log_scale};

    IntegrateOptions io;
    io.rel_tol = tol_;
    if (y_from != 0.0) {
        auto res = integrate(spec_, E_, ComplexPath::segments({st.z, cplx(0.0, y_from)}), st, io);
        st = res.state;
    }
    io.dense = true;
    io.max_step = max_step;
    auto res = integrate(spec_, E_, ComplexPath::segments({st.z, cplx(0.0, y_to)}), st, io);
    return res.samples;
}

} // namespace bwlab
