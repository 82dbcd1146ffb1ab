#include "bwlab/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <nlohmann/json.hpp>

namespace bwlab {

using nlohmann::json;

const char* family_name(Family f) {
    switch (f) {
        case Family::Hbar: return "hbar";
        case Family::BetaTilde: return "beta";
        case Family::AlphaHat: return "alpha";
        case Family::KDelta: return "kdelta";
        case Family::RealCubic: return "real";
    }
    return "?";
}

std::optional<Family> family_from_name(const std::string& s) {
    if (s == "hbar") return Family::Hbar;
    if (s == "beta") return Family::BetaTilde;
    if (s == "alpha") return Family::AlphaHat;
    if (s == "kdelta") return Family::KDelta;
    if (s == "real") return Family::RealCubic;
    return std::nullopt;
}

namespace consts {

cplx c_pm(int sign) {
    double s = sign >= 0 ? 1.0 : -1.0;
    return std::pow(3.0, 0.25) * std::polar(1.0, s * kPi / 4.0);
}

cplx beta_pm(double hbar, int sign) {
    return std::polar(std::pow(3.0, -1.25) * hbar, beta_pm_arg(hbar, sign));
}

double beta_pm_arg(double hbar, int sign) {
    (void)hbar;
    double s = sign >= 0 ? 1.0 : -1.0;
    return -s * 5.0 * kPi / 4.0;
}

} // namespace consts

ModelSpec ModelSpec::hbar_family(cplx hb) {
    ModelSpec m;
    m.family = Family::Hbar;
    m.hbar = hb;
    return m;
}

ModelSpec ModelSpec::beta_family(cplx beta, std::optional<double> arg) {
    ModelSpec m;
    m.family = Family::BetaTilde;
    m.beta = beta;
    m.beta_arg = arg;
    return m;
}

ModelSpec ModelSpec::alpha_family(cplx alpha) {
    ModelSpec m;
    m.family = Family::AlphaHat;
    m.alpha = alpha;
    return m;
}

ModelSpec ModelSpec::kdelta_family(double k, double delta) {
    ModelSpec m;
    m.family = Family::KDelta;
    m.k = k;
    m.delta = delta;
    return m;
}

ModelSpec ModelSpec::real_cubic(double hb) {
    ModelSpec m;
    m.family = Family::RealCubic;
    m.hbar = hb;
    return m;
}

void ModelSpec::validate() const {
    switch (family) {
        case Family::Hbar:
        case Family::RealCubic:
            if (std::abs(hbar) == 0.0)
                throw Error(ErrorCode::Config, "hbar must be nonzero");
            if (std::abs(std::arg(hbar)) >= kPi / 4.0)
                throw Error(ErrorCode::Config,
                            "hbar outside the sector |arg hbar| < pi/4");
            break;
        case Family::BetaTilde: {
            double a = beta_argument();
            // cut plane for the principal parametrization; continued arguments
            // (set via beta_arg by scale maps) are allowed up to |arg| < 3pi/2.
            double lim = beta_arg ? 1.5 * kPi : kPi;
            if (std::abs(beta) != 0.0 && std::abs(a) >= lim)
                throw Error(ErrorCode::Config, "arg(beta) outside the cut plane");
            break;
        }
        case Family::AlphaHat:
            // the eigenvalue branches are holomorphic on |arg alpha| < 4pi/5;
            // the negative real axis is the hbar image alpha = -hb^{-4/5} and
            // stays admissible (the operator family itself is entire in alpha)
            if (std::abs(alpha) != 0.0 && std::abs(std::arg(alpha)) > 4.0 * kPi / 5.0 &&
                std::abs(alpha.imag()) > 1e-14 * std::abs(alpha))
                throw Error(ErrorCode::Config,
                            "alpha outside the sector |arg alpha| < 4pi/5 (and not real negative)");
            break;
        case Family::KDelta:
            if (k <= 0.0)
                throw Error(ErrorCode::Config, "k must be positive");
            break;
    }
}

double ModelSpec::beta_argument() const {
    if (beta_arg) return *beta_arg;
    return std::arg(beta);
}

cplx ModelSpec::potential(cplx z) const {
    z += translation;
    const cplx i(0.0, 1.0);
    switch (family) {
        case Family::Hbar: return i * (z * z * z - z);
        case Family::BetaTilde: {
            cplx sb = pow_continued(beta, 0.5, beta_arg);
            return z * z + i * sb * z * z * z;
        }
        case Family::AlphaHat: return i * (z * z * z + alpha * z);
        case Family::KDelta: return i * (z * z * z - delta * z);
        case Family::RealCubic: return z * z * z - z;
    }
    return 0.0;
}

cplx ModelSpec::dpotential(cplx z) const {
    z += translation;
    const cplx i(0.0, 1.0);
    switch (family) {
        case Family::Hbar: return i * (3.0 * z * z - 1.0);
        case Family::BetaTilde: {
            cplx sb = pow_continued(beta, 0.5, beta_arg);
            return 2.0 * z + 3.0 * i * sb * z * z;
        }
        case Family::AlphaHat: return i * (3.0 * z * z + alpha);
        case Family::KDelta: return i * (3.0 * z * z - delta);
        case Family::RealCubic: return 3.0 * z * z - 1.0;
    }
    return 0.0;
}

cplx ModelSpec::lead_coeff() const {
    const cplx i(0.0, 1.0);
    switch (family) {
        case Family::Hbar:
        case Family::AlphaHat:
        case Family::KDelta: return i;
        case Family::BetaTilde:
            if (std::abs(beta) == 0.0) return cplx(1.0, 0.0);
            return i * pow_continued(beta, 0.5, beta_arg);
        case Family::RealCubic: return cplx(1.0, 0.0);
    }
    return 1.0;
}

int ModelSpec::degree() const {
    if (family == Family::BetaTilde && std::abs(beta) == 0.0) return 2;
    return 3;
}

cplx ModelSpec::hbar_eff() const {
    switch (family) {
        case Family::Hbar:
        case Family::RealCubic: return hbar;
        case Family::KDelta: return cplx(k, 0.0);
        default: return cplx(1.0, 0.0);
    }
}

cplx pow_continued(cplx b, double p, std::optional<double> arg) {
    double r = std::abs(b);
    if (r == 0.0) return cplx(0.0, 0.0);
    double a = arg ? *arg : std::arg(b);
    return std::polar(std::pow(r, p), p * a);
}

cplx potential(const ModelSpec& spec, cplx z) {
    spec.validate();
    return spec.potential(z);
}

std::vector<StationaryPoint> stationary_points(const ModelSpec& spec) {
    spec.validate();
    std::vector<StationaryPoint> out;
    const double xs = 1.0 / std::sqrt(3.0);
    switch (spec.family) {
        case Family::Hbar:
        case Family::RealCubic:
            out.push_back({-xs, spec.potential(-xs), 1});
            out.push_back({xs, spec.potential(xs), 1});
            break;
        case Family::KDelta: {
            cplx r = std::sqrt(cplx(spec.delta / 3.0));
            out.push_back({-r, spec.potential(-r), 1});
            out.push_back({r, spec.potential(r), 1});
            break;
        }
        case Family::AlphaHat: {
            if (std::abs(spec.alpha) == 0.0) {
                out.push_back({0.0, spec.potential(0.0), 2});
            } else {
                cplx r = std::sqrt(-spec.alpha / 3.0);
                out.push_back({-r, spec.potential(-r), 1});
                out.push_back({r, spec.potential(r), 1});
            }
            break;
        }
        case Family::BetaTilde: {
            if (std::abs(spec.beta) == 0.0) {
                out.push_back({0.0, 0.0, 1});
            } else {
                // V' = 2z + 3 i sb z^2 = 0: z = 0 and z = 2i/(3 sb)
                cplx sb = pow_continued(spec.beta, 0.5, spec.beta_arg);
                cplx r = cplx(0.0, 2.0) / (3.0 * sb);
                out.push_back({0.0, spec.potential(0.0), 1});
                out.push_back({r, spec.potential(r), 1});
            }
            break;
        }
    }
    std::sort(out.begin(), out.end(), [](const StationaryPoint& a, const StationaryPoint& b) {
        if (a.z.real() != b.z.real()) return a.z.real() < b.z.real();
        return a.z.imag() < b.z.imag();
    });
    return out;
}

namespace {

// Monic cubic z^3 + a2 z^2 + a1 z + a0 by Cardano, one Newton polish per root.
std::array<cplx, 3> cubic_roots(cplx a2, cplx a1, cplx a0) {
    const cplx third = cplx(1.0 / 3.0);
    cplx p = a1 - a2 * a2 * third;
    cplx q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 * third + a0;
    cplx disc = q * q / 4.0 + p * p * p / 27.0;
    cplx sd = std::sqrt(disc);
    cplx u3 = -q / 2.0 + sd;
    if (std::abs(u3) < std::abs(-q / 2.0 - sd)) u3 = -q / 2.0 - sd;
    cplx u = std::pow(u3, third);
    std::array<cplx, 3> roots;
    const cplx w = std::polar(1.0, 2.0 * kPi / 3.0);
    for (int k = 0; k < 3; ++k) {
        cplx uk = u * std::pow(w, k);
        cplx t = std::abs(uk) > 0 ? uk - p / (3.0 * uk) : cplx(0.0);
        roots[k] = t - a2 * third;
    }
    for (auto& r : roots) {
        for (int it = 0; it < 3; ++it) {
            cplx f = ((r + a2) * r + a1) * r + a0;
            cplx df = (3.0 * r + 2.0 * a2) * r + a1;
            if (std::abs(df) < 1e-14 * (1.0 + std::abs(r))) break;
            cplx step = f / df;
            if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
            r -= step;
        }
    }
    return roots;
}

// Coefficients of V(z) - E = 0 as a monic polynomial (degree 3, or 2 at beta=0).
struct PolyEq {
    int degree;
    cplx a2, a1, a0; // monic z^3 + a2 z^2 + a1 z + a0  (degree 3)
    cplx b0;         // monic z^2 + b0                  (degree 2)
};

PolyEq poly_of(const ModelSpec& spec, cplx E) {
    const cplx i(0.0, 1.0);
    PolyEq p{};
    switch (spec.family) {
        case Family::Hbar:
            p = {3, 0.0, -1.0, i * E, 0.0};
            break;
        case Family::AlphaHat:
            p = {3, 0.0, spec.alpha, i * E, 0.0};
            break;
        case Family::KDelta:
            p = {3, 0.0, -spec.delta, i * E, 0.0};
            break;
        case Family::RealCubic:
            p = {3, 0.0, -1.0, -E, 0.0};
            break;
        case Family::BetaTilde: {
            if (std::abs(spec.beta) == 0.0) {
                p = {2, 0.0, 0.0, 0.0, -E};
            } else {
                cplx isb = i * pow_continued(spec.beta, 0.5, spec.beta_arg);
                p = {3, 1.0 / isb, 0.0, -E / isb, 0.0};
            }
            break;
        }
    }
    return p;
}

std::vector<cplx> solve_poly(const PolyEq& p) {
    if (p.degree == 2) {
        cplx r = std::sqrt(-p.b0);
        return {r, -r};
    }
    auto rr = cubic_roots(p.a2, p.a1, p.a0);
    return {rr[0], rr[1], rr[2]};
}

double root_scale(const std::vector<cplx>& roots) {
    double s = 1.0;
    for (auto& r : roots) s = std::max(s, std::abs(r));
    return s;
}

// Greedy nearest matching of new roots to previous ones (3 roots: exact
// assignment over the 6 permutations).
std::vector<int> match_roots(const std::vector<cplx>& prev, const std::vector<cplx>& cur) {
    size_t n = prev.size();
    std::vector<int> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
    std::vector<int> best = idx;
    double best_cost = 1e300;
    std::sort(idx.begin(), idx.end());
    do {
        double cost = 0;
        for (size_t i = 0; i < n; ++i) cost += std::abs(cur[idx[i]] - prev[i]);
        if (cost < best_cost) {
            best_cost = cost;
            best = idx;
        }
    } while (std::next_permutation(idx.begin(), idx.end()));
    return best;
}

bool px_symmetric_config(const ModelSpec& spec, cplx E) {
    if (std::abs(E.imag()) > 1e-12 * (1.0 + std::abs(E))) return false;
    switch (spec.family) {
        case Family::Hbar:
        case Family::KDelta:
        case Family::RealCubic: return true;
        case Family::AlphaHat: return std::abs(spec.alpha.imag()) < 1e-14 * (1.0 + std::abs(spec.alpha));
        case Family::BetaTilde: return std::abs(spec.beta) == 0.0;
    }
    return false;
}

void assign_labels_real(const ModelSpec& spec, std::vector<TurningPoint>& tps) {
    if (spec.family == Family::RealCubic || (spec.family == Family::BetaTilde)) {
        // all-real ordering: leftmost is I0 for the real cubic; harmonic has
        // just the pair I-+.
        std::sort(tps.begin(), tps.end(), [](const TurningPoint& a, const TurningPoint& b) {
            return a.z.real() < b.z.real();
        });
        if (spec.family == Family::RealCubic && tps.size() == 3) {
            tps[0].labels = {TpLabel::I0};
            tps[1].labels = {TpLabel::Iminus};
            tps[2].labels = {TpLabel::Iplus};
        } else {
            if (!tps.empty()) tps.front().labels = {TpLabel::Iminus};
            if (tps.size() > 1) tps.back().labels = {TpLabel::Iplus};
        }
        return;
    }
    // P_x convention: the purely imaginary root is I0, the mirror pair I-+.
    double scale = 1.0;
    for (auto& t : tps) scale = std::max(scale, std::abs(t.z));
    auto imag_it = std::min_element(tps.begin(), tps.end(), [](const TurningPoint& a, const TurningPoint& b) {
        return std::abs(a.z.real()) < std::abs(b.z.real());
    });
    for (auto& t : tps) {
        if (&t == &*imag_it)
            t.labels = {TpLabel::I0};
        else if (t.z.real() > imag_it->z.real())
            t.labels = {TpLabel::Iplus};
        else
            t.labels = {TpLabel::Iminus};
    }
}

} // namespace

const TurningPoint& TurningPointSet::get(TpLabel l) const {
    for (auto& t : roots)
        for (auto lab : t.labels)
            if (lab == l) return t;
    throw Error(ErrorCode::Domain, "turning point label not present");
}

bool TurningPointSet::has(TpLabel l) const {
    for (auto& t : roots)
        for (auto lab : t.labels)
            if (lab == l) return true;
    return false;
}

TurningPointSet turning_points(const ModelSpec& spec, cplx E) {
    spec.validate();
    if (!std::isfinite(E.real()) || !std::isfinite(E.imag()))
        throw Error(ErrorCode::Domain, "energy must be finite");

    auto eval = [&](cplx En) { return solve_poly(poly_of(spec, En)); };
    std::vector<cplx> roots = eval(E);
    double scale = root_scale(roots);

    TurningPointSet out;
    out.energy = E;

    // multiplicity tagging, tolerance 1e-8 on separation
    const double mtol = 1e-8 * scale;
    std::vector<int> group(roots.size(), -1);
    int ng = 0;
    for (size_t i = 0; i < roots.size(); ++i) {
        if (group[i] >= 0) continue;
        group[i] = ng;
        for (size_t j = i + 1; j < roots.size(); ++j)
            if (group[j] < 0 && std::abs(roots[j] - roots[i]) < mtol) group[j] = ng;
        ++ng;
    }
    std::vector<TurningPoint> tps(ng);
    std::vector<cplx> sums(ng, 0.0);
    std::vector<int> counts(ng, 0);
    for (size_t i = 0; i < roots.size(); ++i) {
        sums[group[i]] += roots[i];
        counts[group[i]] += 1;
    }
    for (int g = 0; g < ng; ++g) {
        tps[g].z = sums[g] / double(counts[g]);
        tps[g].multiplicity = counts[g];
    }
    out.degenerate = (ng < static_cast<int>(roots.size()));

    if (px_symmetric_config(spec, E)) {
        assign_labels_real(spec, tps);
    } else if (out.degenerate) {
        // collisions in this family occur with the I-+ pair merging
        auto far_it = std::max_element(tps.begin(), tps.end(), [](const TurningPoint& a, const TurningPoint& b) {
            return a.multiplicity > b.multiplicity;
        });
        for (auto& t : tps) {
            if (t.multiplicity > 1)
                t.labels = {TpLabel::Iminus, TpLabel::Iplus};
            else
                t.labels = {TpLabel::I0};
        }
        (void)far_it;
    } else {
        // continuity from a real reference energy along a straight segment
        double eref = std::max(std::abs(E), 0.5);
        ModelSpec ref_spec = spec;
        if (spec.family == Family::AlphaHat) ref_spec.alpha = cplx(spec.alpha.real(), 0.0);
        std::vector<cplx> prev = eval(cplx(eref, 0.0));
        std::vector<TurningPoint> ref_tps(prev.size());
        for (size_t i = 0; i < prev.size(); ++i) ref_tps[i].z = prev[i];
        assign_labels_real(spec, ref_tps);
        std::vector<std::vector<TpLabel>> labels(prev.size());
        for (size_t i = 0; i < prev.size(); ++i) {
            prev[i] = ref_tps[i].z;
            labels[i] = ref_tps[i].labels;
        }
        int steps = 24;
        for (int attempt = 0; attempt < 6; ++attempt) {
            bool ok = true;
            std::vector<cplx> cur_prev = prev;
            auto cur_labels = labels;
            for (int s = 1; s <= steps; ++s) {
                cplx Es = cplx(eref, 0.0) + (E - cplx(eref, 0.0)) * (double(s) / steps);
                std::vector<cplx> cur = eval(Es);
                // collision along the path: refine
                double mind = 1e300;
                for (size_t i = 0; i < cur.size(); ++i)
                    for (size_t j = i + 1; j < cur.size(); ++j)
                        mind = std::min(mind, std::abs(cur[i] - cur[j]));
                double move = 0;
                auto m = match_roots(cur_prev, cur);
                std::vector<cplx> nxt(cur.size());
                for (size_t i = 0; i < cur.size(); ++i) {
                    nxt[i] = cur[m[i]];
                    move = std::max(move, std::abs(nxt[i] - cur_prev[i]));
                }
                if (move > 0.45 * mind && s < steps) {
                    ok = false;
                    break;
                }
                cur_prev = nxt;
            }
            if (ok) {
                // map final matched positions onto tps
                for (auto& t : tps) {
                    size_t best = 0;
                    double bd = 1e300;
                    for (size_t i = 0; i < cur_prev.size(); ++i) {
                        double d = std::abs(cur_prev[i] - t.z);
                        if (d < bd) {
                            bd = d;
                            best = i;
                        }
                    }
                    t.labels = labels[best];
                }
                break;
            }
            steps *= 2;
        }
    }

    // Vieta residual against the monic polynomial coefficients
    PolyEq p = poly_of(spec, E);
    std::vector<cplx> rr;
    for (auto& t : tps)
        for (int m = 0; m < t.multiplicity; ++m) rr.push_back(t.z);
    if (p.degree == 3) {
        cplx s1 = rr[0] + rr[1] + rr[2];
        cplx s2 = rr[0] * rr[1] + rr[0] * rr[2] + rr[1] * rr[2];
        cplx s3 = rr[0] * rr[1] * rr[2];
        double sc = std::pow(root_scale(rr), 3.0);
        out.vieta_residual = std::max({std::abs(s1 + p.a2), std::abs(s2 - p.a1), std::abs(s3 + p.a0)}) / sc;
    } else {
        cplx s1 = rr[0] + rr[1];
        cplx s2 = rr[0] * rr[1];
        double sc = std::pow(root_scale(rr), 2.0);
        out.vieta_residual = std::max(std::abs(s1), std::abs(s2 - p.b0)) / sc;
    }
    out.roots = std::move(tps);
    return out;
}

ScaleMap ScaleMap::inverse() const {
    ScaleMap inv = *this;
    std::swap(inv.source, inv.target);
    std::swap(inv.source_spec, inv.target_spec);
    inv.energy_scale = 1.0 / energy_scale;
    inv.energy_offset = -energy_offset / energy_scale;
    inv.winding = -winding;
    return inv;
}

ScaleMap scale_map(const ModelSpec& source, Family target, const ScaleMapOptions& opts) {
    source.validate();
    ScaleMap m;
    m.source = source.family;
    m.target = target;
    m.source_spec = source;

    auto unsupported = [&]() -> Error {
        return Error(ErrorCode::Config,
                     std::string("unsupported scale map ") + family_name(source.family) + " -> " + family_name(target));
    };

    if (source.family == Family::Hbar && target == Family::AlphaHat) {
        // alpha = -hb^{-4/5},  E_alpha = hb^{-6/5} E
        cplx hb = source.hbar;
        double a = std::arg(hb);
        m.branch_arg = a;
        m.target_spec = ModelSpec::alpha_family(-pow_continued(hb, -0.8));
        m.energy_scale = pow_continued(hb, -1.2);
        m.energy_offset = 0.0;
        return m;
    }
    if (source.family == Family::AlphaHat && target == Family::Hbar) {
        cplx al = source.alpha;
        cplx hb = pow_continued(-al, -1.25);
        ScaleMap fwd = scale_map(ModelSpec::hbar_family(hb), Family::AlphaHat);
        ScaleMap inv = fwd.inverse();
        return inv;
    }
    if (source.family == Family::BetaTilde && target == Family::AlphaHat) {
        // E_beta = beta^{1/5} E_alpha - 2/(27 beta), alpha = 1/(3 beta^{4/5})
        if (std::abs(source.beta) == 0.0) throw Error(ErrorCode::Config, "beta = 0 has no alpha image");
        double a = source.beta_argument();
        m.branch_arg = a;
        m.winding = static_cast<int>(std::lround((a - std::arg(source.beta)) / (2.0 * kPi)));
        cplx b15 = pow_continued(source.beta, 0.2, a);
        cplx b45 = pow_continued(source.beta, 0.8, a);
        m.target_spec = ModelSpec::alpha_family(1.0 / (3.0 * b45));
        // E_alpha = beta^{-1/5} (E_beta + 2/(27 beta))
        m.energy_scale = 1.0 / b15;
        m.energy_offset = 2.0 / (27.0 * source.beta) / b15;
        return m;
    }
    if (source.family == Family::AlphaHat && target == Family::BetaTilde) {
        if (std::abs(source.alpha) == 0.0) throw Error(ErrorCode::Config, "alpha = 0 has no beta image");
        // beta = (3 alpha)^{-5/4}
        cplx beta = pow_continued(3.0 * source.alpha, -1.25);
        ScaleMap fwd = scale_map(ModelSpec::beta_family(beta), Family::AlphaHat);
        return fwd.inverse();
    }
    if (source.family == Family::Hbar && target == Family::BetaTilde) {
        // E_beta = (E -+ E0)/(hb c_pm), beta_pm = 3^{-5/4} exp(-+ i 5pi/4) hb
        if (std::abs(source.hbar.imag()) > 1e-14 * std::abs(source.hbar))
            throw Error(ErrorCode::Config, "Hbar -> BetaTilde map needs real hbar");
        double hb = source.hbar.real();
        int sign = opts.beta_sign >= 0 ? +1 : -1;
        cplx b = consts::beta_pm(hb, sign);
        double barg = consts::beta_pm_arg(hb, sign);
        m.branch_arg = barg;
        m.winding = sign > 0 ? -1 : +1;
        m.target_spec = ModelSpec::beta_family(b, barg);
        cplx denom = hb * consts::c_pm(sign);
        m.energy_scale = 1.0 / denom;
        m.energy_offset = (sign > 0 ? -consts::E0 : consts::E0) / denom;
        return m;
    }
    if (source.family == Family::Hbar && target == Family::KDelta) {
        // k = hb delta^{5/4}, E_k = delta^{3/2} E
        if (opts.delta <= 0.0) throw Error(ErrorCode::Config, "delta must be positive");
        if (std::abs(source.hbar.imag()) > 1e-14 * std::abs(source.hbar))
            throw Error(ErrorCode::Config, "Hbar -> KDelta map needs real hbar");
        double hb = source.hbar.real();
        double d = opts.delta;
        m.target_spec = ModelSpec::kdelta_family(hb * std::pow(d, 1.25), d);
        m.energy_scale = std::pow(d, 1.5);
        m.energy_offset = 0.0;
        return m;
    }
    throw unsupported();
}

std::string ModelSpec::to_json() const {
    json j;
    j["family"] = family_name(family);
    switch (family) {
        case Family::Hbar:
        case Family::RealCubic:
            j["hbar"] = hbar.real();
            if (hbar.imag() != 0.0) j["hbar_im"] = hbar.imag();
            break;
        case Family::BetaTilde:
            j["beta_re"] = beta.real();
            j["beta_im"] = beta.imag();
            if (beta_arg) j["beta_arg"] = *beta_arg;
            break;
        case Family::AlphaHat:
            j["alpha_re"] = alpha.real();
            j["alpha_im"] = alpha.imag();
            break;
        case Family::KDelta:
            j["k"] = k;
            j["delta"] = delta;
            break;
    }
    if (translation != cplx(0.0, 0.0)) {
        j["translation_re"] = translation.real();
        j["translation_im"] = translation.imag();
    }
    return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("bad model JSON: ") + e.what());
    }
    if (!j.contains("family") || !j["family"].is_string())
        throw Error(ErrorCode::Config, "model JSON missing \"family\"");
    auto fam = family_from_name(j["family"].get<std::string>());
    if (!fam) throw Error(ErrorCode::Config, "unknown family \"" + j["family"].get<std::string>() + "\"");
    ModelSpec m;
    m.family = *fam;
    auto num = [&](const char* key, double dflt) {
        if (!j.contains(key)) return dflt;
        if (!j[key].is_number()) throw Error(ErrorCode::Config, std::string("field ") + key + " must be a number");
        return j[key].get<double>();
    };
    switch (*fam) {
        case Family::Hbar:
        case Family::RealCubic: {
            double hb = num("hbar", 1.0);
            if (!(hb > 0.0)) throw Error(ErrorCode::Config, "hbar must be > 0");
            m.hbar = hb;
            break;
        }
        case Family::BetaTilde:
            m.beta = cplx(num("beta_re", 0.0), num("beta_im", 0.0));
            if (j.contains("beta_arg")) m.beta_arg = num("beta_arg", 0.0);
            break;
        case Family::AlphaHat:
            m.alpha = cplx(num("alpha_re", 0.0), num("alpha_im", 0.0));
            break;
        case Family::KDelta:
            m.k = num("k", 1.0);
            m.delta = num("delta", 1.0);
            break;
    }
    m.translation = cplx(num("translation_re", 0.0), num("translation_im", 0.0));
    m.validate();
    return m;
}

} // namespace bwlab
