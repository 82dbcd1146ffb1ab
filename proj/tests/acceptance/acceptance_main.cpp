// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bwlab.h"
#include "bwlab/continuation.hpp"
#include "bwlab/semiclassics.hpp"
#include "bwlab/zeros.hpp"

using namespace bwlab;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string details;
};

double now_s() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::string fmt(double x, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

// shared heavy state
CrossingReport g_report;
bool g_report_ok = false;
std::string g_report_err;

Outcome c1_harmonic_oracle() {
    Outcome o;
    bwlab_model* m = nullptr;
    if (bwlab_model_create_beta(0.0, 0.0, &m) != BWLAB_OK) {
        o.details = bwlab_last_error();
        return o;
    }
    bwlab_options opts;
    bwlab_options_default(&opts);
    opts.attach_labels = 0;
    char* js = nullptr;
    bwlab_status rc = bwlab_spectrum_scan(m, 0.0, -1.0, 12.0, 1.0, 16, &opts, &js);
    bwlab_model_destroy(m);
    if (rc != BWLAB_OK) {
        o.details = bwlab_last_error();
        return o;
    }
    json levels = json::parse(js);
    bwlab_string_free(js);
    if (levels.size() != 6) {
        o.details = "expected 6 levels, found " + std::to_string(levels.size());
        return o;
    }
    double worst = 0.0;
    for (int n = 0; n < 6; ++n) {
        double re = levels[n]["re_E"].get<double>();
        double im = levels[n]["im_E"].get<double>();
        worst = std::max({worst, std::abs(re - (2.0 * n + 1.0)), std::abs(im)});
    }
    o.pass = worst < 1e-8;
    o.details = "max |E_n - (2n+1)| = " + fmt(worst, 3);
    return o;
}

Outcome c2_critical_energy() {
    Outcome o;
    bwlab_model* m = nullptr;
    bwlab_model_create_hbar(1.0, &m);
    double v = 0, lo = 0, hi = 0;
    bwlab_status rc = bwlab_critical_energy(m, &v, &lo, &hi);
    bwlab_model_destroy(m);
    if (rc != BWLAB_OK) {
        o.details = bwlab_last_error();
        return o;
    }
    o.pass = std::abs(v - 0.352268) < 5e-4;
    o.details = "E^c = " + fmt(v, 8) + " (target 0.352268, bracket [" + fmt(lo, 8) + ", " + fmt(hi, 8) + "])";
    return o;
}

Outcome c3_perturbative_slope() {
    Outcome o;
    std::vector<double> hbs = {0.04, 0.02, 0.01};
    std::vector<double> errs;
    for (double hb : hbs) {
        SolveOptions so;
        so.attach_labels = false;
        so.shooting.rel_tol = hb <= 0.011 ? 1e-13 : 1e-12;
        auto spec = ModelSpec::hbar_family(hb);
        EigenPair p = solve_eigenvalue(spec, consts::E0 + hb * consts::c_pm(+1), so);
        errs.push_back(std::abs((p.E - consts::E0) / hb - consts::c_pm(+1)));
    }
    double r1 = errs[0] / errs[1];
    double r2 = errs[1] / errs[2];
    o.pass = r1 > 1.6 && r1 < 2.4 && r2 > 1.6 && r2 < 2.4;
    o.details = "slope errors " + fmt(errs[0], 4) + " / " + fmt(errs[1], 4) + " / " + fmt(errs[2], 4) +
                ", halving ratios " + fmt(r1, 3) + ", " + fmt(r2, 3);
    return o;
}

Outcome c4_branch_point_structure() {
    Outcome o;
    // self-contained (including the location) so the 5-minute budget is real
    BranchPoint bp = locate_branch_point(0);
    std::ostringstream d;
    bool ok = true;

    double smax = 0.0;
    for (auto& [h, s] : bp.s_samples) smax = std::max(smax, std::abs(s.real()));
    bool s_real = bp.im_s_max < 1e-5 * smax;
    bool s_linear = bp.re_s_linear_r2 > 0.98;
    ok &= s_real && s_linear;
    d << "dE^2 analytic: max|Im s|/|s| = " << fmt(bp.im_s_max / smax, 2)
      << ", Re s linear R^2 = " << fmt(bp.re_s_linear_r2, 4);

    bool expo = bp.fit.exponent >= 0.45 && bp.fit.exponent <= 0.55;
    ok &= expo;
    d << "; sqrt exponent = " << fmt(bp.fit.exponent, 4);

    try {
        MonodromyResult mr = monodromy_loop(bp, 0.1 * bp.hbar_n);
        ok &= mr.is_transposition && mr.double_loop_identity;
        d << "; monodromy = " << (mr.is_transposition ? "(0 1)" : "identity");
    } catch (const Error& e) {
        ok = false;
        d << "; monodromy failed: " << e.what();
    }

    try {
        EdgeCheck ec = edge_assignment_check(bp, 0.8, 1e-3);
        bool edges = ec.diff_minus_plus < 5e-3 && ec.diff_plus_minus < 5e-3;
        ok &= edges;
        d << "; edge diffs " << fmt(ec.diff_minus_plus, 3) << ", " << fmt(ec.diff_plus_minus, 3);
    } catch (const Error& e) {
        ok = false;
        d << "; edge check failed: " << e.what();
    }

    o.pass = ok;
    o.details = d.str();
    return o;
}

Outcome c5_selection_rules() {
    Outcome o;
    if (!g_report_ok) {
        o.details = "branch points unavailable: " + g_report_err;
        return o;
    }
    std::ostringstream d;
    bool ok = true;
    for (int n = 0; n <= 2; ++n) {
        const BranchPoint& bp = g_report.rows[n];
        // the coalescing labels are measured by node counts at the anchor
        // inside locate_branch_point; a mismatched pair cannot get here
        bool pair_ok = bp.m_minus == 2 * n && bp.m_plus == 2 * n + 1 && bp.m_minus % 2 == 0;
        ok &= pair_ok;
        ok &= bp.secondary_coalescences.empty(); // no (odd, even+1) pair in range
        d << "n=" << n << ":(" << bp.m_minus << "," << bp.m_plus << ") ";
    }
    o.pass = ok;
    o.details = d.str() + "- no odd-first pair coalesces in the scanned range";
    return o;
}

Outcome c6_node_laws() {
    Outcome o;
    std::ostringstream d;
    bool ok = true;
    double hb = 3.0;
    auto spec = ModelSpec::hbar_family(hb);
    for (int mlab = 0; mlab <= 3; ++mlab) {
        cplx seed = solve_wkb_level(spec, mlab, hb, WkbScheme::CC3);
        SolveOptions so;
        so.attach_labels = false;
        EigenPair p = solve_eigenvalue(spec, seed, so);
        EigenfunctionEvaluator ef(p.spec, p.E);
        ZeroSet zs = node_zero_set(ef);
        int imag = 0;
        for (auto& z : zs.zeros)
            if (z.cls == ZeroClass::ImaginaryNode) imag++;
        bool count_ok = static_cast<int>(zs.zeros.size()) == mlab && zs.count_rho == mlab;
        bool imag_ok = imag == (mlab % 2);
        // P_x-symmetric zero set within 1e-7 pairing distance
        bool sym_ok = true;
        for (auto& z : zs.zeros) {
            bool found = false;
            for (auto& w : zs.zeros)
                if (std::abs(w.z - (-std::conj(z.z))) < 1e-7) found = true;
            sym_ok &= found;
        }
        ok &= count_ok && imag_ok && sym_ok;
        d << "m=" << mlab << ":" << zs.count_rho << " in C_rho," << imag << " imag"
          << (sym_ok ? "" : ",asym") << "; ";
    }
    o.pass = ok;
    o.details = d.str();
    return o;
}

Outcome c7_loeffel_martin() {
    Outcome o;
    double hb = 0.05;
    auto spec = ModelSpec::hbar_family(hb);
    SolveOptions so;
    so.attach_labels = false;
    EigenPair p = solve_eigenvalue(spec, -consts::E0 + hb * consts::c_pm(-1), so);
    EigenfunctionEvaluator ef(p.spec, p.E);
    auto lm = loeffel_martin_check(ef, 0.0, 12.0);
    o.pass = lm.rel_err < 0.02;
    o.details = "lhs = " + fmt(lm.lhs, 6) + ", rhs = " + fmt(lm.rhs, 6) +
                ", rel err = " + fmt(lm.rel_err, 3) + " (tail " + fmt(lm.tail, 3) + ")";
    return o;
}

Outcome c8_escape_asymptote() {
    Outcome o;
    bwlab_model* m = nullptr;
    bwlab_model_create_hbar(1.0, &m);
    double cfit = 0, res = 0;
    bwlab_status rc = bwlab_escape_asymptote(m, 0.0, consts::c, &cfit, &res);
    bwlab_model_destroy(m);
    if (rc != BWLAB_OK) {
        o.details = bwlab_last_error();
        return o;
    }
    o.pass = std::abs(cfit - consts::c) < 0.01 * consts::c;
    o.details = "fitted c = " + fmt(cfit, 6) + " vs 2/(3 sqrt 3) = " + fmt(consts::c, 6);
    return o;
}

Outcome c9_wkb_order() {
    Outcome o;
    std::ostringstream d;
    bool ok = true;
    // |E_exact - E_wkb| should fall ~4x when hbar halves (CC1, plus branch)
    std::vector<double> gaps;
    for (double hb : {0.1, 0.05}) {
        auto spec = ModelSpec::hbar_family(hb);
        SolveOptions so;
        so.attach_labels = false;
        EigenPair p = solve_eigenvalue(spec, consts::E0 + hb * consts::c_pm(+1), so);
        cplx Ew = solve_wkb_level(spec, 0, hb, WkbScheme::CC1);
        gaps.push_back(std::abs(p.E - Ew));
    }
    double ratio = gaps[0] / gaps[1];
    ok &= ratio > 3.0 && ratio < 5.0;
    d << "CC1 gaps " << fmt(gaps[0], 4) << " -> " << fmt(gaps[1], 4) << ", ratio " << fmt(ratio, 3);

    // exact quantization residual < 1e-7 on the tested converged pairs
    {
        double hb = 3.0;
        auto spec = ModelSpec::hbar_family(hb);
        SolveOptions so;
        so.attach_labels = false;
        EigenPair p2 = solve_eigenvalue(spec, solve_wkb_level(spec, 2, hb, WkbScheme::CC3), so);
        EigenfunctionEvaluator ef2(p2.spec, p2.E);
        double r1 = exact_quantization_residual(ef2, 2, ContourTag::GammaM);

        double hbs = 0.05;
        auto specs = ModelSpec::hbar_family(hbs);
        EigenPair p1 = solve_eigenvalue(specs, consts::E0 + hbs * consts::c_pm(+1) * 3.0, so);
        EigenfunctionEvaluator ef1(p1.spec, p1.E);
        double r2 = exact_quantization_residual(ef1, 1, ContourTag::GammaPlus);
        ok &= r1 < 1e-7 && r2 < 1e-7;
        d << "; quantization residuals " << fmt(r1, 3) << ", " << fmt(r2, 3);
    }
    o.pass = ok;
    o.details = d.str();
    return o;
}

Outcome c10_limit_trends() {
    Outcome o;
    if (!g_report_ok) {
        o.details = "branch points unavailable: " + g_report_err;
        return o;
    }
    std::ostringstream d;
    bool ok = true;
    const auto& rows = g_report.rows;
    for (size_t i = 1; i < rows.size(); ++i) ok &= rows[i].hbar_n < rows[i - 1].hbar_n;
    d << "hbar_n: ";
    for (auto& r : rows) d << fmt(r.hbar_n, 5) << " ";
    bool mono = true;
    for (size_t i = 1; i < rows.size(); ++i)
        mono &= std::abs(rows[i].E_c - 0.352268) <= std::abs(rows[i - 1].E_c - 0.352268);
    ok &= mono;
    d << "| E_n^c: ";
    for (auto& r : rows) d << fmt(r.E_c, 6) << " ";
    double J2c = g_report.J2_critical;
    double t2 = std::abs(2.0 * 2 * rows[2].hbar_n - J2c);
    double t3 = std::abs(2.0 * 3 * rows[3].hbar_n - J2c);
    double t4 = std::abs(2.0 * 4 * rows[4].hbar_n - J2c);
    ok &= t2 > t3 && t3 > t4;
    d << "| J2^c = " << fmt(J2c, 6) << ", |2n hbar_n - J2^c| = " << fmt(t2, 4) << " > " << fmt(t3, 4)
      << " > " << fmt(t4, 4);
    o.pass = ok;
    o.details = d.str();
    return o;
}

} // namespace

int main() {
    double t_total0 = now_s();
    // shared heavy state: branch points n = 0..4 (parallel over BWLAB_THREADS)
    try {
        g_report = crossing_report(4);
        g_report_ok = true;
    } catch (const std::exception& e) {
        g_report_err = e.what();
    }

    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double budget_s;
    };
    std::vector<Criterion> cs = {
        {"1 harmonic oracle (spectrum at beta=0 is 2n+1 to 1e-8)", c1_harmonic_oracle, 5.0},
        {"2 critical energy (E^c = 0.352268 +- 5e-4)", c2_critical_energy, 60.0},
        {"3 perturbative slope ((E-E0)/hbar -> c+ linearly)", c3_perturbative_slope, 0.0},
        {"4 branch point n=0 (analytic s, sqrt exponent, monodromy, edges)", c4_branch_point_structure,
         300.0},
        {"5 selection rules (pairs are (2n, 2n+1))", c5_selection_rules, 0.0},
        {"6 node laws at hbar=3 (m in C_rho, imaginary iff odd, P_x pairing)", c6_node_laws, 0.0},
        {"7 Loeffel-Martin identity at y=0 within 2%", c7_loeffel_martin, 0.0},
        {"8 escape-line asymptote at E=-E0 within 1%", c8_escape_asymptote, 0.0},
        {"9 WKB order O(hbar^2) and exact quantization residuals", c9_wkb_order, 0.0},
        {"10 limit trends (hbar_n down, E_n^c -> E^c, 2n hbar_n -> J2^c)", c10_limit_trends, 0.0},
    };

    int failures = 0;
    for (auto& c : cs) {
        double t0 = now_s();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.details = std::string("exception: ") + e.what();
        }
        double dt = now_s() - t0;
        bool in_budget = c.budget_s <= 0.0 || dt < c.budget_s;
        bool pass = o.pass && in_budget;
        if (!pass) failures++;
        std::printf("%s criterion %s [%.1f s%s]: %s\n", pass ? "PASS" : "FAIL", c.name, dt,
                    in_budget ? "" : " OVER BUDGET", o.details.c_str());
        std::fflush(stdout);
    }
    double total = now_s() - t_total0;
    std::printf("%s: %d/%zu criteria passed in %.1f s (budget 1800 s)\n",
                failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL", int(cs.size()) - failures,
                cs.size(), total);
    if (total > 1800.0) {
        std::printf("FAIL: total runtime exceeded the 30-minute budget\n");
        return 1;
    }
    return failures == 0 ? 0 : 1;
}
