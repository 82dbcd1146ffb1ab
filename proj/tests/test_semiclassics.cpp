#include <doctest.h>

#include <algorithm>

#include "bwlab/semiclassics.hpp"
#include "bwlab/zeros.hpp"

using namespace bwlab;

namespace {
const double kC = 2.0 / (3.0 * std::sqrt(3.0));

double hausdorff(const std::vector<cplx>& A, const std::vector<cplx>& B) {
    auto one_sided = [](const std::vector<cplx>& X, const std::vector<cplx>& Y) {
        double worst = 0.0;
        for (size_t i = 0; i < X.size(); i += std::max<size_t>(1, X.size() / 400)) {
            double best = 1e300;
            for (auto& y : Y) best = std::min(best, std::abs(X[i] - y));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(one_sided(A, B), one_sided(B, A));
}

std::vector<cplx> all_points(const StokesDiagram& dg) {
    std::vector<cplx> out;
    for (auto& l : dg.lines)
        for (auto& p : l.points) out.push_back(p);
    return out;
}

} // namespace

TEST_CASE("diagram at E = -E0: escape line in the right half plane, rho degenerate") {
    auto spec = ModelSpec::hbar_family(1.0);
    cplx E(0.0, kC); // -E0 = ic
    StokesTraceOptions o;
    o.min_trace_height = 21.0;
    o.max_arc = 60.0;
    StokesDiagram dg = trace_stokes_lines(spec, E, o);
    REQUIRE(dg.rho.has_value());
    REQUIRE(dg.rho->size() == 1); // the double point x_-
    CHECK(std::abs(dg.rho->front() - cplx(-1.0 / std::sqrt(3.0), 0.0)) < 1e-6);
    REQUIRE(dg.eta.has_value());
    double max_y = 0.0;
    for (auto& p : *dg.eta) {
        CHECK(p.real() > -1e-9); // stays in C^+
        max_y = std::max(max_y, p.imag());
    }
    CHECK(max_y > 20.0); // asymptotic to the imaginary axis at +i inf
}

TEST_CASE("stokes defining property: conserved action component along lines") {
    auto spec = ModelSpec::hbar_family(1.0);
    for (cplx E : {cplx(0.6, 0.0), cplx(0.2, 0.1), cplx(0.0, kC)}) {
        StokesDiagram dg = trace_stokes_lines(spec, E);
        for (auto& l : dg.lines) {
            if (l.arc_length < 0.1) continue;
            CHECK(l.action_drift < 1e-6 * l.arc_length);
        }
    }
}

TEST_CASE("topology below and above the critical energy") {
    auto spec = ModelSpec::hbar_family(1.0);
    // below E^c: no I- to I+ connection, every line escapes
    StokesDiagram below = trace_stokes_lines(spec, cplx(0.2, 0.0));
    CHECK(!below.rho.has_value());
    // above E^c: the oscillatory range connects I- to I+ without touching I0
    StokesDiagram above = trace_stokes_lines(spec, cplx(0.5, 0.0));
    REQUIRE(above.rho.has_value());
    CHECK(above.rho->size() > 10);
    auto tps = above.tps;
    cplx i0 = tps.get(TpLabel::I0).z;
    double min_d = 1e300;
    double min_y = 1e300;
    for (auto& p : *above.rho) {
        min_d = std::min(min_d, std::abs(p - i0));
        min_y = std::min(min_y, p.imag());
    }
    CHECK(min_d > 1e-3); // passes strictly below I0
    // at E = 0.9 the crossing dips into the lower half plane
    StokesDiagram high = trace_stokes_lines(spec, cplx(0.9, 0.0));
    REQUIRE(high.rho.has_value());
    bool lower = false;
    for (auto& p : *high.rho)
        if (std::abs(p.real()) < 0.05 && p.imag() < 0) lower = true;
    CHECK(lower);
}

TEST_CASE("P_x symmetry of diagrams at real energies") {
    auto spec = ModelSpec::hbar_family(1.0);
    for (double E : {0.25, 0.7}) {
        StokesDiagram dg = trace_stokes_lines(spec, cplx(E, 0.0));
        auto pts = all_points(dg);
        std::vector<cplx> mirrored;
        for (auto& p : pts) mirrored.push_back(-std::conj(p));
        CHECK(hausdorff(pts, mirrored) < 1e-4);
    }
}

TEST_CASE("pure cubic scaling: lines at 8E are the lines at E scaled by 2") {
    auto spec = ModelSpec::alpha_family(0.0);
    StokesDiagram d1 = trace_stokes_lines(spec, cplx(1.0, 0.0));
    StokesDiagram d8 = trace_stokes_lines(spec, cplx(8.0, 0.0));
    // point-to-polyline distances (plain point sets alias the sampling grids)
    auto seg_dist = [](cplx p, cplx a, cplx b) {
        cplx d = b - a;
        double t = std::clamp(((p - a) * std::conj(d)).real() / std::norm(d), 0.0, 1.0);
        return std::abs(p - (a + t * d));
    };
    auto to_lines = [&](const StokesDiagram& dg, double scale) {
        std::vector<std::vector<cplx>> out;
        for (auto& l : dg.lines) {
            std::vector<cplx> pts;
            for (auto& p : l.points) pts.push_back(scale * p);
            out.push_back(pts);
        }
        return out;
    };
    auto lines1 = to_lines(d1, 2.0);
    auto lines8 = to_lines(d8, 1.0);
    auto one_sided = [&](const std::vector<std::vector<cplx>>& A,
                         const std::vector<std::vector<cplx>>& B) {
        double worst = 0.0;
        for (auto& la : A)
            for (size_t i = 0; i < la.size(); i += 3) {
                if (std::abs(la[i]) >= 10.0) continue;
                double best = 1e300;
                for (auto& lb : B)
                    for (size_t j = 0; j + 1 < lb.size(); ++j)
                        best = std::min(best, seg_dist(la[i], lb[j], lb[j + 1]));
                worst = std::max(worst, best);
            }
        return worst;
    };
    double h = std::max(one_sided(lines1, lines8), one_sided(lines8, lines1));
    CHECK(h < 1e-5 * 10.0);
}

TEST_CASE("escape-line asymptote fits") {
    auto spec = ModelSpec::hbar_family(1.0);
    auto fit = escape_line_asymptote(spec, cplx(0.0, kC)); // E = -E0
    CHECK(std::abs(fit.fitted_c - kC) < 0.01 * kC);

    auto fit_real = escape_line_asymptote(spec, cplx(0.4, 0.0));
    CHECK(std::abs(fit_real.fitted_c) < 0.01);

    auto fit_m = escape_line_asymptote(spec, cplx(0.0, -kC)); // E = +E0, mirrored
    CHECK(std::abs(fit_m.fitted_c + kC) < 0.01 * kC);
}

TEST_CASE("critical energy of the oscillatory range") {
    auto spec = ModelSpec::hbar_family(1.0);
    auto ce = critical_energy(spec);
    CHECK(std::abs(ce.value - 0.352268) < 5e-4);
    // the refined value may sit a hair outside the raw bisection bracket
    CHECK(ce.bracket_lo < ce.value + 5e-5);
    CHECK(ce.bracket_hi > ce.value - 5e-5);
    CHECK(ce.bracket_hi - ce.bracket_lo < 2e-5);
    CHECK(ce.flips.size() == 1); // supposed unique; verified not assumed

    // real-form cross-check: instability of tau(E) for x^3 - x at E = c
    auto rc = critical_energy(ModelSpec::real_cubic(), 0.05, 1.0, 1e-6);
    CHECK(std::abs(rc.value - kC) < 1e-4);
}

TEST_CASE("action integrals: harmonic, scaling, reality structure") {
    auto harm = ModelSpec::beta_family(0.0);
    for (double E : {1.0, 3.0, 7.0}) {
        auto av = action_integral(harm, cplx(E, 0.0), 1.0, ContourTag::GammaM);
        CHECK(std::abs(av.J - cplx(E / 2.0, 0.0)) < 1e-8);
        CHECK(av.err_estimate < 1e-9);
    }
    auto cub = ModelSpec::alpha_family(0.0);
    cplx J1 = action_integral(cub, cplx(1.0, 0.0), 1.0, ContourTag::GammaM).J;
    cplx J2 = action_integral(cub, cplx(2.0, 0.0), 1.0, ContourTag::GammaM).J;
    CHECK(std::abs(J2 / J1 - std::pow(2.0, 5.0 / 6.0)) < 1e-6);

    auto spec = ModelSpec::hbar_family(1.0);
    for (double E : {0.5, 0.9}) {
        cplx Jp = action_integral(spec, cplx(E, 0.0), 1.0, ContourTag::GammaPlus).J;
        cplx Jm = action_integral(spec, cplx(E, 0.0), 1.0, ContourTag::GammaMinus).J;
        CHECK(std::abs(Jm - std::conj(Jp)) < 1e-8); // P_x-mirrored contours
        cplx Jsum = action_integral(spec, cplx(E, 0.0), 1.0, ContourTag::GammaM).J;
        CHECK(std::abs(Jsum - 2.0 * Jp.real()) < 1e-8);
    }
    // dual route at E = 0.9 where the direct contour is admissible
    cplx direct = action_integral_direct_gamma(spec, cplx(0.9, 0.0), 1.0).J;
    cplx summed = action_integral(spec, cplx(0.9, 0.0), 1.0, ContourTag::GammaM).J;
    CHECK(std::abs(direct - summed) < 1e-9 * (1.0 + std::abs(summed)));
}

TEST_CASE("WKB levels: harmonic exactness and the perturbative regime") {
    auto harm = ModelSpec::beta_family(0.0);
    for (int n : {0, 3}) {
        cplx E = solve_wkb_level(harm, n, 1.0, WkbScheme::CC3);
        CHECK(std::abs(E - cplx(2.0 * n + 1.0, 0.0)) < 1e-10);
    }
    // CC1 at small hbar approaches E0 + hbar c+ (2n+1)
    double hb = 0.05;
    auto spec = ModelSpec::hbar_family(hb);
    cplx Ew = solve_wkb_level(spec, 0, hb, WkbScheme::CC1);
    cplx pert = consts::E0 + hb * consts::c_pm(+1);
    CHECK(std::abs(Ew - pert) < 5.0 * hb * hb);
}

TEST_CASE("exact quantization residuals") {
    // large-hbar state on the full node contour
    double hb = 3.0;
    auto spec = ModelSpec::hbar_family(hb);
    cplx seed = solve_wkb_level(spec, 2, hb, WkbScheme::CC3);
    SolveOptions so;
    so.attach_labels = false;
    EigenPair p2 = solve_eigenvalue(spec, seed, so);
    EigenfunctionEvaluator ef2(p2.spec, p2.E);
    CHECK(exact_quantization_residual(ef2, 2, ContourTag::GammaM) < 1e-7);

    // small-hbar plus state, half contour around the node near x_+
    double hbs = 0.05;
    auto specs = ModelSpec::hbar_family(hbs);
    EigenPair p1 = solve_eigenvalue(specs, consts::E0 + hbs * consts::c_pm(+1) * 3.0, so);
    EigenfunctionEvaluator ef1(p1.spec, p1.E);
    CHECK(exact_quantization_residual(ef1, 1, ContourTag::GammaPlus) < 1e-7);

    // negative control: a zero-free contour leaves exactly hbar * label
    auto loop = ComplexPath::rectangle(cplx(3.0, -0.4), cplx(4.0, 0.4));
    double res = exact_quantization_residual_loop(ef2, loop, 2);
    CHECK(std::abs(res - hb * 2.0) < 1e-7);
}

TEST_CASE("divergence exclusion: rescaled mismatch grows as k -> 0") {
    auto c100 = divergence_exclusion_check(100.0, 0, 1.0);
    CHECK(std::abs(c100.k - std::pow(100.0, -5.0 / 6.0)) < 1e-12);
    CHECK(c100.mismatch > 0.1);
    auto c1e4 = divergence_exclusion_check(1e4, 0, 1.0);
    CHECK(c1e4.mismatch > c100.mismatch);

    // harmonic negative control: the rescaled balance is exact at eigenvalues
    auto harm = ModelSpec::beta_family(0.0);
    double hbv = 0.37;
    int m = 4;
    double E = hbv * (2 * m + 1);
    cplx Junit = action_integral(harm, cplx(1.0, 0.0), hbv, ContourTag::GammaM).J;
    double k = hbv / E;
    CHECK(std::abs(Junit - k * (m + 0.5)) < 1e-10);
}

TEST_CASE("quadrature node doubling stability") {
    auto spec = ModelSpec::hbar_family(1.0);
    auto av = action_integral(spec, cplx(0.77, 0.0), 1.0, ContourTag::GammaM);
    CHECK(av.err_estimate < 1e-9);
}

TEST_CASE("degenerate energies are rejected for contours") {
    auto spec = ModelSpec::hbar_family(1.0);
    CHECK_THROWS_AS(action_integral(spec, cplx(0.0, kC), 1.0, ContourTag::GammaPlus), Error);
}

TEST_CASE("diagram exports") {
    auto spec = ModelSpec::hbar_family(1.0);
    StokesDiagram dg = trace_stokes_lines(spec, cplx(0.5, 0.0));
    auto csv = dg.to_csv();
    CHECK(csv.find("line_id,re,im") == 0);
    auto j = dg.topology_json();
    CHECK(j.find("turning_points") != std::string::npos);
    CHECK(j.find("rho_connected") != std::string::npos);
}
