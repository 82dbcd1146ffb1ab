#include <doctest.h>

#include <algorithm>
#include <random>

#include "bwlab/semiclassics.hpp"
#include "bwlab/zeros.hpp"

using namespace bwlab;

namespace {

EigenPair solve_real_level(double hb, int m) {
    auto spec = ModelSpec::hbar_family(hb);
    cplx seed = solve_wkb_level(spec, m, hb, WkbScheme::CC3);
    SolveOptions so;
    so.attach_labels = false;
    return solve_eigenvalue(spec, seed, so);
}

EigenPair solve_branch_level(double hb, int n, int sign) {
    auto spec = ModelSpec::hbar_family(hb);
    cplx seed = double(sign) * consts::E0 + hb * consts::c_pm(sign) * double(2 * n + 1);
    SolveOptions so;
    so.attach_labels = false;
    return solve_eigenvalue(spec, seed, so);
}

} // namespace

TEST_CASE("harmonic n=2: count and locate the Hermite zeros") {
    auto spec = ModelSpec::beta_family(0.0);
    EigenfunctionEvaluator ef(spec, cplx(5.0, 0.0));
    Rect r{cplx(-2.0, -0.5), cplx(2.0, 0.5)};
    CHECK(count_zeros_in_rectangle(ef, r) == 2);
    ZeroSet zs = locate_zeros(ef, r, 2);
    REQUIRE(zs.zeros.size() == 2);
    CHECK(!zs.count_mismatch);
    double r2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(zs.zeros[0].z - cplx(-r2, 0.0)) < 1e-8);
    CHECK(std::abs(zs.zeros[1].z - cplx(r2, 0.0)) < 1e-8);
    CHECK(zs.zeros[0].residual < 1e-10);
}

TEST_CASE("count additivity over random subdivisions") {
    auto spec = ModelSpec::beta_family(0.0);
    EigenfunctionEvaluator ef(spec, cplx(9.0, 0.0)); // n = 4
    Rect r{cplx(-3.2, -0.7), cplx(3.2, 0.7)};
    int total = count_zeros_in_rectangle(ef, r);
    CHECK(total == 4);
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(0.25, 0.75);
    for (int trial = 0; trial < 50; ++trial) {
        bool vertical = trial % 2;
        Rect a = r, b = r;
        if (vertical) {
            double xm = r.lo.real() + u(rng) * r.width();
            a.hi = cplx(xm, r.hi.imag());
            b.lo = cplx(xm, r.lo.imag());
        } else {
            double ym = r.lo.imag() + u(rng) * r.height();
            a.hi = cplx(r.hi.real(), ym);
            b.lo = cplx(r.lo.real(), ym);
        }
        int ca = count_zeros_in_rectangle(ef, a, trial);
        int cb = count_zeros_in_rectangle(ef, b, trial + 1000);
        CHECK(ca + cb == total);
    }
}

TEST_CASE("small-hbar plus state: node confinement near x_+") {
    double hb = 0.05;
    EigenPair p0 = solve_branch_level(hb, 0, +1);
    EigenfunctionEvaluator ef0(p0.spec, p0.E);
    // no node in a small box around x_+
    double xp = 1.0 / std::sqrt(3.0);
    Rect small{cplx(xp - 0.25, -0.25), cplx(xp + 0.25, 0.25)};
    CHECK(count_zeros_in_rectangle(ef0, small) == 0);

    EigenPair p2 = solve_branch_level(hb, 2, +1);
    EigenfunctionEvaluator ef2(p2.spec, p2.E);
    ZeroSet zs = locate_zeros(ef2, small, 2);
    CHECK(static_cast<int>(zs.zeros.size()) == 2);
    for (auto& z : zs.zeros) CHECK(std::abs(z.z - cplx(xp, 0.0)) < 0.3);

    // node count in the right-half node window equals n for n = 0, 1, 2
    // (the U_+ neighborhood of Cor. 2.5; a larger box would push the winding
    // past the recessive-contamination budget at this hbar)
    for (int n : {0, 1, 2}) {
        EigenPair p = solve_branch_level(hb, n, +1);
        EigenfunctionEvaluator ef(p.spec, p.E);
        Rect box = default_node_box(p.spec, p.E);
        CHECK(box.lo.real() > 0.0); // the window sits in C^+
        CHECK(count_zeros_in_rectangle(ef, box) == n);
    }
}

TEST_CASE("minus state nodes are the P_x reflection of the plus state's") {
    double hb = 0.05;
    EigenPair pp = solve_branch_level(hb, 1, +1);
    EigenPair pm = solve_branch_level(hb, 1, -1);
    EigenfunctionEvaluator efp(pp.spec, pp.E), efm(pm.spec, pm.E);
    double xp = 1.0 / std::sqrt(3.0);
    ZeroSet zp = locate_zeros(efp, Rect{cplx(xp - 0.3, -0.3), cplx(xp + 0.3, 0.3)}, 1);
    ZeroSet zm = locate_zeros(efm, Rect{cplx(-xp - 0.3, -0.3), cplx(-xp + 0.3, 0.3)}, 1);
    REQUIRE(zp.zeros.size() == 1);
    REQUIRE(zm.zeros.size() == 1);
    CHECK(std::abs(zm.zeros[0].z - (-std::conj(zp.zeros[0].z))) < 1e-7);
    classify_zeros(zp, efp);
    CHECK((zp.zeros[0].cls == ZeroClass::NodeLower || zp.zeros[0].cls == ZeroClass::NodeUpper));
}

TEST_CASE("large-hbar states: cones, imaginary nodes, P_x symmetric zero sets") {
    double hb = 3.0;
    EigenPair p2 = solve_real_level(hb, 2);
    EigenfunctionEvaluator ef2(p2.spec, p2.E);
    ZeroSet zs2 = node_zero_set(ef2);
    REQUIRE(zs2.zeros.size() == 2);
    int lower = 0, imag = 0;
    for (auto& z : zs2.zeros) {
        if (z.cls == ZeroClass::NodeLower) lower++;
        if (z.cls == ZeroClass::ImaginaryNode) imag++;
    }
    CHECK(lower == 2);
    CHECK(imag == 0);
    CHECK(zs2.count_rho == 2);
    // P_x-symmetric zero set within 1e-7 pairing distance
    for (auto& z : zs2.zeros) {
        bool found = false;
        for (auto& w : zs2.zeros)
            if (std::abs(w.z - (-std::conj(z.z))) < 1e-7) found = true;
        CHECK(found);
    }
    // zeros in the upper half-plane are on the imaginary axis (escape zeros)
    auto tps = turning_points(p2.spec, p2.E);
    double y0 = tps.get(TpLabel::I0).z.imag();
    ZeroSet upper = locate_axis_zeros(ef2, y0 - 0.5, y0 + 4.0);
    for (auto& z : upper.zeros) {
        CHECK(std::abs(z.z.real()) < 1e-7);
        CHECK(z.cls == ZeroClass::EscapeZero);
    }
    CHECK(upper.zeros.size() >= 1);

    EigenPair p1 = solve_real_level(hb, 1);
    EigenfunctionEvaluator ef1(p1.spec, p1.E);
    ZeroSet zs1 = node_zero_set(ef1);
    REQUIRE(zs1.zeros.size() == 1);
    CHECK(zs1.zeros[0].cls == ZeroClass::ImaginaryNode);
    CHECK(std::abs(zs1.zeros[0].z.real()) < 1e-8);
    CHECK(zs1.zeros[0].z.imag() < turning_points(p1.spec, p1.E).get(TpLabel::I0).z.imag());
}

TEST_CASE("imaginary axis profile: barrier, sign changes, Loeffel-Martin") {
    // non-real level: psi never vanishes on the imaginary axis
    double hb = 0.05;
    EigenPair pm = solve_branch_level(hb, 0, -1);
    EigenfunctionEvaluator efm(pm.spec, pm.E);
    AxisProfile ap = imaginary_axis_profile(efm, -5.0, 5.0);
    CHECK(ap.min_abs > 0.01); // no zero approaches the axis

    // Loeffel-Martin identity at y = 0 within 2%
    auto lm = loeffel_martin_check(efm, 0.0, 12.0);
    CHECK(lm.rel_err < 0.02);

    // odd level at large hbar: exactly one sign change below y0
    EigenPair p1 = solve_real_level(3.0, 1);
    EigenfunctionEvaluator ef1(p1.spec, p1.E);
    auto tps = turning_points(p1.spec, p1.E);
    double y0 = tps.get(TpLabel::I0).z.imag();
    AxisProfile prof = imaginary_axis_profile(ef1, -6.0, y0);
    CHECK(prof.sign_changes == 1);
    // even level: none
    EigenPair p2 = solve_real_level(3.0, 2);
    EigenfunctionEvaluator ef2(p2.spec, p2.E);
    AxisProfile prof2 = imaginary_axis_profile(ef2, -6.0, turning_points(p2.spec, p2.E).get(TpLabel::I0).z.imag());
    CHECK(prof2.sign_changes == 0);
}

TEST_CASE("large zeros hug the escape asymptote x (y^2 + 1/2) ~ Im E") {
    double hb = 0.05;
    EigenPair p = solve_branch_level(hb, 0, +1);
    EigenfunctionEvaluator ef(p.spec, p.E);
    ZeroSet zs = locate_axis_zeros(ef, 8.0, 8.12);
    REQUIRE(zs.zeros.size() >= 3);
    // fit x (y^2 + 1/2) = ImE_fit + hb sqrt(y) Im(theta)_fit and compare ImE
    double s1 = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (auto& z : zs.zeros) {
        double y = z.z.imag();
        double val = z.z.real() * (y * y + 0.5);
        double t = hb * std::sqrt(y);
        s1 += 1;
        sx += t;
        sxx += t * t;
        sy += val;
        sxy += t * val;
    }
    double det = s1 * sxx - sx * sx;
    double imE_fit = (sy * sxx - sx * sxy) / det;
    CHECK(std::abs(imE_fit - p.E.imag()) < 0.10 * std::abs(p.E.imag()));
}

TEST_CASE("upper-axis WKB fit returns a real theta for a real level") {
    EigenPair p = solve_real_level(3.0, 0);
    EigenfunctionEvaluator ef(p.spec, p.E);
    auto tps = turning_points(p.spec, p.E);
    double y0 = tps.get(TpLabel::I0).z.imag();
    auto fit = fit_axis_wkb(ef, y0 + 1.5, y0 + 5.5);
    CHECK(fit.residual < 0.05);
    CHECK(std::abs(fit.theta.imag()) < 0.05);
}

TEST_CASE("node labels attach to solved pairs") {
    EigenPair p3 = solve_real_level(3.0, 3);
    attach_node_labels(p3);
    CHECK(p3.label == 3);
    CHECK(p3.nodes_imag == 1);
    CHECK(p3.nodes_lower == 2);
}
