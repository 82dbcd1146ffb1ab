#include <doctest.h>

#include "bwlab/continuation.hpp"
#include "bwlab/semiclassics.hpp"

using namespace bwlab;

TEST_CASE("harmonic limit: beta branch runs to the perturbative anchor") {
    auto spec = ModelSpec::beta_family(cplx(1e-3, 0.0));
    SolveOptions so;
    so.attach_labels = false;
    EigenPair start = solve_eigenvalue(spec, cplx(1.0, 0.0), so);
    std::vector<cplx> grid;
    for (int i = 0; i <= 9; ++i) grid.push_back(cplx(1e-3 - i * 1e-4, 0.0));
    BranchCurve c = trace_branch(start, grid);
    CHECK(!c.ended_early);
    CHECK(std::abs(c.points.back().E - cplx(1.0, 0.0)) < 5e-3);
}

TEST_CASE("plus branch from small hbar: Im E shrinks towards the crossing") {
    double h0 = 0.02;
    auto spec = ModelSpec::hbar_family(h0);
    SolveOptions so;
    so.attach_labels = false;
    EigenPair start = solve_eigenvalue(spec, consts::E0 + h0 * consts::c_pm(+1), so);
    std::vector<cplx> grid;
    for (double h = h0; h <= 0.205; h += 0.015) grid.push_back(cplx(h, 0.0));
    BranchCurve c = trace_branch(start, grid);
    CHECK(!c.ended_early);
    REQUIRE(c.points.size() >= 5);
    double im_first = std::abs(c.points.front().E.imag());
    double im_last = std::abs(c.points.back().E.imag());
    CHECK(im_last < im_first);
    for (auto& p : c.points) CHECK(p.E.imag() < 0);
}

TEST_CASE("ground real branch from hbar = 5 down stays real positive") {
    auto spec = ModelSpec::hbar_family(5.0);
    cplx seed = solve_wkb_level(spec, 0, 5.0, WkbScheme::CC3);
    SolveOptions so;
    so.attach_labels = false;
    EigenPair start = solve_eigenvalue(spec, seed, so);
    std::vector<cplx> grid;
    for (double h = 5.0; h >= 0.55; h -= 0.35) grid.push_back(cplx(h, 0.0));
    BranchCurve c = trace_branch(start, grid);
    CHECK(!c.ended_early);
    for (auto& p : c.points) {
        CHECK(std::abs(p.E.imag()) < 1e-8 * (1.0 + std::abs(p.E)));
        CHECK(p.E.real() > 0);
    }
    CHECK(c.to_csv().find("re_param") == 0);
}

TEST_CASE("grid must start at the start point") {
    auto spec = ModelSpec::beta_family(cplx(1e-3, 0.0));
    SolveOptions so;
    so.attach_labels = false;
    EigenPair start = solve_eigenvalue(spec, cplx(1.0, 0.0), so);
    CHECK_THROWS_AS(trace_branch(start, {cplx(0.5, 0.0), cplx(0.4, 0.0)}), Error);
}

TEST_CASE("first branch point: location, selection rule, square-root structure") {
    BranchPoint bp = locate_branch_point(0);
    CHECK(bp.m_minus == 0);
    CHECK(bp.m_plus == 1);
    CHECK(bp.hbar_n > 0.1);
    CHECK(bp.hbar_n < 0.6);
    CHECK(bp.E_c > 0.0);
    CHECK(bp.fit.exponent > 0.45);
    CHECK(bp.fit.exponent < 0.55);
    CHECK(bp.re_s_linear_r2 > 0.98);
    // s = (dE)^2 is real through the branch point
    double smax = 0.0;
    for (auto& [h, s] : bp.s_samples) smax = std::max(smax, std::abs(s.real()));
    CHECK(bp.im_s_max < 1e-5 * smax);
    CHECK(bp.secondary_coalescences.empty());

    // conjugate symmetry just below the crossing
    double hb = 0.9 * bp.hbar_n;
    auto spec = ModelSpec::hbar_family(hb);
    SolveOptions so;
    so.attach_labels = false;
    EigenPair plus = solve_eigenvalue(spec, cplx(bp.E_c, -0.05), so);
    EigenPair minus = solve_eigenvalue(spec, cplx(bp.E_c, 0.05), so);
    CHECK(std::abs(minus.E - std::conj(plus.E)) < 1e-8);

    // ordering above the crossing, seeded from the square-root expansion
    double ha = 1.1 * bp.hbar_n;
    auto spec_a = ModelSpec::hbar_family(ha);
    double da = std::sqrt(ha - bp.hbar_n);
    EigenPair lo = solve_eigenvalue(spec_a, cplx(bp.E_c - 0.5 * bp.fit.a * da, 0.0), so);
    EigenPair hi = solve_eigenvalue(spec_a, cplx(bp.E_c + 0.5 * bp.fit.a * da, 0.0), so);
    CHECK(hi.E.real() > lo.E.real());
    CHECK(hi.E.real() - lo.E.real() > 0.5 * bp.fit.a * da);
}

TEST_CASE("json exports carry the branch point payload") {
    BranchPoint bp = locate_branch_point(0);
    auto j = bp.to_json();
    for (const char* key : {"hbar_n", "E_c", "pair", "sqrt_fit", "s_samples"})
        CHECK(j.find(key) != std::string::npos);
}
