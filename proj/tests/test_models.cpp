#include <doctest.h>

#include <random>

#include "bwlab/models.hpp"

using namespace bwlab;

namespace {
const double kC = 2.0 / (3.0 * std::sqrt(3.0));
const cplx kI(0.0, 1.0);
} // namespace

TEST_CASE("potential values") {
    auto hb = ModelSpec::hbar_family(1.0);
    CHECK(std::abs(potential(hb, 1.0)) < 1e-15);
    cplx xp = 1.0 / std::sqrt(3.0);
    CHECK(std::abs(potential(hb, xp) - consts::E0) < 1e-15);
    CHECK(std::abs(consts::E0 - cplx(0.0, -kC)) < 1e-16);

    auto al = ModelSpec::alpha_family(0.0);
    CHECK(std::abs(potential(al, 1.0) - kI) < 1e-15);

    auto kd = ModelSpec::kdelta_family(0.7, 2.0);
    CHECK(std::abs(potential(kd, 1.0) - kI * (1.0 - 2.0)) < 1e-15);

    auto rc = ModelSpec::real_cubic();
    CHECK(std::abs(potential(rc, 2.0) - cplx(6.0, 0.0)) < 1e-14);
}

TEST_CASE("potential with translation") {
    auto hb = ModelSpec::hbar_family(1.0);
    hb.translation = cplx(0.25, -0.5);
    cplx z(0.3, 0.1);
    CHECK(std::abs(hb.potential(z) - ModelSpec::hbar_family(1.0).potential(z + hb.translation)) < 1e-15);
}

TEST_CASE("invalid parameter combinations are rejected") {
    auto bad = ModelSpec::hbar_family(-1.0);
    CHECK_THROWS_AS(bad.validate(), Error);
    auto bad2 = ModelSpec::hbar_family(cplx(1.0, 1.5)); // outside C0
    CHECK_THROWS_AS(bad2.validate(), Error);
    auto bad3 = ModelSpec::beta_family(cplx(-1.0, 0.0)); // on the cut
    CHECK_THROWS_AS(bad3.validate(), Error);
    auto bad4 = ModelSpec::kdelta_family(0.0, 1.0);
    CHECK_THROWS_AS(bad4.validate(), Error);
    auto ok = ModelSpec::hbar_family(cplx(1.0, 0.3));
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("stationary points") {
    auto sp = stationary_points(ModelSpec::hbar_family(1.0));
    REQUIRE(sp.size() == 2);
    CHECK(std::abs(sp[0].z - cplx(-1.0 / std::sqrt(3.0))) < 1e-14);
    CHECK(std::abs(sp[1].z - cplx(1.0 / std::sqrt(3.0))) < 1e-14);
    CHECK(std::abs(sp[1].value - consts::E0) < 1e-14);

    auto spa = stationary_points(ModelSpec::alpha_family(0.0));
    REQUIRE(spa.size() == 1);
    CHECK(spa[0].multiplicity == 2);
    CHECK(std::abs(spa[0].z) < 1e-14);

    auto spr = stationary_points(ModelSpec::real_cubic());
    REQUIRE(spr.size() == 2);
    CHECK(std::abs(spr[0].value - cplx(kC, 0.0)) < 1e-14); // V^r(x_-) = c
}

TEST_CASE("turning points: exact degenerate factorization at E = ic") {
    auto tps = turning_points(ModelSpec::hbar_family(1.0), cplx(0.0, kC));
    REQUIRE(tps.roots.size() == 2);
    CHECK(tps.degenerate);
    const TurningPoint* dbl = nullptr;
    const TurningPoint* simple = nullptr;
    for (auto& t : tps.roots) (t.multiplicity == 2 ? dbl : simple) = &t;
    REQUIRE(dbl);
    REQUIRE(simple);
    CHECK(std::abs(dbl->z - cplx(-1.0 / std::sqrt(3.0))) < 1e-7);
    CHECK(std::abs(simple->z - cplx(2.0 / std::sqrt(3.0))) < 1e-9);
    // the merged pair carries both I-+ labels, the simple point is I0
    CHECK(tps.get(TpLabel::I0).z == simple->z);
    CHECK(tps.get(TpLabel::Iplus).z == dbl->z);
    CHECK(tps.get(TpLabel::Iminus).z == dbl->z);
}

TEST_CASE("turning points at E = 0 and at the critical energy") {
    auto tps0 = turning_points(ModelSpec::hbar_family(1.0), 0.0);
    REQUIRE(tps0.roots.size() == 3);
    std::vector<double> re;
    for (auto& t : tps0.roots) re.push_back(t.z.real());
    std::sort(re.begin(), re.end());
    CHECK(std::abs(re[0] + 1.0) < 1e-12);
    CHECK(std::abs(re[1]) < 1e-12);
    CHECK(std::abs(re[2] - 1.0) < 1e-12);

    auto tpc = turning_points(ModelSpec::hbar_family(1.0), cplx(0.352268, 0.0));
    REQUIRE(tpc.roots.size() == 3);
    CHECK(tpc.vieta_residual < 1e-12);
    const auto& i0 = tpc.get(TpLabel::I0);
    CHECK(std::abs(i0.z.real()) < 1e-10);
    const auto& ip = tpc.get(TpLabel::Iplus);
    const auto& im = tpc.get(TpLabel::Iminus);
    CHECK(std::abs(ip.z - cplx(-std::conj(im.z))) < 1e-12); // P_x pair
}

TEST_CASE("vieta residuals over random energies") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    auto hb = ModelSpec::hbar_family(0.5);
    auto al = ModelSpec::alpha_family(cplx(0.3, 0.1));
    for (int i = 0; i < 1000; ++i) {
        cplx E(u(rng), u(rng));
        CHECK(turning_points(hb, E).vieta_residual < 1e-12);
        if (i % 10 == 0) CHECK(turning_points(al, E).vieta_residual < 1e-12);
    }
}

TEST_CASE("P_x symmetry of turning sets for real E") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.05, 9.0);
    auto hb = ModelSpec::hbar_family(1.0);
    for (int i = 0; i < 200; ++i) {
        double E = u(rng);
        auto tps = turning_points(hb, cplx(E, 0.0));
        int n_imag = 0;
        for (auto& t : tps.roots) {
            if (std::abs(t.z.real()) < 1e-10) {
                n_imag++;
                continue;
            }
            // the mirror -conj(z) must be present
            bool found = false;
            for (auto& s : tps.roots)
                if (std::abs(s.z - (-std::conj(t.z))) < 1e-10) found = true;
            CHECK(found);
        }
        CHECK(n_imag == 1);
    }
}

TEST_CASE("scale map: Hbar to AlphaHat at hbar = 1") {
    auto m = scale_map(ModelSpec::hbar_family(1.0), Family::AlphaHat);
    CHECK(std::abs(m.target_spec.alpha - cplx(-1.0, 0.0)) < 1e-14);
    CHECK(std::abs(m.energy_scale - cplx(1.0, 0.0)) < 1e-14);
    CHECK(std::abs(m.energy_offset) < 1e-14);
}

TEST_CASE("scale map: Hbar to BetaTilde branches") {
    double hb = 0.37;
    for (int sign : {+1, -1}) {
        ScaleMapOptions o;
        o.beta_sign = sign;
        auto m = scale_map(ModelSpec::hbar_family(hb), Family::BetaTilde, o);
        CHECK(std::abs(std::abs(m.target_spec.beta) - std::pow(3.0, -1.25) * hb) < 1e-14);
        CHECK(m.target_spec.beta_arg.has_value());
        CHECK(std::abs(*m.target_spec.beta_arg - (-sign * 5.0 * kPi / 4.0)) < 1e-14);
        CHECK(m.winding == -sign);
    }
}

TEST_CASE("scale map round trips and energy relations") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 50; ++i) {
        double hb = 0.1 + std::abs(u(rng));
        cplx E(u(rng), u(rng));
        auto m = scale_map(ModelSpec::hbar_family(hb), Family::AlphaHat);
        // Eq. (1.8): E_alpha = hb^{-6/5} E
        CHECK(std::abs(m.map_energy(E) - std::pow(hb, -1.2) * E) < 1e-12 * (1.0 + std::abs(E)));
        CHECK(std::abs(m.unmap_energy(m.map_energy(E)) - E) < 1e-12 * (1.0 + std::abs(E)));
        auto inv = m.inverse();
        CHECK(std::abs(inv.map_energy(m.map_energy(E)) - E) < 1e-12 * (1.0 + std::abs(E)));
    }
    // Eq. (1.10): E_beta = beta^{1/5} E_alpha - 2/(27 beta) through the map
    std::uniform_real_distribution<double> v(0.05, 2.0);
    for (int i = 0; i < 50; ++i) {
        cplx beta = std::polar(v(rng), u(rng));
        auto m = scale_map(ModelSpec::beta_family(beta), Family::AlphaHat);
        cplx Eb(u(rng), u(rng));
        cplx Ea = m.map_energy(Eb);
        cplx back = pow_continued(beta, 0.2) * Ea - 2.0 / (27.0 * beta);
        CHECK(std::abs(back - Eb) < 1e-12 * (1.0 + std::abs(Eb)));
    }
}

TEST_CASE("branch consistency: Hbar -> BetaTilde -> AlphaHat equals Hbar -> AlphaHat") {
    // exercises the continued argument -+5pi/4 of beta_pm
    double hb = 0.23;
    cplx E(0.4, -0.2);
    auto direct = scale_map(ModelSpec::hbar_family(hb), Family::AlphaHat);
    for (int sign : {+1, -1}) {
        ScaleMapOptions o;
        o.beta_sign = sign;
        auto to_beta = scale_map(ModelSpec::hbar_family(hb), Family::BetaTilde, o);
        auto beta_to_alpha = scale_map(to_beta.target_spec, Family::AlphaHat);
        CHECK(std::abs(beta_to_alpha.target_spec.alpha - direct.target_spec.alpha) <
              1e-12 * std::abs(direct.target_spec.alpha));
        cplx via = beta_to_alpha.map_energy(to_beta.map_energy(E));
        cplx dir = direct.map_energy(E);
        CHECK(std::abs(via - dir) < 1e-11 * (1.0 + std::abs(dir)));
    }
}

TEST_CASE("Hbar to KDelta scaling") {
    double hb = 0.8, d = 0.5;
    ScaleMapOptions o;
    o.delta = d;
    auto m = scale_map(ModelSpec::hbar_family(hb), Family::KDelta, o);
    CHECK(std::abs(m.target_spec.k - hb * std::pow(d, 1.25)) < 1e-14);
    CHECK(m.target_spec.delta == d);
    cplx E(1.3, 0.0);
    CHECK(std::abs(m.map_energy(E) - std::pow(d, 1.5) * E) < 1e-14);
}

TEST_CASE("fundamental constants") {
    // E0 = -ic, c = 2/(3 sqrt 3); c_pm = 3^{1/4} e^{+-i pi/4} so (c_pm)^4 = 3 (+-i)^2 = -3
    CHECK(std::abs(consts::c - kC) < 1e-16);
    for (int s : {+1, -1}) {
        cplx c4 = std::pow(consts::c_pm(s), 4);
        CHECK(std::abs(c4 - cplx(-3.0, 0.0)) < 1e-12);
        cplx c8 = c4 * c4;
        CHECK(std::abs(c8 - cplx(9.0, 0.0)) < 1e-11);
        // c_pm^2 = +- i sqrt(3)
        CHECK(std::abs(consts::c_pm(s) * consts::c_pm(s) - cplx(0.0, s * std::sqrt(3.0))) < 1e-13);
    }
    // beta_pm modulus and argument
    CHECK(std::abs(std::abs(consts::beta_pm(1.0, +1)) - std::pow(3.0, -1.25)) < 1e-15);
    CHECK(consts::beta_pm_arg(1.0, +1) == -5.0 * kPi / 4.0);
}

TEST_CASE("model JSON round trip and canonical fields") {
    auto m = ModelSpec::beta_family(cplx(0.25, -0.1));
    auto j = m.to_json();
    auto back = ModelSpec::from_json(j);
    CHECK(back.family == Family::BetaTilde);
    CHECK(std::abs(back.beta - m.beta) < 1e-16);

    auto h = ModelSpec::from_json(R"({"family":"hbar","hbar":0.5})");
    CHECK(h.family == Family::Hbar);
    CHECK(std::abs(h.hbar - cplx(0.5, 0.0)) < 1e-16);

    CHECK_THROWS_AS(ModelSpec::from_json(R"({"family":"nope"})"), Error);
    CHECK_THROWS_AS(ModelSpec::from_json(R"({"family":"hbar","hbar":-2})"), Error);
    CHECK_THROWS_AS(ModelSpec::from_json("not json"), Error);

    auto kd = ModelSpec::from_json(R"({"family":"kdelta","k":0.3,"delta":1.5})");
    CHECK(kd.k == 0.3);
    CHECK(kd.delta == 1.5);
}
