#include <catch2/catch_amalgamated.hpp>

#include "llg/model.hpp"
#include "oracles.hpp"

using namespace llg;

namespace {

// Table 1 style setup helpers used across several tests
struct Problem {
    Slice3 m0;
    Field3 m_hat_exact;
    Field3 h;
    AlphaPair alpha;
    ModelCoefficients coeff;
};

Problem test1_problem(const Grid& g) {
    Problem p{Slice3::from_fn(g, [](double) {
                  return std::array<double, 3>{0.0, 0.6, 0.8};
              }),
              Field3(g),
              Field3::from_fn(g, [](double, double) {
                  return std::array<double, 3>{0.0, 1.2, 1.6};
              }),
              AlphaPair{1.0, -1.0, {}},
              ModelCoefficients(1.0)};
    return p;
}

Problem test2_problem(const Grid& g) {
    Problem p{Slice3::from_fn(g, [](double x) {
                  return std::array<double, 3>{std::cos(x), std::cos(x), 1.0};
              }),
              Field3::from_fn(g, [](double t, double) {
                  return std::array<double, 3>{0.0, 0.0, std::exp(t) - 1.0};
              }),
              Field3::from_fn(g, [](double, double x) {
                  return std::array<double, 3>{-std::cos(x), -std::cos(x), 0.0};
              }),
              AlphaPair{2.0, 0.0, {}},
              ModelCoefficients(1.0)};
    return p;
}

}  // namespace

TEST_CASE("eval_F0 vanishes on the Test 1 exact state", "[model]") {
    Grid g = default_grid();
    Problem p = test1_problem(g);
    Field3 w = eval_F0(p.m_hat_exact, p.m0, p.alpha, p.h, p.coeff);
    for (double v : w.v) REQUIRE(std::abs(v) <= 1e-13);
}

TEST_CASE("eval_F0 vanishes for zero m_hat, constant m0, zero field", "[model]") {
    Grid g = default_grid();
    Slice3 m0 = Slice3::from_fn(g, [](double) {
        return std::array<double, 3>{0.3, -0.4, 0.9};
    });
    Field3 mh(g), h(g);
    Field3 w = eval_F0(mh, m0, AlphaPair{1.3, 0.7, {}}, h, ModelCoefficients(1.0));
    for (double v : w.v) REQUIRE(v == 0.0);
}

TEST_CASE("eval_F0 on the Test 2 exact state is discretization-small", "[model]") {
    Grid g = default_grid();
    Problem p = test2_problem(g);
    Field3 w = eval_F0(p.m_hat_exact, p.m0, p.alpha, p.h, p.coeff);
    double maxerr = 0.0;
    for (double v : w.v) maxerr = std::max(maxerr, std::abs(v));
    REQUIRE(maxerr <= 10.0 * (g.dt * g.dt + g.dx * g.dx));
}

TEST_CASE("eval_F0 is linear in h for fixed m", "[model][property]") {
    Grid g(9, 0.2, 8, 0.0, 1.0);
    Slice3 m0 = Slice3::from_fn(g, [](double x) {
        return std::array<double, 3>{std::cos(x), 0.2, 0.5};
    });
    Field3 mh = oracle::random_field(g, 3, 0.4);
    Field3 h1 = oracle::random_field(g, 4), h2 = oracle::random_field(g, 5);
    AlphaPair a{1.1, -0.6, {}};
    ModelCoefficients c(1.0);
    Field3 hsum = h1 + h2;
    Field3 w1 = eval_F0(mh, m0, a, h1, c);
    Field3 w2 = eval_F0(mh, m0, a, h2, c);
    Field3 w0 = eval_F0(mh, m0, a, Field3(g), c);
    Field3 ws = eval_F0(mh, m0, a, hsum, c);
    // superposition of the two h-dependent terms: F0(h1+h2) = F0(h1)+F0(h2)-F0(0)
    for (size_t k = 0; k < ws.v.size(); ++k)
        REQUIRE_THAT(ws.v[k], Catch::Matchers::WithinAbs(w1.v[k] + w2.v[k] - w0.v[k], 1e-11));
}

TEST_CASE("lambda terms vanish for space-constant unit magnetization", "[model][property]") {
    Grid g(9, 0.2, 8, 0.0, 1.0);
    Slice3 m0 = Slice3::from_fn(g, [](double) {
        return std::array<double, 3>{0.6, 0.0, 0.8};
    });
    Field3 mh(g);
    Field3 h = oracle::random_field(g, 6);
    AlphaPair a{1.0, 0.5, {}};
    Field3 wa = eval_F0(mh, m0, a, h, ModelCoefficients(1.0));
    Field3 wb = eval_F0(mh, m0, a, h, ModelCoefficients(7.5));
    for (size_t k = 0; k < wa.v.size(); ++k) REQUIRE(wa.v[k] == wb.v[k]);
}

TEST_CASE("eval_observation on the Test 2 state gives the closed-form constant", "[model]") {
    Grid g = default_grid();
    Problem p = test2_problem(g);
    ObservationSetup obs = ObservationSetup::unit(g);
    Field3 m = broadcast_time(p.m0) + p.m_hat_exact;
    VoltageSeries y = eval_observation(ddt(m), obs);
    const double want = -2.0 * M_PI * (std::exp(0.2) - 1.0);
    for (int i = 0; i < g.nt; ++i)
        REQUIRE_THAT(y.channel(0, 0)[i], Catch::Matchers::WithinAbs(want, 1e-4));
}

TEST_CASE("eval_observation vanishes for time-constant m", "[model]") {
    Grid g = default_grid();
    Field3 m = Field3::from_fn(g, [](double, double x) {
        return std::array<double, 3>{std::sin(x), std::cos(x), 1.0};
    });
    ObservationSetup obs = ObservationSetup::unit(g);
    VoltageSeries y = eval_observation(ddt(m), obs);
    for (double v : y.channel(0, 0)) REQUIRE(std::abs(v) <= 1e-12);
}

TEST_CASE("eval_observation is linear in the concentration", "[model][property]") {
    Grid g(11, 0.2, 9, 0.0, 1.0);
    Field3 mt = oracle::random_field(g, 7);
    ObservationSetup obs = ObservationSetup::unit(g);
    VoltageSeries y1 = eval_observation(mt, obs);
    for (auto& c : obs.concentrations[0]) c *= 2.0;
    VoltageSeries y2 = eval_observation(mt, obs);
    for (int i = 0; i < g.nt; ++i)
        REQUIRE_THAT(y2.channel(0, 0)[i],
                     Catch::Matchers::WithinAbs(2.0 * y1.channel(0, 0)[i], 1e-12));
}

TEST_CASE("transfer function periodic interpolation and derivative", "[model]") {
    Grid g = default_grid();
    // a(t) = sin(2 pi t / T) is exactly periodic on [0, T]
    std::vector<double> samples(g.nt);
    for (int i = 0; i < g.nt; ++i) samples[i] = std::sin(2.0 * M_PI * g.t(i) / g.t_end);
    TransferFunction a(g.t_end, samples);
    SECTION("on-grid wrap-around evaluation") {
        REQUIRE_THAT(a(g.t(3) - g.t(7)), Catch::Matchers::WithinAbs(samples[g.nt - 1 - 4], 1e-12));
        REQUIRE_THAT(a(g.t(3) + g.t_end), Catch::Matchers::WithinAbs(samples[3], 1e-12));
    }
    SECTION("derivative matches the closed form to second order") {
        TransferFunction da = a.derivative();
        const double om = 2.0 * M_PI / g.t_end;
        for (int i = 0; i < g.nt; ++i)
            REQUIRE_THAT(da.samples[i],
                         Catch::Matchers::WithinAbs(om * std::cos(om * g.t(i)),
                                                    om * om * om * g.dt * g.dt));
    }
}

TEST_CASE("scale_physical reproduces the reported magnitudes", "[model]") {
    Grid g(5, 3e-5, 5, -0.006, 0.006);
    Field3 Hext = Field3::from_fn(g, [](double, double) {
        return std::array<double, 3>{0.0, 0.0, 1e-4};
    });
    SECTION("Table 2 values give alpha-hat near 5.7e-13 and 5.7e-12") {
        ScaledModel sm = scale_physical(1.75e11, 0.1, 474000.0, 0.0, Hext);
        REQUIRE_THAT(sm.alpha.a1, Catch::Matchers::WithinRel(5.714e-13, 1e-3));
        REQUIRE_THAT(sm.alpha.a2, Catch::Matchers::WithinRel(5.714e-12, 1e-3));
        // alpha2 / alpha1 = 1 / alpha_D exactly
        REQUIRE_THAT(sm.alpha.a2 / sm.alpha.a1, Catch::Matchers::WithinRel(10.0, 1e-12));
    }
    SECTION("A = 0 gives lambda = 0") {
        ScaledModel sm = scale_physical(1.75e11, 0.1, 474000.0, 0.0, Hext);
        REQUIRE(sm.coeff.lambda == 0.0);
    }
    SECTION("field scaling |h| = mu0 m_S |H_ext|") {
        ScaledModel sm = scale_physical(1.75e11, 0.1, 474000.0, 0.0, Hext);
        const double want = 4.0e-7 * M_PI * 474000.0 * 1e-4;
        REQUIRE_THAT(sm.h(0, 0, 2), Catch::Matchers::WithinRel(want, 1e-12));
        REQUIRE_THAT(want, Catch::Matchers::WithinRel(5.9565e-5, 1e-3));
    }
    SECTION("rejects non-positive gamma or m_S") {
        REQUIRE_THROWS_AS(scale_physical(-1.0, 0.1, 474000.0, 0.0, Hext), std::invalid_argument);
        REQUIRE_THROWS_AS(scale_physical(1.75e11, 0.1, 0.0, 0.0, Hext), std::invalid_argument);
    }
}
