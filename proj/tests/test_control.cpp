#include <catch2/catch_amalgamated.hpp>

#include "llg/control.hpp"

using namespace llg;

TEST_CASE("discrepancy flag", "[control]") {
    SECTION("zero residual with positive delta is satisfied") {
        REQUIRE(discrepancy_flag(0.0, 0.5, 2.5) == 0);
    }
    SECTION("boundary is inclusive") {
        REQUIRE(discrepancy_flag(2.5 * 0.4, 0.4, 2.5) == 1);
    }
    SECTION("exact data never satisfies the rule") {
        REQUIRE(discrepancy_flag(1e-30, 0.0, 2.5) == 1);
        REQUIRE(discrepancy_flag(0.0, 0.0, 2.5) == 1);
    }
    SECTION("monotone in residual, antitone in delta and tau") {
        REQUIRE(discrepancy_flag(1.0, 0.3, 2.5) >= discrepancy_flag(0.5, 0.3, 2.5));
        REQUIRE(discrepancy_flag(1.0, 0.3, 2.5) >= discrepancy_flag(1.0, 0.5, 2.5));
        REQUIRE(discrepancy_flag(1.0, 0.3, 2.5) >= discrepancy_flag(1.0, 0.3, 4.0));
    }
}

TEST_CASE("cycle stop pattern detection", "[control]") {
    SECTION("n=1 stops at the first zero after a one") {
        REQUIRE(cycle_stop({1, 1, 0}, 1) == 2);
    }
    SECTION("n=2 needs two trailing zeros preceded by a one") {
        REQUIRE(cycle_stop({1, 0, 1, 0, 0}, 2) == 4);
    }
    SECTION("all ones never stop") {
        REQUIRE(cycle_stop({1, 1, 1, 1, 1}, 1) == -1);
    }
    SECTION("never fires before n flags exist") {
        REQUIRE(cycle_stop({0}, 2) == -1);
        REQUIRE(cycle_stop({0, 0}, 3) == -1);
    }
    SECTION("all-zero prefix counts as a full first cycle") {
        REQUIRE(cycle_stop({0, 0}, 2) == 1);
    }
}

TEST_CASE("adaptive step policy", "[control]") {
    SECTION("decrease accepts and keeps mu") {
        auto d = adapt_step(1.0, 0.9, 150.0);
        REQUIRE(d.accept);
        REQUIRE(d.mu == 150.0);
    }
    SECTION("non-decrease rejects and bisects") {
        auto d = adapt_step(1.0, 1.0, 150.0);
        REQUIRE_FALSE(d.accept);
        REQUIRE(d.mu == 75.0);
    }
    SECTION("repeated rejection reaches any floor") {
        double mu = 1.0;
        int halvings = 0;
        while (mu >= 1e-6) {
            auto d = adapt_step(1.0, 2.0, mu);
            REQUIRE_FALSE(d.accept);
            mu = d.mu;
            ++halvings;
        }
        REQUIRE(halvings == 20);
    }
    SECTION("accepted residuals are strictly decreasing by construction") {
        double res = 1.0, mu = 8.0;
        std::vector<double> accepted{res};
        std::mt19937 rng(17);
        std::uniform_real_distribution<double> dist(0.5, 1.5);
        for (int k = 0; k < 50; ++k) {
            double trial = res * dist(rng);
            auto d = adapt_step(res, trial, mu);
            mu = d.mu;
            if (d.accept) {
                res = trial;
                accepted.push_back(res);
            }
        }
        for (size_t i = 1; i < accepted.size(); ++i) REQUIRE(accepted[i] < accepted[i - 1]);
    }
}

TEST_CASE("stopping rule validation", "[control]") {
    REQUIRE_THROWS_AS(StoppingRule(2.0, {0.1}, 100), std::invalid_argument);
    REQUIRE_THROWS_AS(StoppingRule(2.5, {-0.1}, 100), std::invalid_argument);
    REQUIRE_NOTHROW(StoppingRule(2.5, {0.0, 0.3}, 100));
}

TEST_CASE("iteration log is append-only with increasing indices", "[control]") {
    IterationLog log;
    log.append({0, 1.0, 0.5, 0.1, 1.0, 0.0, -1.0, -1});
    log.append({1, 1.0, 0.4, 0.1, 1.0, 0.0, -1.0, -1});
    REQUIRE_THROWS_AS(log.append({1, 1.0, 0.3, 0.1, 1.0, 0.0, -1.0, -1}),
                      std::invalid_argument);
}

TEST_CASE("noise injection", "[control]") {
    Grid g = default_grid();
    VoltageSeries y(g, 2, 2);
    for (int kl = 0; kl < 4; ++kl)
        for (int i = 0; i < g.nt; ++i) y.data[kl][i] = std::sin(0.3 * (kl + 1) * i) + 2.0;

    SECTION("zero level returns the input bitwise") {
        VoltageSeries out = noise_inject(y, 0.0, 42);
        for (int kl = 0; kl < 4; ++kl)
            for (int i = 0; i < g.nt; ++i) REQUIRE(out.data[kl][i] == y.data[kl][i]);
        for (double d : out.delta) REQUIRE(d == 0.0);
    }
    SECTION("each channel's relative perturbation is exactly the requested level") {
        VoltageSeries out = noise_inject(y, 0.05, 42);
        for (int kl = 0; kl < 4; ++kl) {
            double pn2 = 0.0, yn2 = 0.0;
            for (int i = 0; i < g.nt; ++i) {
                const double p = out.data[kl][i] - y.data[kl][i];
                pn2 += g.wt(i) * p * p;
                yn2 += g.wt(i) * y.data[kl][i] * y.data[kl][i];
            }
            REQUIRE_THAT(std::sqrt(pn2) / std::sqrt(yn2),
                         Catch::Matchers::WithinAbs(0.05, 1e-12));
            REQUIRE_THAT(out.delta[kl],
                         Catch::Matchers::WithinRel(0.05 * std::sqrt(yn2), 1e-12));
        }
    }
    SECTION("same seed reproduces bitwise, different seed does not") {
        VoltageSeries a = noise_inject(y, 0.03, 7);
        VoltageSeries b = noise_inject(y, 0.03, 7);
        VoltageSeries c = noise_inject(y, 0.03, 8);
        bool differs = false;
        for (int kl = 0; kl < 4; ++kl)
            for (int i = 0; i < g.nt; ++i) {
                REQUIRE(a.data[kl][i] == b.data[kl][i]);
                differs |= a.data[kl][i] != c.data[kl][i];
            }
        REQUIRE(differs);
    }
    SECTION("channels receive independent draws") {
        VoltageSeries out = noise_inject(y, 0.03, 7);
        REQUIRE(out.noise[0] != out.noise[1]);
    }
}
