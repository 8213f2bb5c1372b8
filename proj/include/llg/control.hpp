// Stopping rules, the adaptive step policy, noise injection, and the
// per-iteration log shared by both inversion drivers.
#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "llg/calculus.hpp"
#include "llg/model_types.hpp"

namespace llg {

struct StoppingRule {
    double tau = 2.5;               // discrepancy constant, > 2
    std::vector<double> delta;      // noise level per sub-problem
    long max_iterations = 5000;
    double mu_min_factor = 1e-6;    // adaptive floor relative to the initial mu

    StoppingRule() = default;
    StoppingRule(double tau_, std::vector<double> delta_, long maxit, double mu_min_f = 1e-6)
        : tau(tau_), delta(std::move(delta_)), max_iterations(maxit), mu_min_factor(mu_min_f) {
        if (!(tau > 2.0)) throw std::invalid_argument("StoppingRule: tau must exceed 2");
        for (double d : delta)
            if (d < 0.0) throw std::invalid_argument("StoppingRule: delta must be >= 0");
    }
};

// w_k = 1 iff the residual still exceeds tau * delta (boundary inclusive).
inline int discrepancy_flag(double residual_norm, double delta_j, double tau) {
    return residual_norm >= tau * delta_j ? 1 : 0;
}

// First index k* with w_{k*-i} = 0 for i = 0..n-1 and w_{k*-n} = 1
// (a full cycle of satisfied sub-problems); -1 if no such index exists.
inline long cycle_stop(const std::vector<int>& flags, int n) {
    if (n < 1) throw std::invalid_argument("cycle_stop: n must be >= 1");
    for (long k = 0; k < static_cast<long>(flags.size()); ++k) {
        if (k - n + 1 < 0) continue;  // need n flags
        bool zeros = true;
        for (int i = 0; i < n && zeros; ++i) zeros = flags[k - i] == 0;
        if (!zeros) continue;
        if (k - n < 0 || flags[k - n] == 1) return k;
    }
    return -1;
}

struct StepDecision {
    bool accept;
    double mu;
};

// Accept iff the trial residual decreased, otherwise halve the step.
inline StepDecision adapt_step(double prev_residual, double new_residual, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("adapt_step: mu must be positive");
    if (new_residual < prev_residual) return {true, mu};
    return {false, 0.5 * mu};
}

struct LogRow {
    long iter = 0;
    double mu = 0.0;
    double res_obs = 0.0;
    double res_llg = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double rel_err_m = -1.0;  // -1 when no ground truth supplied
    long inner_loops = -1;    // reduced setting only
};

struct IterationLog {
    std::vector<LogRow> rows;
    std::string exit_reason;

    void append(LogRow r) {
        if (!rows.empty() && r.iter <= rows.back().iter)
            throw std::invalid_argument("IterationLog: indices must increase");
        rows.push_back(r);
    }
    long total_inner_loops() const {
        long s = 0;
        for (const auto& r : rows)
            if (r.inner_loops > 0) s += r.inner_loops;
        return s;
    }
};

namespace detail {

inline uint64_t splitmix64(uint64_t& s) {
    uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// deterministic child seed per channel
inline uint64_t child_seed(uint64_t seed, int k, int l) {
    uint64_t s = seed;
    uint64_t a = splitmix64(s);
    s = a ^ (static_cast<uint64_t>(k) << 32) ^ static_cast<uint64_t>(l + 1);
    return splitmix64(s);
}

}  // namespace detail

// Add i.i.d. Gaussian noise per channel, rescaled so each channel's
// perturbation has relative L2(0,T) norm exactly delta_rel. Records the
// absolute noise level and the perturbation itself.
inline VoltageSeries noise_inject(const VoltageSeries& y, double delta_rel, uint64_t seed) {
    if (delta_rel < 0.0) throw std::invalid_argument("noise_inject: delta_rel must be >= 0");
    VoltageSeries out = y;
    out.noise.assign(y.channels(), std::vector<double>(y.grid.nt, 0.0));
    if (delta_rel == 0.0) {
        out.delta.assign(y.channels(), 0.0);
        return out;
    }
    const Grid& g = y.grid;
    for (int k = 0; k < y.K; ++k)
        for (int l = 0; l < y.L; ++l) {
            const int kl = k * y.L + l;
            std::mt19937_64 rng(detail::child_seed(seed, k, l));
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::vector<double> p(g.nt);
            double pn2 = 0.0, yn2 = 0.0;
            for (int i = 0; i < g.nt; ++i) {
                p[i] = gauss(rng);
                pn2 += g.wt(i) * p[i] * p[i];
                yn2 += g.wt(i) * y.data[kl][i] * y.data[kl][i];
            }
            const double ynorm = std::sqrt(yn2);
            const double s = pn2 > 0.0 ? delta_rel * ynorm / std::sqrt(pn2) : 0.0;
            for (int i = 0; i < g.nt; ++i) {
                out.noise[kl][i] = s * p[i];
                out.data[kl][i] = y.data[kl][i] + out.noise[kl][i];
            }
            out.delta[kl] = delta_rel * ynorm;
        }
    return out;
}

}  // namespace llg
