// Domain types of the LLG observation model: damping parameters, model
// coefficients, measurement kernels, and voltage data.
#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "llg/grid.hpp"

namespace llg {

// Physical provenance of a parameter pair (all SI).
struct PhysicalParams {
    double gamma = 0.0;    // gyromagnetic ratio, rad/s
    double alpha_D = 0.0;  // damping parameter, dimensionless
    double m_S = 0.0;      // saturation magnetization, J m^-3 T^-1
    double A = 0.0;        // exchange stiffness
};

struct AlphaPair {
    double a1 = 0.0;  // alpha1_hat
    double a2 = 0.0;  // alpha2_hat
    std::optional<PhysicalParams> physical;
};

struct ModelCoefficients {
    double lambda = 1.0;  // diffusion coefficient; 2 A m_S in the scaled physical model

    ModelCoefficients() = default;
    explicit ModelCoefficients(double l) : lambda(l) {
        if (l < 0.0) throw std::invalid_argument("ModelCoefficients: lambda must be >= 0");
    }
};

// Periodically continued transfer function sampled on [0, T].
struct TransferFunction {
    double period = 0.0;
    std::vector<double> samples;  // nt values at t_i = i * period/(n-1)

    TransferFunction() = default;
    TransferFunction(double T, std::vector<double> s) : period(T), samples(std::move(s)) {
        if (samples.size() < 2) throw std::invalid_argument("TransferFunction: need >= 2 samples");
    }

    static TransferFunction constant(const Grid& g, double value) {
        return TransferFunction(g.t_end, std::vector<double>(g.nt, value));
    }

    // wrap-around linear interpolation of the periodic extension
    double operator()(double s) const {
        const int n = static_cast<int>(samples.size());
        const double dt = period / (n - 1);
        double u = std::fmod(s, period);
        if (u < 0.0) u += period;
        int i0 = static_cast<int>(std::floor(u / dt));
        if (i0 >= n - 1) i0 = n - 2;
        const double frac = u / dt - i0;
        return samples[i0] * (1.0 - frac) + samples[i0 + 1] * frac;
    }

    // d/ds by central differences on the periodic extension
    TransferFunction derivative() const {
        const int n = static_cast<int>(samples.size());
        const double dt = period / (n - 1);
        const int m = n - 1;  // period in samples
        auto wrap = [m](int i) { return ((i % m) + m) % m; };
        std::vector<double> d(n);
        for (int i = 0; i < m; ++i)
            d[i] = (samples[wrap(i + 1)] - samples[wrap(i - 1)]) / (2.0 * dt);
        d[n - 1] = d[0];
        return TransferFunction(period, std::move(d));
    }
};

// Kernels K_kl(t, tau, x) = -mu0 * a_l(t - tau) * c_k(x) * p_l(x).
struct ObservationSetup {
    double mu0 = 1.0;
    std::vector<TransferFunction> transfer;             // L entries
    std::vector<std::vector<double>> concentrations;    // K entries, nx samples each
    std::vector<std::vector<std::array<double, 3>>> sensitivities;  // L entries, nx samples

    int K() const { return static_cast<int>(concentrations.size()); }
    int L() const { return static_cast<int>(transfer.size()); }
    int channels() const { return K() * L(); }

    void validate(const Grid& g) const {
        if (K() < 1 || L() < 1)
            throw std::invalid_argument("ObservationSetup: need K >= 1 and L >= 1");
        if (sensitivities.size() != transfer.size())
            throw std::invalid_argument("ObservationSetup: one sensitivity per coil");
        for (const auto& c : concentrations)
            if (static_cast<int>(c.size()) != g.nx)
                throw std::invalid_argument("ObservationSetup: concentration length must be nx");
        for (const auto& p : sensitivities)
            if (static_cast<int>(p.size()) != g.nx)
                throw std::invalid_argument("ObservationSetup: sensitivity length must be nx");
    }

    // the Section 4.3 measurement setup: mu0=1, a=1, c=1, p=(1,1,1)
    static ObservationSetup unit(const Grid& g, int K = 1, int L = 1) {
        ObservationSetup o;
        o.mu0 = 1.0;
        for (int l = 0; l < L; ++l) {
            o.transfer.push_back(TransferFunction::constant(g, 1.0));
            o.sensitivities.emplace_back(g.nx, std::array<double, 3>{1.0, 1.0, 1.0});
        }
        for (int k = 0; k < K; ++k) o.concentrations.emplace_back(g.nx, 1.0);
        return o;
    }
};

// Voltage traces y_kl(t) with per-channel noise levels; channel kl = k*L + l.
struct VoltageSeries {
    Grid grid;
    int K = 0, L = 0;
    std::vector<std::vector<double>> data;   // K*L traces of length nt
    std::vector<double> delta;               // absolute noise level per channel
    std::vector<std::vector<double>> noise;  // applied perturbation (empty if exact)

    VoltageSeries() = default;
    VoltageSeries(const Grid& g, int K_, int L_)
        : grid(g),
          K(K_),
          L(L_),
          data(static_cast<size_t>(K_) * L_, std::vector<double>(g.nt, 0.0)),
          delta(static_cast<size_t>(K_) * L_, 0.0) {}

    int channels() const { return K * L; }
    std::vector<double>& channel(int k, int l) { return data[static_cast<size_t>(k) * L + l]; }
    const std::vector<double>& channel(int k, int l) const {
        return data[static_cast<size_t>(k) * L + l];
    }
};

}  // namespace llg
