// The LLG residual operator F0, the observation operator, and the
// physical-parameter scaling.
#pragma once

#include "llg/calculus.hpp"
#include "llg/model_types.hpp"

namespace llg {

// F0(m_hat, alpha) = a1 m_hat_t - lambda Lap(m0+m_hat) - a2 (m0+m_hat) x m_hat_t
//                    - lambda |grad(m0+m_hat)|^2 (m0+m_hat) - h
//                    + ((m0+m_hat).h)(m0+m_hat)
// The unknown m_hat carries the Neumann mirror stencils; the additive data
// term m0 is differentiated with the one-sided data stencils.
inline Field3 eval_F0(const Field3& m_hat, const Slice3& m0, const AlphaPair& alpha,
                      const Field3& h, const ModelCoefficients& coeff) {
    const Grid& g = m_hat.grid;
    if (!(h.grid == g) || !(m0.grid == g)) throw std::invalid_argument("eval_F0: shape mismatch");
    Field3 m = m_hat;
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j)
            for (int c = 0; c < 3; ++c) m(i, j, c) += m0(j, c);
    Field3 mt = ddt(m_hat);
    Field3 lap = laplacian_neumann(m_hat);
    Field3 gm = grad_x(m_hat);
    Slice3 lap0 = slice_lap_data(m0);
    Slice3 gm0 = slice_grad_data(m0);
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j)
            for (int c = 0; c < 3; ++c) {
                lap(i, j, c) += lap0(j, c);
                gm(i, j, c) += gm0(j, c);
            }
    const double a1 = alpha.a1, a2 = alpha.a2, lam = coeff.lambda;
    Field3 w(g);
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            const double mx = m(i, j, 0), my = m(i, j, 1), mz = m(i, j, 2);
            const double tx = mt(i, j, 0), ty = mt(i, j, 1), tz = mt(i, j, 2);
            const double hx = h(i, j, 0), hy = h(i, j, 1), hz = h(i, j, 2);
            const double g2 = gm(i, j, 0) * gm(i, j, 0) + gm(i, j, 1) * gm(i, j, 1) +
                              gm(i, j, 2) * gm(i, j, 2);
            const double mh = mx * hx + my * hy + mz * hz;
            // m x m_t
            const double cx = my * tz - mz * ty;
            const double cy = mz * tx - mx * tz;
            const double cz = mx * ty - my * tx;
            w(i, j, 0) = a1 * tx - lam * lap(i, j, 0) - a2 * cx - lam * g2 * mx - hx + mh * mx;
            w(i, j, 1) = a1 * ty - lam * lap(i, j, 1) - a2 * cy - lam * g2 * my - hy + mh * my;
            w(i, j, 2) = a1 * tz - lam * lap(i, j, 2) - a2 * cz - lam * g2 * mz - hz + mh * mz;
        }
    return w;
}

// v_kl(t) = int_0^T int_Omega K_kl(t,tau,x) . u(tau,x) dx dtau for u = m_t,
// double trapezoid quadrature, transfer function evaluated on its periodic
// extension.
inline VoltageSeries eval_observation(const Field3& m_t, const ObservationSetup& obs) {
    const Grid& g = m_t.grid;
    obs.validate(g);
    VoltageSeries out(g, obs.K(), obs.L());
    std::vector<double> s(g.nt);
    for (int k = 0; k < obs.K(); ++k)
        for (int l = 0; l < obs.L(); ++l) {
            // space integral s(tau) = int c_k (p_l . u)(tau, x) dx
            for (int i = 0; i < g.nt; ++i) {
                double acc = 0.0;
                for (int j = 0; j < g.nx; ++j) {
                    const auto& p = obs.sensitivities[l][j];
                    const double dot = p[0] * m_t(i, j, 0) + p[1] * m_t(i, j, 1) +
                                       p[2] * m_t(i, j, 2);
                    acc += g.wx(j) * obs.concentrations[k][j] * dot;
                }
                s[i] = acc;
            }
            auto& y = out.channel(k, l);
            for (int i = 0; i < g.nt; ++i) {
                double acc = 0.0;
                for (int j = 0; j < g.nt; ++j)
                    acc += g.wt(j) * obs.transfer[l](g.t(i) - g.t(j)) * s[j];
                y[i] = -obs.mu0 * acc;
            }
        }
    return out;
}

struct ScaledModel {
    AlphaPair alpha;
    ModelCoefficients coeff;
    Field3 h;
};

// Section 4.2 scaling: alpha_tilde_1 = gamma alpha_D / (1+alpha_D^2),
// alpha_tilde_2 = gamma / (1+alpha_D^2), alpha_hat_i = at_i/(at_1^2+at_2^2),
// lambda = 2 A m_S, h = mu0 m_S H_ext.
inline ScaledModel scale_physical(double gamma, double alpha_D, double m_S, double A,
                                  const Field3& H_ext, double mu0 = 4.0e-7 * M_PI) {
    if (!(gamma > 0.0) || !(m_S > 0.0))
        throw std::invalid_argument("scale_physical: gamma and m_S must be positive");
    const double at1 = gamma * alpha_D / (1.0 + alpha_D * alpha_D);
    const double at2 = gamma / (1.0 + alpha_D * alpha_D);
    const double denom = at1 * at1 + at2 * at2;
    ScaledModel out{AlphaPair{at1 / denom, at2 / denom,
                              PhysicalParams{gamma, alpha_D, m_S, A}},
                    ModelCoefficients(2.0 * A * m_S), H_ext};
    scale(out.h, mu0 * m_S);
    return out;
}

}  // namespace llg
