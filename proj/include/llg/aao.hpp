// All-at-once Landweber machinery: the A-chain adjoint of the LLG residual
// row, the observation-row adjoint, the alpha gradients, the LLG-solver
// mode, and the joint identification loop.
#pragma once

#include <string>

#include "llg/control.hpp"
#include "llg/operators.hpp"

namespace llg {

// y = I2[Helmholtz solve of w]; the continuum Riesz map of W.
inline Field3 riesz_y(const Field3& w) { return I2(solve_helmholtz_slice(w)); }

// Adjoint right sides f^y and g^y_T in their continuum form; these drive
// the paper-faithful heat-march mode.
struct AdjointRhs {
    Field3 f;
    Slice3 gT;
};

inline AdjointRhs assemble_adjoint_rhs(const Field3& y, const LinearState& s) {
    const Grid& g = s.grid;
    if (!(y.grid == g)) throw std::invalid_argument("assemble_adjoint_rhs: shape mismatch");
    Field3 yt = ddt(y);
    Field3 lap_y = laplacian_neumann(y);
    Field3 gy = grad_x(y);
    const double a1 = s.alpha.a1, a2 = s.alpha.a2, lam = s.lambda;
    AdjointRhs out{Field3(g), Slice3(g)};
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            const double mx = s.m(i, j, 0), my = s.m(i, j, 1), mz = s.m(i, j, 2);
            const double tx = s.m_hat_t(i, j, 0), ty = s.m_hat_t(i, j, 1),
                         tz = s.m_hat_t(i, j, 2);
            const double yx = y(i, j, 0), yy = y(i, j, 1), yz = y(i, j, 2);
            const double ytx = yt(i, j, 0), yty = yt(i, j, 1), ytz = yt(i, j, 2);
            const double hx = s.h(i, j, 0), hy = s.h(i, j, 1), hz = s.h(i, j, 2);
            const double gmx = s.grad_m(i, j, 0), gmy = s.grad_m(i, j, 1),
                         gmz = s.grad_m(i, j, 2);
            const double gm2 = gmx * gmx + gmy * gmy + gmz * gmz;
            const double mdoty = mx * yx + my * yy + mz * yz;
            const double mh = mx * hx + my * hy + mz * hz;
            const double gm_dot_y = gmx * yx + gmy * yy + gmz * yz;
            const double gy_dot_m = gy(i, j, 0) * mx + gy(i, j, 1) * my + gy(i, j, 2) * mz;
            // m_hat_t x y, y_t x m, y x m_hat_t
            const double c1x = ty * yz - tz * yy, c1y = tz * yx - tx * yz,
                         c1z = tx * yy - ty * yx;
            const double c2x = yty * mz - ytz * my, c2y = ytz * mx - ytx * mz,
                         c2z = ytx * my - yty * mx;
            const double c3x = yy * tz - yz * ty, c3y = yz * tx - yx * tz,
                         c3z = yx * ty - yy * tx;
            const double common = 2.0 * lam * (gm_dot_y + gy_dot_m);
            out.f(i, j, 0) = -a1 * ytx - lam * lap_y(i, j, 0) - a2 * c1x + a2 * c2x +
                             a2 * c3x + 2.0 * lam * mdoty * s.lap_m(i, j, 0) + common * gmx -
                             lam * gm2 * yx + mh * yx + mdoty * hx;
            out.f(i, j, 1) = -a1 * yty - lam * lap_y(i, j, 1) - a2 * c1y + a2 * c2y +
                             a2 * c3y + 2.0 * lam * mdoty * s.lap_m(i, j, 1) + common * gmy -
                             lam * gm2 * yy + mh * yy + mdoty * hy;
            out.f(i, j, 2) = -a1 * ytz - lam * lap_y(i, j, 2) - a2 * c1z + a2 * c2z +
                             a2 * c3z + 2.0 * lam * mdoty * s.lap_m(i, j, 2) + common * gmz -
                             lam * gm2 * yz + mh * yz + mdoty * hz;
        }
    const int iT = g.nt - 1;
    for (int j = 0; j < g.nx; ++j) {
        const double yx = y(iT, j, 0), yy = y(iT, j, 1), yz = y(iT, j, 2);
        const double mx = s.m(iT, j, 0), my = s.m(iT, j, 1), mz = s.m(iT, j, 2);
        out.gT(j, 0) = a1 * yx - a2 * (yy * mz - yz * my);
        out.gT(j, 1) = a1 * yy - a2 * (yz * mx - yx * mz);
        out.gT(j, 2) = a1 * yz - a2 * (yx * my - yy * mx);
    }
    return out;
}

enum class AdjointMode { exact, march };

// z = dF0/dm_hat^* w under the discrete U/W inner products. Exact mode
// solves G_U z = J^T G_W w; march mode runs the two auxiliary heat solves
// on the continuum-form right sides.
inline Field3 adjoint_F0_state(const Field3& w, const LinearState& s, const GramUSolver& gram,
                               AdjointMode mode = AdjointMode::exact) {
    if (mode == AdjointMode::exact) {
        Field3 dual = apply_F0_jacobianT(s, apply_GW(w));
        return gram.solve_dual(dual);
    }
    AdjointRhs rhs = assemble_adjoint_rhs(riesz_y(w), s);
    return solve_heat_forward(solve_heat_backward(rhs.f, rhs.gT));
}

// Continuum-form observation right sides f^r (through the kernel's tau
// derivative) and g^r (kernel at tau = T).
inline AdjointRhs compute_obs_rhs(const std::vector<std::vector<double>>& r,
                                  const ObservationSetup& obs, const Grid& g) {
    obs.validate(g);
    if (static_cast<int>(r.size()) != obs.channels())
        throw std::invalid_argument("compute_obs_rhs: channel count mismatch");
    AdjointRhs out{Field3(g), Slice3(g)};
    for (int k = 0; k < obs.K(); ++k)
        for (int l = 0; l < obs.L(); ++l) {
            const auto& rho = r[static_cast<size_t>(k) * obs.L() + l];
            TransferFunction da = obs.transfer[l].derivative();
            for (int j = 0; j < g.nt; ++j) {
                double conv = 0.0;
                for (int i = 0; i < g.nt; ++i) conv += g.wt(i) * da(g.t(i) - g.t(j)) * rho[i];
                const double fv = -obs.mu0 * conv;
                for (int x = 0; x < g.nx; ++x) {
                    const double cw = fv * obs.concentrations[k][x];
                    const auto& p = obs.sensitivities[l][x];
                    for (int c = 0; c < 3; ++c) out.f(j, x, c) += cw * p[c];
                }
            }
            double convT = 0.0;
            for (int i = 0; i < g.nt; ++i)
                convT += g.wt(i) * obs.transfer[l](g.t(i) - g.t_end) * rho[i];
            const double gv = -obs.mu0 * convT;
            for (int x = 0; x < g.nx; ++x) {
                const double cw = gv * obs.concentrations[k][x];
                const auto& p = obs.sensitivities[l][x];
                for (int c = 0; c < 3; ++c) out.gT(x, c) += cw * p[c];
            }
        }
    return out;
}

// s = (observation row)^* r under (U, L2(Y)).
inline Field3 adjoint_obs_state(const std::vector<std::vector<double>>& r,
                                const ObservationSetup& obs, const Grid& g,
                                const GramUSolver& gram, AdjointMode mode = AdjointMode::exact,
                                const DataWeights& wts = {}) {
    if (mode == AdjointMode::exact) {
        Field3 dual = ddt_transpose(observation_transpose_weighted(r, obs, g, wts));
        return gram.solve_dual(dual);
    }
    AdjointRhs rhs = compute_obs_rhs(r, obs, g);
    return solve_heat_forward(solve_heat_backward(rhs.f, rhs.gT));
}

// beta_1 = int int m_hat_t . y, beta_2 = -int int ((m0+m_hat) x m_hat_t) . y
inline std::pair<double, double> grad_alpha(const Field3& y, const Field3& m_hat,
                                            const Slice3& m0) {
    const Grid& g = y.grid;
    Field3 mt = ddt(m_hat);
    double b1 = 0.0, b2 = 0.0;
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            const double w = g.wt(i) * g.wx(j);
            const double mx = m_hat(i, j, 0) + m0(j, 0), my = m_hat(i, j, 1) + m0(j, 1),
                         mz = m_hat(i, j, 2) + m0(j, 2);
            const double tx = mt(i, j, 0), ty = mt(i, j, 1), tz = mt(i, j, 2);
            b1 += w * (tx * y(i, j, 0) + ty * y(i, j, 1) + tz * y(i, j, 2));
            b2 -= w * ((my * tz - mz * ty) * y(i, j, 0) + (mz * tx - mx * tz) * y(i, j, 1) +
                       (mx * ty - my * tx) * y(i, j, 2));
        }
    return {b1, b2};
}

struct StepPolicy {
    double mu0 = 1.0;            // <= 0 requests the automatic (Cauchy) first step
    double mu_min_factor = 1e-6;
    long max_iterations = 5000;
    double growth = 1.0;         // step growth factor applied on acceptance
    bool monitor_l2 = false;     // LLG residual monitored in the W norm by default
    double tol_abs = 0.0;        // absolute residual floor, 0 disables
};

enum class ExitReason { converged, discrepancy, budget, step_floor, diverged };

inline std::string to_string(ExitReason r) {
    switch (r) {
        case ExitReason::converged: return "converged";
        case ExitReason::discrepancy: return "discrepancy";
        case ExitReason::budget: return "max_iterations";
        case ExitReason::step_floor: return "step_floor";
        case ExitReason::diverged: return "diverged";
    }
    return "unknown";
}

struct LlgSolveResult {
    Field3 m_hat;
    IterationLog log;
    long iterations = 0;
    double residual_w = 0.0;
    ExitReason reason = ExitReason::budget;
};

namespace detail {

inline double rel_state_error(const Field3& m, const Field3& m_exact) {
    Field3 diff = m - m_exact;
    return norm_l2(diff) / norm_l2(m_exact);
}

inline Field3 add_m0(const Field3& m_hat, const Slice3& m0) {
    Field3 m = m_hat;
    for (int i = 0; i < m.grid.nt; ++i)
        for (int j = 0; j < m.grid.nx; ++j)
            for (int c = 0; c < 3; ++c) m(i, j, c) += m0(j, c);
    return m;
}

}  // namespace detail

// Remark-3.1 mode of the all-at-once iteration: alpha fixed, only the state
// is updated; adaptive bisection of the Landweber step.
inline LlgSolveResult run_llg_solver(const Field3& m_hat_init, const Slice3& m0,
                                     const AlphaPair& alpha, const Field3& h,
                                     const ModelCoefficients& coeff, const StepPolicy& policy,
                                     const GramUSolver& gram,
                                     const Field3* m_exact = nullptr) {
    const Grid& g = m_hat_init.grid;
    LlgSolveResult out;
    out.m_hat = m_hat_init;
    project_zero_start(out.m_hat);  // the unknown rest vanishes at t = 0

    auto monitor = [&](const Field3& w) { return policy.monitor_l2 ? norm_l2(w) : norm_W(w); };

    Field3 w = eval_F0(out.m_hat, m0, alpha, h, coeff);
    double res = monitor(w);
    const double res0 = res;
    double mu = policy.mu0;
    double mu_min = 0.0;
    int diverged_count = 0;

    auto log_row = [&](long it, double mu_used) {
        LogRow row;
        row.iter = it;
        row.mu = mu_used;
        row.res_llg = policy.monitor_l2 ? norm_W(w) : res;
        row.alpha1 = alpha.a1;
        row.alpha2 = alpha.a2;
        if (m_exact)
            row.rel_err_m = detail::rel_state_error(detail::add_m0(out.m_hat, m0), *m_exact);
        out.log.append(row);
    };

    log_row(0, 0.0);
    out.reason = ExitReason::budget;
    for (long it = 1; it <= policy.max_iterations; ++it) {
        if (policy.tol_abs > 0.0 && res <= policy.tol_abs) {
            out.reason = ExitReason::converged;
            break;
        }
        LinearState st = make_linear_state(out.m_hat, m0, alpha, h, coeff);
        Field3 dual = apply_F0_jacobianT(st, apply_GW(w));
        Field3 z = gram.solve_dual(dual);
        if (mu <= 0.0) {  // exact line search on the linearization
            Field3 jz = apply_F0_jacobian(st, z);
            const double num = dot_euclid(z, dual);
            const double den = dot_euclid(jz, apply_GW(jz));
            mu = den > 0.0 ? num / den : 1.0;
        }
        if (mu_min == 0.0) mu_min = mu * policy.mu_min_factor;

        bool accepted = false;
        Field3 trial, w_trial;
        double res_trial = 0.0;
        while (mu >= mu_min) {
            trial = out.m_hat;
            axpy(trial, -mu, z);
            w_trial = eval_F0(trial, m0, alpha, h, coeff);
            res_trial = monitor(w_trial);
            StepDecision d = adapt_step(res, res_trial, mu);
            if (d.accept) {
                accepted = true;
                break;
            }
            mu = d.mu;
        }
        if (!accepted) {
            out.reason = ExitReason::step_floor;
            break;
        }
        out.m_hat = std::move(trial);
        w = std::move(w_trial);
        res = res_trial;
        out.iterations = it;
        log_row(it, mu);
        mu *= policy.growth;

        if (res > 10.0 * res0) {
            if (++diverged_count >= 50) {
                out.reason = ExitReason::diverged;
                break;
            }
        } else {
            diverged_count = 0;
        }
    }
    if (policy.tol_abs > 0.0 && res <= policy.tol_abs) out.reason = ExitReason::converged;
    out.residual_w = policy.monitor_l2 ? norm_W(w) : res;
    out.log.exit_reason = to_string(out.reason);
    return out;
}

struct AaoResult {
    Field3 m_hat;
    AlphaPair alpha;
    IterationLog log;
    long iterations = 0;
    double res_obs = 0.0;
    double res_llg = 0.0;
    ExitReason reason = ExitReason::budget;
};

// Full all-at-once Landweber: joint update of (m_hat, alpha1, alpha2),
// discrepancy stopping on the observation residual for noisy data.
inline AaoResult run_aao(const VoltageSeries& data, const ObservationSetup& obs,
                         const Field3& m_hat_init, const AlphaPair& alpha_init,
                         const Slice3& m0, const Field3& h, const ModelCoefficients& coeff,
                         const StepPolicy& policy, double tau, const GramUSolver& gram,
                         const Field3* m_exact = nullptr) {
    const Grid& g = m_hat_init.grid;
    obs.validate(g);
    AaoResult out;
    out.m_hat = m_hat_init;
    project_zero_start(out.m_hat);
    out.alpha = alpha_init;

    double delta_total = 0.0;
    for (double d : data.delta) delta_total += d * d;
    delta_total = std::sqrt(delta_total);
    const bool noisy = delta_total > 0.0;

    auto residuals = [&](const Field3& m_hat, const AlphaPair& a, Field3& w_out,
                         std::vector<std::vector<double>>& r_out) {
        w_out = eval_F0(m_hat, m0, a, h, coeff);
        VoltageSeries v = eval_observation(ddt(detail::add_m0(m_hat, m0)), obs);
        r_out.assign(data.channels(), {});
        for (int kl = 0; kl < data.channels(); ++kl) {
            r_out[kl] = v.data[kl];
            for (int i = 0; i < g.nt; ++i) r_out[kl][i] -= data.data[kl][i];
        }
    };

    Field3 w;
    std::vector<std::vector<double>> r;
    residuals(out.m_hat, out.alpha, w, r);
    double res_llg = norm_W(w);
    double res_obs = data_norm(g, r);
    double total = std::sqrt(res_llg * res_llg + res_obs * res_obs);
    const double total0 = total;

    auto log_row = [&](long it, double mu_used) {
        LogRow row;
        row.iter = it;
        row.mu = mu_used;
        row.res_obs = res_obs;
        row.res_llg = res_llg;
        row.alpha1 = out.alpha.a1;
        row.alpha2 = out.alpha.a2;
        if (m_exact)
            row.rel_err_m = detail::rel_state_error(detail::add_m0(out.m_hat, m0), *m_exact);
        out.log.append(row);
    };

    log_row(0, 0.0);
    double mu = policy.mu0;
    double mu_min = 0.0;
    int diverged_count = 0;
    out.reason = ExitReason::budget;

    for (long it = 1; it <= policy.max_iterations; ++it) {
        if (noisy && discrepancy_flag(res_obs, delta_total, tau) == 0) {
            out.reason = ExitReason::discrepancy;
            break;
        }
        if (policy.tol_abs > 0.0 && total <= policy.tol_abs) {
            out.reason = ExitReason::converged;
            break;
        }
        LinearState st = make_linear_state(out.m_hat, m0, out.alpha, h, coeff);
        Field3 gw = apply_GW(w);
        Field3 dual_w = apply_F0_jacobianT(st, gw);
        Field3 dual_s = ddt_transpose(observation_transpose_weighted(r, obs, g));
        Field3 z = gram.solve_dual(dual_w);
        Field3 s = gram.solve_dual(dual_s);
        Field3 y = apply_mass_inv(gw);
        auto [b1, b2] = grad_alpha(y, out.m_hat, m0);

        if (mu <= 0.0) {  // Cauchy step for the joint direction
            Field3 zs = z + s;
            const double num =
                dot_euclid(zs, dual_w) + dot_euclid(zs, dual_s) + b1 * b1 + b2 * b2;
            Field3 jd = apply_F0_jacobian(st, zs);
            axpy(jd, 1.0, apply_F0_dalpha(st, b1, b2));
            VoltageSeries jobs = eval_observation(ddt(zs), obs);
            double den = dot_euclid(jd, apply_GW(jd));
            for (int kl = 0; kl < jobs.channels(); ++kl)
                for (int i = 0; i < g.nt; ++i)
                    den += g.wt(i) * jobs.data[kl][i] * jobs.data[kl][i];
            mu = den > 0.0 ? num / den : 1.0;
        }
        if (mu_min == 0.0) mu_min = mu * policy.mu_min_factor;

        bool accepted = false;
        Field3 trial_m, w_t;
        AlphaPair trial_a = out.alpha;
        std::vector<std::vector<double>> r_t;
        double res_llg_t = 0.0, res_obs_t = 0.0, total_t = 0.0;
        while (mu >= mu_min) {
            trial_m = out.m_hat;
            axpy(trial_m, -mu, z);
            axpy(trial_m, -mu, s);
            trial_a.a1 = out.alpha.a1 - mu * b1;
            trial_a.a2 = out.alpha.a2 - mu * b2;
            residuals(trial_m, trial_a, w_t, r_t);
            res_llg_t = norm_W(w_t);
            res_obs_t = data_norm(g, r_t);
            total_t = std::sqrt(res_llg_t * res_llg_t + res_obs_t * res_obs_t);
            StepDecision d = adapt_step(total, total_t, mu);
            if (d.accept) {
                accepted = true;
                break;
            }
            mu = d.mu;
        }
        if (!accepted) {
            out.reason = ExitReason::step_floor;
            break;
        }
        out.m_hat = std::move(trial_m);
        out.alpha = trial_a;
        w = std::move(w_t);
        r = std::move(r_t);
        res_llg = res_llg_t;
        res_obs = res_obs_t;
        total = total_t;
        out.iterations = it;
        log_row(it, mu);
        mu *= policy.growth;

        if (total > 10.0 * total0) {
            if (++diverged_count >= 50) {
                out.reason = ExitReason::diverged;
                break;
            }
        } else {
            diverged_count = 0;
        }
    }
    out.res_obs = res_obs;
    out.res_llg = res_llg;
    out.log.exit_reason = to_string(out.reason);
    return out;
}

}  // namespace llg
