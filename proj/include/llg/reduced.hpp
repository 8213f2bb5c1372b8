// Reduced-setting machinery: the parameter-to-state map, the linearized
// forward derivative, the reduced adjoint (exact transpose route and the
// paper's backward PDE march), and the Landweber/Kaczmarz drivers.
#pragma once

#include "llg/aao.hpp"

namespace llg {

struct StateSolve {
    Field3 m;            // m0 + m_hat
    Field3 m_hat;
    long inner_loops = 0;
    double residual_w = 0.0;
    ExitReason reason = ExitReason::budget;
};

struct InnerPolicy {
    double tol_abs = 0.0;          // absolute W-residual target for the inner solve
    long max_iterations = 5000;
    double mu0 = -1.0;             // automatic first step by default
    double mu_min_factor = 1e-6;
    double growth = 1.0;
};

// S(alpha): solve the LLG equation by the Remark-3.1 iteration, warm started.
inline StateSolve parameter_to_state(const AlphaPair& alpha, const Slice3& m0, const Field3& h,
                                     const ModelCoefficients& coeff, const Field3& warm_start,
                                     const InnerPolicy& inner, const GramUSolver& gram) {
    StepPolicy policy;
    policy.mu0 = inner.mu0;
    policy.mu_min_factor = inner.mu_min_factor;
    policy.max_iterations = inner.max_iterations;
    policy.growth = inner.growth;
    policy.tol_abs = inner.tol_abs;
    LlgSolveResult r = run_llg_solver(warm_start, m0, alpha, h, coeff, policy, gram);
    if (r.reason == ExitReason::diverged)
        throw std::runtime_error("parameter_to_state: inner LLG solver diverged");
    StateSolve out;
    out.m_hat = std::move(r.m_hat);
    out.m = detail::add_m0(out.m_hat, m0);
    out.inner_loops = r.iterations;
    out.residual_w = r.residual_w;
    out.reason = r.reason;
    return out;
}

namespace detail {

// Preconditioned CG on N = P J^T G_W J P (P = zero-start projection),
// preconditioned by the U-Gram solve. N is only positive semi-definite
// (the W form has a trapezoid Nyquist kernel), but the right sides arising
// here are orthogonal to the kernel, so plain CG applies.
inline Field3 solve_normal_equations(const LinearState& st, const GramUSolver& gram,
                                     const Field3& rhs_dual, double tol_rel = 1e-11,
                                     int max_iterations = 2000, int* iters = nullptr) {
    const Grid& g = st.grid;
    auto apply_N = [&](const Field3& u) {
        Field3 pu = u;
        project_zero_start(pu);
        Field3 out = apply_F0_jacobianT(st, apply_GW(apply_F0_jacobian(st, pu)));
        project_zero_start(out);
        return out;
    };
    Field3 x(g);
    Field3 r = rhs_dual;
    project_zero_start(r);
    Field3 z = gram.solve_dual(r);
    Field3 p = z;
    double rz = dot_euclid(r, z);
    const double rz0 = rz;
    int it = 0;
    for (; it < max_iterations && rz > tol_rel * tol_rel * rz0 && rz > 0.0; ++it) {
        Field3 Np = apply_N(p);
        const double pNp = dot_euclid(p, Np);
        if (pNp <= 0.0) break;  // numerical kernel drift exhausted the search space
        const double a = rz / pNp;
        axpy(x, a, p);
        axpy(r, -a, Np);
        z = gram.solve_dual(r);
        const double rz_new = dot_euclid(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        Field3 pnew = z;
        axpy(pnew, beta, p);
        p = std::move(pnew);
    }
    if (iters) *iters = it;
    return x;
}

}  // namespace detail

// u = S'(alpha) beta: least-squares solution of the linearized LLG equation
// dF0/dm u = -(b1 m_t - b2 m x m_t) with u(0) = 0, consistent with the
// discretization the state solver minimizes.
inline Field3 linearized_llg_apply(double b1, double b2, const LinearState& st,
                                   const GramUSolver& gram, double tol_rel = 1e-12) {
    Field3 src = apply_F0_dalpha(st, b1, b2);
    Field3 rhs = apply_F0_jacobianT(st, apply_GW(src));
    scale(rhs, -1.0);
    return detail::solve_normal_equations(st, gram, rhs, tol_rel);
}

// Ktilde r (x,t) = sum_kl -mu0 c_k p_l int a'_l(tau - t) r_kl(tau) dtau,
// restricted to a time window for the Kaczmarz variants.
inline Field3 apply_Ktilde(const std::vector<std::vector<double>>& r, const ObservationSetup& obs,
                           const Grid& g, const DataWeights& wts = {}) {
    obs.validate(g);
    if (static_cast<int>(r.size()) != obs.channels())
        throw std::invalid_argument("apply_Ktilde: channel count mismatch");
    Field3 out(g);
    for (int k = 0; k < obs.K(); ++k)
        for (int l = 0; l < obs.L(); ++l) {
            const auto& rho = r[static_cast<size_t>(k) * obs.L() + l];
            TransferFunction da = obs.transfer[l].derivative();
            for (int j = 0; j < g.nt; ++j) {
                double conv = 0.0;
                for (int i = 0; i < g.nt; ++i)
                    conv += wts.weight(g, i) * da(g.t(i) - g.t(j)) * rho[i];
                const double fv = -obs.mu0 * conv;
                for (int x = 0; x < g.nx; ++x) {
                    const double cw = fv * obs.concentrations[k][x];
                    const auto& p = obs.sensitivities[l][x];
                    for (int c = 0; c < 3; ++c) out(j, x, c) += cw * p[c];
                }
            }
        }
    return out;
}

// KtildeT r (x) = sum_kl -mu0 c_k p_l int a_l(tau) r_kl(tau) dtau
inline Slice3 apply_KtildeT(const std::vector<std::vector<double>>& r, const ObservationSetup& obs,
                            const Grid& g, const DataWeights& wts = {}) {
    obs.validate(g);
    if (static_cast<int>(r.size()) != obs.channels())
        throw std::invalid_argument("apply_KtildeT: channel count mismatch");
    Slice3 out(g);
    for (int k = 0; k < obs.K(); ++k)
        for (int l = 0; l < obs.L(); ++l) {
            const auto& rho = r[static_cast<size_t>(k) * obs.L() + l];
            double conv = 0.0;
            for (int i = 0; i < g.nt; ++i)
                conv += wts.weight(g, i) * obs.transfer[l](g.t(i)) * rho[i];
            const double gv = -obs.mu0 * conv;
            for (int x = 0; x < g.nx; ++x) {
                const double cw = gv * obs.concentrations[k][x];
                const auto& p = obs.sensitivities[l][x];
                for (int c = 0; c < 3; ++c) out(x, c) += cw * p[c];
            }
        }
    return out;
}

// Paper-faithful reduced adjoint: backward semi-implicit march of the
// adjoint PDE with the pointwise final-time condition. Diffusion and the
// zeroth-order 3x3 coupling are implicit, the grad-p coupling is lagged.
inline Field3 solve_reduced_adjoint_march(const std::vector<std::vector<double>>& r,
                                          const LinearState& st, const ObservationSetup& obs,
                                          const GramUSolver& /*unused*/,
                                          const DataWeights& wts = {}) {
    const Grid& g = st.grid;
    if (st.alpha.a1 == 0.0)
        throw std::invalid_argument("solve_reduced_adjoint: alpha1 must be nonzero");
    const double a1 = st.alpha.a1, a2 = st.alpha.a2, lam = st.lambda;
    Field3 Kr = apply_Ktilde(r, obs, g, wts);
    Slice3 KTr = apply_KtildeT(r, obs, g, wts);
    Field3 p(g);
    // terminal slice from the pointwise 3x3 condition
    Slice3 mT = slice_at(st.m, g.nt - 1);
    Slice3 pT = solve_final_condition(mT, KTr, st.alpha);
    for (int j = 0; j < g.nx; ++j)
        for (int c = 0; c < 3; ++c) p(g.nt - 1, j, c) = pT(j, c);

    const double invdx2 = 1.0 / (g.dx * g.dx);
    const double inv2dx = 1.0 / (2.0 * g.dx);
    std::vector<Vec3> rhs(g.nx);
    for (int n = g.nt - 2; n >= 0; --n) {
        BlockTridiag3 T(g.nx);
        for (int j = 0; j < g.nx; ++j) {
            const double mx = st.m(n, j, 0), my = st.m(n, j, 1), mz = st.m(n, j, 2);
            const double tx = st.m_hat_t(n, j, 0), ty = st.m_hat_t(n, j, 1),
                         tz = st.m_hat_t(n, j, 2);
            const double hx = st.h(n, j, 0), hy = st.h(n, j, 1), hz = st.h(n, j, 2);
            const double gmx = st.grad_m(n, j, 0), gmy = st.grad_m(n, j, 1),
                         gmz = st.grad_m(n, j, 2);
            const double gm2 = gmx * gmx + gmy * gmy + gmz * gmz;
            const double mh = mx * hx + my * hy + mz * hz;
            // Q = (a1 I + a2 [m]x) / dt
            Mat3 Q{a1 / g.dt, -a2 * mz / g.dt, a2 * my / g.dt,
                   a2 * mz / g.dt, a1 / g.dt, -a2 * mx / g.dt,
                   -a2 * my / g.dt, a2 * mx / g.dt, a1 / g.dt};
            // implicit zeroth order: -2 a2 [m_t]x + 2 lam gm gm^T
            //   + (-lam gm2 + mh) I + (h + 2 lam lap_m) m^T
            Mat3 Z{};
            Z[1] += 2.0 * a2 * tz; Z[2] -= 2.0 * a2 * ty;
            Z[3] -= 2.0 * a2 * tz; Z[5] += 2.0 * a2 * tx;
            Z[6] += 2.0 * a2 * ty; Z[7] -= 2.0 * a2 * tx;
            const double gv[3] = {gmx, gmy, gmz};
            const double mv[3] = {mx, my, mz};
            const double bv[3] = {hx + 2.0 * lam * st.lap_m(n, j, 0),
                                  hy + 2.0 * lam * st.lap_m(n, j, 1),
                                  hz + 2.0 * lam * st.lap_m(n, j, 2)};
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    Z[a * 3 + b] += 2.0 * lam * gv[a] * gv[b] + bv[a] * mv[b];
                    if (a == b) Z[a * 3 + b] += -lam * gm2 + mh;
                }
            // diffusion: -lam Lap p implicit, mirror stencil
            Mat3 D = Q;
            for (int a = 0; a < 3; ++a) {
                D[a * 3 + a] += 2.0 * lam * invdx2;
                for (int b = 0; b < 3; ++b) D[a * 3 + b] += Z[a * 3 + b];
            }
            T.diag[j] = D;
            Mat3 off{};
            const double sub = (j == g.nx - 1) ? -2.0 * lam * invdx2 : -lam * invdx2;
            const double sup = (j == 0) ? -2.0 * lam * invdx2 : -lam * invdx2;
            if (j > 0) {
                off = Mat3{};
                for (int a = 0; a < 3; ++a) off[a * 3 + a] = sub;
                T.sub[j] = off;
            }
            if (j + 1 < g.nx) {
                off = Mat3{};
                for (int a = 0; a < 3; ++a) off[a * 3 + a] = sup;
                T.sup[j] = off;
            }
            // right side: Q p^{n+1} + Ktilde r - explicit grad-p coupling,
            // the coupling being 2 lam (grad p . m) grad m at the lagged level
            Vec3 pn1{p(n + 1, j, 0), p(n + 1, j, 1), p(n + 1, j, 2)};
            Vec3 qp = mat3_apply(Q, pn1);
            double gpx, gpy, gpz;
            if (j == 0 || j == g.nx - 1) {
                gpx = gpy = gpz = 0.0;
            } else {
                gpx = (p(n + 1, j + 1, 0) - p(n + 1, j - 1, 0)) * inv2dx;
                gpy = (p(n + 1, j + 1, 1) - p(n + 1, j - 1, 1)) * inv2dx;
                gpz = (p(n + 1, j + 1, 2) - p(n + 1, j - 1, 2)) * inv2dx;
            }
            const double gp_dot_m = gpx * mx + gpy * my + gpz * mz;
            rhs[j][0] = qp[0] + Kr(n, j, 0) - 2.0 * lam * gp_dot_m * gmx;
            rhs[j][1] = qp[1] + Kr(n, j, 1) - 2.0 * lam * gp_dot_m * gmy;
            rhs[j][2] = qp[2] + Kr(n, j, 2) - 2.0 * lam * gp_dot_m * gmz;
        }
        solve_block_tridiag3(T, rhs);
        for (int j = 0; j < g.nx; ++j)
            for (int c = 0; c < 3; ++c) p(n, j, c) = rhs[j][c];
    }
    return p;
}

// Exact-transpose reduced adjoint state: p = M^{-1} G_W J N^{-1} T_d^T O^T G_Y r,
// the representer that makes the trapezoid gradient formula the exact
// adjoint of beta -> K d/dt S'(alpha) beta.
inline Field3 solve_reduced_adjoint_exact(const std::vector<std::vector<double>>& r,
                                          const LinearState& st, const ObservationSetup& obs,
                                          const GramUSolver& gram, const DataWeights& wts = {},
                                          double tol_rel = 1e-12) {
    const Grid& g = st.grid;
    Field3 rho = ddt_transpose(observation_transpose_weighted(r, obs, g, wts));
    Field3 psi = detail::solve_normal_equations(st, gram, rho, tol_rel);
    Field3 phi = apply_GW(apply_F0_jacobian(st, psi));
    return apply_mass_inv(phi);
}

inline Field3 solve_reduced_adjoint(const std::vector<std::vector<double>>& r,
                                    const LinearState& st, const ObservationSetup& obs,
                                    const GramUSolver& gram, AdjointMode mode = AdjointMode::exact,
                                    const DataWeights& wts = {}) {
    return mode == AdjointMode::exact ? solve_reduced_adjoint_exact(r, st, obs, gram, wts)
                                      : solve_reduced_adjoint_march(r, st, obs, gram, wts);
}

// (g1, g2) = (int int -m_t . p, int int (m x m_t) . p)
inline std::pair<double, double> gradient_alpha_reduced(const Field3& p, const Field3& m) {
    const Grid& g = p.grid;
    Field3 mt = ddt(m);
    double g1 = 0.0, g2 = 0.0;
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            const double w = g.wt(i) * g.wx(j);
            const double mx = m(i, j, 0), my = m(i, j, 1), mz = m(i, j, 2);
            const double tx = mt(i, j, 0), ty = mt(i, j, 1), tz = mt(i, j, 2);
            g1 -= w * (tx * p(i, j, 0) + ty * p(i, j, 1) + tz * p(i, j, 2));
            g2 += w * ((my * tz - mz * ty) * p(i, j, 0) + (mz * tx - mx * tz) * p(i, j, 1) +
                       (mx * ty - my * tx) * p(i, j, 2));
        }
    return {g1, g2};
}

// One sub-problem of the reduced family: a time window and a channel mask.
struct SubProblem {
    DataWeights window;
    int channel = -1;  // -1 = all channels
    double delta = 0.0;
};

struct ReducedOptions {
    double mu = 1.0;
    double tau = 2.5;
    long max_iterations = 250;
    InnerPolicy inner;
    AdjointMode mode = AdjointMode::exact;
    double stop_res_abs = 0.0;   // absolute observation-residual floor
    const AlphaPair* alpha_exact = nullptr;  // optional, for logging only
};

struct ReducedResult {
    AlphaPair alpha;
    Field3 m;
    IterationLog log;
    long iterations = 0;
    double res_obs = 0.0;
    double res_llg = 0.0;
    ExitReason reason = ExitReason::budget;
};

namespace detail {

// Kaczmarz-style driver shared by run_reduced and both Kaczmarz variants.
inline ReducedResult run_reduced_family(const VoltageSeries& data, const ObservationSetup& obs,
                                        const AlphaPair& alpha_init, const Slice3& m0,
                                        const Field3& h, const ModelCoefficients& coeff,
                                        const Field3& m_init,
                                        const std::vector<SubProblem>& subs,
                                        const ReducedOptions& opt, const GramUSolver& gram) {
    const Grid& g = data.grid;
    obs.validate(g);
    const int n = static_cast<int>(subs.size());
    ReducedResult out;
    out.alpha = alpha_init;
    Field3 warm = m_init - broadcast_time(m0);
    project_zero_start(warm);

    std::vector<int> flags;
    out.reason = ExitReason::budget;
    for (long it = 0; it < opt.max_iterations; ++it) {
        const SubProblem& sp = subs[it % n];
        StateSolve ss = parameter_to_state(out.alpha, m0, h, coeff, warm, opt.inner, gram);
        warm = ss.m_hat;
        out.m = ss.m;
        VoltageSeries v = eval_observation(ddt(ss.m), obs);
        std::vector<std::vector<double>> r(data.channels(), std::vector<double>(g.nt, 0.0));
        for (int kl = 0; kl < data.channels(); ++kl) {
            if (sp.channel >= 0 && kl != sp.channel) continue;
            for (int i = 0; i < g.nt; ++i) r[kl][i] = v.data[kl][i] - data.data[kl][i];
        }
        const double res = data_norm(g, r, sp.window);
        out.res_obs = res;
        out.res_llg = ss.residual_w;
        out.iterations = it;

        LogRow row;
        row.iter = it;
        row.mu = opt.mu;
        row.res_obs = res;
        row.res_llg = ss.residual_w;
        row.alpha1 = out.alpha.a1;
        row.alpha2 = out.alpha.a2;
        row.inner_loops = ss.inner_loops;
        out.log.append(row);

        const bool noisy = sp.delta > 0.0;
        const int flag = noisy ? discrepancy_flag(res, sp.delta, opt.tau) : 1;
        flags.push_back(flag);
        if (noisy) {
            const long stop = cycle_stop(flags, n);
            if (stop >= 0) {
                out.reason = ExitReason::discrepancy;
                break;
            }
        }
        if (opt.stop_res_abs > 0.0 && res <= opt.stop_res_abs) {
            out.reason = ExitReason::converged;
            break;
        }
        if (flag == 1) {
            LinearState st = make_linear_state(ss.m_hat, m0, out.alpha, h, coeff);
            Field3 p = solve_reduced_adjoint(r, st, obs, gram, opt.mode, sp.window);
            auto [g1, g2] = gradient_alpha_reduced(p, ss.m);
            out.alpha.a1 -= opt.mu * g1;
            out.alpha.a2 -= opt.mu * g2;
            if (!std::isfinite(out.alpha.a1) || !std::isfinite(out.alpha.a2) ||
                std::abs(out.alpha.a1) > 1e6 || std::abs(out.alpha.a2) > 1e6) {
                out.reason = ExitReason::diverged;
                break;
            }
        }
    }
    if (out.m.v.empty()) {
        StateSolve ss = parameter_to_state(out.alpha, m0, h, coeff, warm, opt.inner, gram);
        out.m = ss.m;
        out.res_llg = ss.residual_w;
    }
    out.log.exit_reason = to_string(out.reason);
    return out;
}

inline double full_delta(const VoltageSeries& data) {
    double d = 0.0;
    for (double x : data.delta) d += x * x;
    return std::sqrt(d);
}

}  // namespace detail

// Plain reduced Landweber: one sub-problem covering all data.
inline ReducedResult run_reduced(const VoltageSeries& data, const ObservationSetup& obs,
                                 const AlphaPair& alpha_init, const Slice3& m0, const Field3& h,
                                 const ModelCoefficients& coeff, const Field3& m_init,
                                 const ReducedOptions& opt, const GramUSolver& gram) {
    std::vector<SubProblem> subs{{DataWeights{}, -1, detail::full_delta(data)}};
    return detail::run_reduced_family(data, obs, alpha_init, m0, h, coeff, m_init, subs, opt,
                                      gram);
}

// Kaczmarz over contiguous time segments; n_segments = 1 reproduces
// run_reduced iterate for iterate.
inline ReducedResult run_kaczmarz_time(const VoltageSeries& data, const ObservationSetup& obs,
                                       const AlphaPair& alpha_init, const Slice3& m0,
                                       const Field3& h, const ModelCoefficients& coeff,
                                       const Field3& m_init, int n_segments,
                                       const ReducedOptions& opt, const GramUSolver& gram) {
    const Grid& g = data.grid;
    if (n_segments < 1 || n_segments > g.nt - 1)
        throw std::invalid_argument("run_kaczmarz_time: need 1 <= n <= nt-1 segments");
    std::vector<SubProblem> subs;
    const int intervals = g.nt - 1;
    int begin = 0;
    for (int s = 0; s < n_segments; ++s) {
        const int len = intervals / n_segments + (s < intervals % n_segments ? 1 : 0);
        SubProblem sp;
        sp.window.seg_begin = begin;
        sp.window.seg_end = begin + len;
        // noise level actually applied to this segment
        double d2 = 0.0;
        if (!data.noise.empty())
            for (const auto& ch : data.noise)
                for (int i = 0; i < g.nt; ++i) {
                    const double w = sp.window.weight(g, i);
                    d2 += w * ch[i] * ch[i];
                }
        sp.delta = std::sqrt(d2);
        subs.push_back(sp);
        begin += len;
    }
    return detail::run_reduced_family(data, obs, alpha_init, m0, h, coeff, m_init, subs, opt,
                                      gram);
}

// Kaczmarz over (k, l) data channels.
inline ReducedResult run_kaczmarz_data(const VoltageSeries& data, const ObservationSetup& obs,
                                       const AlphaPair& alpha_init, const Slice3& m0,
                                       const Field3& h, const ModelCoefficients& coeff,
                                       const Field3& m_init, const ReducedOptions& opt,
                                       const GramUSolver& gram) {
    std::vector<SubProblem> subs;
    for (int kl = 0; kl < data.channels(); ++kl) {
        SubProblem sp;
        sp.channel = kl;
        sp.delta = data.delta[kl];
        subs.push_back(sp);
    }
    return detail::run_reduced_family(data, obs, alpha_init, m0, h, coeff, m_init, subs, opt,
                                      gram);
}

}  // namespace llg
