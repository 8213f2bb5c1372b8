// The linearized forward operators and the exact discrete adjoint
// machinery: F0 Jacobian and its transpose, the banded U-Gram solver
// realizing the U-space Riesz map, and the observation transpose.
#pragma once

#include "llg/model.hpp"
#include "llg/norms.hpp"

namespace llg {

inline double dot_euclid(const Field3& a, const Field3& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.v.size(); ++k) s += a.v[k] * b.v[k];
    return s;
}

// zero the t=0 slice (projection onto the u(0)=0 subspace)
inline void project_zero_start(Field3& f) {
    for (int j = 0; j < f.grid.nx; ++j)
        for (int c = 0; c < 3; ++c) f(0, j, c) = 0.0;
}

// Everything the linearization of F0 at (m_hat, alpha) needs.
struct LinearState {
    Grid grid;
    Field3 m;        // m0 + m_hat
    Field3 m_hat_t;  // ddt(m_hat) = ddt(m)
    Field3 grad_m;
    Field3 lap_m;
    Field3 h;
    AlphaPair alpha;
    double lambda = 1.0;
};

inline LinearState make_linear_state(const Field3& m_hat, const Slice3& m0,
                                     const AlphaPair& alpha, const Field3& h,
                                     const ModelCoefficients& coeff) {
    LinearState s{m_hat.grid, m_hat, ddt(m_hat), Field3(), Field3(), h, alpha, coeff.lambda};
    for (int i = 0; i < s.grid.nt; ++i)
        for (int j = 0; j < s.grid.nx; ++j)
            for (int c = 0; c < 3; ++c) s.m(i, j, c) += m0(j, c);
    // state coefficients use the same split as eval_F0: mirror stencils on
    // the unknown, data stencils on m0
    s.grad_m = grad_x(m_hat);
    s.lap_m = laplacian_neumann(m_hat);
    Slice3 g0 = slice_grad_data(m0);
    Slice3 l0 = slice_lap_data(m0);
    for (int i = 0; i < s.grid.nt; ++i)
        for (int j = 0; j < s.grid.nx; ++j)
            for (int c = 0; c < 3; ++c) {
                s.grad_m(i, j, c) += g0(j, c);
                s.lap_m(i, j, c) += l0(j, c);
            }
    return s;
}

// dF0/dm_hat applied to u:
//   a1 u_t - a2 m x u_t - a2 u x m_hat_t - lam Lap u
//   - 2 lam (grad m : grad u) m - lam |grad m|^2 u + (m.h) u + (u.h) m
inline Field3 apply_F0_jacobian(const LinearState& s, const Field3& u) {
    const Grid& g = s.grid;
    Field3 ut = ddt(u);
    Field3 lap = laplacian_neumann(u);
    Field3 gu = grad_x(u);
    Field3 out(g);
    const double a1 = s.alpha.a1, a2 = s.alpha.a2, lam = s.lambda;
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            const double mx = s.m(i, j, 0), my = s.m(i, j, 1), mz = s.m(i, j, 2);
            const double tx = s.m_hat_t(i, j, 0), ty = s.m_hat_t(i, j, 1),
                         tz = s.m_hat_t(i, j, 2);
            const double ux = u(i, j, 0), uy = u(i, j, 1), uz = u(i, j, 2);
            const double utx = ut(i, j, 0), uty = ut(i, j, 1), utz = ut(i, j, 2);
            const double hx = s.h(i, j, 0), hy = s.h(i, j, 1), hz = s.h(i, j, 2);
            const double gmx = s.grad_m(i, j, 0), gmy = s.grad_m(i, j, 1),
                         gmz = s.grad_m(i, j, 2);
            const double gm2 = gmx * gmx + gmy * gmy + gmz * gmz;
            const double gdot = gmx * gu(i, j, 0) + gmy * gu(i, j, 1) + gmz * gu(i, j, 2);
            const double mh = mx * hx + my * hy + mz * hz;
            const double uh = ux * hx + uy * hy + uz * hz;
            // m x u_t and u x m_hat_t
            const double c1x = my * utz - mz * uty, c1y = mz * utx - mx * utz,
                         c1z = mx * uty - my * utx;
            const double c2x = uy * tz - uz * ty, c2y = uz * tx - ux * tz,
                         c2z = ux * ty - uy * tx;
            out(i, j, 0) = a1 * utx - a2 * c1x - a2 * c2x - lam * lap(i, j, 0) -
                           2.0 * lam * gdot * mx - lam * gm2 * ux + mh * ux + uh * mx;
            out(i, j, 1) = a1 * uty - a2 * c1y - a2 * c2y - lam * lap(i, j, 1) -
                           2.0 * lam * gdot * my - lam * gm2 * uy + mh * uy + uh * my;
            out(i, j, 2) = a1 * utz - a2 * c1z - a2 * c2z - lam * lap(i, j, 2) -
                           2.0 * lam * gdot * mz - lam * gm2 * uz + mh * uz + uh * mz;
        }
    return out;
}

// Exact Euclidean transpose of apply_F0_jacobian.
inline Field3 apply_F0_jacobianT(const LinearState& s, const Field3& v) {
    const Grid& g = s.grid;
    const double a1 = s.alpha.a1, a2 = s.alpha.a2, lam = s.lambda;
    // pieces that end with the ddt: a1 v + a2 m x v  (transpose of a1 ut - a2 m x ut)
    Field3 tpart(g);
    // pointwise pieces
    Field3 point(g);
    // piece routed through grad_x^T: grad m * (m . v) per component
    Field3 gpart(g);
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            const double mx = s.m(i, j, 0), my = s.m(i, j, 1), mz = s.m(i, j, 2);
            const double tx = s.m_hat_t(i, j, 0), ty = s.m_hat_t(i, j, 1),
                         tz = s.m_hat_t(i, j, 2);
            const double vx = v(i, j, 0), vy = v(i, j, 1), vz = v(i, j, 2);
            const double hx = s.h(i, j, 0), hy = s.h(i, j, 1), hz = s.h(i, j, 2);
            const double gmx = s.grad_m(i, j, 0), gmy = s.grad_m(i, j, 1),
                         gmz = s.grad_m(i, j, 2);
            const double gm2 = gmx * gmx + gmy * gmy + gmz * gmz;
            const double mh = mx * hx + my * hy + mz * hz;
            const double mv = mx * vx + my * vy + mz * vz;
            // m x v
            const double cmx = my * vz - mz * vy, cmy = mz * vx - mx * vz,
                         cmz = mx * vy - my * vx;
            tpart(i, j, 0) = a1 * vx + a2 * cmx;
            tpart(i, j, 1) = a1 * vy + a2 * cmy;
            tpart(i, j, 2) = a1 * vz + a2 * cmz;
            // -a2 u x m_hat_t = +a2 [m_hat_t]x u, transpose: -a2 m_hat_t x v
            const double ctx = ty * vz - tz * vy, cty = tz * vx - tx * vz,
                         ctz = tx * vy - ty * vx;
            point(i, j, 0) = -a2 * ctx - lam * gm2 * vx + mh * vx + mv * hx;
            point(i, j, 1) = -a2 * cty - lam * gm2 * vy + mh * vy + mv * hy;
            point(i, j, 2) = -a2 * ctz - lam * gm2 * vz + mh * vz + mv * hz;
            gpart(i, j, 0) = -2.0 * lam * gmx * mv;
            gpart(i, j, 1) = -2.0 * lam * gmy * mv;
            gpart(i, j, 2) = -2.0 * lam * gmz * mv;
        }
    Field3 out = ddt_transpose(tpart);
    Field3 lapT = laplacian_neumann_transpose(v);
    axpy(out, -lam, lapT);
    Field3 gT = grad_x_transpose(gpart);
    axpy(out, 1.0, gT);
    axpy(out, 1.0, point);
    return out;
}

// dF0/dalpha applied to (b1, b2): b1 m_hat_t - b2 (m x m_hat_t)
inline Field3 apply_F0_dalpha(const LinearState& s, double b1, double b2) {
    const Grid& g = s.grid;
    Field3 out(g);
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            const double mx = s.m(i, j, 0), my = s.m(i, j, 1), mz = s.m(i, j, 2);
            const double tx = s.m_hat_t(i, j, 0), ty = s.m_hat_t(i, j, 1),
                         tz = s.m_hat_t(i, j, 2);
            out(i, j, 0) = b1 * tx - b2 * (my * tz - mz * ty);
            out(i, j, 1) = b1 * ty - b2 * (mz * tx - mx * tz);
            out(i, j, 2) = b1 * tz - b2 * (mx * ty - my * tx);
        }
    return out;
}

// Gram matrix of the U inner product on the u(0)=0 subspace, factorized
// once per grid as a banded Cholesky (components decouple).
class GramUSolver {
public:
    explicit GramUSolver(const Grid& g) : grid_(g) {
        build();
    }

    const Grid& grid() const { return grid_; }

    // Solve G_U z = dual (Euclidean right side; t=0 rows are ignored and
    // z(0) = 0 by construction).
    Field3 solve_dual(const Field3& dual) const {
        const Grid& g = grid_;
        const int n = (g.nt - 1) * g.nx;
        Field3 z(g);
        std::vector<double> rhs(n);
        for (int c = 0; c < 3; ++c) {
            for (int i = 1; i < g.nt; ++i)
                for (int j = 0; j < g.nx; ++j) rhs[(i - 1) * g.nx + j] = dual(i, j, c);
            chol_.solve(rhs.data());
            for (int i = 1; i < g.nt; ++i)
                for (int j = 0; j < g.nx; ++j) z(i, j, c) = rhs[(i - 1) * g.nx + j];
        }
        return z;
    }

private:
    void build() {
        const Grid& g = grid_;
        const int nt = g.nt, nx = g.nx;
        // dense time blocks At = Td^T Dt Td (band 2), space Ax = Lap^T Dx Lap
        std::vector<std::vector<double>> Td(nt, std::vector<double>(nt, 0.0));
        const double s = 1.0 / (2.0 * g.dt);
        Td[0][0] = -3.0 * s; Td[0][1] = 4.0 * s; Td[0][2] = -s;
        for (int i = 1; i < nt - 1; ++i) {
            Td[i][i - 1] = -s;
            Td[i][i + 1] = s;
        }
        Td[nt - 1][nt - 1] = 3.0 * s; Td[nt - 1][nt - 2] = -4.0 * s; Td[nt - 1][nt - 3] = s;
        std::vector<std::vector<double>> At(nt, std::vector<double>(nt, 0.0));
        for (int k = 0; k < nt; ++k)
            for (int i = std::max(0, k - 2); i < std::min(nt, k + 3); ++i) {
                if (Td[k][i] == 0.0) continue;
                for (int j = std::max(0, k - 2); j < std::min(nt, k + 3); ++j)
                    At[i][j] += g.wt(k) * Td[k][i] * Td[k][j];
            }
        std::vector<std::vector<double>> Lp(nx, std::vector<double>(nx, 0.0));
        const double q = 1.0 / (g.dx * g.dx);
        Lp[0][0] = -2.0 * q; Lp[0][1] = 2.0 * q;
        for (int j = 1; j < nx - 1; ++j) {
            Lp[j][j - 1] = q; Lp[j][j] = -2.0 * q; Lp[j][j + 1] = q;
        }
        Lp[nx - 1][nx - 2] = 2.0 * q; Lp[nx - 1][nx - 1] = -2.0 * q;
        std::vector<std::vector<double>> Ax(nx, std::vector<double>(nx, 0.0));
        for (int k = 0; k < nx; ++k)
            for (int i = std::max(0, k - 1); i < std::min(nx, k + 2); ++i) {
                if (Lp[k][i] == 0.0) continue;
                for (int j = std::max(0, k - 1); j < std::min(nx, k + 2); ++j)
                    Ax[i][j] += g.wx(k) * Lp[k][i] * Lp[k][j];
            }
        // final-time gradient term (1/dx) Ex^T Ex
        std::vector<std::vector<double>> Gx(nx, std::vector<double>(nx, 0.0));
        const double r = 1.0 / g.dx;
        for (int j = 0; j + 1 < nx; ++j) {
            Gx[j][j] += r; Gx[j + 1][j + 1] += r;
            Gx[j][j + 1] -= r; Gx[j + 1][j] -= r;
        }

        const int n = (nt - 1) * nx;
        const int bw = 2 * nx + 2;
        chol_ = BandedCholesky(n, bw);
        auto row = [nx](int i, int j) { return (i - 1) * nx + j; };
        for (int i = 1; i < nt; ++i)
            for (int j = 0; j < nx; ++j) {
                const int rr = row(i, j);
                // time-block part: At[i][i2] * wx(j), same j
                for (int i2 = std::max(1, i - 2); i2 <= std::min(nt - 1, i + 2); ++i2) {
                    const int cc = row(i2, j);
                    if (cc > rr) continue;
                    double val = At[i][i2] * g.wx(j);
                    if (i2 == i) {
                        for (int j2 = std::max(0, j - 2); j2 <= j; ++j2) {
                            const int c2 = row(i, j2);
                            double v2 = (j2 == j ? val : 0.0) + g.wt(i) * Ax[j][j2];
                            if (i == nt - 1) v2 += Gx[j][j2];
                            chol_.at(rr, c2) += v2;
                        }
                    } else {
                        chol_.at(rr, cc) += val;
                    }
                }
            }
        chol_.factorize();
    }

    Grid grid_;
    BandedCholesky chol_;
};

// G_Y r: per-channel trapezoid weights, optionally masked to a time window
// with its own trapezoid endpoints (Kaczmarz time segments).
struct DataWeights {
    int seg_begin = 0;  // first time index of the window
    int seg_end = -1;   // last time index (inclusive); -1 = full interval

    double weight(const Grid& g, int i) const {
        const int e = seg_end < 0 ? g.nt - 1 : seg_end;
        if (i < seg_begin || i > e) return 0.0;
        if (i == seg_begin || i == e) return 0.5 * g.dt;
        return g.dt;
    }
};

inline double data_norm(const Grid& g, const std::vector<std::vector<double>>& r,
                        const DataWeights& w = {}) {
    double acc = 0.0;
    for (const auto& ch : r)
        for (int i = 0; i < g.nt; ++i) acc += w.weight(g, i) * ch[i] * ch[i];
    return std::sqrt(acc);
}

// O^T G_Y r: exact Euclidean transpose of eval_observation with the data
// weights folded in.
inline Field3 observation_transpose_weighted(const std::vector<std::vector<double>>& r,
                                             const ObservationSetup& obs, const Grid& g,
                                             const DataWeights& wts = {}) {
    obs.validate(g);
    if (static_cast<int>(r.size()) != obs.channels())
        throw std::invalid_argument("observation_transpose: channel count mismatch");
    Field3 out(g);
    std::vector<double> corr(g.nt);
    for (int k = 0; k < obs.K(); ++k)
        for (int l = 0; l < obs.L(); ++l) {
            const auto& rho = r[static_cast<size_t>(k) * obs.L() + l];
            // corr(j) = sum_i wY(i) r(i) a_l(t_i - t_j)
            for (int j = 0; j < g.nt; ++j) {
                double acc = 0.0;
                for (int i = 0; i < g.nt; ++i)
                    acc += wts.weight(g, i) * rho[i] * obs.transfer[l](g.t(i) - g.t(j));
                corr[j] = acc;
            }
            for (int j = 0; j < g.nt; ++j) {
                const double f = -obs.mu0 * g.wt(j) * corr[j];
                for (int x = 0; x < g.nx; ++x) {
                    const double cw = f * g.wx(x) * obs.concentrations[k][x];
                    const auto& p = obs.sensitivities[l][x];
                    out(j, x, 0) += cw * p[0];
                    out(j, x, 1) += cw * p[1];
                    out(j, x, 2) += cw * p[2];
                }
            }
        }
    return out;
}

}  // namespace llg
