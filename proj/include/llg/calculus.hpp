// Finite-difference and quadrature building blocks: time derivative,
// Neumann Laplacian, spatial gradient, trapezoid integrals, the time
// integral operators I1/I2, and the U inner product.
#pragma once

#include <array>
#include <stdexcept>

#include "llg/grid.hpp"

namespace llg {

// d/dt by central differences, second-order one-sided at both endpoints.
inline Field3 ddt(const Field3& f) {
    const Grid& g = f.grid;
    Field3 out(g);
    const double inv2dt = 1.0 / (2.0 * g.dt);
    const int n = g.nt;
    for (int j = 0; j < g.nx; ++j)
        for (int c = 0; c < 3; ++c) {
            // difference form so constants are annihilated exactly
            out(0, j, c) =
                (4.0 * (f(1, j, c) - f(0, j, c)) - (f(2, j, c) - f(0, j, c))) * inv2dt;
            for (int i = 1; i < n - 1; ++i)
                out(i, j, c) = (f(i + 1, j, c) - f(i - 1, j, c)) * inv2dt;
            out(n - 1, j, c) = (4.0 * (f(n - 1, j, c) - f(n - 2, j, c)) -
                                (f(n - 1, j, c) - f(n - 3, j, c))) *
                               inv2dt;
        }
    return out;
}

// Euclidean transpose of ddt (needed by the discrete adjoints).
inline Field3 ddt_transpose(const Field3& f) {
    const Grid& g = f.grid;
    Field3 out(g);
    const double inv2dt = 1.0 / (2.0 * g.dt);
    const int n = g.nt;
    for (int j = 0; j < g.nx; ++j)
        for (int c = 0; c < 3; ++c) {
            // scatter each ddt row into its columns
            out(0, j, c) += -3.0 * inv2dt * f(0, j, c);
            out(1, j, c) += 4.0 * inv2dt * f(0, j, c);
            out(2, j, c) += -inv2dt * f(0, j, c);
            for (int i = 1; i < n - 1; ++i) {
                out(i + 1, j, c) += inv2dt * f(i, j, c);
                out(i - 1, j, c) += -inv2dt * f(i, j, c);
            }
            out(n - 1, j, c) += 3.0 * inv2dt * f(n - 1, j, c);
            out(n - 2, j, c) += -4.0 * inv2dt * f(n - 1, j, c);
            out(n - 3, j, c) += inv2dt * f(n - 1, j, c);
        }
    return out;
}

// Second-order Laplacian per time slice and component, homogeneous-Neumann
// mirror ghost points at both ends.
inline Field3 laplacian_neumann(const Field3& f) {
    const Grid& g = f.grid;
    Field3 out(g);
    const double invdx2 = 1.0 / (g.dx * g.dx);
    const int n = g.nx;
    for (int i = 0; i < g.nt; ++i)
        for (int c = 0; c < 3; ++c) {
            out(i, 0, c) = 2.0 * (f(i, 1, c) - f(i, 0, c)) * invdx2;
            for (int j = 1; j < n - 1; ++j)
                out(i, j, c) = (f(i, j - 1, c) - 2.0 * f(i, j, c) + f(i, j + 1, c)) * invdx2;
            out(i, n - 1, c) = 2.0 * (f(i, n - 2, c) - f(i, n - 1, c)) * invdx2;
        }
    return out;
}

inline Field3 laplacian_neumann_transpose(const Field3& f) {
    const Grid& g = f.grid;
    Field3 out(g);
    const double invdx2 = 1.0 / (g.dx * g.dx);
    const int n = g.nx;
    for (int i = 0; i < g.nt; ++i)
        for (int c = 0; c < 3; ++c) {
            out(i, 1, c) += 2.0 * invdx2 * f(i, 0, c);
            out(i, 0, c) += -2.0 * invdx2 * f(i, 0, c);
            for (int j = 1; j < n - 1; ++j) {
                out(i, j - 1, c) += invdx2 * f(i, j, c);
                out(i, j, c) += -2.0 * invdx2 * f(i, j, c);
                out(i, j + 1, c) += invdx2 * f(i, j, c);
            }
            out(i, n - 2, c) += 2.0 * invdx2 * f(i, n - 1, c);
            out(i, n - 1, c) += -2.0 * invdx2 * f(i, n - 1, c);
        }
    return out;
}

// d/dx by central differences with the same mirror-ghost convention
// (the derivative vanishes at both boundary nodes).
inline Field3 grad_x(const Field3& f) {
    const Grid& g = f.grid;
    Field3 out(g);
    const double inv2dx = 1.0 / (2.0 * g.dx);
    const int n = g.nx;
    for (int i = 0; i < g.nt; ++i)
        for (int c = 0; c < 3; ++c) {
            out(i, 0, c) = 0.0;
            for (int j = 1; j < n - 1; ++j)
                out(i, j, c) = (f(i, j + 1, c) - f(i, j - 1, c)) * inv2dx;
            out(i, n - 1, c) = 0.0;
        }
    return out;
}

inline Field3 grad_x_transpose(const Field3& f) {
    const Grid& g = f.grid;
    Field3 out(g);
    const double inv2dx = 1.0 / (2.0 * g.dx);
    const int n = g.nx;
    for (int i = 0; i < g.nt; ++i)
        for (int c = 0; c < 3; ++c)
            for (int j = 1; j < n - 1; ++j) {
                out(i, j + 1, c) += inv2dx * f(i, j, c);
                out(i, j - 1, c) += -inv2dx * f(i, j, c);
            }
    return out;
}

// Spatial derivatives of a data slice (the initial state m0): central in
// the interior, second-order one-sided at the ends. m0 is an additive data
// term and need not satisfy the Neumann condition the unknown does.
inline Slice3 slice_grad_data(const Slice3& f) {
    const Grid& g = f.grid;
    Slice3 out(g);
    const double inv2dx = 1.0 / (2.0 * g.dx);
    const int n = g.nx;
    for (int c = 0; c < 3; ++c) {
        out(0, c) = (4.0 * (f(1, c) - f(0, c)) - (f(2, c) - f(0, c))) * inv2dx;
        for (int j = 1; j < n - 1; ++j) out(j, c) = (f(j + 1, c) - f(j - 1, c)) * inv2dx;
        out(n - 1, c) =
            (4.0 * (f(n - 1, c) - f(n - 2, c)) - (f(n - 1, c) - f(n - 3, c))) * inv2dx;
    }
    return out;
}

inline Slice3 slice_lap_data(const Slice3& f) {
    const Grid& g = f.grid;
    Slice3 out(g);
    const double invdx2 = 1.0 / (g.dx * g.dx);
    const int n = g.nx;
    for (int c = 0; c < 3; ++c) {
        for (int j = 1; j < n - 1; ++j)
            out(j, c) = (f(j - 1, c) - 2.0 * f(j, c) + f(j + 1, c)) * invdx2;
        if (n >= 4) {
            // 4-point one-sided second derivative (second order), written as
            // a combination of second differences so constants cancel exactly
            const double d0 = (f(0, c) - f(1, c)) + (f(2, c) - f(1, c));
            const double d1 = (f(1, c) - f(2, c)) + (f(3, c) - f(2, c));
            out(0, c) = (2.0 * d0 - d1) * invdx2;
            const double e0 = (f(n - 1, c) - f(n - 2, c)) + (f(n - 3, c) - f(n - 2, c));
            const double e1 = (f(n - 2, c) - f(n - 3, c)) + (f(n - 4, c) - f(n - 3, c));
            out(n - 1, c) = (2.0 * e0 - e1) * invdx2;
        } else {
            out(0, c) = out(1, c);
            out(n - 1, c) = out(1, c);
        }
    }
    return out;
}

inline double integrate_time(const ScalarSeries& s) {
    double acc = 0.0;
    for (int i = 0; i < s.grid.nt; ++i) acc += s.grid.wt(i) * s.v[i];
    return acc;
}

inline double integrate_space(const Grid& g, const std::vector<double>& profile) {
    if (static_cast<int>(profile.size()) != g.nx)
        throw std::invalid_argument("integrate_space: profile length must be nx");
    double acc = 0.0;
    for (int j = 0; j < g.nx; ++j) acc += g.wx(j) * profile[j];
    return acc;
}

// space-time L2 inner product (trapezoid in both directions)
inline double dot_l2(const Field3& a, const Field3& b) {
    const Grid& g = a.grid;
    double acc = 0.0;
    for (int i = 0; i < g.nt; ++i) {
        double sx = 0.0;
        for (int j = 0; j < g.nx; ++j) {
            double s = 0.0;
            for (int c = 0; c < 3; ++c) s += a(i, j, c) * b(i, j, c);
            sx += g.wx(j) * s;
        }
        acc += g.wt(i) * sx;
    }
    return acc;
}

inline double norm_l2(const Field3& a) { return std::sqrt(dot_l2(a, a)); }

inline double dot_l2_time(const ScalarSeries& a, const ScalarSeries& b) {
    double acc = 0.0;
    for (int i = 0; i < a.grid.nt; ++i) acc += a.grid.wt(i) * a.v[i] * b.v[i];
    return acc;
}

inline double norm_l2_time(const ScalarSeries& a) { return std::sqrt(dot_l2_time(a, a)); }

namespace detail {

// cumulative trapezoid of one time column, out[i] = int_0^{t_i}
inline void cumtrap(const Grid& g, const double* a, int stride, double* out, int ostride) {
    out[0] = 0.0;
    double acc = 0.0;
    for (int i = 1; i < g.nt; ++i) {
        acc += 0.5 * g.dt * (a[(i - 1) * stride] + a[i * stride]);
        out[i * ostride] = acc;
    }
}

}  // namespace detail

// I1[w](t) = int_0^t w ds - (1/T) int_0^T (T-s) w(s) ds, applied per (x, component).
inline Field3 I1(const Field3& w) {
    const Grid& g = w.grid;
    Field3 out(g);
    std::vector<double> col(g.nt), cum(g.nt);
    for (int j = 0; j < g.nx; ++j)
        for (int c = 0; c < 3; ++c) {
            for (int i = 0; i < g.nt; ++i) col[i] = w(i, j, c);
            detail::cumtrap(g, col.data(), 1, cum.data(), 1);
            double q = 0.0;
            for (int i = 0; i < g.nt; ++i) q += g.wt(i) * (g.t_end - g.t(i)) * col[i];
            q /= g.t_end;
            for (int i = 0; i < g.nt; ++i) out(i, j, c) = cum[i] - q;
        }
    return out;
}

// I2[w](t) = -int_0^t (t-s) w(s) ds + (t/T) int_0^T (T-s) w(s) ds.
// I2[w](0) = I2[w](T) = 0 hold exactly with trapezoid quadrature.
inline Field3 I2(const Field3& w) {
    const Grid& g = w.grid;
    Field3 out(g);
    std::vector<double> col(g.nt), cum(g.nt), cums(g.nt), scol(g.nt);
    for (int j = 0; j < g.nx; ++j)
        for (int c = 0; c < 3; ++c) {
            for (int i = 0; i < g.nt; ++i) {
                col[i] = w(i, j, c);
                scol[i] = g.t(i) * col[i];
            }
            detail::cumtrap(g, col.data(), 1, cum.data(), 1);
            detail::cumtrap(g, scol.data(), 1, cums.data(), 1);
            double q = 0.0;
            for (int i = 0; i < g.nt; ++i) q += g.wt(i) * (g.t_end - g.t(i)) * col[i];
            q /= g.t_end;
            for (int i = 0; i < g.nt; ++i)
                out(i, j, c) = -(g.t(i) * cum[i] - cums[i]) + g.t(i) * q;
        }
    return out;
}

// Euclidean transpose of I1 (per time column).
inline Field3 I1_transpose(const Field3& b) {
    const Grid& g = b.grid;
    Field3 out(g);
    std::vector<double> col(g.nt), suf(g.nt + 1);
    for (int j = 0; j < g.nx; ++j)
        for (int c = 0; c < 3; ++c) {
            for (int i = 0; i < g.nt; ++i) col[i] = b(i, j, c);
            // C^T via suffix sums: C[i][0]=dt/2, C[i][k]=dt (0<k<i), C[i][i]=dt/2 for i>=1
            suf[g.nt] = 0.0;
            for (int i = g.nt - 1; i >= 0; --i) suf[i] = suf[i + 1] + col[i];
            double total = 0.0;
            for (int i = 0; i < g.nt; ++i) total += col[i];
            for (int k = 0; k < g.nt; ++k) {
                double ct;
                if (k == 0)
                    ct = 0.5 * g.dt * suf[1];
                else
                    ct = 0.5 * g.dt * col[k] + g.dt * suf[k + 1];
                out(k, j, c) = ct - g.wt(k) * (g.t_end - g.t(k)) / g.t_end * total;
            }
        }
    return out;
}

// U inner product:
//   int int (Lap u1 . Lap u2 + u1_t . u2_t) dx dt + int grad u1(T) : grad u2(T) dx.
// The final-time gradient term uses the cell-midpoint form
// (1/dx) sum (u_{j+1}-u_j)(v_{j+1}-v_j), the exact summation-by-parts
// companion of the mirror-ghost Laplacian.
inline double inner_U(const Field3& u1, const Field3& u2) {
    const Grid& g = u1.grid;
    if (!(u2.grid == g)) throw std::invalid_argument("inner_U: grid mismatch");
    for (int j = 0; j < g.nx; ++j)
        for (int c = 0; c < 3; ++c)
            if (std::abs(u1(0, j, c)) > 1e-12 || std::abs(u2(0, j, c)) > 1e-12)
                throw std::invalid_argument("inner_U: fields must vanish at t=0");
    Field3 l1 = laplacian_neumann(u1), l2 = laplacian_neumann(u2);
    Field3 d1 = ddt(u1), d2 = ddt(u2);
    double acc = dot_l2(l1, l2) + dot_l2(d1, d2);
    const int iT = g.nt - 1;
    double gterm = 0.0;
    for (int j = 0; j + 1 < g.nx; ++j)
        for (int c = 0; c < 3; ++c)
            gterm += (u1(iT, j + 1, c) - u1(iT, j, c)) * (u2(iT, j + 1, c) - u2(iT, j, c));
    return acc + gterm / g.dx;
}

inline double norm_U(const Field3& u) { return std::sqrt(inner_U(u, u)); }

}  // namespace llg
