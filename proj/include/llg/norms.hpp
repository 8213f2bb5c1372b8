// The W = H^1(0,T;H^1)^* inner product, its Gram apply, and the exact
// discrete Riesz representer used by the adjoint chain.
#pragma once

#include "llg/pde.hpp"

namespace llg {

namespace detail {

// slice apply of Dx*(-Lap+id) = (1/dx) Ex^T Ex + Dx, the weighted Helmholtz
// form matching the mirror-ghost stencil exactly (summation by parts).
inline void apply_weighted_helmholtz_slice(const Grid& g, const double* a, double* out) {
    const int n = g.nx;
    const double invdx = 1.0 / g.dx;
    out[0] = -(a[1] - a[0]) * invdx + g.wx(0) * a[0];
    for (int j = 1; j < n - 1; ++j)
        out[j] = (2.0 * a[j] - a[j - 1] - a[j + 1]) * invdx + g.wx(j) * a[j];
    out[n - 1] = (a[n - 1] - a[n - 2]) * invdx + g.wx(n - 1) * a[n - 1];
}

}  // namespace detail

// (w1, w2)_W with a_i = I1[(-Lap+id)^{-1} w_i]:
//   sum_t wt [ (1/dx) sum_cells (Delta a1)(Delta a2) + sum_x wx a1.a2 ]
inline double inner_W(const Field3& w1, const Field3& w2) {
    const Grid& g = w1.grid;
    if (!(w2.grid == g)) throw std::invalid_argument("inner_W: grid mismatch");
    Field3 a1 = I1(solve_helmholtz_slice(w1));
    Field3 a2 = I1(solve_helmholtz_slice(w2));
    double acc = 0.0;
    for (int i = 0; i < g.nt; ++i) {
        double grad = 0.0, mass = 0.0;
        for (int j = 0; j < g.nx; ++j)
            for (int c = 0; c < 3; ++c) {
                if (j + 1 < g.nx)
                    grad += (a1(i, j + 1, c) - a1(i, j, c)) * (a2(i, j + 1, c) - a2(i, j, c));
                mass += g.wx(j) * a1(i, j, c) * a2(i, j, c);
            }
        acc += g.wt(i) * (grad / g.dx + mass);
    }
    return acc;
}

inline double norm_W(const Field3& w) {
    double q = inner_W(w, w);
    return q > 0.0 ? std::sqrt(q) : 0.0;
}

// Gram apply: G_W w, so that (v, w)_W = v . (G_W w) in the Euclidean sense.
inline Field3 apply_GW(const Field3& w) {
    const Grid& g = w.grid;
    Field3 a = I1(solve_helmholtz_slice(w));
    Field3 b(g);
    std::vector<double> col(g.nx), out(g.nx);
    for (int i = 0; i < g.nt; ++i)
        for (int c = 0; c < 3; ++c) {
            for (int j = 0; j < g.nx; ++j) col[j] = a(i, j, c);
            detail::apply_weighted_helmholtz_slice(g, col.data(), out.data());
            for (int j = 0; j < g.nx; ++j) b(i, j, c) = g.wt(i) * out[j];
        }
    Field3 ct = I1_transpose(b);
    return solve_helmholtz_slice_transpose(ct);
}

// multiply by / divide by the trapezoid mass weights
inline Field3 apply_mass(const Field3& f) {
    Field3 out = f;
    const Grid& g = f.grid;
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            const double w = g.wt(i) * g.wx(j);
            for (int c = 0; c < 3; ++c) out(i, j, c) *= w;
        }
    return out;
}

inline Field3 apply_mass_inv(const Field3& f) {
    Field3 out = f;
    const Grid& g = f.grid;
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            const double w = 1.0 / (g.wt(i) * g.wx(j));
            for (int c = 0; c < 3; ++c) out(i, j, c) *= w;
        }
    return out;
}

// The L2 representer of (., w)_W: y with (v, w)_W = <v, y>_L2 for all v.
// This is the exact discrete counterpart of y = I2[helmholtz(w)].
inline Field3 riesz_representer_W(const Field3& w) { return apply_mass_inv(apply_GW(w)); }

}  // namespace llg
