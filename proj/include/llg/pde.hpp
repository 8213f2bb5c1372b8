// Linear PDE building blocks: per-slice Helmholtz solve, implicit-Euler
// heat marches (forward and time-reflected backward), and the pointwise
// 3x3 final-time condition solve of the reduced adjoint.
#pragma once

#include "llg/calculus.hpp"
#include "llg/model_types.hpp"
#include "llg/tridiag.hpp"

namespace llg {

// (-Lap_N + id) on one slice, mirror-ghost Neumann stencil.
inline Tridiag helmholtz_matrix(const Grid& g) {
    Tridiag T(g.nx);
    const double invdx2 = 1.0 / (g.dx * g.dx);
    T.diag[0] = 2.0 * invdx2 + 1.0;
    T.sup[0] = -2.0 * invdx2;
    for (int j = 1; j < g.nx - 1; ++j) {
        T.sub[j] = -invdx2;
        T.diag[j] = 2.0 * invdx2 + 1.0;
        T.sup[j] = -invdx2;
    }
    T.sub[g.nx - 1] = -2.0 * invdx2;
    T.diag[g.nx - 1] = 2.0 * invdx2 + 1.0;
    return T;
}

// (id - dt * Lap_N), the implicit-Euler step matrix.
inline Tridiag heat_step_matrix(const Grid& g) {
    Tridiag T(g.nx);
    const double r = g.dt / (g.dx * g.dx);
    T.diag[0] = 1.0 + 2.0 * r;
    T.sup[0] = -2.0 * r;
    for (int j = 1; j < g.nx - 1; ++j) {
        T.sub[j] = -r;
        T.diag[j] = 1.0 + 2.0 * r;
        T.sup[j] = -r;
    }
    T.sub[g.nx - 1] = -2.0 * r;
    T.diag[g.nx - 1] = 1.0 + 2.0 * r;
    return T;
}

// Solve -Lap u + u = w on every time slice and component.
inline Field3 solve_helmholtz_slice(const Field3& w) {
    if (!all_finite(w.v)) throw std::invalid_argument("solve_helmholtz_slice: non-finite input");
    const Grid& g = w.grid;
    Tridiag T = helmholtz_matrix(g);
    Field3 out(g);
    std::vector<double> rhs(g.nx);
    for (int i = 0; i < g.nt; ++i)
        for (int c = 0; c < 3; ++c) {
            for (int j = 0; j < g.nx; ++j) rhs[j] = w(i, j, c);
            solve_tridiag(T, rhs.data());
            for (int j = 0; j < g.nx; ++j) out(i, j, c) = rhs[j];
        }
    return out;
}

// Same but with the transposed slice matrix (used by the W-Gram apply).
inline Field3 solve_helmholtz_slice_transpose(const Field3& w) {
    const Grid& g = w.grid;
    Tridiag T = helmholtz_matrix(g);
    Field3 out(g);
    std::vector<double> rhs(g.nx);
    for (int i = 0; i < g.nt; ++i)
        for (int c = 0; c < 3; ++c) {
            for (int j = 0; j < g.nx; ++j) rhs[j] = w(i, j, c);
            solve_tridiag_transpose(T, rhs.data());
            for (int j = 0; j < g.nx; ++j) out(i, j, c) = rhs[j];
        }
    return out;
}

// z_t - Lap z = v, dn z = 0, z(0) = z0 (defaults to zero). Implicit Euler,
// source sampled at the new time level.
inline Field3 solve_heat_forward(const Field3& v, const Slice3* z0 = nullptr) {
    if (!all_finite(v.v)) throw std::invalid_argument("solve_heat_forward: non-finite input");
    const Grid& g = v.grid;
    Tridiag T = heat_step_matrix(g);
    Field3 z(g);
    if (z0)
        for (int j = 0; j < g.nx; ++j)
            for (int c = 0; c < 3; ++c) z(0, j, c) = (*z0)(j, c);
    std::vector<double> rhs(g.nx);
    for (int i = 1; i < g.nt; ++i)
        for (int c = 0; c < 3; ++c) {
            for (int j = 0; j < g.nx; ++j) rhs[j] = z(i - 1, j, c) + g.dt * v(i, j, c);
            solve_tridiag(T, rhs.data());
            for (int j = 0; j < g.nx; ++j) z(i, j, c) = rhs[j];
        }
    return z;
}

// -v_t - Lap v = f, dn v = 0, v(T) = gT: the forward march after the time
// reflection t -> T - t, so that v(T) = gT holds exactly.
inline Field3 solve_heat_backward(const Field3& f, const Slice3& gT) {
    const Grid& g = f.grid;
    Field3 fr(g);
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j)
            for (int c = 0; c < 3; ++c) fr(i, j, c) = f(g.nt - 1 - i, j, c);
    Field3 zr = solve_heat_forward(fr, &gT);
    Field3 v(g);
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j)
            for (int c = 0; c < 3; ++c) v(i, j, c) = zr(g.nt - 1 - i, j, c);
    return v;
}

// Pointwise solve of (a1 I + a2 [m]_x) p = b; the system matrix has
// determinant a1 (a1^2 + a2^2 |m|^2), so a1 != 0 is required.
inline Slice3 solve_final_condition(const Slice3& mT, const Slice3& b, const AlphaPair& alpha) {
    if (alpha.a1 == 0.0)
        throw std::invalid_argument("solve_final_condition: alpha1 must be nonzero");
    const Grid& g = mT.grid;
    Slice3 p(g);
    const double a1 = alpha.a1, a2 = alpha.a2;
    for (int j = 0; j < g.nx; ++j) {
        const double m1 = mT(j, 0), m2 = mT(j, 1), m3 = mT(j, 2);
        const double b1 = b(j, 0), b2 = b(j, 1), b3 = b(j, 2);
        const double mb = m1 * b1 + m2 * b2 + m3 * b3;
        const double mm = m1 * m1 + m2 * m2 + m3 * m3;
        const double cx = m2 * b3 - m3 * b2;
        const double cy = m3 * b1 - m1 * b3;
        const double cz = m1 * b2 - m2 * b1;
        const double denom = a1 * a1 + a2 * a2 * mm;
        p(j, 0) = (a1 * b1 - a2 * cx + a2 * a2 / a1 * mb * m1) / denom;
        p(j, 1) = (a1 * b2 - a2 * cy + a2 * a2 / a1 * mb * m2) / denom;
        p(j, 2) = (a1 * b3 - a2 * cz + a2 * a2 / a1 * mb * m3) / denom;
    }
    return p;
}

}  // namespace llg
