// Direct solvers for the small structured systems: scalar tridiagonal
// (Thomas sweep), its transpose, and the 3x3-block tridiagonal variant.
#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace llg {

// Tridiagonal matrix with sub/diag/super bands; n = diag.size().
struct Tridiag {
    std::vector<double> sub;   // a[i] multiplies x[i-1], sub[0] unused
    std::vector<double> diag;  // b[i]
    std::vector<double> sup;   // c[i] multiplies x[i+1], sup[n-1] unused

    explicit Tridiag(int n) : sub(n, 0.0), diag(n, 0.0), sup(n, 0.0) {}
    int n() const { return static_cast<int>(diag.size()); }
};

// In-place Thomas solve of T x = rhs; rhs holds x on return.
inline void solve_tridiag(const Tridiag& T, double* rhs) {
    const int n = T.n();
    std::vector<double> cp(n), dp(n);
    double beta = T.diag[0];
    if (beta == 0.0) throw std::runtime_error("solve_tridiag: zero pivot");
    cp[0] = T.sup[0] / beta;
    dp[0] = rhs[0] / beta;
    for (int i = 1; i < n; ++i) {
        beta = T.diag[i] - T.sub[i] * cp[i - 1];
        if (beta == 0.0) throw std::runtime_error("solve_tridiag: zero pivot");
        cp[i] = T.sup[i] / beta;
        dp[i] = (rhs[i] - T.sub[i] * dp[i - 1]) / beta;
    }
    rhs[n - 1] = dp[n - 1];
    for (int i = n - 2; i >= 0; --i) rhs[i] = dp[i] - cp[i] * rhs[i + 1];
}

// Solve T^T x = rhs (swap the roles of the bands).
inline void solve_tridiag_transpose(const Tridiag& T, double* rhs) {
    Tridiag Tt(T.n());
    Tt.diag = T.diag;
    for (int i = 0; i + 1 < T.n(); ++i) {
        Tt.sub[i + 1] = T.sup[i];
        Tt.sup[i] = T.sub[i + 1];
    }
    solve_tridiag(Tt, rhs);
}

inline void apply_tridiag(const Tridiag& T, const double* x, double* out) {
    const int n = T.n();
    for (int i = 0; i < n; ++i) {
        double s = T.diag[i] * x[i];
        if (i > 0) s += T.sub[i] * x[i - 1];
        if (i + 1 < n) s += T.sup[i] * x[i + 1];
        out[i] = s;
    }
}

using Mat3 = std::array<double, 9>;  // row-major 3x3
using Vec3 = std::array<double, 3>;

inline Vec3 mat3_apply(const Mat3& A, const Vec3& x) {
    return {A[0] * x[0] + A[1] * x[1] + A[2] * x[2],
            A[3] * x[0] + A[4] * x[1] + A[5] * x[2],
            A[6] * x[0] + A[7] * x[1] + A[8] * x[2]};
}

inline Mat3 mat3_mul(const Mat3& A, const Mat3& B) {
    Mat3 C{};
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            double a = A[i * 3 + k];
            for (int j = 0; j < 3; ++j) C[i * 3 + j] += a * B[k * 3 + j];
        }
    return C;
}

inline Mat3 mat3_inverse(const Mat3& A) {
    const double a = A[0], b = A[1], c = A[2], d = A[3], e = A[4], f = A[5], g = A[6],
                 h = A[7], i = A[8];
    const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    if (det == 0.0) throw std::runtime_error("mat3_inverse: singular block");
    const double inv = 1.0 / det;
    return {(e * i - f * h) * inv, (c * h - b * i) * inv, (b * f - c * e) * inv,
            (f * g - d * i) * inv, (a * i - c * g) * inv, (c * d - a * f) * inv,
            (d * h - e * g) * inv, (b * g - a * h) * inv, (a * e - b * d) * inv};
}

// Block-tridiagonal solve with 3x3 blocks (block Thomas, no pivoting across
// blocks; the diagonal blocks here are diagonally dominant by construction).
struct BlockTridiag3 {
    std::vector<Mat3> sub, diag, sup;  // sub[0] and sup[n-1] unused

    explicit BlockTridiag3(int n) : sub(n), diag(n), sup(n) {}
    int n() const { return static_cast<int>(diag.size()); }
};

inline void solve_block_tridiag3(const BlockTridiag3& T, std::vector<Vec3>& rhs) {
    const int n = T.n();
    std::vector<Mat3> cp(n);
    std::vector<Vec3> dp(n);
    Mat3 inv = mat3_inverse(T.diag[0]);
    cp[0] = mat3_mul(inv, T.sup[0]);
    dp[0] = mat3_apply(inv, rhs[0]);
    for (int i = 1; i < n; ++i) {
        Mat3 denom = T.diag[i];
        Mat3 asub_cp = mat3_mul(T.sub[i], cp[i - 1]);
        for (int k = 0; k < 9; ++k) denom[k] -= asub_cp[k];
        inv = mat3_inverse(denom);
        if (i + 1 < n) cp[i] = mat3_mul(inv, T.sup[i]);
        Vec3 r = rhs[i];
        Vec3 asub_dp = mat3_apply(T.sub[i], dp[i - 1]);
        for (int k = 0; k < 3; ++k) r[k] -= asub_dp[k];
        dp[i] = mat3_apply(inv, r);
    }
    rhs[n - 1] = dp[n - 1];
    for (int i = n - 2; i >= 0; --i) {
        Vec3 cx = mat3_apply(cp[i], rhs[i + 1]);
        for (int k = 0; k < 3; ++k) rhs[i][k] = dp[i][k] - cx[k];
    }
}

// Symmetric positive definite band matrix, lower storage:
// band(r, j) holds A(j + r, j) for r = 0..bw, column j.
struct BandedCholesky {
    int n = 0;
    int bw = 0;
    std::vector<double> band;  // (bw+1) x n, column-major in j

    BandedCholesky() = default;
    BandedCholesky(int n_, int bw_) : n(n_), bw(bw_), band(static_cast<size_t>(bw_ + 1) * n_, 0.0) {}

    double& at(int i, int j) {  // requires j <= i <= j + bw
        return band[static_cast<size_t>(j) * (bw + 1) + (i - j)];
    }
    double at(int i, int j) const {
        return band[static_cast<size_t>(j) * (bw + 1) + (i - j)];
    }

    // In-place Cholesky factorization A = L L^T within the band.
    void factorize() {
        for (int j = 0; j < n; ++j) {
            double d = at(j, j);
            for (int k = std::max(0, j - bw); k < j; ++k) {
                if (j - k <= bw) {
                    double l = at(j, k);
                    d -= l * l;
                }
            }
            if (d <= 0.0) throw std::runtime_error("BandedCholesky: matrix not positive definite");
            d = std::sqrt(d);
            at(j, j) = d;
            int imax = std::min(n - 1, j + bw);
            for (int i = j + 1; i <= imax; ++i) {
                double s = at(i, j);
                int kmin = std::max({0, i - bw, j - bw});
                for (int k = kmin; k < j; ++k) s -= at(i, k) * at(j, k);
                at(i, j) = s / d;
            }
        }
    }

    // Solve L L^T x = b in place.
    void solve(double* b) const {
        for (int i = 0; i < n; ++i) {
            double s = b[i];
            int kmin = std::max(0, i - bw);
            for (int k = kmin; k < i; ++k) s -= at(i, k) * b[k];
            b[i] = s / at(i, i);
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = b[i];
            int kmax = std::min(n - 1, i + bw);
            for (int k = i + 1; k <= kmax; ++k) s -= at(k, i) * b[k];
            b[i] = s / at(i, i);
        }
    }
};

}  // namespace llg
