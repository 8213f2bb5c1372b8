// Uniform space-time grid and the vector/scalar fields living on it.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace llg {

struct Grid {
    int nt = 0;          // time samples, t_0 = 0 .. t_{nt-1} = t_end
    int nx = 0;          // space samples, x_0 = x_min .. x_{nx-1} = x_max
    double t_end = 0.0;
    double x_min = 0.0;
    double x_max = 0.0;
    double dt = 0.0;
    double dx = 0.0;

    Grid() = default;
    Grid(int nt_, double t_end_, int nx_, double x_min_, double x_max_)
        : nt(nt_), nx(nx_), t_end(t_end_), x_min(x_min_), x_max(x_max_) {
        if (nt < 3 || nx < 3) throw std::invalid_argument("Grid: nt and nx must be >= 3");
        if (!(t_end > 0.0)) throw std::invalid_argument("Grid: t_end must be positive");
        if (!(x_max > x_min)) throw std::invalid_argument("Grid: x_max must exceed x_min");
        dt = t_end / (nt - 1);
        dx = (x_max - x_min) / (nx - 1);
    }

    double t(int i) const { return dt * i; }
    double x(int j) const { return x_min + dx * j; }

    // trapezoid quadrature weights
    double wt(int i) const { return (i == 0 || i == nt - 1) ? 0.5 * dt : dt; }
    double wx(int j) const { return (j == 0 || j == nx - 1) ? 0.5 * dx : dx; }

    double length() const { return x_max - x_min; }

    bool operator==(const Grid& o) const {
        return nt == o.nt && nx == o.nx && t_end == o.t_end && x_min == o.x_min &&
               x_max == o.x_max;
    }
};

// 51 time samples on [0,0.2], 101 space samples on [0,2*pi]
inline Grid default_grid() { return Grid(51, 0.2, 101, 0.0, 2.0 * M_PI); }

// Three-component vector field sampled on the full space-time grid,
// stored time-major: (it, ix, c).
struct Field3 {
    Grid grid;
    std::vector<double> v;

    Field3() = default;
    explicit Field3(const Grid& g) : grid(g), v(static_cast<size_t>(g.nt) * g.nx * 3, 0.0) {}

    size_t idx(int it, int ix, int c) const {
        return (static_cast<size_t>(it) * grid.nx + ix) * 3 + c;
    }
    double& operator()(int it, int ix, int c) { return v[idx(it, ix, c)]; }
    double operator()(int it, int ix, int c) const { return v[idx(it, ix, c)]; }

    size_t size() const { return v.size(); }

    template <class Fn>  // fn(t, x) -> {f1,f2,f3}
    static Field3 from_fn(const Grid& g, Fn&& fn) {
        Field3 f(g);
        for (int i = 0; i < g.nt; ++i)
            for (int j = 0; j < g.nx; ++j) {
                auto val = fn(g.t(i), g.x(j));
                for (int c = 0; c < 3; ++c) f(i, j, c) = val[c];
            }
        return f;
    }
};

// Single-time slice of a vector field (nx x 3), e.g. m0, g^y_T, p(T).
struct Slice3 {
    Grid grid;
    std::vector<double> v;

    Slice3() = default;
    explicit Slice3(const Grid& g) : grid(g), v(static_cast<size_t>(g.nx) * 3, 0.0) {}

    double& operator()(int ix, int c) { return v[static_cast<size_t>(ix) * 3 + c]; }
    double operator()(int ix, int c) const { return v[static_cast<size_t>(ix) * 3 + c]; }

    template <class Fn>  // fn(x) -> {f1,f2,f3}
    static Slice3 from_fn(const Grid& g, Fn&& fn) {
        Slice3 s(g);
        for (int j = 0; j < g.nx; ++j) {
            auto val = fn(g.x(j));
            for (int c = 0; c < 3; ++c) s(j, c) = val[c];
        }
        return s;
    }
};

// Scalar time series on the grid (one value per time sample).
struct ScalarSeries {
    Grid grid;
    std::vector<double> v;

    ScalarSeries() = default;
    explicit ScalarSeries(const Grid& g) : grid(g), v(g.nt, 0.0) {}

    double& operator[](int i) { return v[i]; }
    double operator[](int i) const { return v[i]; }
};

inline Slice3 slice_at(const Field3& f, int it) {
    Slice3 s(f.grid);
    for (int j = 0; j < f.grid.nx; ++j)
        for (int c = 0; c < 3; ++c) s(j, c) = f(it, j, c);
    return s;
}

inline Field3 broadcast_time(const Slice3& s) {
    Field3 f(s.grid);
    for (int i = 0; i < s.grid.nt; ++i)
        for (int j = 0; j < s.grid.nx; ++j)
            for (int c = 0; c < 3; ++c) f(i, j, c) = s(j, c);
    return f;
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// y += a*x
inline void axpy(Field3& y, double a, const Field3& x) {
    for (size_t k = 0; k < y.v.size(); ++k) y.v[k] += a * x.v[k];
}

inline void scale(Field3& f, double a) {
    for (double& x : f.v) x *= a;
}

inline Field3 operator+(Field3 a, const Field3& b) { axpy(a, 1.0, b); return a; }
inline Field3 operator-(Field3 a, const Field3& b) { axpy(a, -1.0, b); return a; }
inline Field3 operator*(double s, Field3 a) { scale(a, s); return a; }

}  // namespace llg
