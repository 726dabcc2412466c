#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lvlset/error.hpp"

namespace lvlset {

/// 1-based grid coordinates, one entry per dimension.
using MultiIndex = std::vector<int>;

/// Integer power with overflow detection.
inline std::size_t checked_pow(int n, int dims) {
    if (n < 1 || dims < 0) throw ConfigError("grid: N must be >= 1 and dims >= 0");
    std::size_t r = 1;
    for (int i = 0; i < dims; ++i) {
        if (r > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(n))
            throw ConfigError("grid: N^dims overflows the index type (N=" + std::to_string(n) +
                              ", dims=" + std::to_string(dims) + ")");
        r *= static_cast<std::size_t>(n);
    }
    return r;
}

/**
 * @brief Uniform grid on (0,1]^(dims_x+dims_p) with nodes at j*h, j=1..N.
 *
 * Phase-space fields order coordinates as (x_1..x_dx, p_1..p_dp). ODE transport
 * grids use dims_p = 0.
 */
struct PhaseGrid {
    int dims_x = 1;
    int dims_p = 1;
    int n = 2;
    double h = 0.5;
    double dt = 0.0;
    int n_steps = 0;

    static PhaseGrid make(int dims_x, int dims_p, int n, double dt, int n_steps) {
        if (dims_x < 0 || dims_p < 0 || dims_x + dims_p < 1)
            throw ConfigError("grid: need at least one dimension");
        if (n < 1) throw ConfigError("grid: N must be >= 1");
        if (!(dt >= 0.0) || !std::isfinite(dt)) throw ConfigError("grid: dt must be finite and >= 0");
        if (n_steps < 0) throw ConfigError("grid: n_steps must be >= 0");
        checked_pow(n, dims_x + dims_p);
        PhaseGrid g;
        g.dims_x = dims_x;
        g.dims_p = dims_p;
        g.n = n;
        g.h = 1.0 / n;
        g.dt = dt;
        g.n_steps = n_steps;
        return g;
    }

    int dims() const { return dims_x + dims_p; }
    std::size_t size() const { return checked_pow(n, dims()); }
    std::size_t x_size() const { return checked_pow(n, dims_x); }
    std::size_t p_size() const { return checked_pow(n, dims_p); }
    double t_final() const { return n_steps * dt; }
    double lambda() const { return dt / h; }
};

/// Largest dt with dims_total*(dt/h)*max_speed <= 1; dt = h when max_speed = 0.
inline double cfl_time_step(double max_speed, int dims_total, double h) {
    if (!std::isfinite(max_speed)) throw NumericalError("unbounded characteristic speed");
    if (max_speed < 0.0) throw ConfigError("cfl: max_speed must be >= 0");
    if (dims_total < 1) throw ConfigError("cfl: dims_total must be >= 1");
    if (!(h > 0.0)) throw ConfigError("cfl: h must be > 0");
    if (max_speed == 0.0) return h;
    double dt = h / (dims_total * max_speed);
    // guard the last ulp so the inequality holds in floating point
    while (dims_total * (dt / h) * max_speed > 1.0) dt = std::nextafter(dt, 0.0);
    return dt;
}

/// Row-major flat index, first coordinate fastest.
inline std::size_t flatten(const MultiIndex& idx, int n) {
    std::size_t flat = 0;
    std::size_t stride = 1;
    for (int c : idx) {
        if (c < 1 || c > n)
            throw std::out_of_range("flatten: coordinate " + std::to_string(c) + " outside [1," +
                                    std::to_string(n) + "]");
        flat += static_cast<std::size_t>(c - 1) * stride;
        stride *= static_cast<std::size_t>(n);
    }
    return flat;
}

inline MultiIndex unflatten(std::size_t flat, int n, int dims) {
    if (flat >= checked_pow(n, dims))
        throw std::out_of_range("unflatten: flat index " + std::to_string(flat) + " out of range");
    MultiIndex idx(dims);
    for (int i = 0; i < dims; ++i) {
        idx[i] = static_cast<int>(flat % n) + 1;
        flat /= n;
    }
    return idx;
}

inline double coord(int j, int n) { return static_cast<double>(j) / n; }

inline std::vector<double> coords(const MultiIndex& idx, int n) {
    std::vector<double> r(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[i] = coord(idx[i], n);
    return r;
}

}  // namespace lvlset
