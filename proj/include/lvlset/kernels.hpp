#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include "lvlset/error.hpp"

namespace lvlset {

enum class KernelShape { hat, cosine };

inline const char* to_string(KernelShape s) { return s == KernelShape::hat ? "hat" : "cosine"; }

inline KernelShape kernel_shape_from_string(const std::string& s) {
    if (s == "hat") return KernelShape::hat;
    if (s == "cosine") return KernelShape::cosine;
    throw ConfigError("kernel: unknown shape '" + s + "' (expected hat|cosine)");
}

/// delta_omega(x) = beta(x/omega)/omega on |x| <= omega, zero outside.
struct DeltaKernel {
    double omega = 0.1;
    KernelShape shape = KernelShape::cosine;
};

inline double kernel_profile(KernelShape shape, double s) {
    if (shape == KernelShape::hat) return 1.0 - std::abs(s);
    return 0.5 * (1.0 + std::cos(std::numbers::pi * s));
}

inline double eval_delta(const DeltaKernel& k, double x) {
    if (!std::isfinite(x)) throw NumericalError("eval_delta: non-finite argument");
    if (!(k.omega > 0.0)) throw ConfigError("eval_delta: omega must be > 0");
    double ax = std::abs(x);
    if (ax >= k.omega) return 0.0;
    return kernel_profile(k.shape, ax / k.omega) / k.omega;
}

inline double eval_delta_nd(const DeltaKernel& k, std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("eval_delta_nd: empty argument");
    double r = 1.0;
    for (double x : v) {
        r *= eval_delta(k, x);
        if (r == 0.0) return 0.0;
    }
    return r;
}

struct MassReport {
    double mass = 0.0;
    bool under_resolved = false;
    int m = 0;  // grid points per half-width, floor(omega/h)
};

/// h * sum_j delta(j h) over integer offsets inside the support.
inline MassReport discrete_mass(const DeltaKernel& k, double h) {
    if (!(h > 0.0)) throw ConfigError("discrete_mass: h must be > 0");
    MassReport r;
    r.m = static_cast<int>(std::floor(k.omega / h));
    double s = 0.0;
    for (int j = -r.m - 1; j <= r.m + 1; ++j) s += eval_delta(k, j * h);
    r.mass = h * s;
    r.under_resolved = k.omega < 2.0 * h;
    return r;
}

/// omega = (d h)^(1/3), the classical error-balance point.
inline double default_omega(int d, double h) { return std::cbrt(d * h); }

}  // namespace lvlset
