#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "lvlset/error.hpp"
#include "lvlset/expr.hpp"

namespace lvlset {

using Vec = std::vector<double>;

/// H(x,p) with analytic gradients; speed_bound bounds every |dH/dx_i|, |dH/dp_i| on [0,1]^{2d}.
struct HamiltonianModel {
    int dims = 1;
    std::string name;
    std::function<double(const Vec& x, const Vec& p)> H;
    std::function<Vec(const Vec& x, const Vec& p)> grad_x;
    std::function<Vec(const Vec& x, const Vec& p)> grad_p;
    double speed_bound = 0.0;
};

/// Level-set form of u_t + F(u).grad u + Q(x,u) = 0.
struct HyperbolicModel {
    int dims = 1;
    std::string name;
    std::function<Vec(double u)> F;
    std::function<double(const Vec& x, double u)> Q;
    double speed_bound = 0.0;
};

/// dX/dt = F(X) in D dimensions.
struct OdeModel {
    int dims = 2;
    std::string name;
    std::function<Vec(const Vec& q)> F;
    bool divergence_free = false;
    double speed_bound = 0.0;
};

/// M members with positive weights summing to one.
template <class Member>
struct InitialEnsemble {
    std::vector<Member> members;
    std::vector<double> weights;

    static InitialEnsemble uniform(std::vector<Member> m) {
        std::size_t count = m.size();
        return weighted(std::move(m), std::vector<double>(count, count ? 1.0 / count : 0.0));
    }

    static InitialEnsemble weighted(std::vector<Member> m, std::vector<double> w) {
        if (m.empty()) throw ConfigError("ensemble: need at least one member (M >= 1)");
        if (w.size() != m.size()) throw ConfigError("ensemble: weight count differs from member count");
        double s = 0.0;
        for (double c : w) {
            if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("ensemble: weights must be positive");
            s += c;
        }
        if (std::abs(s - 1.0) > 1e-12) throw ConfigError("ensemble: weights must sum to 1 within 1e-12");
        return InitialEnsemble{std::move(m), std::move(w)};
    }

    std::size_t size() const { return members.size(); }
};

using HjEnsemble = InitialEnsemble<std::function<Vec(const Vec&)>>;
using ScalarEnsemble = InitialEnsemble<std::function<double(const Vec&)>>;
using PointEnsemble = InitialEnsemble<Vec>;

namespace detail {

inline double norm2(const Vec& v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s);
}

/// Regular sample points of [lo,hi]^dims, at most ~max_points of them.
inline void for_each_sample(int dims, double lo, double hi, std::size_t max_points,
                            const std::function<void(const Vec&)>& f) {
    int per = std::max(2, static_cast<int>(std::floor(std::pow(static_cast<double>(max_points), 1.0 / dims))));
    std::vector<int> c(dims, 0);
    Vec pt(dims);
    for (;;) {
        for (int i = 0; i < dims; ++i) pt[i] = lo + (hi - lo) * c[i] / (per - 1);
        f(pt);
        int i = 0;
        while (i < dims && ++c[i] == per) c[i++] = 0;
        if (i == dims) break;
    }
}

inline double max_abs(const Vec& v) {
    double m = 0.0;
    for (double a : v) m = std::max(m, std::abs(a));
    return m;
}

}  // namespace detail

/// Sampled sup of the gradient max-norm over [0,1]^{2d}, times 1.05.
inline double sampled_speed_bound(const HamiltonianModel& m, std::size_t max_points = 65536) {
    double s = 0.0;
    int d = m.dims;
    detail::for_each_sample(2 * d, 0.0, 1.0, max_points, [&](const Vec& z) {
        Vec x(z.begin(), z.begin() + d), p(z.begin() + d, z.end());
        if (detail::norm2(p) < 1e-12) return;
        s = std::max({s, detail::max_abs(m.grad_x(x, p)), detail::max_abs(m.grad_p(x, p))});
    });
    return 1.05 * s;
}

inline double sampled_speed_bound(const HyperbolicModel& m, double u_min, double u_max,
                                  std::size_t max_points = 65536) {
    double s = 0.0;
    int d = m.dims;
    detail::for_each_sample(d + 1, 0.0, 1.0, max_points, [&](const Vec& z) {
        Vec x(z.begin(), z.begin() + d);
        double u = u_min + (u_max - u_min) * z[d];
        s = std::max({s, detail::max_abs(m.F(u)), std::abs(m.Q(x, u))});
    });
    return 1.05 * s;
}

inline double sampled_speed_bound(const OdeModel& m, std::size_t max_points = 65536) {
    double s = 0.0;
    detail::for_each_sample(m.dims, 0.0, 1.0, max_points,
                            [&](const Vec& q) { s = std::max(s, detail::max_abs(m.F(q))); });
    return 1.05 * s;
}

/// H = |p - p_c|^2/2 (free streaming, optionally in a frame moving with p_c).
inline HamiltonianModel builtin_free(int dims = 1, double p_center = 0.0) {
    HamiltonianModel m;
    m.dims = dims;
    m.name = p_center == 0.0 ? "free" : "free:pc=" + std::to_string(p_center);
    m.H = [p_center](const Vec&, const Vec& p) {
        double s = 0.0;
        for (double a : p) s += (a - p_center) * (a - p_center);
        return 0.5 * s;
    };
    m.grad_x = [](const Vec& x, const Vec&) { return Vec(x.size(), 0.0); };
    m.grad_p = [p_center](const Vec&, const Vec& p) {
        Vec g(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] - p_center;
        return g;
    };
    m.speed_bound = std::max(std::abs(p_center), std::abs(1.0 - p_center));
    return m;
}

/// H = |p|^2/2 + V(x) with caller-supplied analytic grad V.
inline HamiltonianModel builtin_newtonian(int dims, std::function<double(const Vec&)> V,
                                          std::function<Vec(const Vec&)> gradV,
                                          std::string name = "newtonian") {
    HamiltonianModel m;
    m.dims = dims;
    m.name = std::move(name);
    m.H = [V](const Vec& x, const Vec& p) {
        double s = 0.0;
        for (double a : p) s += a * a;
        return 0.5 * s + V(x);
    };
    m.grad_x = [gradV](const Vec& x, const Vec&) { return gradV(x); };
    m.grad_p = [](const Vec&, const Vec& p) { return p; };
    double gv = 0.0;
    detail::for_each_sample(dims, 0.0, 1.0, 65536,
                            [&](const Vec& x) { gv = std::max(gv, detail::max_abs(gradV(x))); });
    m.speed_bound = std::max(1.0, gv > 0.0 ? 1.05 * gv : 0.0);
    return m;
}

/// H = (|p - c|^2 + |x - c|^2)/2, a rotation of phase space about (c, c).
inline HamiltonianModel builtin_harmonic(int dims = 1, double center = 0.5) {
    HamiltonianModel m;
    m.dims = dims;
    m.name = "harmonic";
    m.H = [center](const Vec& x, const Vec& p) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            s += (x[i] - center) * (x[i] - center) + (p[i] - center) * (p[i] - center);
        return 0.5 * s;
    };
    m.grad_x = [center](const Vec& x, const Vec&) {
        Vec g(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] - center;
        return g;
    };
    m.grad_p = [center](const Vec&, const Vec& p) {
        Vec g(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] - center;
        return g;
    };
    m.speed_bound = std::max(std::abs(center), std::abs(1.0 - center));
    return m;
}

/// H = c(x)|p|; the gradient is singular at p = 0.
inline HamiltonianModel builtin_geometric_optics(int dims, std::function<double(const Vec&)> c,
                                                 std::function<Vec(const Vec&)> gradc,
                                                 std::string name = "go") {
    HamiltonianModel m;
    m.dims = dims;
    m.name = std::move(name);
    m.H = [c](const Vec& x, const Vec& p) { return c(x) * detail::norm2(p); };
    m.grad_p = [c](const Vec& x, const Vec& p) {
        double np = detail::norm2(p);
        if (np < 1e-12) throw NumericalError("gradient singular at p=0");
        Vec g(p.size());
        double cx = c(x);
        for (std::size_t i = 0; i < p.size(); ++i) g[i] = cx * p[i] / np;
        return g;
    };
    m.grad_x = [gradc](const Vec& x, const Vec& p) {
        double np = detail::norm2(p);
        if (np < 1e-12) throw NumericalError("gradient singular at p=0");
        Vec g = gradc(x);
        for (double& a : g) a *= np;
        return g;
    };
    m.speed_bound = sampled_speed_bound(m);
    return m;
}

/// Newtonian model from an expression V(x) or V(x1..xd); gradient by symbolic differentiation.
inline HamiltonianModel newtonian_from_expr(int dims, const std::string& v_text) {
    std::vector<std::string> names;
    if (dims == 1) names = {"x"};
    else
        for (int i = 1; i <= dims; ++i) names.push_back("x" + std::to_string(i));
    Expr V = Expr::parse(v_text, names);
    std::vector<Expr> dV;
    for (int i = 0; i < dims; ++i) dV.push_back(V.derivative(i));
    return builtin_newtonian(
        dims, [V](const Vec& x) { return V(x); },
        [dV](const Vec& x) {
            Vec g(dV.size());
            for (std::size_t i = 0; i < dV.size(); ++i) g[i] = dV[i](x);
            return g;
        },
        "newtonian:V=" + v_text);
}

inline HamiltonianModel geometric_optics_from_expr(int dims, const std::string& c_text) {
    std::vector<std::string> names;
    if (dims == 1) names = {"x"};
    else
        for (int i = 1; i <= dims; ++i) names.push_back("x" + std::to_string(i));
    Expr c = Expr::parse(c_text, names);
    std::vector<Expr> dc;
    for (int i = 0; i < dims; ++i) dc.push_back(c.derivative(i));
    return builtin_geometric_optics(
        dims, [c](const Vec& x) { return c(x); },
        [dc](const Vec& x) {
            Vec g(dc.size());
            for (std::size_t i = 0; i < dc.size(); ++i) g[i] = dc[i](x);
            return g;
        },
        "go:c=" + c_text);
}

/// Inviscid Burgers level set: F(u) = u (d = 1), Q = 0.
inline HyperbolicModel builtin_burgers(double u_min = 0.0, double u_max = 1.0) {
    HyperbolicModel m;
    m.dims = 1;
    m.name = "burgers";
    m.F = [](double u) { return Vec{u}; };
    m.Q = [](const Vec&, double) { return 0.0; };
    m.speed_bound = std::max(std::abs(u_min), std::abs(u_max));
    return m;
}

/// Rigid rotation about (1/2, 1/2): F(q) = (-(q2 - 1/2), q1 - 1/2).
inline OdeModel builtin_rotation() {
    OdeModel m;
    m.dims = 2;
    m.name = "rotation";
    m.F = [](const Vec& q) { return Vec{-(q[1] - 0.5), q[0] - 0.5}; };
    m.divergence_free = true;
    m.speed_bound = 0.5;
    return m;
}

/// Constant-velocity transport u_t + v u_x = 0 (D = 1).
inline OdeModel builtin_advection(double velocity = 1.0) {
    OdeModel m;
    m.dims = 1;
    m.name = "advection";
    m.F = [velocity](const Vec&) { return Vec{velocity}; };
    m.divergence_free = true;
    m.speed_bound = std::abs(velocity);
    return m;
}

/// Central-difference divergence at a point.
inline double numeric_divergence(const OdeModel& m, const Vec& q, double step = 1e-5) {
    double div = 0.0;
    for (int i = 0; i < m.dims; ++i) {
        Vec a = q, b = q;
        a[i] += step;
        b[i] -= step;
        div += (m.F(a)[i] - m.F(b)[i]) / (2.0 * step);
    }
    return div;
}

struct GradientCheck {
    double max_deviation = 0.0;
    bool passed = true;
    double tolerance = 1e-5;
};

/// Compares analytic gradients with central differences of H at random interior points.
inline GradientCheck gradient_selfcheck(const HamiltonianModel& m, int samples = 100, double step = 1e-5,
                                        double tolerance = 1e-5, unsigned long long seed = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.05, 0.95);
    GradientCheck r;
    r.tolerance = tolerance;
    int d = m.dims;
    for (int s = 0; s < samples; ++s) {
        Vec x(d), p(d);
        for (auto& a : x) a = U(rng);
        for (auto& a : p) a = U(rng);
        Vec gx = m.grad_x(x, p), gp = m.grad_p(x, p);
        for (int i = 0; i < d; ++i) {
            Vec xa = x, xb = x, pa = p, pb = p;
            xa[i] += step;
            xb[i] -= step;
            pa[i] += step;
            pb[i] -= step;
            double fx = (m.H(xa, p) - m.H(xb, p)) / (2.0 * step);
            double fp = (m.H(x, pa) - m.H(x, pb)) / (2.0 * step);
            r.max_deviation = std::max(r.max_deviation, std::abs(fx - gx[i]) / std::max(1.0, std::abs(gx[i])));
            r.max_deviation = std::max(r.max_deviation, std::abs(fp - gp[i]) / std::max(1.0, std::abs(gp[i])));
        }
    }
    r.passed = r.max_deviation <= tolerance;
    return r;
}

}  // namespace lvlset
