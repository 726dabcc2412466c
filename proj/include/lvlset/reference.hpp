#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "lvlset/error.hpp"
#include "lvlset/models.hpp"
#include "lvlset/observables.hpp"

namespace lvlset {

/// Axis-aligned box used to detect escaping trajectories.
struct Box {
    double lo = -10.0;
    double hi = 10.0;
    bool contains(const Vec& v) const {
        for (double a : v)
            if (!(a >= lo && a <= hi)) return false;
        return true;
    }
};

struct PhasePoint {
    Vec x;
    Vec p;
};

/// Hamilton's equations x' = dH/dp, p' = -dH/dx by classical RK4; t/dt rounded up to whole steps.
inline PhasePoint ray_trace(const HamiltonianModel& m, Vec x0, Vec p0, double t, double dt, Box box = {}) {
    if (!(t >= 0.0)) throw ConfigError("ray_trace: t must be >= 0");
    if (!(dt > 0.0)) throw ConfigError("ray_trace: dt must be > 0");
    const std::size_t d = x0.size();
    if (p0.size() != d) throw ConfigError("ray_trace: x0 and p0 differ in dimension");
    long steps = static_cast<long>(std::ceil(t / dt - 1e-12));
    if (steps < 1 && t > 0.0) steps = 1;
    const double tau = steps > 0 ? t / steps : 0.0;
    auto rhs = [&](const Vec& x, const Vec& p, Vec& dx, Vec& dp) {
        dx = m.grad_p(x, p);
        dp = m.grad_x(x, p);
        for (double& a : dp) a = -a;
    };
    Vec x = std::move(x0), p = std::move(p0), k1x, k1p, k2x, k2p, k3x, k3p, k4x, k4p, tx(d), tp(d);
    for (long s = 0; s < steps; ++s) {
        rhs(x, p, k1x, k1p);
        for (std::size_t i = 0; i < d; ++i) tx[i] = x[i] + 0.5 * tau * k1x[i], tp[i] = p[i] + 0.5 * tau * k1p[i];
        rhs(tx, tp, k2x, k2p);
        for (std::size_t i = 0; i < d; ++i) tx[i] = x[i] + 0.5 * tau * k2x[i], tp[i] = p[i] + 0.5 * tau * k2p[i];
        rhs(tx, tp, k3x, k3p);
        for (std::size_t i = 0; i < d; ++i) tx[i] = x[i] + tau * k3x[i], tp[i] = p[i] + tau * k3p[i];
        rhs(tx, tp, k4x, k4p);
        for (std::size_t i = 0; i < d; ++i) {
            x[i] += tau / 6.0 * (k1x[i] + 2 * k2x[i] + 2 * k3x[i] + k4x[i]);
            p[i] += tau / 6.0 * (k1p[i] + 2 * k2p[i] + 2 * k3p[i] + k4p[i]);
        }
        if (!box.contains(x) || !box.contains(p)) throw NumericalError("trajectory escaped domain");
    }
    return {x, p};
}

struct Branch {
    double u_gamma = 0.0;
    double jacobian = 0.0;
    double x0 = 0.0;
    std::size_t source_k = 0;
    bool caustic = false;
};

struct ShootingOptions {
    int n_shoot = 4000;
    double x0_lo = 0.0;
    double x0_hi = 1.0;
    double dt = 1e-2;
    double fd_step = 1e-6;
    double caustic_threshold = 1e-10;
    Box box{-10.0, 10.0};
};

struct BranchReport {
    std::vector<Branch> branches;
    std::size_t caustic_count = 0;
};

/**
 * @brief Roots p_gamma of the level set at (t, x) for d = 1 by shooting.
 *
 * Characteristics start at (x0, u0(x0)); sign changes of X(x0) - x are bisected.
 * J = |d phi/dp| with phi(p) = p0(x,p) - u0(x0(x,p)), by central differences of the backward flow.
 */
inline BranchReport multivalued_branches(const HamiltonianModel& m, const std::function<double(double)>& u0,
                                         double t, double x, const ShootingOptions& opt = {},
                                         std::size_t source_k = 0) {
    if (m.dims != 1) throw ConfigError("multivalued_branches: shooting oracle is one-dimensional");
    if (opt.n_shoot < 2) throw ConfigError("multivalued_branches: need n_shoot >= 2");
    auto forward = [&](double x0) { return ray_trace(m, {x0}, {u0(x0)}, t, opt.dt, opt.box); };
    auto miss = [&](double x0) { return forward(x0).x[0] - x; };
    // backward flow of Hamilton's equations is the forward flow of H with x' = -dH/dp, p' = dH/dx
    HamiltonianModel rev = m;
    rev.grad_p = [&m](const Vec& a, const Vec& b) {
        Vec g = m.grad_p(a, b);
        for (double& v : g) v = -v;
        return g;
    };
    rev.grad_x = [&m](const Vec& a, const Vec& b) {
        Vec g = m.grad_x(a, b);
        for (double& v : g) v = -v;
        return g;
    };
    auto level = [&](double p) {
        PhasePoint o = ray_trace(rev, {x}, {p}, t, opt.dt, opt.box);
        return o.p[0] - u0(o.x[0]);
    };

    BranchReport rep;
    const double step = (opt.x0_hi - opt.x0_lo) / (opt.n_shoot - 1);
    double a = opt.x0_lo, fa = miss(a);
    for (int i = 1; i < opt.n_shoot; ++i) {
        double b = opt.x0_lo + i * step, fb = miss(b);
        double root;
        if (fa == 0.0) root = a;
        else if (fa * fb < 0.0) {
            double lo = a, hi = b, flo = fa;
            for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
                double mid = 0.5 * (lo + hi), fm = miss(mid);
                if ((fm < 0.0) == (flo < 0.0)) lo = mid, flo = fm;
                else hi = mid;
            }
            root = 0.5 * (lo + hi);
        } else {
            a = b, fa = fb;
            continue;
        }
        Branch br;
        br.x0 = root;
        br.u_gamma = forward(root).p[0];
        br.source_k = source_k;
        double hfd = opt.fd_step;
        br.jacobian = std::abs(level(br.u_gamma + hfd) - level(br.u_gamma - hfd)) / (2.0 * hfd);
        br.caustic = br.jacobian < opt.caustic_threshold;
        rep.caustic_count += br.caustic;
        rep.branches.push_back(br);
        a = b, fa = fb;
    }
    return rep;
}

/// sum_k c_k sum_gamma G(u_gamma)/J_gamma; caustics make the observable undefined.
inline double oracle_observable(const HamiltonianModel& m, const InitialEnsemble<std::function<double(double)>>& e,
                                const ObservableSpec& spec, double t, double x, const ShootingOptions& opt = {}) {
    double total = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        BranchReport r = multivalued_branches(m, e.members[k], t, x, opt, k);
        if (r.caustic_count > 0) throw NumericalError("observable undefined at caustic");
        for (const Branch& b : r.branches) total += e.weights[k] * spec.G(Vec{b.u_gamma}, Vec{x}) / b.jacobian;
    }
    return total;
}

inline void write_branch_csv_header(std::ostream& os) { os << "t,x,branch_index,p_gamma,jacobian,source_k\n"; }

inline void write_branch_csv(std::ostream& os, double t, double x, const BranchReport& r) {
    auto old = os.precision(17);
    for (std::size_t i = 0; i < r.branches.size(); ++i) {
        const Branch& b = r.branches[i];
        os << t << ',' << x << ',' << i << ',' << b.u_gamma << ',' << b.jacobian << ',' << b.source_k << '\n';
    }
    os.precision(old);
}

struct EnsembleSolution {
    std::vector<Vec> endpoints;
    std::vector<double> weights;

    double average(const ObservableSpec& A) const {
        double s = 0.0;
        for (std::size_t k = 0; k < endpoints.size(); ++k) s += weights[k] * A.G(endpoints[k], Vec{});
        return s;
    }
};

/// Forward Euler for every member with t/dt rounded up to whole steps.
inline EnsembleSolution solve_ode_ensemble(const OdeModel& m, const PointEnsemble& e, double t, double dt,
                                           Box box = {}) {
    if (!(dt > 0.0) || !(t >= 0.0)) throw ConfigError("solve_ode_ensemble: need t >= 0 and dt > 0");
    long steps = static_cast<long>(std::ceil(t / dt - 1e-12));
    const double tau = steps > 0 ? t / steps : 0.0;
    EnsembleSolution r;
    r.weights = e.weights;
    for (const Vec& q0 : e.members) {
        Vec q = q0;
        for (long s = 0; s < steps; ++s) {
            Vec f = m.F(q);
            for (std::size_t i = 0; i < q.size(); ++i) q[i] += tau * f[i];
            if (!box.contains(q)) throw NumericalError("trajectory escaped domain");
        }
        r.endpoints.push_back(q);
    }
    return r;
}

}  // namespace lvlset
