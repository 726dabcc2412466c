#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lvlset/error.hpp"
#include "lvlset/expr.hpp"
#include "lvlset/linsys.hpp"
#include "lvlset/liouville.hpp"

namespace lvlset {

/// G(p, x): p is the momentum (HJ), the scalar level-set variable (hyperbolic) or the state q (ODE).
struct ObservableSpec {
    std::string name;
    std::function<double(const Vec& p, const Vec& x)> G;
};

inline ObservableSpec observable_one() {
    return {"one", [](const Vec&, const Vec&) { return 1.0; }};
}

/// G = p_i, 1-based component.
inline ObservableSpec observable_momentum(int i = 1) {
    return {"momentum_" + std::to_string(i), [i](const Vec& p, const Vec&) {
                if (i < 1 || i > static_cast<int>(p.size())) throw ConfigError("momentum component out of range");
                return p[i - 1];
            }};
}

inline ObservableSpec observable_kinetic() {
    return {"kinetic", [](const Vec& p, const Vec&) {
                double s = 0.0;
                for (double a : p) s += a * a;
                return 0.5 * s;
            }};
}

inline ObservableSpec observable_energy(std::function<double(const Vec&)> V) {
    return {"energy", [V](const Vec& p, const Vec& x) {
                double s = 0.0;
                for (double a : p) s += a * a;
                return 0.5 * s + V(x);
            }};
}

/// Builtin names, or "expr:<text>" over variables p (or p1..pd) and x (or x1..xd).
inline ObservableSpec make_observable(const std::string& name, int dims_p, int dims_x,
                                      std::function<double(const Vec&)> V = nullptr) {
    if (name == "one") return observable_one();
    if (name == "kinetic") return observable_kinetic();
    if (name == "energy") {
        if (!V) throw ConfigError("observable 'energy' needs a potential");
        return observable_energy(V);
    }
    if (name.rfind("momentum_", 0) == 0) return observable_momentum(std::stoi(name.substr(9)));
    if (name == "momentum") return observable_momentum(1);
    if (name.rfind("expr:", 0) == 0) {
        std::vector<std::string> vars;
        if (dims_p == 1) vars.push_back("p");
        else
            for (int i = 1; i <= dims_p; ++i) vars.push_back("p" + std::to_string(i));
        if (dims_x == 1) vars.push_back("x");
        else
            for (int i = 1; i <= dims_x; ++i) vars.push_back("x" + std::to_string(i));
        Expr e = Expr::parse(name.substr(5), vars);
        return {name, [e](const Vec& p, const Vec& x) {
                    Vec v(p);
                    v.insert(v.end(), x.begin(), x.end());
                    return e(v);
                }};
    }
    throw ConfigError("unknown observable '" + name + "'");
}

/// Pairwise (tree) summation; fixed order for reproducibility.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double a : v) s += a;
        return s;
    }
    std::size_t h = v.size() / 2;
    return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

namespace detail {

inline Vec x_coords(const PhaseGrid& g, const MultiIndex& at_x) {
    if (static_cast<int>(at_x.size()) != g.dims_x)
        throw ConfigError("observable: at_x has " + std::to_string(at_x.size()) + " coordinates, expected " +
                          std::to_string(g.dims_x));
    for (int c : at_x)
        if (c < 1 || c > g.n) throw ConfigError("observable: at_x coordinate outside [1,N]");
    return coords(at_x, g.n);
}

/// Calls f(flat index into the slice, p coordinates) for the p-column at at_x.
template <class F>
void for_each_p(const PhaseGrid& g, const MultiIndex& at_x, F&& f) {
    const std::size_t base = flatten(at_x, g.n);
    const std::size_t nx = g.x_size(), np = g.p_size();
    Vec p(g.dims_p);
    for (std::size_t jp = 0; jp < np; ++jp) {
        std::size_t r = jp;
        for (int a = 0; a < g.dims_p; ++a) {
            p[a] = coord(static_cast<int>(r % g.n) + 1, g.n);
            r /= g.n;
        }
        f(base + nx * jp, p);
    }
}

/// Samples G over the cells an observable reads, in the same order as the field sum.
inline std::vector<std::pair<std::size_t, double>> g_samples(const PhaseGrid& g, FieldKind kind,
                                                             const ObservableSpec& spec, const MultiIndex& at_x) {
    std::vector<std::pair<std::size_t, double>> out;
    if (kind == FieldKind::ode) {
        out.reserve(g.size());
        for (std::size_t c = 0; c < g.size(); ++c) {
            Vec q = coords(unflatten(c, g.n, g.dims_x), g.n);
            out.emplace_back(c, spec.G(q, Vec{}));
        }
    } else {
        Vec x = x_coords(g, at_x);
        out.reserve(g.p_size());
        for_each_p(g, at_x, [&](std::size_t c, const Vec& p) { out.emplace_back(c, spec.G(p, x)); });
    }
    return out;
}

inline double quadrature_weight(const PhaseGrid& g, FieldKind kind) {
    return 1.0 / static_cast<double>(kind == FieldKind::ode ? g.size() : g.p_size());
}

}  // namespace detail

/// (1/N^{dims_p}) sum_l G(l h) psi(at_x, l); ODE fields sum the whole grid with weight 1/N^D.
inline double quadrature_average(const LevelSetField& f, const ObservableSpec& spec, const MultiIndex& at_x) {
    auto samples = detail::g_samples(f.grid, f.kind, spec, at_x);
    std::vector<double> terms(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        terms[i] = samples[i].second * f.values[static_cast<Eigen::Index>(samples[i].first)];
    return detail::quadrature_weight(f.grid, f.kind) * pairwise_sum(terms);
}

/// <G>/<1> with the zeroth moment floored at 1e-12.
inline double normalized_observable(const LevelSetField& f, const ObservableSpec& spec, const MultiIndex& at_x,
                                    double floor = 1e-12) {
    double zeroth = quadrature_average(f, observable_one(), at_x);
    if (!(zeroth >= floor)) throw NumericalError("vacuous density at x (zeroth moment below floor)");
    return quadrature_average(f, spec, at_x) / zeroth;
}

struct Normalization {
    double N_psi0 = 0.0;
    double n_psi0 = 0.0;
    double N_G = 0.0;
    double n_G = 0.0;
};

/// N_psi0 = ||psi0||_2, n_psi0 = N_psi0 / N^{e/2} with e = dims_p (HJ, hyperbolic) or D (ODE); n_G alike.
inline Normalization normalization_constants(const LevelSetField& psi0, const ObservableSpec& spec,
                                             const MultiIndex& at_x) {
    Normalization r;
    std::vector<double> sq(static_cast<std::size_t>(psi0.values.size()));
    for (Eigen::Index i = 0; i < psi0.values.size(); ++i) sq[static_cast<std::size_t>(i)] = psi0.values[i] * psi0.values[i];
    r.N_psi0 = std::sqrt(pairwise_sum(sq));
    if (r.N_psi0 == 0.0) throw NumericalError("normalization_constants: zero initial field");
    const double count = psi0.kind == FieldKind::ode ? static_cast<double>(psi0.grid.size())
                                                     : static_cast<double>(psi0.grid.p_size());
    r.n_psi0 = r.N_psi0 / std::sqrt(count);
    auto samples = detail::g_samples(psi0.grid, psi0.kind, spec, at_x);
    std::vector<double> g2(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) g2[i] = samples[i].second * samples[i].second;
    r.N_G = std::sqrt(pairwise_sum(g2));
    if (r.N_G == 0.0) throw NumericalError("normalization_constants: observable vanishes on the grid");
    r.n_G = r.N_G / std::sqrt(count);
    return r;
}

struct UpsilonResult {
    double upsilon = 0.0;
    double reconstructed = 0.0;  // n_psi0 n_G sqrt(Upsilon) = |<G>|
    double overlap = 0.0;        // <G_state | K^{-1} |psi0>/N_psi0, signed
    Normalization norms;
};

/// Unit vector G/N_G on the (l, at_x, at_n) block of the stacked state.
inline Eigen::VectorXd g_state(const TransportSystem& s, const ObservableSpec& spec, const MultiIndex& at_x,
                               int at_n, double N_G) {
    if (at_n < 0 || at_n >= s.n_blocks)
        throw ConfigError("g_state: time index " + std::to_string(at_n) + " outside [0," +
                          std::to_string(s.n_blocks - 1) + "]");
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.size()));
    const std::size_t off = static_cast<std::size_t>(at_n) * s.block_size;
    for (auto& [c, v] : detail::g_samples(s.grid, s.kind, spec, at_x))
        g[static_cast<Eigen::Index>(off + c)] = v / N_G;
    return g;
}

/// Upsilon = |<G_state, K^{-1}(e_1 (x) psi0)>|^2 / N_psi0^2 via the stacked solve.
inline UpsilonResult upsilon_exact(const TransportSystem& s, const LevelSetField& psi0, const ObservableSpec& spec,
                                   const MultiIndex& at_x, int at_n) {
    UpsilonResult r;
    r.norms = normalization_constants(psi0, spec, at_x);
    Eigen::VectorXd stacked = solve_forward(s, psi0.values);
    Eigen::VectorXd g = g_state(s, spec, at_x, at_n, r.norms.N_G);
    r.overlap = g.dot(stacked) / r.norms.N_psi0;
    r.upsilon = r.overlap * r.overlap;
    r.reconstructed = r.norms.n_psi0 * r.norms.n_G * std::sqrt(r.upsilon);
    return r;
}

/// Least-squares slope of log n_psi0 against log N, doubled: n_psi0 ~ N^{b/2}.
inline double fit_b_exponent(const std::vector<double>& Ns, const std::vector<double>& n_psi0) {
    if (Ns.size() != n_psi0.size() || Ns.size() < 2) throw ConfigError("fit_b_exponent: need >= 2 samples");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < Ns.size(); ++i) {
        mx += std::log(Ns[i]);
        my += std::log(n_psi0[i]);
    }
    mx /= Ns.size();
    my /= Ns.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < Ns.size(); ++i) {
        double dx = std::log(Ns[i]) - mx;
        sxy += dx * (std::log(n_psi0[i]) - my);
        sxx += dx * dx;
    }
    return 2.0 * sxy / sxx;
}

/// Observable report row: t, x_1..x_d, name, value, omega, N, M.
inline void write_observable_csv_header(std::ostream& os, int dims_x) {
    os << 't';
    for (int i = 1; i <= dims_x; ++i) os << ",x_" << i;
    os << ",name,value,omega,N,M\n";
}

inline void write_observable_csv_row(std::ostream& os, double t, const Vec& x, const std::string& name,
                                     double value, double omega, int N, std::size_t M) {
    auto old = os.precision(17);
    os << t;
    for (double a : x) os << ',' << a;
    os << ',' << name << ',' << value << ',' << omega << ',' << N << ',' << M << '\n';
    os.precision(old);
}

}  // namespace lvlset
