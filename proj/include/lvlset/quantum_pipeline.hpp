#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "lvlset/error.hpp"
#include "lvlset/linsys.hpp"
#include "lvlset/observables.hpp"

namespace lvlset {

/// theta^2 = 33/32.
inline const double kTheta = std::sqrt(33.0 / 32.0);

struct ErrorBudget {
    double eps = 0.0;
    double eps_cl = 0.0;
    double eps_q = 0.0;
    double eps_G = 0.0;
    double eps_prime = 0.0;
    double delta = 0.0;
    double eps_u = 0.0;
    double alpha_minv = 0.0;
    double kappa = 1.0;
    double norm_M = 1.0;
};

/// Budget on Upsilon directly from eps', for the chain alpha^2 eps_u + delta^2 <= eps'.
inline ErrorBudget budget_from_eps_prime(double eps_prime, double kappa, double norm_M) {
    if (!(kappa >= 1.0)) throw ConfigError("derive_budget: kappa must be >= 1");
    if (!(norm_M >= 1.0))
        throw ConfigError("derive_budget: norm_M must be >= 1 (unit lower-triangular system)");
    if (!(eps_prime >= std::numeric_limits<double>::epsilon()))
        throw NumericalError("budget below float resolution (eps' = " + std::to_string(eps_prime) + ")");
    ErrorBudget b;
    b.eps_prime = eps_prime;
    b.kappa = kappa;
    b.norm_M = norm_M;
    b.delta = std::sqrt(eps_prime / 2.0);
    b.eps_u = eps_prime * norm_M / (33.0 * kappa * kappa);
    b.alpha_minv = 4.0 * kTheta * kappa / norm_M;
    return b;
}

/// upsilon_scale <= 0 selects the default 1/(n_G n_psi0).
inline ErrorBudget derive_budget(double eps, double n_psi0, double n_G, double kappa, double norm_M,
                                 double upsilon_scale = 0.0) {
    if (!(eps > 0.0) || !(n_psi0 > 0.0) || !(n_G > 0.0))
        throw ConfigError("derive_budget: eps, n_psi0 and n_G must be positive");
    const double scale = upsilon_scale > 0.0 ? upsilon_scale : 1.0 / (n_G * n_psi0);
    const double eps_cl = eps / 2.0;
    const double eps_q = eps / 2.0;
    const double eps_G = eps_q / (n_G * n_psi0);
    ErrorBudget b = budget_from_eps_prime(scale * eps_G, kappa, norm_M);
    b.eps = eps;
    b.eps_cl = eps_cl;
    b.eps_q = eps_q;
    b.eps_G = eps_G;
    return b;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed of trial i, independent of scheduling.
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t i) {
    return splitmix64(splitmix64(seed) ^ splitmix64(i + 0x632BE59BD9B4E019ull));
}

struct Estimate {
    double upsilon_tilde = 0.0;
    bool succeeded = false;
    bool good_branch = true;
};

/// Noise model: 5/6 good branch with u-noise in [-eps_u, eps_u], else [-3 eps_u, 3 eps_u];
/// fixed bias delta^2/(2 alpha^2); result clamped at 0.
inline Estimate emulate_estimate(double upsilon_true, const ErrorBudget& b, std::uint64_t seed) {
    std::mt19937_64 rng(splitmix64(seed));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    Estimate e;
    e.good_branch = coin(rng) < 5.0 / 6.0;
    const double width = e.good_branch ? b.eps_u : 3.0 * b.eps_u;
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    const double xi = width * noise(rng);
    const double a2 = b.alpha_minv * b.alpha_minv;
    const double shift = a2 > 0.0 ? a2 * xi + 0.5 * b.delta * b.delta : 0.0;
    e.upsilon_tilde = std::max(0.0, upsilon_true + shift);
    e.succeeded = std::abs(e.upsilon_tilde - upsilon_true) <= b.eps_prime;
    return e;
}

/// Query count n^2 d^7 T^3 / eps^10 * log(n^2 d^4 T^2 / eps^7); natural log floored at 1.
struct QueryComplexity {
    double value = 0.0;
    double power_law = 0.0;
    double log_factor = 0.0;
    double log10_value = 0.0;
    std::string expression;
};

inline QueryComplexity query_complexity(FieldKind kind, double n_psi0, double d, double T, double eps) {
    if (!(n_psi0 > 0.0) || !(d > 0.0) || !(T > 0.0) || !(eps > 0.0))
        throw ConfigError("query_complexity: inputs must be positive");
    const char* v = kind == FieldKind::ode ? "D" : "d";
    QueryComplexity q;
    const double l10 = 2.0 * std::log10(n_psi0) + 7.0 * std::log10(d) + 3.0 * std::log10(T) - 10.0 * std::log10(eps);
    const double arg_ln = 2.0 * std::log(n_psi0) + 4.0 * std::log(d) + 2.0 * std::log(T) - 7.0 * std::log(eps);
    q.log_factor = std::max(1.0, arg_ln);
    q.log10_value = l10 + std::log10(q.log_factor);
    q.power_law = std::pow(10.0, l10);
    q.value = std::pow(10.0, q.log10_value);
    std::ostringstream os;
    os << "n^2 " << v << "^7 T^3 / eps^10 * log(n^2 " << v << "^4 T^2 / eps^7)";
    q.expression = os.str();
    return q;
}

struct PipelineSetup {
    std::size_t sparsity = 0;
    double max_entry = 0.0;
    double alpha_M = 0.0;
    ConditionReport condition;
    Normalization norms;
    UpsilonResult upsilon;
    ErrorBudget budget;
    double quadrature = 0.0;
    bool zero_field = false;
};

struct PipelineReport {
    PipelineSetup setup;
    Estimate estimate;
    double g_tilde = 0.0;
    double error_vs_quadrature = 0.0;
    std::optional<double> oracle;
    double error_vs_oracle = 0.0;
    bool passed = false;
    std::uint64_t seed = 0;
};

/// Deterministic steps 0-4: block access constants, kappa and ||M||, budget, G-state, Upsilon.
inline PipelineSetup pipeline_prepare(const TransportSystem& s, const LevelSetField& psi0, const ObservableSpec& spec,
                                      const MultiIndex& at_x, int at_n, double eps, double upsilon_scale = 0.0) {
    PipelineSetup p;
    p.sparsity = measure_sparsity(s);
    p.max_entry = max_abs_entry(s.k_matrix);
    p.alpha_M = static_cast<double>(p.sparsity) * p.max_entry;
    p.condition = measure_condition(s, s.size() <= kMaxDenseSvd ? ConditionMethod::dense : ConditionMethod::power);
    p.zero_field = psi0.values.cwiseAbs().maxCoeff() == 0.0;
    if (p.zero_field) {
        p.budget = derive_budget(eps, 1.0, 1.0, std::max(1.0, p.condition.kappa), std::max(1.0, p.condition.sigma_max));
        return p;
    }
    p.upsilon = upsilon_exact(s, psi0, spec, at_x, at_n);
    p.norms = p.upsilon.norms;
    p.budget = derive_budget(eps, p.norms.n_psi0, p.norms.n_G, std::max(1.0, p.condition.kappa),
                             std::max(1.0, p.condition.sigma_max), upsilon_scale);
    LevelSetField f = psi0;
    Eigen::VectorXd stacked = solve_forward(s, psi0.values);
    f.values = stacked.segment(static_cast<Eigen::Index>(at_n) * static_cast<Eigen::Index>(s.block_size),
                               static_cast<Eigen::Index>(s.block_size));
    f.time_index = at_n;
    p.quadrature = quadrature_average(f, spec, at_x);
    return p;
}

/// Steps 5-6: noisy estimate and reconstruction <G~> = n_psi0 n_G sqrt(Upsilon~), signed by the overlap.
inline PipelineReport pipeline_trial(const PipelineSetup& p, std::uint64_t seed,
                                     std::optional<double> oracle = std::nullopt) {
    PipelineReport r;
    r.setup = p;
    r.seed = seed;
    r.oracle = oracle;
    if (p.zero_field) {
        r.estimate = {0.0, true, true};
        r.g_tilde = 0.0;
    } else {
        r.estimate = emulate_estimate(p.upsilon.upsilon, p.budget, seed);
        const double sign = p.upsilon.overlap < 0.0 ? -1.0 : 1.0;
        r.g_tilde = sign * p.norms.n_psi0 * p.norms.n_G * std::sqrt(r.estimate.upsilon_tilde);
    }
    r.error_vs_quadrature = std::abs(r.g_tilde - p.quadrature);
    if (oracle) {
        r.error_vs_oracle = std::abs(r.g_tilde - *oracle);
        r.passed = r.error_vs_oracle <= p.budget.eps;
    } else {
        r.passed = r.error_vs_quadrature <= p.budget.eps_q;
    }
    return r;
}

inline PipelineReport pipeline_run(const TransportSystem& s, const LevelSetField& psi0, const ObservableSpec& spec,
                                   const MultiIndex& at_x, int at_n, double eps, std::uint64_t seed,
                                   std::optional<double> oracle = std::nullopt) {
    return pipeline_trial(pipeline_prepare(s, psi0, spec, at_x, at_n, eps), seed, oracle);
}

inline void write_budget(std::ostream& os, const ErrorBudget& b) {
    os << std::setprecision(17);
    os << "eps: " << b.eps << '\n'
       << "eps_cl: " << b.eps_cl << '\n'
       << "eps_q: " << b.eps_q << '\n'
       << "eps_G: " << b.eps_G << '\n'
       << "eps_prime: " << b.eps_prime << '\n'
       << "delta: " << b.delta << '\n'
       << "eps_u: " << b.eps_u << '\n'
       << "theta: " << kTheta << '\n'
       << "alpha_minv: " << b.alpha_minv << '\n'
       << "kappa: " << b.kappa << '\n'
       << "norm_M: " << b.norm_M << '\n';
}

inline void write_report(std::ostream& os, const PipelineReport& r) {
    const auto& p = r.setup;
    os << std::setprecision(17);
    os << "noise_model: mix 5/6 uniform[-eps_u,eps_u], 1/6 uniform[-3eps_u,3eps_u], bias delta^2/2, clamp >= 0\n";
    os << "seed: " << r.seed << '\n'
       << "sparsity: " << p.sparsity << '\n'
       << "max_entry: " << p.max_entry << '\n'
       << "alpha_M: " << p.alpha_M << '\n'
       << "sigma_max: " << p.condition.sigma_max << '\n'
       << "sigma_min: " << p.condition.sigma_min << '\n';
    write_budget(os, p.budget);
    os << "N_psi0: " << p.norms.N_psi0 << '\n'
       << "n_psi0: " << p.norms.n_psi0 << '\n'
       << "N_G: " << p.norms.N_G << '\n'
       << "n_G: " << p.norms.n_G << '\n'
       << "upsilon: " << p.upsilon.upsilon << '\n'
       << "upsilon_tilde: " << r.estimate.upsilon_tilde << '\n'
       << "estimate_within_eps_prime: " << (r.estimate.succeeded ? "yes" : "no") << '\n'
       << "G_quadrature: " << p.quadrature << '\n'
       << "G_tilde: " << r.g_tilde << '\n'
       << "error_vs_quadrature: " << r.error_vs_quadrature << '\n';
    if (r.oracle) os << "oracle: " << *r.oracle << '\n' << "error_vs_oracle: " << r.error_vs_oracle << '\n';
    os << "result: " << (r.passed ? "pass" : "fail") << '\n';
}

}  // namespace lvlset
