#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>
#include <initializer_list>

#include "lvlset/error.hpp"
#include "lvlset/quantum_pipeline.hpp"

namespace lvlset {

enum class CostKind { hj, hyperbolic, ode, liouville_classical, ode_liouville, general_lagrangian, general_eulerian };

inline std::string to_string(CostKind k) {
    switch (k) {
        case CostKind::hj: return "hj";
        case CostKind::hyperbolic: return "hyperbolic";
        case CostKind::ode: return "ode";
        case CostKind::liouville_classical: return "liouville_classical";
        case CostKind::ode_liouville: return "ode_liouville";
        case CostKind::general_lagrangian: return "general_lagrangian";
        case CostKind::general_eulerian: return "general_eulerian";
    }
    return "?";
}

inline CostKind cost_kind_from_string(const std::string& s) {
    for (auto k : {CostKind::hj, CostKind::hyperbolic, CostKind::ode, CostKind::liouville_classical,
                   CostKind::ode_liouville, CostKind::general_lagrangian, CostKind::general_eulerian})
        if (to_string(k) == s) return k;
    if (s == "lagrangian") return CostKind::general_lagrangian;
    if (s == "eulerian") return CostKind::general_eulerian;
    throw ConfigError("unknown cost kind '" + s + "'");
}

/// Numeric cost carried in log10 so that d^d style terms never overflow; value is +inf past double range.
struct CostValue {
    std::string expression;
    double log10_value = 0.0;
    double value = 0.0;
    bool overflow = false;
};

namespace detail {

inline CostValue cost_value(std::string expr, double l10) {
    CostValue c;
    c.expression = std::move(expr);
    c.log10_value = l10;
    c.overflow = l10 > 307.0;
    c.value = c.overflow ? std::numeric_limits<double>::infinity() : std::pow(10.0, l10);
    return c;
}

inline void require_positive(std::initializer_list<double> v, const char* what) {
    for (double x : v)
        if (!(x > 0.0)) throw ConfigError(std::string(what) + ": inputs must be positive");
}

/// log10 of the ODE system size after substituting D -> d^2/eps or (d/eps)^d.
inline double log10_general_D(CostKind k, double d, double eps) {
    if (k == CostKind::general_lagrangian) return 2.0 * std::log10(d) - std::log10(eps);
    return d * (std::log10(d) - std::log10(eps));
}

}  // namespace detail

/// Classical cost with unit constants. For the general kinds d_or_D is the PDE dimension d.
inline CostValue classical_cost(CostKind k, double M, double T, double d, double eps) {
    detail::require_positive({M, T, d, eps}, "classical_cost");
    const double ld = std::log10(d), le = -std::log10(eps), lM = std::log10(M), lT = std::log10(T);
    switch (k) {
        case CostKind::hj:
            return detail::cost_value("M T d^(d+4) (1/eps)^(d+1)", lM + lT + (d + 4) * ld + (d + 1) * le);
        case CostKind::hyperbolic:
            return detail::cost_value("M T d^(d+3) (1/eps)^(d+1)", lM + lT + (d + 3) * ld + (d + 1) * le);
        case CostKind::ode:
            return detail::cost_value("M D^3 T / eps", lM + 3 * ld + lT + le);
        case CostKind::liouville_classical:
            return detail::cost_value("T d^(2d+3) (1/eps)^(6d+3)", lT + (2 * d + 3) * ld + (6 * d + 3) * le);
        case CostKind::ode_liouville:
            return detail::cost_value("D^(D+3) T (1/eps)^(3D+3)", (d + 3) * ld + lT + (3 * d + 3) * le);
        case CostKind::general_lagrangian:
        case CostKind::general_eulerian: {
            const double lD = detail::log10_general_D(k, d, eps);
            return detail::cost_value(k == CostKind::general_lagrangian ? "M D^3 T / eps, D = d^2/eps"
                                                                         : "M D^3 T / eps, D = (d/eps)^d",
                                      lM + 3 * lD + lT + le);
        }
    }
    throw ConfigError("classical_cost: bad kind");
}

/// Quantum query count for the kind; M never enters.
inline CostValue quantum_cost(CostKind k, double n_psi0, double T, double d, double eps) {
    detail::require_positive({n_psi0, T, d, eps}, "quantum_cost");
    FieldKind fk = FieldKind::hj;
    double dim = d;
    std::string suffix;
    switch (k) {
        case CostKind::hyperbolic: fk = FieldKind::hyperbolic; break;
        case CostKind::ode:
        case CostKind::ode_liouville: fk = FieldKind::ode; break;
        case CostKind::general_lagrangian:
        case CostKind::general_eulerian:
            fk = FieldKind::ode;
            dim = std::pow(10.0, detail::log10_general_D(k, d, eps));
            suffix = k == CostKind::general_lagrangian ? ", D = d^2/eps" : ", D = (d/eps)^d";
            break;
        default: break;
    }
    if (!std::isfinite(dim)) {
        // D itself overflows: evaluate the power law in log space, log factor from log D.
        const double lD = detail::log10_general_D(k, d, eps);
        const double l10 = 2 * std::log10(n_psi0) + 7 * lD + 3 * std::log10(T) - 10 * std::log10(eps);
        const double arg = std::log(10.0) * (2 * std::log10(n_psi0) + 4 * lD + 2 * std::log10(T) - 7 * std::log10(eps));
        return detail::cost_value("n^2 D^7 T^3 / eps^10 * log(n^2 D^4 T^2 / eps^7)" + suffix,
                                  l10 + std::log10(std::max(1.0, arg)));
    }
    auto q = query_complexity(fk, n_psi0, dim, T, eps);
    return detail::cost_value(q.expression + suffix, q.log10_value);
}

struct Table1Row {
    double r1 = 0.0;
    double r2 = 0.0;
    double b_lo = 0.0;
    double b_hi = 0.0;  // exclusive; equal to b_lo when b is pinned to 0
    bool b_pinned = false;
    bool range_empty = false;
    bool b_in_range = false;
    std::string advantage_params;
};

/// Exponents of C/Q ~ M T^-2 d^r1 (1/eps)^r2 as tabulated.
inline Table1Row table1_exponents(CostKind k, double d, double b = 0.0) {
    if (!(b >= 0.0)) throw ConfigError("table1_exponents: b must be >= 0");
    Table1Row r;
    switch (k) {
        case CostKind::hj:
        case CostKind::hyperbolic:
            r.r1 = d - (k == CostKind::hj ? 4.0 : 5.0) - b;
            r.r2 = d - 9.0 - 3.0 * b;
            r.b_lo = 0.0;
            r.b_hi = d / 3.0 - 3.0;
            r.range_empty = r.b_hi <= r.b_lo;
            r.b_in_range = !r.range_empty && b >= r.b_lo && b < r.b_hi;
            r.advantage_params = "M, d, eps";
            return r;
        case CostKind::ode:
            r.r1 = -5.0;
            r.r2 = -9.0;
            r.advantage_params = "M";
            break;
        case CostKind::general_lagrangian:
            r.r1 = -7.0;
            r.r2 = -13.0;
            r.advantage_params = "large M";
            break;
        case CostKind::general_eulerian:
            r.r1 = -4.0 * d;
            r.r2 = -9.0 - 4.0 * d;
            r.advantage_params = "large M";
            break;
        default: throw ConfigError("table1_exponents: no table row for kind " + to_string(k));
    }
    r.b_pinned = true;
    r.b_in_range = b == 0.0;
    return r;
}

inline const char* kSmoothnessCaveat =
    "only makes sense when the solution to the Hamilton-Jacobi equation is smooth";

struct AdvantageVerdict {
    double log10_ratio = 0.0;       // corollary expression, logs suppressed
    double M_threshold = 0.0;       // M where the corollary expression reaches 1; NaN when M is absent
    double log10_M_threshold = 0.0;
    double M_threshold_with_log = 0.0;  // M where classical_cost / quantum_cost reaches 1
    double log10_M_threshold_with_log = 0.0;
    double log10_direct_ratio = 0.0;    // log10(classical_cost / quantum_cost)
    bool advantage = false;
    std::string verdict;
    std::string caveat;
};

/// M may be +inf; the verdict then follows from Q being M-independent.
inline AdvantageVerdict advantage_check(CostKind k, double M, double T, double d, double eps, double n_psi0 = 1.0) {
    detail::require_positive({M, T, d, eps, n_psi0}, "advantage_check");
    const double ld = std::log10(d), le = -std::log10(eps), lT = std::log10(T), ln = std::log10(n_psi0);
    const double lM = std::log10(M);
    AdvantageVerdict v;
    double base = 0.0;  // log10 of the corollary expression at M = 1
    bool has_M = true;
    switch (k) {
        case CostKind::hj: base = (d - 4) * ld + (d - 9) * le - 2 * ln - 2 * lT; break;
        case CostKind::hyperbolic: base = (d - 5) * ld + (d - 9) * le - 2 * ln - 2 * lT; break;
        case CostKind::ode: base = -(4 * ld + 9 * le + 2 * ln + 2 * lT); break;
        case CostKind::liouville_classical:
            base = (2 * d - 5) * ld + (6 * d - 7) * le - 2 * ln - 2 * lT;
            has_M = false;
            break;
        case CostKind::general_lagrangian: base = -(7 * ld + 13 * le); break;
        case CostKind::general_eulerian: base = -(4 * d * ld + (9 + 4 * d) * le); break;
        case CostKind::ode_liouville: {
            const double lD = ld;
            base = (d + 3) * lD + (3 * d + 3) * le - (2 * ln + 7 * lD + 3 * lT + 10 * le) + lT;
            has_M = false;
            break;
        }
    }
    const CostKind ck = k;
    const double lC1 = classical_cost(ck, 1.0, T, d, eps).log10_value;
    const double lQ = quantum_cost(ck, n_psi0, T, d, eps).log10_value;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (has_M) {
        v.log10_ratio = lM + base;
        v.log10_M_threshold = -base;
        v.log10_M_threshold_with_log = lQ - lC1;
        v.log10_direct_ratio = lM + lC1 - lQ;
    } else {
        v.log10_ratio = base;
        v.log10_M_threshold = v.log10_M_threshold_with_log = nan;
        v.log10_direct_ratio = lC1 - lQ;
    }
    v.M_threshold = has_M ? std::pow(10.0, v.log10_M_threshold) : nan;
    v.M_threshold_with_log = has_M ? std::pow(10.0, v.log10_M_threshold_with_log) : nan;
    v.advantage = v.log10_ratio > 0.0;
    v.verdict = v.advantage ? "advantage" : "no advantage";
    if (k == CostKind::hj) v.caveat = kSmoothnessCaveat;
    return v;
}

struct GeneralPdeCosts {
    double log10_D = 0.0;
    CostValue quantum;
    CostValue classical;
    double log10_M_threshold = 0.0;
    double M_threshold = 0.0;  // +inf when past double range
    bool overflow = false;
};

inline GeneralPdeCosts general_pde_costs(CostKind method, double d, double eps, double M) {
    if (method != CostKind::general_lagrangian && method != CostKind::general_eulerian)
        throw ConfigError("general_pde_costs: method must be lagrangian or eulerian");
    GeneralPdeCosts g;
    g.log10_D = detail::log10_general_D(method, d, eps);
    g.quantum = quantum_cost(method, 1.0, 1.0, d, eps);
    g.classical = classical_cost(method, M, 1.0, d, eps);
    g.log10_M_threshold = method == CostKind::general_lagrangian
                              ? 7 * std::log10(d) - 13 * std::log10(eps)
                              : 4 * d * std::log10(d) - (9 + 4 * d) * std::log10(eps);
    g.overflow = g.log10_M_threshold > 307.0 || g.quantum.overflow || g.classical.overflow;
    g.M_threshold = g.log10_M_threshold > 307.0 ? std::numeric_limits<double>::infinity()
                                                : std::pow(10.0, g.log10_M_threshold);
    return g;
}

struct CostParams {
    double M = 1.0;
    double T = 1.0;
    double d = 1.0;
    double eps = 0.1;
    double b = 0.0;
    double n_psi0 = 1.0;
};

struct CostReport {
    CostKind kind = CostKind::hj;
    CostParams params;
    CostValue classical;
    CostValue quantum;
    bool has_table_row = false;
    Table1Row table;
    AdvantageVerdict advantage;
};

inline CostReport make_cost_report(CostKind k, const CostParams& p) {
    CostReport r;
    r.kind = k;
    r.params = p;
    r.classical = classical_cost(k, p.M, p.T, p.d, p.eps);
    r.quantum = quantum_cost(k, p.n_psi0, p.T, p.d, p.eps);
    r.has_table_row = k != CostKind::liouville_classical && k != CostKind::ode_liouville;
    if (r.has_table_row) r.table = table1_exponents(k, p.d, p.b);
    r.advantage = advantage_check(k, p.M, p.T, p.d, p.eps, p.n_psi0);
    return r;
}

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::vector<std::pair<std::string, std::string>> report_fields(const CostReport& r) {
    std::vector<std::pair<std::string, std::string>> f = {
        {"kind", to_string(r.kind)},
        {"M", fmt(r.params.M)},
        {"T", fmt(r.params.T)},
        {"d", fmt(r.params.d)},
        {"eps", fmt(r.params.eps)},
        {"b", fmt(r.params.b)},
        {"n_psi0", fmt(r.params.n_psi0)},
        {"constants", "1"},
        {"classical_expr", r.classical.expression},
        {"classical", fmt(r.classical.value)},
        {"log10_classical", fmt(r.classical.log10_value)},
        {"quantum_expr", r.quantum.expression},
        {"quantum", fmt(r.quantum.value)},
        {"log10_quantum", fmt(r.quantum.log10_value)},
    };
    if (r.has_table_row) {
        f.push_back({"r1", fmt(r.table.r1)});
        f.push_back({"r2", fmt(r.table.r2)});
        f.push_back({"b_range", r.table.b_pinned ? "b=0"
                                                 : "[" + fmt(r.table.b_lo) + ", " + fmt(r.table.b_hi) + ")"});
        f.push_back({"b_in_range", r.table.b_in_range ? "yes" : (r.table.range_empty ? "no (range empty)" : "no")});
        f.push_back({"advantage_params", r.table.advantage_params});
    }
    f.push_back({"verdict", r.advantage.verdict});
    f.push_back({"M_threshold", fmt(r.advantage.M_threshold)});
    f.push_back({"M_threshold_with_log", fmt(r.advantage.M_threshold_with_log)});
    if (!r.advantage.caveat.empty()) f.push_back({"caveat", r.advantage.caveat});
    return f;
}

}  // namespace detail

inline void write_cost_markdown(std::ostream& os, const CostReport& r) {
    os << "| field | value |\n|---|---|\n";
    for (auto& [k, v] : detail::report_fields(r)) os << "| " << k << " | " << v << " |\n";
}

inline void write_cost_csv(std::ostream& os, const CostReport& r) {
    auto f = detail::report_fields(r);
    for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << detail::csv_quote(f[i].first);
    os << '\n';
    for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << detail::csv_quote(f[i].second);
    os << '\n';
}

}  // namespace lvlset
