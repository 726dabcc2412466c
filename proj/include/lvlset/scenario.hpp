#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lvlset/error.hpp"
#include "lvlset/expr.hpp"
#include "lvlset/kernels.hpp"
#include "lvlset/liouville.hpp"
#include "lvlset/models.hpp"
#include "lvlset/phase_grid.hpp"

namespace lvlset {

struct EvalPoint {
    double t = 0.0;
    Vec x;
    /// Optional reference value; NaN when absent.
    double ref = std::nan("");

    bool operator==(const EvalPoint& o) const {
        return t == o.t && x == o.x && (ref == o.ref || (std::isnan(ref) && std::isnan(o.ref)));
    }
};

struct ScenarioObservable {
    std::string name;
    std::vector<EvalPoint> at;
    bool operator==(const ScenarioObservable&) const = default;
};

/// hj: one expression per momentum component; hyperbolic: one expression; ode: point coordinates.
struct ScenarioMember {
    double weight = 1.0;
    std::vector<std::string> u0;
    bool operator==(const ScenarioMember&) const = default;
};

struct Scenario {
    std::string name = "run";
    FieldKind kind = FieldKind::hj;
    std::string model = "free";
    int dims = 1;
    std::vector<ScenarioMember> ensemble;
    int N = 64;
    double T = 0.0;
    double dt = 0.0;          // 0: largest CFL step
    double cfl_fraction = 1.0;
    KernelShape shape = KernelShape::cosine;
    double omega = 0.0;       // 0: default (d h)^{1/3}
    double kernel_m = 0.0;    // > 0: omega = m h
    std::vector<ScenarioObservable> observables;
    std::string output_dir;
    std::vector<std::string> formats = {"csv"};

    bool operator==(const Scenario&) const = default;

    double h() const { return 1.0 / N; }
};

inline FieldKind field_kind_from_string(const std::string& s) {
    if (s == "hj") return FieldKind::hj;
    if (s == "hyperbolic") return FieldKind::hyperbolic;
    if (s == "ode") return FieldKind::ode;
    throw ConfigError("kind: unknown field kind '" + s + "' (hj, hyperbolic, ode)");
}

namespace detail {

template <class T>
T required(const YAML::Node& n, const char* key, const std::string& where) {
    if (!n[key]) throw ConfigError(where + "." + key + ": missing");
    try {
        return n[key].as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

template <class T>
T optional(const YAML::Node& n, const char* key, T fallback, const std::string& where) {
    if (!n[key]) return fallback;
    try {
        return n[key].as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

inline std::vector<std::string> var_names(const std::string& stem, int dims) {
    if (dims == 1) return {stem};
    std::vector<std::string> v;
    for (int i = 1; i <= dims; ++i) v.push_back(stem + std::to_string(i));
    return v;
}

/// Splits "key=a;key2=b" after the model prefix.
inline std::string model_param(const std::string& spec, const std::string& key) {
    auto colon = spec.find(':');
    if (colon == std::string::npos) return {};
    std::string rest = spec.substr(colon + 1);
    std::stringstream ss(rest);
    std::string part;
    while (std::getline(ss, part, ';')) {
        auto eq = part.find('=');
        if (eq != std::string::npos && part.substr(0, eq) == key) return part.substr(eq + 1);
    }
    return {};
}

inline std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(part);
    return out;
}

}  // namespace detail

inline Scenario parse_scenario(const YAML::Node& root) {
    if (!root.IsMap()) throw ConfigError("scenario: top level must be a mapping");
    Scenario s;
    s.name = detail::optional<std::string>(root, "name", s.name, "scenario");
    s.kind = field_kind_from_string(detail::required<std::string>(root, "kind", "scenario"));
    const YAML::Node model = root["model"];
    if (!model) throw ConfigError("scenario.model: missing");
    s.model = detail::required<std::string>(model, "name", "model");
    s.dims = detail::optional<int>(model, "dims", 1, "model");
    if (s.dims < 1) throw ConfigError("model.dims: must be >= 1");

    const YAML::Node ens = root["ensemble"];
    if (!ens || !ens.IsSequence() || ens.size() == 0) throw ConfigError("scenario.ensemble: need a non-empty list");
    for (std::size_t i = 0; i < ens.size(); ++i) {
        std::string where = "ensemble[" + std::to_string(i) + "]";
        ScenarioMember m;
        m.weight = detail::optional<double>(ens[i], "weight", 1.0, where);
        const YAML::Node u = ens[i]["u0"];
        if (!u) throw ConfigError(where + ".u0: missing");
        if (u.IsSequence())
            for (const auto& c : u) m.u0.push_back(c.as<std::string>());
        else
            m.u0.push_back(u.as<std::string>());
        s.ensemble.push_back(m);
    }

    const YAML::Node grid = root["grid"];
    if (!grid) throw ConfigError("scenario.grid: missing");
    s.N = detail::required<int>(grid, "N", "grid");
    s.T = detail::required<double>(grid, "T", "grid");
    s.dt = detail::optional<double>(grid, "dt", 0.0, "grid");
    s.cfl_fraction = detail::optional<double>(grid, "cfl_fraction", 1.0, "grid");
    if (s.N < 2) throw ConfigError("grid.N: must be >= 2");
    if (!(s.T >= 0.0)) throw ConfigError("grid.T: must be >= 0");
    if (s.dt < 0.0) throw ConfigError("grid.dt: must be > 0 when given");
    if (!(s.cfl_fraction > 0.0 && s.cfl_fraction <= 1.0)) throw ConfigError("grid.cfl_fraction: must lie in (0, 1]");

    if (const YAML::Node k = root["kernel"]) {
        s.shape = kernel_shape_from_string(detail::optional<std::string>(k, "shape", "cosine", "kernel"));
        s.omega = detail::optional<double>(k, "omega", 0.0, "kernel");
        s.kernel_m = detail::optional<double>(k, "m", 0.0, "kernel");
        if (s.omega < 0.0 || s.kernel_m < 0.0) throw ConfigError("kernel: omega and m must be positive");
        if (s.omega > 0.0 && s.kernel_m > 0.0) throw ConfigError("kernel: give omega or m, not both");
    }

    if (const YAML::Node obs = root["observables"]) {
        for (std::size_t i = 0; i < obs.size(); ++i) {
            std::string where = "observables[" + std::to_string(i) + "]";
            ScenarioObservable o;
            o.name = detail::required<std::string>(obs[i], "name", where);
            const YAML::Node at = obs[i]["at"];
            if (!at || !at.IsSequence()) throw ConfigError(where + ".at: need a list of points");
            for (std::size_t j = 0; j < at.size(); ++j) {
                std::string w2 = where + ".at[" + std::to_string(j) + "]";
                EvalPoint p;
                p.t = detail::required<double>(at[j], "t", w2);
                if (at[j]["x"]) p.x = at[j]["x"].as<std::vector<double>>();
                p.ref = detail::optional<double>(at[j], "ref", std::nan(""), w2);
                o.at.push_back(p);
            }
            s.observables.push_back(o);
        }
    }

    if (const YAML::Node out = root["outputs"]) {
        s.output_dir = detail::optional<std::string>(out, "dir", "", "outputs");
        if (out["formats"]) s.formats = out["formats"].as<std::vector<std::string>>();
        for (const auto& f : s.formats)
            if (f != "csv" && f != "snapshot" && f != "field_csv")
                throw ConfigError("outputs.formats: unknown format '" + f + "' (csv, snapshot, field_csv)");
    }
    return s;
}

inline Scenario parse_scenario_text(const std::string& text) {
    try {
        YAML::Node root = YAML::Load(text);
        if (root["scenario"]) root = root["scenario"];  // run manifests embed the scenario
        return parse_scenario(root);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void emit_scenario(YAML::Emitter& e, const Scenario& s) {
    e.SetDoublePrecision(17);
    e << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << s.name;
    e << YAML::Key << "kind" << YAML::Value << to_string(s.kind);
    e << YAML::Key << "model" << YAML::Value << YAML::BeginMap << YAML::Key << "name" << YAML::Value
      << YAML::DoubleQuoted << s.model << YAML::Key << "dims" << YAML::Value << s.dims << YAML::EndMap;
    e << YAML::Key << "ensemble" << YAML::Value << YAML::BeginSeq;
    for (const auto& m : s.ensemble) {
        e << YAML::BeginMap << YAML::Key << "weight" << YAML::Value << m.weight << YAML::Key << "u0" << YAML::Value
          << YAML::Flow << YAML::BeginSeq;
        for (const auto& u : m.u0) e << YAML::DoubleQuoted << u;
        e << YAML::EndSeq << YAML::EndMap;
    }
    e << YAML::EndSeq;
    e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap << YAML::Key << "N" << YAML::Value << s.N
      << YAML::Key << "T" << YAML::Value << s.T << YAML::Key << "dt" << YAML::Value << s.dt << YAML::Key
      << "cfl_fraction" << YAML::Value << s.cfl_fraction << YAML::EndMap;
    e << YAML::Key << "kernel" << YAML::Value << YAML::BeginMap << YAML::Key << "shape" << YAML::Value
      << to_string(s.shape);
    if (s.kernel_m > 0.0) e << YAML::Key << "m" << YAML::Value << s.kernel_m;
    else e << YAML::Key << "omega" << YAML::Value << s.omega;
    e << YAML::EndMap;
    e << YAML::Key << "observables" << YAML::Value << YAML::BeginSeq;
    for (const auto& o : s.observables) {
        e << YAML::BeginMap << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << o.name << YAML::Key << "at"
          << YAML::Value << YAML::BeginSeq;
        for (const auto& p : o.at) {
            e << YAML::Flow << YAML::BeginMap << YAML::Key << "t" << YAML::Value << p.t;
            if (!p.x.empty()) e << YAML::Key << "x" << YAML::Value << YAML::Flow << p.x;
            if (!std::isnan(p.ref)) e << YAML::Key << "ref" << YAML::Value << p.ref;
            e << YAML::EndMap;
        }
        e << YAML::EndSeq << YAML::EndMap;
    }
    e << YAML::EndSeq;
    e << YAML::Key << "outputs" << YAML::Value << YAML::BeginMap << YAML::Key << "dir" << YAML::Value << s.output_dir
      << YAML::Key << "formats" << YAML::Value << YAML::Flow << s.formats << YAML::EndMap;
    e << YAML::EndMap;
}

inline std::string serialize_scenario(const Scenario& s) {
    YAML::Emitter e;
    emit_scenario(e, s);
    return std::string(e.c_str()) + "\n";
}

// ---- resolution into library objects ----

/// Smoothing width: explicit omega, else m h, else (d h)^{1/3}.
inline double scenario_omega(const Scenario& s) {
    if (s.omega > 0.0) return s.omega;
    if (s.kernel_m > 0.0) return s.kernel_m * s.h();
    return default_omega(s.dims, s.h());
}

inline HamiltonianModel resolve_hj_model(const Scenario& s) {
    const std::string& m = s.model;
    if (m == "free") return builtin_free(s.dims);
    if (m.rfind("free:", 0) == 0) {
        std::string pc = detail::model_param(m, "pc");
        if (pc.empty()) throw ConfigError("model.name: expected free:pc=<value>");
        return builtin_free(s.dims, std::stod(pc));
    }
    if (m == "harmonic") return builtin_harmonic(s.dims);
    if (m.rfind("newtonian:", 0) == 0) return newtonian_from_expr(s.dims, detail::model_param(m, "V"));
    if (m.rfind("go:", 0) == 0) return geometric_optics_from_expr(s.dims, detail::model_param(m, "c"));
    throw ConfigError("model.name: unknown Hamilton-Jacobi model '" + m + "'");
}

/// u-range of the initial data widened by 10%, sampled on the grid.
inline std::pair<double, double> initial_range(const Scenario& s) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    auto names = detail::var_names("x", s.dims);
    for (const auto& mem : s.ensemble) {
        Expr u = Expr::parse(mem.u0.at(0), names);
        Vec x(s.dims);
        std::size_t total = checked_pow(s.N, s.dims);
        std::size_t stride = std::max<std::size_t>(1, total / 65536);
        for (std::size_t c = 0; c < total; c += stride) {
            x = coords(unflatten(c, s.N, s.dims), s.N);
            double v = u(x);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    double pad = 0.1 * std::max(hi - lo, 1e-12);
    return {lo - pad, hi + pad};
}

inline HyperbolicModel resolve_hyperbolic_model(const Scenario& s) {
    auto [lo, hi] = initial_range(s);
    if (s.model == "burgers") {
        if (s.dims != 1) throw ConfigError("model.dims: burgers is one-dimensional");
        return builtin_burgers(lo, hi);
    }
    if (s.model.rfind("flux:", 0) == 0) {
        auto f_text = detail::split_commas(detail::model_param(s.model, "F"));
        std::string q_text = detail::model_param(s.model, "Q");
        if (static_cast<int>(f_text.size()) != s.dims)
            throw ConfigError("model.name: flux needs " + std::to_string(s.dims) + " comma-separated F components");
        std::vector<Expr> F;
        for (const auto& t : f_text) F.push_back(Expr::parse(t, {"u"}));
        auto qvars = detail::var_names("x", s.dims);
        qvars.push_back("u");
        Expr Q = Expr::parse(q_text.empty() ? "0" : q_text, qvars);
        HyperbolicModel m;
        m.dims = s.dims;
        m.name = s.model;
        m.F = [F](double u) {
            Vec r(F.size());
            double a[1] = {u};
            for (std::size_t i = 0; i < F.size(); ++i) r[i] = F[i](a);
            return r;
        };
        m.Q = [Q](const Vec& x, double u) {
            Vec v(x);
            v.push_back(u);
            return Q(v);
        };
        m.speed_bound = sampled_speed_bound(m, lo, hi);
        return m;
    }
    throw ConfigError("model.name: unknown hyperbolic model '" + s.model + "'");
}

inline OdeModel resolve_ode_model(const Scenario& s) {
    if (s.model == "rotation") {
        if (s.dims != 2) throw ConfigError("model.dims: rotation is two-dimensional");
        return builtin_rotation();
    }
    if (s.model == "advection" || s.model.rfind("advection:", 0) == 0) {
        std::string v = detail::model_param(s.model, "v");
        return builtin_advection(v.empty() ? 1.0 : std::stod(v));
    }
    if (s.model.rfind("ode:", 0) == 0) {
        auto f_text = detail::split_commas(detail::model_param(s.model, "F"));
        if (static_cast<int>(f_text.size()) != s.dims)
            throw ConfigError("model.name: ode needs " + std::to_string(s.dims) + " comma-separated F components");
        auto names = detail::var_names("x", s.dims);
        std::vector<Expr> F;
        for (const auto& t : f_text) F.push_back(Expr::parse(t, names));
        OdeModel m;
        m.dims = s.dims;
        m.name = s.model;
        m.F = [F](const Vec& q) {
            Vec r(F.size());
            for (std::size_t i = 0; i < F.size(); ++i) r[i] = F[i](q);
            return r;
        };
        double div = 0.0;
        detail::for_each_sample(s.dims, 0.05, 0.95, 4096,
                                [&](const Vec& q) { div = std::max(div, std::abs(numeric_divergence(m, q))); });
        m.divergence_free = div < 1e-6;
        m.speed_bound = sampled_speed_bound(m);
        return m;
    }
    throw ConfigError("model.name: unknown ODE model '" + s.model + "'");
}

inline double scenario_weight(const Scenario& s, std::size_t i) {
    double total = 0.0;
    for (const auto& m : s.ensemble) total += m.weight;
    return s.ensemble[i].weight / total;
}

inline HjEnsemble resolve_hj_ensemble(const Scenario& s) {
    std::vector<std::function<Vec(const Vec&)>> members;
    std::vector<double> w;
    auto names = detail::var_names("x", s.dims);
    for (std::size_t i = 0; i < s.ensemble.size(); ++i) {
        const auto& m = s.ensemble[i];
        if (static_cast<int>(m.u0.size()) != s.dims)
            throw ConfigError("ensemble[" + std::to_string(i) + "].u0: need " + std::to_string(s.dims) + " components");
        std::vector<Expr> comps;
        for (const auto& t : m.u0) comps.push_back(Expr::parse(t, names));
        members.push_back([comps](const Vec& x) {
            Vec u(comps.size());
            for (std::size_t a = 0; a < comps.size(); ++a) u[a] = comps[a](x);
            return u;
        });
        w.push_back(scenario_weight(s, i));
    }
    return HjEnsemble::weighted(std::move(members), std::move(w));
}

inline ScalarEnsemble resolve_scalar_ensemble(const Scenario& s) {
    std::vector<std::function<double(const Vec&)>> members;
    std::vector<double> w;
    auto names = detail::var_names("x", s.dims);
    for (std::size_t i = 0; i < s.ensemble.size(); ++i) {
        if (s.ensemble[i].u0.size() != 1)
            throw ConfigError("ensemble[" + std::to_string(i) + "].u0: scalar data needs one expression");
        Expr u = Expr::parse(s.ensemble[i].u0[0], names);
        members.push_back([u](const Vec& x) { return u(x); });
        w.push_back(scenario_weight(s, i));
    }
    return ScalarEnsemble::weighted(std::move(members), std::move(w));
}

inline PointEnsemble resolve_point_ensemble(const Scenario& s) {
    std::vector<Vec> pts;
    std::vector<double> w;
    for (std::size_t i = 0; i < s.ensemble.size(); ++i) {
        const auto& m = s.ensemble[i];
        if (static_cast<int>(m.u0.size()) != s.dims)
            throw ConfigError("ensemble[" + std::to_string(i) + "].u0: point needs " + std::to_string(s.dims) +
                              " coordinates");
        Vec q;
        for (const auto& t : m.u0) q.push_back(Expr::parse(t, {})(std::span<const double>{}));
        pts.push_back(q);
        w.push_back(scenario_weight(s, i));
    }
    return PointEnsemble::weighted(std::move(pts), std::move(w));
}

}  // namespace lvlset
