// lvlset command-line driver: solve, verify, cost, emulate, branches.
#include <CLI11.hpp>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lvlset/lvlset.hpp"
#include "lvlset/scenario.hpp"

namespace fs = std::filesystem;
using namespace lvlset;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string git_blob_sha1(const std::string& content) {
    std::string data = "blob " + std::to_string(content.size()) + '\0' + content;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

fs::path output_dir(const Scenario& s, const std::string& flag) {
    if (!flag.empty()) return flag;
    if (!s.output_dir.empty()) return s.output_dir;
    if (const char* env = std::getenv("LVLSET_OUTPUT_DIR")) return fs::path(env) / s.name;
    return fs::path("lvlset_out") / s.name;
}

using AnyModel = std::variant<HamiltonianModel, HyperbolicModel, OdeModel>;

struct Prepared {
    Scenario scenario;
    AnyModel model;
    PhaseGrid grid;
    LevelSetField f0;
    int steps = 0;
    double dt = 0.0;
    double omega = 0.0;
    double speed = 0.0;
    int dims_total = 0;
};

Prepared prepare(const Scenario& s) {
    Prepared p;
    p.scenario = s;
    int dx = s.dims, dp = s.dims;
    switch (s.kind) {
        case FieldKind::hj: p.model = resolve_hj_model(s); break;
        case FieldKind::hyperbolic:
            p.model = resolve_hyperbolic_model(s);
            dp = 1;
            break;
        case FieldKind::ode:
            p.model = resolve_ode_model(s);
            dp = 0;
            break;
    }
    p.speed = std::visit([](const auto& m) { return m.speed_bound; }, p.model);
    p.dims_total = dx + dp;
    const double h = s.h();
    if (s.dt > 0.0) {
        p.dt = s.dt;
        p.steps = static_cast<int>(std::llround(s.T / s.dt));
        if (std::abs(p.steps * s.dt - s.T) > 1e-9 * std::max(1.0, s.T))
            throw ConfigError("grid.dt: T must be a whole number of steps");
    } else {
        double cfl = s.cfl_fraction * cfl_time_step(p.speed, p.dims_total, h);
        p.steps = static_cast<int>(std::ceil(s.T / cfl - 1e-12));
        p.dt = p.steps > 0 ? s.T / p.steps : cfl;
    }
    p.grid = PhaseGrid::make(dx, dp, s.N, p.dt, p.steps);
    p.omega = scenario_omega(s);
    DeltaKernel k{p.omega, s.shape};
    switch (s.kind) {
        case FieldKind::hj: p.f0 = assemble_initial_hj(resolve_hj_ensemble(s), p.grid, k); break;
        case FieldKind::hyperbolic: p.f0 = assemble_initial_hyperbolic(resolve_scalar_ensemble(s), p.grid, k); break;
        case FieldKind::ode: p.f0 = assemble_initial_ode(resolve_point_ensemble(s), p.grid, k); break;
    }
    return p;
}

ObservableSpec resolve_observable(const Prepared& p, const std::string& name) {
    const Scenario& s = p.scenario;
    if (s.kind == FieldKind::ode) {
        // ODE observables read the state q; expressions use x / x1..xD
        if (name.rfind("expr:", 0) == 0) {
            Expr e = Expr::parse(name.substr(5), detail::var_names("x", s.dims));
            return {name, [e](const Vec& q, const Vec&) { return e(q); }};
        }
        if (name.rfind("coord_", 0) == 0) {
            int i = std::stoi(name.substr(6));
            if (i < 1 || i > s.dims) throw ConfigError("observables: coordinate index out of range in '" + name + "'");
            return {name, [i](const Vec& q, const Vec&) { return q[static_cast<std::size_t>(i - 1)]; }};
        }
        if (name == "one") return observable_one();
        throw ConfigError("observables: unknown ODE observable '" + name + "' (one, coord_i, expr:...)");
    }
    std::function<double(const Vec&)> V;
    if (const auto* hm = std::get_if<HamiltonianModel>(&p.model)) {
        HamiltonianModel m = *hm;
        V = [m](const Vec& x) { return m.H(x, Vec(x.size(), 0.0)); };
    }
    return make_observable(name, p.grid.dims_p, p.grid.dims_x, V);
}

struct EvalTarget {
    std::size_t obs = 0;
    int step = 0;
    MultiIndex at_x;
    double ref = std::nan("");
};

std::vector<EvalTarget> eval_targets(const Prepared& p) {
    std::vector<EvalTarget> out;
    const Scenario& s = p.scenario;
    for (std::size_t i = 0; i < s.observables.size(); ++i)
        for (std::size_t j = 0; j < s.observables[i].at.size(); ++j) {
            const EvalPoint& e = s.observables[i].at[j];
            std::string where = "observables[" + std::to_string(i) + "].at[" + std::to_string(j) + "]";
            EvalTarget t;
            t.obs = i;
            t.ref = e.ref;
            t.step = static_cast<int>(std::llround(e.t / p.dt));
            if (t.step < 0 || t.step > p.steps || std::abs(t.step * p.dt - e.t) > 1e-9 * std::max(1.0, e.t)) {
                std::ostringstream os;
                os << std::setprecision(17) << where << ".t: " << e.t << " is not on the time grid (dt = " << p.dt
                   << ", steps = " << p.steps << ")";
                throw ConfigError(os.str());
            }
            if (s.kind != FieldKind::ode) {
                if (static_cast<int>(e.x.size()) != p.grid.dims_x)
                    throw ConfigError(where + ".x: need " + std::to_string(p.grid.dims_x) + " coordinates");
                for (double x : e.x) {
                    int idx = static_cast<int>(std::llround(x * s.N));
                    if (idx < 1 || idx > s.N) throw ConfigError(where + ".x: outside the grid (0, 1]");
                    t.at_x.push_back(idx);
                }
            }
            out.push_back(t);
        }
    return out;
}

template <class Fn>
void march(const Prepared& p, const std::vector<int>& stops, Fn&& at_stop) {
    LevelSetField cur = p.f0;
    int done = 0;
    std::vector<int> sorted = stops;
    sorted.push_back(p.steps);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (int k : sorted) {
        if (k > done) {
            cur = std::visit([&](const auto& m) { return evolve(cur, m, k - done).back(); }, p.model);
            done = k;
        }
        at_stop(k, cur);
    }
}

void write_manifest(const fs::path& path, const Prepared& p, const std::string& config_text,
                    const std::string& config_path, int threads, const std::vector<std::string>& files) {
    const Scenario& s = p.scenario;
    YAML::Emitter e;
    e.SetDoublePrecision(17);
    e << YAML::BeginMap;
    e << YAML::Key << "tool" << YAML::Value << "lvlset";
    e << YAML::Key << "version" << YAML::Value << kVersion;
    e << YAML::Key << "config_path" << YAML::Value << config_path;
    e << YAML::Key << "config_sha1" << YAML::Value << git_blob_sha1(config_text);
    e << YAML::Key << "scenario_sha1" << YAML::Value << git_blob_sha1(serialize_scenario(s));
    e << YAML::Key << "scheme" << YAML::Value << "first-order upwind, forward Euler, zero ghost cells";
    e << YAML::Key << "kind" << YAML::Value << to_string(s.kind);
    e << YAML::Key << "model" << YAML::Value << std::visit([](const auto& m) { return m.name; }, p.model);
    e << YAML::Key << "speed_bound" << YAML::Value << p.speed;
    e << YAML::Key << "dims_x" << YAML::Value << p.grid.dims_x;
    e << YAML::Key << "dims_p" << YAML::Value << p.grid.dims_p;
    e << YAML::Key << "N" << YAML::Value << p.grid.n;
    e << YAML::Key << "h" << YAML::Value << p.grid.h;
    e << YAML::Key << "dt" << YAML::Value << p.dt;
    e << YAML::Key << "steps" << YAML::Value << p.steps;
    e << YAML::Key << "lambda" << YAML::Value << p.grid.lambda();
    e << YAML::Key << "cfl_number" << YAML::Value << p.dims_total * p.grid.lambda() * p.speed;
    e << YAML::Key << "kernel_shape" << YAML::Value << to_string(s.shape);
    e << YAML::Key << "omega" << YAML::Value << p.omega;
    e << YAML::Key << "ensemble_size" << YAML::Value << s.ensemble.size();
    e << YAML::Key << "threads" << YAML::Value << threads;
    e << YAML::Key << "outputs" << YAML::Value << YAML::Flow << files;
    e << YAML::Key << "scenario" << YAML::Value;
    emit_scenario(e, s);
    e << YAML::EndMap;
    std::ofstream out(path, std::ios::binary);
    out << e.c_str() << '\n';
}

int cmd_solve(const std::string& path, const std::string& out_flag, int threads) {
    std::string text = read_text_file(path);
    Scenario s = parse_scenario_text(text);
    Prepared p = prepare(s);
    auto targets = eval_targets(p);
    fs::path dir = output_dir(s, out_flag);
    fs::create_directories(dir);
    auto has = [&](const char* f) { return std::find(s.formats.begin(), s.formats.end(), f) != s.formats.end(); };

    std::vector<ObservableSpec> specs;
    for (const auto& o : s.observables) specs.push_back(resolve_observable(p, o.name));
    std::vector<int> stops;
    for (const auto& t : targets) stops.push_back(t.step);

    std::ostringstream csv;
    write_observable_csv_header(csv, s.kind == FieldKind::ode ? 0 : p.grid.dims_x);
    std::vector<std::string> files;
    std::vector<std::pair<int, std::string>> rows;  // keep target order
    std::vector<std::string> row_text(targets.size());
    try {
        march(p, stops, [&](int k, const LevelSetField& f) {
            for (std::size_t i = 0; i < targets.size(); ++i) {
                if (targets[i].step != k) continue;
                double v = quadrature_average(f, specs[targets[i].obs], targets[i].at_x);
                std::ostringstream r;
                Vec x = s.kind == FieldKind::ode ? Vec{} : coords(targets[i].at_x, s.N);
                write_observable_csv_row(r, k * p.dt, x, specs[targets[i].obs].name, v, p.omega, s.N,
                                         s.ensemble.size());
                row_text[i] = r.str();
            }
            std::string stem = "field_" + std::to_string(k);
            if (has("snapshot")) {
                std::ofstream b(dir / (stem + ".bin"), std::ios::binary);
                write_snapshot(b, f);
                files.push_back(stem + ".bin");
            }
            if (has("field_csv")) {
                std::ofstream c(dir / (stem + ".csv"), std::ios::binary);
                write_field_csv(c, f);
                files.push_back(stem + ".csv");
            }
            if (k == p.steps && compact_support_warning(f))
                std::cerr << "warning: field reaches the boundary shell at step " << k << '\n';
        });
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("grid.dt: ") + e.what());
    }
    for (const auto& r : row_text) csv << r;
    if (has("csv")) {
        std::ofstream c(dir / "observables.csv", std::ios::binary);
        c << csv.str();
        files.insert(files.begin(), "observables.csv");
    }
    write_manifest(dir / "manifest.yaml", p, text, path, threads, files);
    std::cout << csv.str();
    std::cout << "wrote " << (dir / "manifest.yaml").string() << '\n';
    return 0;
}

// ---- verify ----

struct Row {
    std::string suite, invariant;
    double value = 0.0, limit = 0.0;
    bool pass = false;
};

void suite_matrix(std::vector<Row>& rows, double corrupt) {
    double equiv = 0.0, resid = 0.0, smax = 0.0;
    std::size_t spars = 0;
    for (auto m : {builtin_free(1), builtin_harmonic(1)})
        for (int n : {4, 8})
            for (int nt : {2, 8}) {
                auto g = PhaseGrid::make(1, 1, n, cfl_time_step(m.speed_bound, 2, 1.0 / n), nt - 1);
                std::mt19937_64 rng(static_cast<std::uint64_t>(n * 10 + nt));
                std::uniform_real_distribution<double> U(0.0, 1.0);
                LevelSetField f;
                f.grid = g;
                f.kind = FieldKind::hj;
                f.values.resize(static_cast<Eigen::Index>(g.size()));
                for (auto& v : f.values) v = U(rng);
                auto s = assemble_system(m, g, nt);
                if (corrupt != 0.0) s.k_matrix.coeffRef(0, 0) += corrupt;
                auto hist = evolve(f, m, nt - 1, Record::all);
                Eigen::VectorXd stacked(static_cast<Eigen::Index>(s.size()));
                for (int k = 0; k < nt; ++k)
                    stacked.segment(static_cast<Eigen::Index>(k) * static_cast<Eigen::Index>(s.block_size),
                                    static_cast<Eigen::Index>(s.block_size)) = hist[static_cast<std::size_t>(k)].values;
                Eigen::VectorXd solved = solve_forward(s, f.values);
                double scale = f.values.cwiseAbs().maxCoeff();
                equiv = std::max(equiv, (solved - stacked).cwiseAbs().maxCoeff() / scale);
                Eigen::VectorXd rhs = Eigen::VectorXd::Zero(stacked.size());
                rhs.head(static_cast<Eigen::Index>(s.block_size)) = f.values;
                resid = std::max(resid, (s.k_matrix * stacked - rhs).cwiseAbs().maxCoeff() / scale);
                spars = std::max(spars, measure_sparsity(s));
                smax = std::max(smax, measure_condition(s, ConditionMethod::dense).sigma_max);
            }
    rows.push_back({"matrix", "solve_forward == stepper history", equiv, 1e-12, equiv <= 1e-12});
    rows.push_back({"matrix", "K * history == e1 (x) psi0", resid, 1e-12, resid <= 1e-12});
    rows.push_back({"matrix", "sparsity <= 2(2d+1)", static_cast<double>(spars), 6.0, spars <= 6});
    rows.push_back({"matrix", "sigma_max <= 2", smax, 2.0, smax <= 2.0 + 1e-12});
}

void suite_upsilon(std::vector<Row>& rows) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<HamiltonianModel> models = {builtin_free(1, 0.5), builtin_harmonic(1),
                                            newtonian_from_expr(1, "0.05*cos(2*pi*x)")};
    std::vector<ObservableSpec> specs = {observable_one(), observable_momentum(1), observable_kinetic()};
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 6 + 2 * (trial % 4);
        const auto& m = models[static_cast<std::size_t>(trial) % models.size()];
        const int nt = 2 + trial % 6;
        auto g = PhaseGrid::make(1, 1, n, cfl_time_step(m.speed_bound, 2, 1.0 / n) * (0.3 + 0.7 * U(rng)), nt - 1);
        LevelSetField f;
        f.grid = g;
        f.kind = FieldKind::hj;
        f.values.resize(static_cast<Eigen::Index>(g.size()));
        for (auto& v : f.values) v = U(rng);
        auto s = assemble_system(m, g, nt);
        int at_n = static_cast<int>(U(rng) * nt) % nt;
        MultiIndex at_x{1 + static_cast<int>(U(rng) * n) % n};
        const auto& spec = specs[static_cast<std::size_t>(trial) % specs.size()];
        auto r = upsilon_exact(s, f, spec, at_x, at_n);
        double avg = quadrature_average(evolve(f, m, at_n).back(), spec, at_x);
        worst = std::max(worst, std::abs(r.reconstructed - std::abs(avg)) / std::max(1.0, std::abs(avg)));
    }
    rows.push_back({"upsilon", "n_psi0 n_G sqrt(Upsilon) == |quadrature|", worst, 1e-10, worst <= 1e-10});
}

void suite_oracle(std::vector<Row>& rows) {
    {
        auto m = builtin_free(1, 0.5);
        std::function<double(double)> u0 = [](double x) { return 0.5 + 0.15 * std::sin(2 * std::numbers::pi * x); };
        const int n = 128;
        double h = 1.0 / n, t = 0.5;
        int steps = static_cast<int>(std::ceil(t / cfl_time_step(m.speed_bound, 2, h)));
        auto g = PhaseGrid::make(1, 1, n, t / steps, steps);
        auto e = HjEnsemble::uniform({[u0](const Vec& x) { return Vec{u0(x[0])}; }});
        auto f = evolve(assemble_initial_hj(e, g, DeltaKernel{std::cbrt(h)}), m, steps).back();
        ShootingOptions opt;
        opt.x0_lo = -0.5;
        opt.x0_hi = 1.5;
        opt.dt = 1e-3;
        int j = static_cast<int>(std::lround(0.6 * n));
        double err = std::abs(quadrature_average(f, observable_momentum(1), {j}) -
                              oracle_observable(m, InitialEnsemble<std::function<double(double)>>::uniform({u0}),
                                                observable_momentum(1), t, coord(j, n), opt));
        double lim = 0.30 * std::cbrt(h);
        rows.push_back({"oracle", "free particle <p> vs shooting <= C h^(1/3)", err, lim, err <= lim});
    }
    {
        auto m = builtin_rotation();
        std::vector<Vec> pts;
        for (double a : {-0.09, -0.03, 0.03, 0.09})
            for (double c : {-0.09, -0.03, 0.03, 0.09}) pts.push_back({0.58 + a, 0.5 + c});
        auto e = PointEnsemble::uniform(pts);
        const double T = std::numbers::pi / 2, dt = 1e-3;
        const int steps = static_cast<int>(std::ceil(T / dt));
        ObservableSpec A{"coord_2", [](const Vec& q, const Vec&) { return q[1]; }};
        const int n = 64;
        double h = 1.0 / n;
        auto g = PhaseGrid::make(2, 0, n, T / steps, steps);
        auto f = evolve(assemble_initial_ode(e, g, DeltaKernel{std::cbrt(2 * h)}), m, steps).back();
        double err = std::abs(quadrature_average(f, A, {}) - solve_ode_ensemble(m, e, T, dt).average(A));
        double lim = 7e-3 * std::cbrt(2 * h) + dt;
        rows.push_back({"oracle", "rotation <q2> vs Euler ensemble <= C (2h)^(1/3) + dt", err, lim, err <= lim});
    }
    {
        auto m = builtin_harmonic(1);
        auto end = ray_trace(m, {0.7}, {0.5}, 2 * std::numbers::pi, 1e-3);
        double e0 = m.H({0.7}, {0.5}), e1 = m.H(end.x, end.p);
        double drift = std::abs(e1 - e0);
        rows.push_back({"oracle", "harmonic ray energy drift over one period", drift, 1e-6, drift <= 1e-6});
    }
}

void suite_budget(std::vector<Row>& rows) {
    double worst = 1.0;
    for (double kappa : {1.0, 10.0, 100.0}) {
        auto b = budget_from_eps_prime(1e-4, kappa, 1.5);
        const int trials = 4000;
        int ok = 0;
        for (int i = 0; i < trials; ++i)
            ok += emulate_estimate(0.25, b, trial_seed(3, static_cast<std::uint64_t>(i))).succeeded;
        double p = static_cast<double>(ok) / trials;
        worst = std::min(worst, p - 2.3263478740408408 * std::sqrt(p * (1 - p) / trials));
    }
    rows.push_back({"budget", "success fraction 99% lower bound >= 2/3", worst, 2.0 / 3.0, worst >= 2.0 / 3.0});
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> L(-8, 0), K(0, 3), N(0, 2);
    double chain = 0.0;
    for (int i = 0; i < 1000; ++i) {
        auto b = budget_from_eps_prime(std::pow(10.0, L(rng)), std::pow(10.0, K(rng)), std::pow(10.0, N(rng)));
        chain = std::max(chain, (b.alpha_minv * b.alpha_minv * b.eps_u + b.delta * b.delta) / b.eps_prime);
    }
    rows.push_back({"budget", "(alpha^2 eps_u + delta^2) / eps' <= 1", chain, 1.0, chain <= 1.0 + 1e-12});
}

int cmd_verify(const std::string& suite, double corrupt) {
    std::vector<Row> rows;
    bool all = suite == "all";
    if (!all && suite != "matrix" && suite != "upsilon" && suite != "oracle" && suite != "budget")
        throw ConfigError("verify: unknown suite '" + suite + "' (matrix, upsilon, oracle, budget, all)");
    if (all || suite == "matrix") suite_matrix(rows, corrupt);
    if (all || suite == "upsilon") suite_upsilon(rows);
    if (all || suite == "oracle") suite_oracle(rows);
    if (all || suite == "budget") suite_budget(rows);
    std::cout << "| suite | invariant | value | limit | result |\n|---|---|---|---|---|\n";
    bool ok = true;
    for (const auto& r : rows) {
        std::cout << "| " << r.suite << " | " << r.invariant << " | " << std::setprecision(6) << r.value << " | "
                  << r.limit << " | " << (r.pass ? "PASS" : "FAIL") << " |\n";
        ok = ok && r.pass;
    }
    for (const auto& r : rows)
        if (!r.pass) std::cerr << "failed invariant: " << r.suite << ": " << r.invariant << '\n';
    return ok ? 0 : 1;
}

// ---- emulate ----

int cmd_emulate(const std::string& path, double eps, int trials, std::uint64_t seed) {
    if (trials < 1) throw ConfigError("--trials: must be >= 1");
    if (!(eps > 0.0)) throw ConfigError("--eps: must be > 0");
    Scenario s = parse_scenario_text(read_text_file(path));
    Prepared p = prepare(s);
    auto targets = eval_targets(p);
    if (targets.empty()) throw ConfigError("observables: emulate needs at least one evaluation point");
    const EvalTarget& t = targets.front();
    ObservableSpec spec = resolve_observable(p, s.observables[t.obs].name);
    auto sys = std::visit([&](const auto& m) { return assemble_system(m, p.grid, p.steps + 1); }, p.model);
    auto setup = pipeline_prepare(sys, p.f0, spec, t.at_x, t.step, eps);
    std::optional<double> oracle;
    if (!std::isnan(t.ref)) oracle = t.ref;
    int ok = 0;
    PipelineReport last;
    for (int i = 0; i < trials; ++i) {
        last = pipeline_trial(setup, trial_seed(seed, static_cast<std::uint64_t>(i)), oracle);
        ok += last.passed;
    }
    std::cout << std::setprecision(17);
    std::cout << "observable: " << spec.name << '\n' << "step: " << t.step << '\n';
    write_budget(std::cout, setup.budget);
    std::cout << "sparsity: " << setup.sparsity << '\n'
              << "alpha_M: " << setup.alpha_M << '\n'
              << "sigma_max: " << setup.condition.sigma_max << '\n'
              << "sigma_min: " << setup.condition.sigma_min << '\n'
              << "upsilon: " << setup.upsilon.upsilon << '\n'
              << "G_quadrature: " << setup.quadrature << '\n';
    if (oracle) std::cout << "reference: " << *oracle << '\n';
    std::cout << "query_complexity: "
              << query_complexity(s.kind, std::max(setup.norms.n_psi0, 1e-300), s.dims, std::max(s.T, 1e-300), eps).value
              << '\n';
    std::cout << "trials: " << trials << '\n'
              << "seed: " << seed << '\n'
              << "successes: " << ok << '\n'
              << "success_fraction: " << static_cast<double>(ok) / trials << '\n';
    return 0;
}

// ---- branches ----

int cmd_branches(const std::string& model_name, const std::string& u0_text, double t, const std::vector<double>& xs,
                 double x0_lo, double x0_hi, int n_shoot, double dt, const std::string& out) {
    Scenario s;
    s.model = model_name;
    s.dims = 1;
    HamiltonianModel m = resolve_hj_model(s);
    Expr u = Expr::parse(u0_text, {"x"});
    std::function<double(double)> u0 = [u](double x) {
        double a[1] = {x};
        return u(a);
    };
    ShootingOptions opt;
    opt.x0_lo = x0_lo;
    opt.x0_hi = x0_hi;
    opt.n_shoot = n_shoot;
    opt.dt = dt;
    std::ostringstream os;
    write_branch_csv_header(os);
    for (double x : xs) write_branch_csv(os, t, x, multivalued_branches(m, u0, t, x, opt));
    if (out.empty()) std::cout << os.str();
    else {
        std::ofstream f(out, std::ios::binary);
        f << os.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lvlset: level-set linear representation of nonlinear PDEs and ODE ensembles"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker thread cap (1 = bit-reproducible)")->check(CLI::PositiveNumber);
    app.set_version_flag("--version", kVersion);

    std::string scenario_path, out_dir;
    auto* solve = app.add_subcommand("solve", "assemble, evolve and evaluate observables for a scenario");
    solve->add_option("scenario", scenario_path, "scenario YAML file")->required();
    solve->add_option("--out", out_dir, "output directory (overrides outputs.dir and LVLSET_OUTPUT_DIR)");

    std::string suite = "all";
    double corrupt = 0.0;
    auto* verify = app.add_subcommand("verify", "run invariant suites and print a pass/fail table");
    verify->add_option("suite", suite, "matrix | upsilon | oracle | budget | all");
    verify->add_option("--corrupt", corrupt, "add this value to one system entry (fixture corruption check)");

    std::string kind = "hj", format = "md";
    CostParams cp;
    auto* cost = app.add_subcommand("cost", "classical vs quantum cost report");
    cost->add_option("--kind", kind, "hj | hyperbolic | ode | liouville_classical | ode_liouville | lagrangian | eulerian");
    cost->add_option("--M", cp.M, "ensemble size")->check(CLI::PositiveNumber);
    cost->add_option("--T", cp.T, "final time")->check(CLI::PositiveNumber);
    cost->add_option("--d,--D", cp.d, "dimension")->check(CLI::PositiveNumber);
    cost->add_option("--eps", cp.eps, "precision")->check(CLI::Range(1e-300, 1.0));
    cost->add_option("--b", cp.b, "n_psi0 growth exponent")->check(CLI::NonNegativeNumber);
    cost->add_option("--n-psi0", cp.n_psi0, "initial-state normalization")->check(CLI::PositiveNumber);
    cost->add_option("--format", format, "md | csv")->check(CLI::IsMember({"md", "csv"}));

    double eps = 0.05;
    int trials = 100;
    std::uint64_t seed = 7;
    auto* emulate = app.add_subcommand("emulate", "emulated quantum estimation over seeded trials");
    emulate->add_option("scenario", scenario_path, "scenario YAML file")->required();
    emulate->add_option("--eps", eps, "target precision");
    emulate->add_option("--trials", trials, "number of trials");
    emulate->add_option("--seed", seed, "base seed");

    std::string bmodel = "free", bu0 = "0.5 + 0.3*sin(2*pi*x)", bout;
    double bt = 0.0, bx0_lo = 0.0, bx0_hi = 1.0, bdt = 1e-2;
    int bshoot = 4000;
    std::vector<double> bxs{0.5};
    auto* branches = app.add_subcommand("branches", "dump multivalued branches from the shooting oracle (d = 1)");
    branches->add_option("--model", bmodel, "Hamilton-Jacobi model name");
    branches->add_option("--u0", bu0, "initial datum expression in x");
    branches->add_option("--t", bt, "time")->required();
    branches->add_option("--x", bxs, "evaluation points");
    branches->add_option("--x0-lo", bx0_lo, "shooting window start");
    branches->add_option("--x0-hi", bx0_hi, "shooting window end");
    branches->add_option("--n-shoot", bshoot, "shooting samples");
    branches->add_option("--dt", bdt, "ray-trace step");
    branches->add_option("--out", bout, "CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    set_threads(threads);
    try {
        if (*solve) return cmd_solve(scenario_path, out_dir, threads);
        if (*verify) return cmd_verify(suite, corrupt);
        if (*cost) {
            auto report = make_cost_report(cost_kind_from_string(kind), cp);
            if (format == "csv") write_cost_csv(std::cout, report);
            else write_cost_markdown(std::cout, report);
            return 0;
        }
        if (*emulate) return cmd_emulate(scenario_path, eps, trials, seed);
        if (*branches) return cmd_branches(bmodel, bu0, bt, bxs, bx0_lo, bx0_hi, bshoot, bdt, bout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
