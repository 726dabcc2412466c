#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "lvlset/observables.hpp"

using namespace lvlset;

namespace {

HjEnsemble constant_ensemble(double v) {
    return HjEnsemble::uniform({[v](const Vec& x) { return Vec(x.size(), v); }});
}

LevelSetField initial(const PhaseGrid& g, const HjEnsemble& e, double omega) {
    return assemble_initial_hj(e, g, DeltaKernel{omega, KernelShape::cosine});
}

}  // namespace

TEST(QuadratureAverage, MomentsOfConstantDatum) {
    auto g = PhaseGrid::make(1, 1, 64, 0.005, 1);
    auto f = initial(g, constant_ensemble(0.5), 0.1);
    for (int j : {1, 20, 64}) {
        EXPECT_NEAR(quadrature_average(f, observable_momentum(1), {j}), 0.5, 0.1 * 0.01);
        EXPECT_NEAR(quadrature_average(f, observable_one(), {j}), 1.0, 0.1 * 0.01);
    }
    LevelSetField zero = f;
    zero.values.setZero();
    EXPECT_EQ(quadrature_average(zero, observable_kinetic(), {3}), 0.0);
    EXPECT_THROW(quadrature_average(f, observable_one(), {0}), ConfigError);
    EXPECT_THROW(quadrature_average(f, observable_one(), {1, 1}), ConfigError);
}

TEST(NormalizedObservable, FreeParticleConstantDatum) {
    const int n = 128;
    double h = 1.0 / n, omega = default_omega(1, h);
    auto m = builtin_free(1, 0.5);
    int steps = 100;
    auto g = PhaseGrid::make(1, 1, n, cfl_time_step(m.speed_bound, 2, h), steps);
    auto f = initial(g, constant_ensemble(0.5), omega);
    auto out = evolve(f, m, steps).back();
    for (int j : {16, 64, 100}) {
        double go = normalized_observable(out, observable_momentum(1), {j});
        EXPECT_NEAR(go, 0.5, omega + h / (omega * omega));
        EXPECT_DOUBLE_EQ(normalized_observable(out, observable_one(), {j}), 1.0);
    }
}

TEST(NormalizedObservable, VacuousDensity) {
    auto g = PhaseGrid::make(1, 1, 16, 0.01, 1);
    LevelSetField f;
    f.grid = g;
    f.kind = FieldKind::hj;
    f.values = Eigen::VectorXd::Zero(256);
    f.values[static_cast<Eigen::Index>(flatten({3, 8}, 16))] = 1.0;
    EXPECT_NO_THROW(normalized_observable(f, observable_momentum(1), {3}));
    try {
        normalized_observable(f, observable_momentum(1), {4});
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("vacuous density at x"), std::string::npos);
    }
}

TEST(NormalizationConstants, Examples) {
    auto g = PhaseGrid::make(1, 1, 64, 0.005, 1);
    auto f = initial(g, constant_ensemble(0.5), 0.1);
    EXPECT_DOUBLE_EQ(normalization_constants(f, observable_one(), {5}).n_G, 1.0);
    double s = 0;
    for (int l = 1; l <= 64; ++l) s += (l / 64.0) * (l / 64.0);
    auto np = normalization_constants(f, observable_momentum(1), {5});
    EXPECT_NEAR(np.n_G, std::sqrt(s / 64), 1e-14);
    EXPECT_NEAR(np.n_G, 0.577, 0.01);
    LevelSetField zero = f;
    zero.values.setZero();
    EXPECT_THROW(normalization_constants(zero, observable_one(), {1}), NumericalError);
}

TEST(NormalizationConstants, PointSourceScaling) {
    // hat of width 2h: sum_l psi^2 = (1 + 2/4)/(2h)^2 per column, so n_psi0 = sqrt(3/8) N and b = 2
    std::vector<double> Ns, ns;
    for (int n : {32, 64, 128}) {
        auto g = PhaseGrid::make(1, 1, n, 0.001, 1);
        auto f = assemble_initial_hj(constant_ensemble(0.5), g, DeltaKernel{2.0 / n, KernelShape::hat});
        auto c = normalization_constants(f, observable_one(), {1});
        EXPECT_NEAR(c.n_psi0, std::sqrt(3.0 / 8.0) * n, 1e-9 * n);
        Ns.push_back(n);
        ns.push_back(c.n_psi0);
    }
    EXPECT_NEAR(fit_b_exponent(Ns, ns), 2.0, 1e-9);
}

TEST(Upsilon, IdentityOnRandomProblems) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<HamiltonianModel> models = {builtin_free(1, 0.5), builtin_harmonic(1),
                                            newtonian_from_expr(1, "0.05*cos(2*pi*x)")};
    std::vector<ObservableSpec> specs = {observable_one(), observable_momentum(1), observable_kinetic(),
                                         make_observable("expr:p*x + 1", 1, 1)};
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 8 + 4 * (trial % 3);
        auto& m = models[trial % models.size()];
        double dt = cfl_time_step(m.speed_bound, 2, 1.0 / n) * (0.3 + 0.7 * U(rng));
        const int nt = 3 + trial % 5;
        auto g = PhaseGrid::make(1, 1, n, dt, nt - 1);
        LevelSetField f;
        f.grid = g;
        f.kind = FieldKind::hj;
        f.values.resize(static_cast<Eigen::Index>(g.size()));
        for (auto& v : f.values) v = U(rng);
        auto s = assemble_system(m, g, nt);
        int at_n = static_cast<int>(U(rng) * nt) % nt;
        MultiIndex at_x{1 + static_cast<int>(U(rng) * n) % n};
        auto& spec = specs[trial % specs.size()];
        auto r = upsilon_exact(s, f, spec, at_x, at_n);
        auto hist = evolve(f, m, at_n);
        double avg = quadrature_average(hist.back(), spec, at_x);
        EXPECT_LE(std::abs(std::abs(avg) - r.reconstructed), 1e-10 * std::max(1.0, std::abs(avg))) << trial;
        EXPECT_LE(std::abs(r.norms.n_psi0 * r.norms.n_G * r.overlap - avg), 1e-10 * std::max(1.0, std::abs(avg)));
        EXPECT_GE(r.upsilon, 0.0);
        EXPECT_LE(r.upsilon, 1.0 + 1e-9);
    }
}

TEST(Upsilon, OrthogonalBlockGivesZero) {
    auto g = PhaseGrid::make(1, 1, 16, 1.0 / 16, 2);
    HamiltonianModel m;
    m.dims = 1;
    m.H = [](const Vec&, const Vec& p) { return p[0]; };
    m.grad_p = [](const Vec&, const Vec&) { return Vec{1.0}; };
    m.grad_x = [](const Vec&, const Vec&) { return Vec{0.0}; };
    m.speed_bound = 1;
    LevelSetField f;
    f.grid = g;
    f.kind = FieldKind::hj;
    f.values = Eigen::VectorXd::Zero(256);
    for (int l = 4; l <= 12; ++l) f.values[static_cast<Eigen::Index>(flatten({2, l}, 16))] = 1.0;
    auto s = assemble_system(m, g, 3);
    // the column at x-index 2 is shifted to x-index 4 after two steps; x-index 2 is empty there
    EXPECT_EQ(upsilon_exact(s, f, observable_one(), {2}, 2).upsilon, 0.0);
    EXPECT_GT(upsilon_exact(s, f, observable_one(), {4}, 2).upsilon, 0.0);
}

TEST(Upsilon, ZerothMomentAtStart) {
    auto g = PhaseGrid::make(1, 1, 32, 0.01, 2);
    auto f = initial(g, constant_ensemble(0.5), 0.15);
    auto s = assemble_system(builtin_free(1, 0.5), g, 3);
    auto r = upsilon_exact(s, f, observable_one(), {10}, 0);
    EXPECT_NEAR(r.reconstructed, 1.0, 0.15 * 0.05);
    EXPECT_THROW(upsilon_exact(s, f, observable_one(), {10}, 3), ConfigError);
}

TEST(Observables, WeightedEnsembleConsistency) {
    auto g = PhaseGrid::make(1, 1, 64, 0.004, 1);
    DeltaKernel k{0.1};
    std::vector<std::function<Vec(const Vec&)>> members = {
        [](const Vec& x) { return Vec{0.4 + 0.1 * x[0]}; },
        [](const Vec& x) { return Vec{0.6 - 0.1 * x[0]}; },
        [](const Vec&) { return Vec{0.5}; }};
    std::vector<double> w = {0.2, 0.5, 0.3};
    auto joint = assemble_initial_hj(HjEnsemble::weighted(members, w), g, k);
    auto m = builtin_free(1, 0.5);
    auto ej = evolve(joint, m, 25).back();
    for (auto spec : {observable_one(), observable_momentum(1), observable_kinetic()}) {
        double sum = 0.0;
        for (int i = 0; i < 3; ++i) {
            auto single = evolve(assemble_initial_hj(HjEnsemble::uniform({members[i]}), g, k), m, 25).back();
            sum += w[i] * quadrature_average(single, spec, {30});
        }
        EXPECT_NEAR(quadrature_average(ej, spec, {30}), sum, 1e-10 * std::max(1.0, std::abs(sum)));
    }
}

TEST(Observables, InitialMomentsWithinErrorBound) {
    // C(omega + d h / omega^2) with C = 1 as a loose cap on t = 0 moments
    const int n = 128;
    double h = 1.0 / n, omega = default_omega(1, h);
    auto g = PhaseGrid::make(1, 1, n, 0.001, 1);
    auto u0 = [](double x) { return 0.5 + 0.15 * std::sin(2 * std::numbers::pi * x); };
    auto u1 = [](double x) { return 0.45 + 0.1 * std::cos(2 * std::numbers::pi * x); };
    auto e = HjEnsemble::uniform({[u0](const Vec& x) { return Vec{u0(x[0])}; },
                                  [u1](const Vec& x) { return Vec{u1(x[0])}; }});
    auto f = assemble_initial_hj(e, g, DeltaKernel{omega});
    for (int j : {13, 50, 90}) {
        double x = coord(j, n);
        std::vector<std::pair<ObservableSpec, double>> cases = {
            {observable_one(), 1.0},
            {observable_momentum(1), 0.5 * (u0(x) + u1(x))},
            {observable_kinetic(), 0.25 * (u0(x) * u0(x) + u1(x) * u1(x))}};
        for (auto& [spec, oracle] : cases)
            EXPECT_NEAR(quadrature_average(f, spec, {j}), oracle, omega + h / (omega * omega)) << spec.name;
    }
}

TEST(Observables, OdeQuadratureUsesWholeGrid) {
    auto g = PhaseGrid::make(2, 0, 64, 0.001, 1);
    auto f = assemble_initial_ode(PointEnsemble::uniform({Vec{0.3, 0.4}, Vec{0.7, 0.6}}), g, DeltaKernel{0.1});
    EXPECT_NEAR(quadrature_average(f, observable_one(), {}), 1.0, 1e-2);
    auto q1 = make_observable("expr:p1", 2, 0);
    EXPECT_NEAR(quadrature_average(f, q1, {}), 0.5, 1e-2);
}

TEST(Observables, MakeObservableNames) {
    EXPECT_EQ(make_observable("one", 1, 1).name, "one");
    EXPECT_EQ(make_observable("momentum_1", 1, 1).name, "momentum_1");
    EXPECT_THROW(make_observable("energy", 1, 1), ConfigError);
    EXPECT_THROW(make_observable("bogus", 1, 1), ConfigError);
    auto e = make_observable("energy", 1, 1, [](const Vec& x) { return x[0]; });
    EXPECT_DOUBLE_EQ(e.G(Vec{0.5}, Vec{0.25}), 0.375);
}

TEST(Observables, CsvColumns) {
    std::stringstream ss;
    write_observable_csv_header(ss, 2);
    write_observable_csv_row(ss, 0.5, {0.25, 0.75}, "one", 1.0 / 3.0, 0.1, 64, 2);
    EXPECT_EQ(ss.str(), "t,x_1,x_2,name,value,omega,N,M\n0.5,0.25,0.75,one,0.33333333333333331,0.10000000000000001,64,2\n");
}
