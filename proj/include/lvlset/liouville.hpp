#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "lvlset/error.hpp"
#include "lvlset/kernels.hpp"
#include "lvlset/models.hpp"
#include "lvlset/phase_grid.hpp"

namespace lvlset {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class FieldKind { hj, hyperbolic, ode };

inline const char* to_string(FieldKind k) {
    switch (k) {
        case FieldKind::hj: return "hj";
        case FieldKind::hyperbolic: return "hyperbolic";
        case FieldKind::ode: return "ode";
    }
    return "?";
}

/// One time slice of psi (HJ, hyperbolic) or Phi (ODE transport) in flat-index order.
struct LevelSetField {
    PhaseGrid grid;
    FieldKind kind = FieldKind::hj;
    double omega = 0.0;
    Eigen::VectorXd values;
    int time_index = 0;

    double time() const { return time_index * grid.dt; }
    /// Riemann-sum mass h^dims * sum(values).
    double mass() const { return std::pow(grid.h, grid.dims()) * values.sum(); }
};

/**
 * @brief Per-cell explicit update weights.
 *
 * new_j = diag_j psi_j + sum_a lower_{j,a} psi_{j-e_a} + upper_{j,a} psi_{j+e_a};
 * neighbours outside [1,N] are ghost zeros.
 */
struct StencilCoefficients {
    int dims = 0;
    std::vector<double> diag;
    std::vector<double> lower;  // [cell * dims + axis]
    std::vector<double> upper;
};

namespace detail {

inline std::vector<std::size_t> strides(int n, int dims) {
    std::vector<std::size_t> s(dims);
    std::size_t st = 1;
    for (int a = 0; a < dims; ++a) {
        s[a] = st;
        st *= static_cast<std::size_t>(n);
    }
    return s;
}

/// Runs f(cell, coordinates) for each cell; coordinates are j/N per axis.
template <class F>
void for_each_cell(const PhaseGrid& g, F&& f) {
    const std::size_t total = g.size();
    const int dims = g.dims();
    const int n = g.n;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(total); ++c) {
        Vec z(dims);
        std::size_t rem = static_cast<std::size_t>(c);
        for (int a = 0; a < dims; ++a) {
            z[a] = coord(static_cast<int>(rem % n) + 1, n);
            rem /= n;
        }
        f(static_cast<std::size_t>(c), z);
    }
}

inline void check_cfl(const StencilCoefficients& sc, double lambda) {
    double worst = 1.0;
    std::size_t at = 0;
    for (std::size_t c = 0; c < sc.diag.size(); ++c) {
        if (sc.diag[c] < worst) {
            worst = sc.diag[c];
            at = c;
        }
    }
    if (worst < -1e-12) {
        std::ostringstream os;
        os << std::setprecision(17) << "CFL violated: lambda*sum_i|coefficient_i| = " << (1.0 - worst)
           << " > 1 at flat cell " << at << " (lambda = " << lambda << ")";
        throw NumericalError(os.str());
    }
}

}  // namespace detail

/// Upwind coefficients for the phase-space Liouville equation, gradients evaluated at nodes.
inline StencilCoefficients stencil_coefficients(const HamiltonianModel& m, const PhaseGrid& g) {
    if (g.dims_x != m.dims || g.dims_p != m.dims)
        throw ConfigError("step_hj: grid dims (" + std::to_string(g.dims_x) + "," + std::to_string(g.dims_p) +
                          ") do not match model dimension " + std::to_string(m.dims));
    const int d = m.dims, D = 2 * d;
    const double lam = g.lambda();
    StencilCoefficients sc;
    sc.dims = D;
    std::size_t total = g.size();
    sc.diag.assign(total, 1.0);
    sc.lower.assign(total * D, 0.0);
    sc.upper.assign(total * D, 0.0);
    detail::for_each_cell(g, [&](std::size_t c, const Vec& z) {
        Vec x(z.begin(), z.begin() + d), p(z.begin() + d, z.end());
        Vec a = m.grad_p(x, p), b = m.grad_x(x, p);
        double out = 0.0;
        for (int i = 0; i < d; ++i) {
            double ap = std::max(a[i], 0.0), am = std::min(a[i], 0.0);
            sc.lower[c * D + i] = lam * ap;
            sc.upper[c * D + i] = -lam * am;
            out += ap - am;
            double bp = std::max(b[i], 0.0), bm = std::min(b[i], 0.0);
            sc.upper[c * D + d + i] = lam * bp;
            sc.lower[c * D + d + i] = -lam * bm;
            out += bp - bm;
        }
        sc.diag[c] = 1.0 - lam * out;
    });
    return sc;
}

/// Same stencil with dH/dp_i -> F_i(p) and dH/dx -> Q(x, p), scalar p.
inline StencilCoefficients stencil_coefficients(const HyperbolicModel& m, const PhaseGrid& g) {
    if (g.dims_x != m.dims || g.dims_p != 1)
        throw ConfigError("step_hyperbolic: grid must have dims_x = " + std::to_string(m.dims) + " and dims_p = 1");
    const int d = m.dims, D = d + 1;
    const double lam = g.lambda();
    StencilCoefficients sc;
    sc.dims = D;
    std::size_t total = g.size();
    sc.diag.assign(total, 1.0);
    sc.lower.assign(total * D, 0.0);
    sc.upper.assign(total * D, 0.0);
    detail::for_each_cell(g, [&](std::size_t c, const Vec& z) {
        Vec x(z.begin(), z.begin() + d);
        double p = z[d];
        Vec a = m.F(p);
        double b = m.Q(x, p);
        double out = 0.0;
        for (int i = 0; i < d; ++i) {
            double ap = std::max(a[i], 0.0), am = std::min(a[i], 0.0);
            sc.lower[c * D + i] = lam * ap;
            sc.upper[c * D + i] = -lam * am;
            out += ap - am;
        }
        double bp = std::max(b, 0.0), bm = std::min(b, 0.0);
        sc.upper[c * D + d] = lam * bp;
        sc.lower[c * D + d] = -lam * bm;
        out += bp - bm;
        sc.diag[c] = 1.0 - lam * out;
    });
    return sc;
}

/// Conservative upwind fluxes with face values F_i(q_{j+1/2}) = (F_i(q_{j+e_i}) + F_i(q_j))/2.
inline StencilCoefficients stencil_coefficients(const OdeModel& m, const PhaseGrid& g) {
    if (g.dims_x != m.dims || g.dims_p != 0)
        throw ConfigError("step_ode_transport: grid must have dims_x = " + std::to_string(m.dims) +
                          " and dims_p = 0");
    const int D = m.dims;
    const double lam = g.lambda(), h = g.h;
    StencilCoefficients sc;
    sc.dims = D;
    std::size_t total = g.size();
    sc.diag.assign(total, 1.0);
    sc.lower.assign(total * D, 0.0);
    sc.upper.assign(total * D, 0.0);
    detail::for_each_cell(g, [&](std::size_t c, const Vec& q) {
        Vec f0 = m.F(q);
        double out = 0.0;
        for (int i = 0; i < D; ++i) {
            Vec qp = q, qm = q;
            qp[i] += h;
            qm[i] -= h;
            double fp = 0.5 * (m.F(qp)[i] + f0[i]);
            double fm = 0.5 * (f0[i] + m.F(qm)[i]);
            sc.upper[c * D + i] = -lam * std::min(fp, 0.0);
            sc.lower[c * D + i] = lam * std::max(fm, 0.0);
            out += std::max(fp, 0.0) - std::min(fm, 0.0);
        }
        sc.diag[c] = 1.0 - lam * out;
    });
    return sc;
}

/// Sparse one-step map A with psi^{n+1} = A psi^n; exact zeros are not stored.
inline SparseMatrix operator_from_coefficients(const StencilCoefficients& sc, const PhaseGrid& g) {
    const int D = sc.dims;
    const std::size_t total = sc.diag.size();
    const auto st = detail::strides(g.n, D);
    SparseMatrix A(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(total));
    Eigen::VectorXi nnz(static_cast<Eigen::Index>(total));
    std::vector<int> axis_coord(D);
    for (std::size_t c = 0; c < total; ++c) {
        int k = sc.diag[c] != 0.0;
        for (int a = 0; a < D; ++a) k += (sc.lower[c * D + a] != 0.0) + (sc.upper[c * D + a] != 0.0);
        nnz[static_cast<Eigen::Index>(c)] = k;
    }
    A.reserve(nnz);
    for (std::size_t c = 0; c < total; ++c) {
        std::size_t rem = c;
        for (int a = 0; a < D; ++a) {
            axis_coord[a] = static_cast<int>(rem % g.n) + 1;
            rem /= g.n;
        }
        auto row = static_cast<Eigen::Index>(c);
        for (int a = D - 1; a >= 0; --a) {
            double w = sc.lower[c * D + a];
            if (w != 0.0 && axis_coord[a] > 1) A.insert(row, static_cast<Eigen::Index>(c - st[a])) = w;
        }
        if (sc.diag[c] != 0.0) A.insert(row, row) = sc.diag[c];
        for (int a = 0; a < D; ++a) {
            double w = sc.upper[c * D + a];
            if (w != 0.0 && axis_coord[a] < g.n) A.insert(row, static_cast<Eigen::Index>(c + st[a])) = w;
        }
    }
    A.makeCompressed();
    return A;
}

/// Builds the one-step map after checking the CFL condition cell by cell.
template <class Model>
SparseMatrix step_operator(const Model& m, const PhaseGrid& g) {
    StencilCoefficients sc = stencil_coefficients(m, g);
    detail::check_cfl(sc, g.lambda());
    return operator_from_coefficients(sc, g);
}

namespace detail {

inline FieldKind kind_of(const HamiltonianModel&) { return FieldKind::hj; }
inline FieldKind kind_of(const HyperbolicModel&) { return FieldKind::hyperbolic; }
inline FieldKind kind_of(const OdeModel&) { return FieldKind::ode; }

inline LevelSetField apply(const SparseMatrix& A, const LevelSetField& f) {
    LevelSetField r;
    r.grid = f.grid;
    r.kind = f.kind;
    r.omega = f.omega;
    r.values.resize(f.values.size());
    r.values.noalias() = A * f.values;
    r.time_index = f.time_index + 1;
    return r;
}

template <class Model>
void check_kind(const LevelSetField& f, const Model& m) {
    if (f.kind != kind_of(m))
        throw ConfigError(std::string("field kind '") + to_string(f.kind) + "' does not match model kind '" +
                          to_string(kind_of(m)) + "'");
}

}  // namespace detail

inline LevelSetField step_hj(const LevelSetField& f, const HamiltonianModel& m) {
    detail::check_kind(f, m);
    return detail::apply(step_operator(m, f.grid), f);
}

inline LevelSetField step_hyperbolic(const LevelSetField& f, const HyperbolicModel& m) {
    detail::check_kind(f, m);
    return detail::apply(step_operator(m, f.grid), f);
}

inline LevelSetField step_ode_transport(const LevelSetField& f, const OdeModel& m) {
    detail::check_kind(f, m);
    return detail::apply(step_operator(m, f.grid), f);
}

enum class Record { all, final_only };

/// n_steps explicit steps; with Record::all the result holds slices 0..n_steps.
template <class Model>
std::vector<LevelSetField> evolve(const LevelSetField& f0, const Model& m, int n_steps,
                                  Record record = Record::final_only) {
    detail::check_kind(f0, m);
    if (n_steps < 0) throw ConfigError("evolve: n_steps must be >= 0");
    std::vector<LevelSetField> out;
    out.push_back(f0);
    if (n_steps == 0) return out;
    SparseMatrix A = step_operator(m, f0.grid);
    LevelSetField cur = f0;
    for (int s = 0; s < n_steps; ++s) {
        cur = detail::apply(A, cur);
        if (record == Record::all) out.push_back(cur);
    }
    if (record == Record::final_only) out.back() = std::move(cur);
    return out;
}

namespace detail {

inline void check_support(double center, double omega, const std::string& where) {
    if (!std::isfinite(center)) throw NumericalError(where + ": non-finite initial value");
    if (center - omega < 0.0 || center + omega > 1.0) {
        std::ostringstream os;
        os << where << ": initial support touches boundary (value " << center << ", omega " << omega << ")";
        throw NumericalError(os.str());
    }
}

/// psi(j,l) = sum_k c_k prod_i delta(p_i(l) - centre_k(x_j)_i).
inline LevelSetField assemble_level_set(const PhaseGrid& g, const DeltaKernel& k, FieldKind kind,
                                        const std::vector<double>& weights,
                                        const std::function<Vec(std::size_t, const Vec&)>& centre) {
    LevelSetField f;
    f.grid = g;
    f.kind = kind;
    f.omega = k.omega;
    f.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
    const std::size_t nx = g.x_size(), np = g.p_size();
    const int dx = g.dims_x, dp = g.dims_p, n = g.n;
    // per-axis kernel tables avoid re-evaluating delta for every p cell
    for (std::size_t jx = 0; jx < nx; ++jx) {
        Vec x(dx);
        std::size_t rem = jx;
        for (int a = 0; a < dx; ++a) {
            x[a] = coord(static_cast<int>(rem % n) + 1, n);
            rem /= n;
        }
        for (std::size_t m = 0; m < weights.size(); ++m) {
            Vec u = centre(m, x);
            std::vector<std::vector<double>> table(dp, std::vector<double>(n));
            for (int a = 0; a < dp; ++a) {
                check_support(u[a], k.omega, "assemble_initial");
                for (int l = 1; l <= n; ++l) table[a][l - 1] = eval_delta(k, coord(l, n) - u[a]);
            }
            for (std::size_t jp = 0; jp < np; ++jp) {
                double v = weights[m];
                std::size_t r = jp;
                for (int a = 0; a < dp && v != 0.0; ++a) {
                    v *= table[a][r % n];
                    r /= n;
                }
                if (v != 0.0) f.values[static_cast<Eigen::Index>(jx + nx * jp)] += v;
            }
        }
    }
    return f;
}

}  // namespace detail

inline LevelSetField assemble_initial_hj(const HjEnsemble& e, const PhaseGrid& g, const DeltaKernel& k) {
    if (g.dims_x != g.dims_p) throw ConfigError("assemble_initial_hj: grid needs dims_x = dims_p");
    return detail::assemble_level_set(g, k, FieldKind::hj, e.weights, [&](std::size_t m, const Vec& x) {
        Vec u = e.members[m](x);
        if (static_cast<int>(u.size()) != g.dims_p)
            throw ConfigError("assemble_initial_hj: member returned wrong dimension");
        return u;
    });
}

inline LevelSetField assemble_initial_hyperbolic(const ScalarEnsemble& e, const PhaseGrid& g,
                                                 const DeltaKernel& k) {
    if (g.dims_p != 1) throw ConfigError("assemble_initial_hyperbolic: grid needs dims_p = 1");
    return detail::assemble_level_set(g, k, FieldKind::hyperbolic, e.weights,
                                      [&](std::size_t m, const Vec& x) { return Vec{e.members[m](x)}; });
}

/// Phi_0(q) = sum_k c_k prod_i delta(q_i - X0_k,i).
inline LevelSetField assemble_initial_ode(const PointEnsemble& e, const PhaseGrid& g, const DeltaKernel& k) {
    if (g.dims_p != 0) throw ConfigError("assemble_initial_ode: grid needs dims_p = 0");
    PhaseGrid pg = g;
    // treat q as the "p" part of an x-free grid so the shared assembler applies
    pg.dims_p = g.dims_x;
    pg.dims_x = 0;
    LevelSetField f = detail::assemble_level_set(pg, k, FieldKind::ode, e.weights, [&](std::size_t m, const Vec&) {
        if (static_cast<int>(e.members[m].size()) != g.dims_x)
            throw ConfigError("assemble_initial_ode: point has wrong dimension");
        return e.members[m];
    });
    f.grid = g;
    return f;
}

/// Sum of |values| over cells with some coordinate equal to 1 or N.
inline double boundary_shell_mass(const LevelSetField& f) {
    const int n = f.grid.n, D = f.grid.dims();
    double s = 0.0;
    for (Eigen::Index c = 0; c < f.values.size(); ++c) {
        std::size_t rem = static_cast<std::size_t>(c);
        bool edge = false;
        for (int a = 0; a < D; ++a) {
            int j = static_cast<int>(rem % n) + 1;
            rem /= n;
            edge = edge || j == 1 || j == n;
        }
        if (edge) s += std::abs(f.values[c]);
    }
    return s;
}

/// True when the boundary shell carries more than 1e-8 of the total mass.
inline bool compact_support_warning(const LevelSetField& f) {
    double total = f.values.cwiseAbs().sum();
    return total > 0.0 && boundary_shell_mass(f) > 1e-8 * total;
}

/// Mass h^D sum(Phi) leaving through the domain boundary in one ODE transport step.
inline double ode_boundary_flux(const LevelSetField& f, const OdeModel& m) {
    const PhaseGrid& g = f.grid;
    const int D = m.dims, n = g.n;
    const double lam = g.lambda(), h = g.h;
    double flux = 0.0;
    for (Eigen::Index c = 0; c < f.values.size(); ++c) {
        double v = f.values[c];
        if (v == 0.0) continue;
        std::size_t rem = static_cast<std::size_t>(c);
        Vec q(D);
        std::vector<int> j(D);
        for (int a = 0; a < D; ++a) {
            j[a] = static_cast<int>(rem % n) + 1;
            q[a] = coord(j[a], n);
            rem /= n;
        }
        Vec f0 = m.F(q);
        for (int a = 0; a < D; ++a) {
            if (j[a] == n) {
                Vec qp = q;
                qp[a] += h;
                flux += lam * std::max(0.5 * (m.F(qp)[a] + f0[a]), 0.0) * v;
            }
            if (j[a] == 1) {
                Vec qm = q;
                qm[a] -= h;
                flux += -lam * std::min(0.5 * (f0[a] + m.F(qm)[a]), 0.0) * v;
            }
        }
    }
    return std::pow(h, D) * flux;
}

// ---- snapshots ----

namespace detail {

template <class T>
void write_le(std::ostream& os, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
    unsigned char b[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw ConfigError("snapshot: truncated file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace detail

/// Binary layout: "LVLS", u32 version, i32 kind dims_x dims_p N n_time n_steps, f64 omega dt,
/// u64 count, then count little-endian f64 values in flat order.
inline void write_snapshot(std::ostream& os, const LevelSetField& f) {
    os.write("LVLS", 4);
    detail::write_le<std::uint32_t>(os, 1);
    detail::write_le<std::int32_t>(os, static_cast<std::int32_t>(f.kind));
    detail::write_le<std::int32_t>(os, f.grid.dims_x);
    detail::write_le<std::int32_t>(os, f.grid.dims_p);
    detail::write_le<std::int32_t>(os, f.grid.n);
    detail::write_le<std::int32_t>(os, f.time_index);
    detail::write_le<std::int32_t>(os, f.grid.n_steps);
    detail::write_le<double>(os, f.omega);
    detail::write_le<double>(os, f.grid.dt);
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(f.values.size()));
    for (Eigen::Index i = 0; i < f.values.size(); ++i) detail::write_le<double>(os, f.values[i]);
}

inline LevelSetField read_snapshot(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "LVLS") throw ConfigError("snapshot: bad magic");
    if (detail::read_le<std::uint32_t>(is) != 1) throw ConfigError("snapshot: unsupported version");
    LevelSetField f;
    f.kind = static_cast<FieldKind>(detail::read_le<std::int32_t>(is));
    int dx = detail::read_le<std::int32_t>(is);
    int dp = detail::read_le<std::int32_t>(is);
    int n = detail::read_le<std::int32_t>(is);
    f.time_index = detail::read_le<std::int32_t>(is);
    int steps = detail::read_le<std::int32_t>(is);
    f.omega = detail::read_le<double>(is);
    double dt = detail::read_le<double>(is);
    f.grid = PhaseGrid::make(dx, dp, n, dt, steps);
    auto count = detail::read_le<std::uint64_t>(is);
    if (count != f.grid.size()) throw ConfigError("snapshot: value count does not match grid");
    f.values.resize(static_cast<Eigen::Index>(count));
    for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values[i] = detail::read_le<double>(is);
    return f;
}

/// CSV with one row per cell: coordinates then value (17 significant digits).
inline void write_field_csv(std::ostream& os, const LevelSetField& f, std::size_t max_cells = 1u << 20) {
    if (f.grid.size() > max_cells) throw ConfigError("field csv: grid too large for CSV output");
    const int dx = f.grid.dims_x, dp = f.grid.dims_p, n = f.grid.n;
    for (int a = 1; a <= dx; ++a) os << (f.kind == FieldKind::ode ? "q" : "x") << a << ',';
    for (int a = 1; a <= dp; ++a) os << 'p' << a << ',';
    os << "value\n";
    os << std::setprecision(17);
    for (Eigen::Index c = 0; c < f.values.size(); ++c) {
        std::size_t rem = static_cast<std::size_t>(c);
        for (int a = 0; a < dx + dp; ++a) {
            os << coord(static_cast<int>(rem % n) + 1, n) << ',';
            rem /= n;
        }
        os << f.values[c] << '\n';
    }
}

}  // namespace lvlset
