#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "lvlset/error.hpp"
#include "lvlset/liouville.hpp"

namespace lvlset {

/// Coupling used in the final block row of the stacked system.
enum class LastRow {
    stepper,          // (K, I) like every other row; reproduces the time stepper exactly
    identity_coupling  // (-I, I): holds the last slice fixed
};

/**
 * @brief Block lower-triangular system for N_t stacked time slices.
 *
 * Unknowns are (psi^0, ..., psi^{N_t-1}); right-hand side e_1 (x) psi_0;
 * diagonal blocks are identities and subdiagonal blocks K = -A with A the one-step map.
 */
struct TransportSystem {
    SparseMatrix k_matrix;
    SparseMatrix step;      // A
    SparseMatrix k_block;   // K = -A
    std::size_t block_size = 0;
    int n_blocks = 0;
    double lambda = 0.0;
    LastRow last_row = LastRow::stepper;
    PhaseGrid grid;
    FieldKind kind = FieldKind::hj;
    std::string model_name;

    std::size_t size() const { return block_size * static_cast<std::size_t>(n_blocks); }
};

constexpr std::size_t kMaxSystemState = std::size_t{1} << 24;

namespace detail {
inline std::string model_name(const HamiltonianModel& m) { return m.name; }
inline std::string model_name(const HyperbolicModel& m) { return m.name; }
inline std::string model_name(const OdeModel& m) { return m.name; }
}  // namespace detail

template <class Model>
TransportSystem assemble_system(const Model& m, const PhaseGrid& g, int n_blocks,
                                LastRow last_row = LastRow::stepper) {
    if (n_blocks < 1) throw ConfigError("assemble_system: need N_t >= 1 blocks");
    const std::size_t B = g.size();
    if (B * static_cast<std::size_t>(n_blocks) > kMaxSystemState)
        throw ConfigError("assemble_system: N_t * N^dim = " + std::to_string(B * n_blocks) +
                          " exceeds the limit 2^24 = " + std::to_string(kMaxSystemState));
    TransportSystem s;
    s.step = step_operator(m, g);
    s.k_block = -s.step;
    s.block_size = B;
    s.n_blocks = n_blocks;
    s.lambda = g.lambda();
    s.last_row = last_row;
    s.grid = g;
    s.kind = detail::kind_of(m);
    s.model_name = detail::model_name(m);

    const auto n = static_cast<Eigen::Index>(s.size());
    const auto Bi = static_cast<Eigen::Index>(B);
    s.k_matrix.resize(n, n);
    Eigen::VectorXi nnz(n);
    for (int b = 0; b < n_blocks; ++b)
        for (Eigen::Index r = 0; r < Bi; ++r) {
            int k = 1;
            if (b > 0) {
                bool ident = last_row == LastRow::identity_coupling && b == n_blocks - 1;
                k += ident ? 1 : static_cast<int>(s.k_block.outerIndexPtr()[r + 1] - s.k_block.outerIndexPtr()[r]);
            }
            nnz[b * Bi + r] = k;
        }
    s.k_matrix.reserve(nnz);
    for (int b = 0; b < n_blocks; ++b) {
        bool ident = last_row == LastRow::identity_coupling && b == n_blocks - 1 && b > 0;
        for (Eigen::Index r = 0; r < Bi; ++r) {
            Eigen::Index row = b * Bi + r;
            if (b > 0) {
                if (ident) {
                    s.k_matrix.insert(row, (b - 1) * Bi + r) = -1.0;
                } else {
                    for (SparseMatrix::InnerIterator it(s.k_block, r); it; ++it)
                        s.k_matrix.insert(row, (b - 1) * Bi + it.col()) = it.value();
                }
            }
            s.k_matrix.insert(row, row) = 1.0;
        }
    }
    s.k_matrix.makeCompressed();
    return s;
}

namespace detail {

inline Eigen::VectorXd block(const Eigen::VectorXd& v, const TransportSystem& s, int b) {
    return v.segment(static_cast<Eigen::Index>(b * s.block_size), static_cast<Eigen::Index>(s.block_size));
}

inline bool identity_row(const TransportSystem& s, int b) {
    return s.last_row == LastRow::identity_coupling && b == s.n_blocks - 1 && b > 0;
}

}  // namespace detail

/// Block forward substitution for a full right-hand side.
inline Eigen::VectorXd solve_forward_rhs(const TransportSystem& s, const Eigen::VectorXd& rhs) {
    if (static_cast<std::size_t>(rhs.size()) != s.size())
        throw ConfigError("solve_forward: right-hand side has length " + std::to_string(rhs.size()) +
                          ", expected " + std::to_string(s.size()));
    const auto B = static_cast<Eigen::Index>(s.block_size);
    Eigen::VectorXd x(rhs.size());
    x.head(B) = rhs.head(B);
    Eigen::VectorXd y(B);
    for (int b = 1; b < s.n_blocks; ++b) {
        if (detail::identity_row(s, b)) y = -x.segment((b - 1) * B, B);
        else y.noalias() = s.k_block * x.segment((b - 1) * B, B);
        x.segment(b * B, B) = rhs.segment(b * B, B) - y;
    }
    return x;
}

/// Stacked solution of K u = e_1 (x) psi0; block n equals n stepper applications.
inline Eigen::VectorXd solve_forward(const TransportSystem& s, const Eigen::VectorXd& psi0) {
    if (static_cast<std::size_t>(psi0.size()) != s.block_size)
        throw ConfigError("solve_forward: psi0 has length " + std::to_string(psi0.size()) + ", expected " +
                          std::to_string(s.block_size));
    const auto B = static_cast<Eigen::Index>(s.block_size);
    Eigen::VectorXd x(static_cast<Eigen::Index>(s.size()));
    x.head(B) = psi0;
    Eigen::VectorXd y(B);
    for (int b = 1; b < s.n_blocks; ++b) {
        if (detail::identity_row(s, b)) {
            x.segment(b * B, B) = x.segment((b - 1) * B, B);
        } else {
            y.noalias() = s.k_block * x.segment((b - 1) * B, B);
            x.segment(b * B, B) = -y;
        }
    }
    return x;
}

/// Block backward substitution for K^T y = rhs.
inline Eigen::VectorXd solve_transpose(const TransportSystem& s, const Eigen::VectorXd& rhs) {
    const auto B = static_cast<Eigen::Index>(s.block_size);
    Eigen::VectorXd y(rhs.size());
    const int last = s.n_blocks - 1;
    y.segment(last * B, B) = rhs.segment(last * B, B);
    Eigen::VectorXd t(B);
    for (int b = last - 1; b >= 0; --b) {
        if (detail::identity_row(s, b + 1)) t = -y.segment((b + 1) * B, B);
        else t.noalias() = s.k_block.transpose() * y.segment((b + 1) * B, B);
        y.segment(b * B, B) = rhs.segment(b * B, B) - t;
    }
    return y;
}

/// M = [[0, K], [K^T, 0]].
inline SparseMatrix hermitian_dilation(const TransportSystem& s) {
    const auto n = s.k_matrix.rows();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(2 * static_cast<std::size_t>(s.k_matrix.nonZeros()));
    for (Eigen::Index r = 0; r < n; ++r)
        for (SparseMatrix::InnerIterator it(s.k_matrix, r); it; ++it) {
            t.emplace_back(r, n + it.col(), it.value());
            t.emplace_back(n + it.col(), r, it.value());
        }
    SparseMatrix M(2 * n, 2 * n);
    M.setFromTriplets(t.begin(), t.end());
    M.makeCompressed();
    return M;
}

/// Max number of nonzeros in any row or column.
inline std::size_t measure_sparsity(const SparseMatrix& A) {
    std::vector<std::size_t> col(static_cast<std::size_t>(A.cols()), 0);
    std::size_t s = 0;
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
        std::size_t k = 0;
        for (SparseMatrix::InnerIterator it(A, r); it; ++it) {
            ++k;
            ++col[static_cast<std::size_t>(it.col())];
        }
        s = std::max(s, k);
    }
    for (auto c : col) s = std::max(s, c);
    return s;
}

inline std::size_t measure_sparsity(const TransportSystem& s) { return measure_sparsity(s.k_matrix); }

enum class ConditionMethod { dense, power };

struct ConditionReport {
    double sigma_max = 0.0;
    double sigma_min = 0.0;
    double kappa = 0.0;
    ConditionMethod method = ConditionMethod::dense;
    int iterations = 0;
    double bound_sigma_max = 2.0;     // Gershgorin under CFL
    double bound_kappa_stated = 0.0;  // N_t / 2
    double bound_kappa_proved = 0.0;  // sigma_max bound times ||K^{-1}|| <= N_t
};

constexpr std::size_t kMaxDenseSvd = 4096;

namespace detail {

/// Largest eigenvalue of a symmetric positive operator by power iteration.
template <class Apply>
std::pair<double, int> power_iterate(Eigen::Index n, Apply apply, double tol, int max_iter, const char* what) {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> U(0.5, 1.5);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = U(rng);
    v.normalize();
    double mu = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::VectorXd w = apply(v);
        double next = v.dot(w);
        double nw = w.norm();
        if (nw == 0.0) return {0.0, it};
        v = w / nw;
        if (it > 1 && std::abs(next - mu) <= tol * std::abs(next)) return {next, it};
        mu = next;
    }
    throw NumericalError(std::string("measure_condition: power iteration for ") + what +
                         " did not converge in " + std::to_string(max_iter) + " iterations (last estimate " +
                         std::to_string(mu) + ")");
}

}  // namespace detail

inline ConditionReport measure_condition(const TransportSystem& s, ConditionMethod method,
                                         double tol = 1e-8, int max_iter = 10000) {
    ConditionReport r;
    r.method = method;
    r.bound_kappa_stated = s.n_blocks / 2.0;
    r.bound_kappa_proved = 2.0 * s.n_blocks;
    if (method == ConditionMethod::dense) {
        if (s.size() > kMaxDenseSvd)
            throw ConfigError("measure_condition: dense SVD limited to size <= 4096 (got " +
                              std::to_string(s.size()) + ")");
        Eigen::MatrixXd K = Eigen::MatrixXd(s.k_matrix);
        Eigen::BDCSVD<Eigen::MatrixXd> svd(K);
        const auto& sv = svd.singularValues();
        r.sigma_max = sv(0);
        r.sigma_min = sv(sv.size() - 1);
    } else {
        const auto n = static_cast<Eigen::Index>(s.size());
        auto [lmax, it1] = detail::power_iterate(
            n, [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(s.k_matrix.transpose() * (s.k_matrix * v)); },
            tol, max_iter, "sigma_max");
        auto [linv, it2] = detail::power_iterate(
            n, [&](const Eigen::VectorXd& v) { return solve_forward_rhs(s, solve_transpose(s, v)); }, tol, max_iter,
            "sigma_min");
        r.sigma_max = std::sqrt(lmax);
        r.sigma_min = 1.0 / std::sqrt(linv);
        r.iterations = it1 + it2;
    }
    r.kappa = r.sigma_max / r.sigma_min;
    return r;
}

/// Coordinate text export: "%%MatrixMarket" header, then 1-based "row col value" lines.
inline void export_coordinate(std::ostream& os, const SparseMatrix& A) {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    os << std::setprecision(17);
    for (Eigen::Index r = 0; r < A.rows(); ++r)
        for (SparseMatrix::InnerIterator it(A, r); it; ++it)
            os << (r + 1) << ' ' << (it.col() + 1) << ' ' << it.value() << '\n';
}

/// Max |entry|.
inline double max_abs_entry(const SparseMatrix& A) {
    double m = 0.0;
    for (Eigen::Index k = 0; k < A.nonZeros(); ++k) m = std::max(m, std::abs(A.valuePtr()[k]));
    return m;
}

}  // namespace lvlset
