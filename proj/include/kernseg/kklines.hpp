#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kernseg/errors.hpp"
#include "kernseg/kernels.hpp"

namespace kernseg {

template <typename Scalar>
struct EigPair {
    Scalar value{0};
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vector;
};

/// Atoms live in feature space as Φ(Y) a_k; coeffs holds the a_k as sparse columns.
template <typename Scalar>
struct KernelDictionary {
    using Sparse = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, Eigen::Index>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Sparse coeffs;     // T x K
    Matrix atom_gram;  // K x K, Aᵀ K_YY A
    std::string train_ref;

    Eigen::Index num_atoms() const noexcept { return coeffs.cols(); }
    Eigen::Index num_train() const noexcept { return coeffs.rows(); }
};

template <typename Scalar>
struct ClusterState {
    std::vector<std::vector<Eigen::Index>> memberships;  // C_k, ascending sample indices
    std::vector<Eigen::Index> assignment;                // cluster of each sample
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;    // signed correlation of each sample with its atom
    Scalar objective{0};
};

template <typename Scalar>
struct LearnResult {
    KernelDictionary<Scalar> dictionary;
    ClusterState<Scalar> state;
    std::vector<Scalar> objective_trace;  // objective after every assignment step
    int iterations = 0;
    bool converged = false;
};

/// Raised when a cluster's member Gram has a zero leading eigenvalue.
class DegenerateClusterError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

inline constexpr double kEigenTolerance = 1e-10;

namespace detail {

template <typename Vector>
void fix_sign(Vector& v) {
    using Scalar = typename Vector::Scalar;
    const Scalar cutoff = Scalar(1e-12) * v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > cutoff) {
            if (v(i) < Scalar(0)) v = -v;
            return;
        }
    }
}

}  // namespace detail

/// Largest eigenvalue of a symmetric PSD matrix with a unit eigenvector whose first nonzero entry is
/// positive. Small matrices use a full decomposition; large ones use power iteration.
template <typename Derived>
EigPair<typename Derived::Scalar> leading_eigenpair(const Eigen::MatrixBase<Derived>& m,
                                                    typename Derived::Scalar tol = kEigenTolerance) {
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    if (m.rows() != m.cols() || m.rows() == 0) throw DomainError("leading_eigenpair: matrix must be square");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10))
        throw DomainError("leading_eigenpair: matrix is not symmetric");

    EigPair<Scalar> out;
    const Eigen::Index n = m.rows();
    if (n == 1) {
        out.value = m(0, 0);
        out.vector = Vector::Ones(1);
        return out;
    }
    const Scalar norm = m.cwiseAbs().rowwise().sum().maxCoeff();
    if (n > 400 && norm > Scalar(0)) {
        Vector v = m.rowwise().sum().cwiseAbs();
        if (v.norm() == Scalar(0)) v = Vector::Ones(n);
        v.normalize();
        for (int it = 0; it < 5000; ++it) {
            Vector w = m * v;
            const Scalar lambda = v.dot(w);
            if ((w - lambda * v).norm() <= tol * norm) {
                out.value = lambda;
                out.vector = v;
                detail::fix_sign(out.vector);
                return out;
            }
            const Scalar wn = w.norm();
            if (wn == Scalar(0)) break;
            v = w / wn;
        }
        // fall through to the full decomposition when power iteration stalls
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es{Matrix(m)};
    if (es.info() != Eigen::Success) throw NumericalError("leading_eigenpair: eigensolver failed");
    out.value = es.eigenvalues()(n - 1);
    out.vector = es.eigenvectors().col(n - 1);
    detail::fix_sign(out.vector);
    return out;
}

/// Assigns each training sample to the atom with maximum absolute correlation K_{y_i Y} a_k.
template <typename Scalar>
ClusterState<Scalar> assign(const KernelMatrix<Scalar>& gram, const KernelDictionary<Scalar>& dict) {
    using Index = Eigen::Index;
    if (dict.num_train() != gram.size()) throw DomainError("assign: dictionary and Gram sizes differ");
    const Index t = gram.size();
    const Index k = dict.num_atoms();
    const auto corr = gram.times(dict.coeffs);
    const auto diag = gram.diagonal();

    ClusterState<Scalar> st;
    st.memberships.assign(static_cast<std::size_t>(k), {});
    st.assignment.assign(static_cast<std::size_t>(t), 0);
    st.weights.resize(t);
    st.objective = Scalar(0);
    for (Index i = 0; i < t; ++i) {
        Index best = 0;
        Scalar best_abs = std::abs(corr(i, 0));
        for (Index c = 1; c < k; ++c) {
            const Scalar v = std::abs(corr(i, c));
            if (v > best_abs) {
                best_abs = v;
                best = c;
            }
        }
        st.assignment[static_cast<std::size_t>(i)] = best;
        st.memberships[static_cast<std::size_t>(best)].push_back(i);
        st.weights(i) = corr(i, best);
        st.objective += std::max(Scalar(0), diag(i) - best_abs * best_abs);
    }
    return st;
}

/// Rank-1 update of one cluster: a_k = σ⁻¹ E_k v₁ from the leading eigenpair (σ², v₁) of the
/// member Gram. Returns the eigenpair and the sparse coefficient column as (index, value) pairs.
template <typename Scalar>
std::pair<EigPair<Scalar>, std::vector<std::pair<Eigen::Index, Scalar>>> update_cluster(
    const KernelMatrix<Scalar>& gram, std::span<const Eigen::Index> members) {
    if (members.empty()) throw DomainError("update_cluster: empty cluster");
    const auto sub = gram.principal(members);
    auto eig = leading_eigenpair(sub);
    const Scalar scale = std::max(Scalar(1), sub.diagonal().maxCoeff());
    if (!(eig.value > Scalar(1e-12) * scale))
        throw DegenerateClusterError("update_cluster: zero leading eigenvalue");
    const Scalar inv_sigma = Scalar(1) / std::sqrt(eig.value);
    std::vector<std::pair<Eigen::Index, Scalar>> column;
    column.reserve(members.size());
    for (std::size_t j = 0; j < members.size(); ++j)
        column.emplace_back(members[j], eig.vector(static_cast<Eigen::Index>(j)) * inv_sigma);
    std::sort(column.begin(), column.end());
    return {std::move(eig), std::move(column)};
}

namespace detail {

template <typename Scalar>
typename KernelDictionary<Scalar>::Sparse build_coeffs(
    Eigen::Index t, const std::vector<std::vector<std::pair<Eigen::Index, Scalar>>>& columns) {
    std::vector<Eigen::Triplet<Scalar, Eigen::Index>> trip;
    for (std::size_t k = 0; k < columns.size(); ++k)
        for (const auto& [row, v] : columns[k]) trip.emplace_back(row, static_cast<Eigen::Index>(k), v);
    typename KernelDictionary<Scalar>::Sparse a(t, static_cast<Eigen::Index>(columns.size()));
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    return a;
}

/// Farthest-point seeding in kernel distance d²(i,j) = K_ii + K_jj − 2K_ij.
template <typename Scalar>
std::vector<Eigen::Index> farthest_point_seeds(const KernelMatrix<Scalar>& gram, Eigen::Index k,
                                               std::uint64_t seed) {
    using Index = Eigen::Index;
    const Index t = gram.size();
    const auto diag = gram.diagonal();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Index> pick(0, t - 1);
    std::vector<Index> seeds{pick(rng)};
    std::vector<bool> chosen(static_cast<std::size_t>(t), false);
    chosen[static_cast<std::size_t>(seeds[0])] = true;

    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dmin(t);
    auto relax = [&](Index c, bool first) {
        const auto col = gram.column(c);
        for (Index j = 0; j < t; ++j) {
            const Scalar d = std::max(Scalar(0), diag(j) + diag(c) - Scalar(2) * col(j));
            dmin(j) = first ? d : std::min(dmin(j), d);
        }
    };
    relax(seeds[0], true);
    if (k > 1 && dmin.maxCoeff() <= Scalar(1e-12) * std::max(Scalar(1), diag.maxCoeff()))
        throw DomainError("learn: all training samples are identical in feature space");
    while (static_cast<Index>(seeds.size()) < k) {
        Index next = -1;
        Scalar best = Scalar(-1);
        for (Index j = 0; j < t; ++j) {
            if (chosen[static_cast<std::size_t>(j)]) continue;
            if (dmin(j) > best) {
                best = dmin(j);
                next = j;
            }
        }
        seeds.push_back(next);
        chosen[static_cast<std::size_t>(next)] = true;
        relax(next, false);
    }
    return seeds;
}

template <typename Scalar>
typename KernelDictionary<Scalar>::Matrix atom_gram(const KernelMatrix<Scalar>& gram,
                                                    const typename KernelDictionary<Scalar>::Sparse& a) {
    typename KernelDictionary<Scalar>::Matrix ka = gram.times(a);
    typename KernelDictionary<Scalar>::Matrix g = a.transpose() * ka;
    return (g + g.transpose()) / Scalar(2);
}

}  // namespace detail

/// Kernel K-lines clustering: alternates maximum-|correlation| assignment with rank-1 cluster updates
/// until memberships stop changing or max_iters is reached. Empty clusters are reseeded from the
/// sample with the largest residual.
template <typename Scalar>
LearnResult<Scalar> learn(const KernelMatrix<Scalar>& gram, Eigen::Index k, std::uint64_t init_seed,
                          int max_iters = 100, std::string train_ref = {}) {
    using Index = Eigen::Index;
    const Index t = gram.size();
    if (k <= 0) throw DomainError("learn: k must be positive");
    if (k > t) throw DomainError("learn: k exceeds the number of training samples");
    if (max_iters <= 0) throw DomainError("learn: max_iters must be positive");

    const auto diag = gram.diagonal();
    std::vector<std::vector<std::pair<Index, Scalar>>> columns(static_cast<std::size_t>(k));
    const auto seeds = detail::farthest_point_seeds(gram, k, init_seed);
    for (Index c = 0; c < k; ++c) {
        const Index s = seeds[static_cast<std::size_t>(c)];
        columns[static_cast<std::size_t>(c)] = {{s, Scalar(1) / std::sqrt(diag(s))}};
    }

    LearnResult<Scalar> res;
    res.dictionary.train_ref = std::move(train_ref);
    res.dictionary.coeffs = detail::build_coeffs<Scalar>(t, columns);

    for (int it = 1; it <= max_iters; ++it) {
        ClusterState<Scalar> st = assign(gram, res.dictionary);
        res.objective_trace.push_back(st.objective);
        res.iterations = it;
        const bool unchanged = it > 1 && st.memberships == res.state.memberships;
        res.state = std::move(st);
        if (unchanged) {
            res.converged = true;
            break;
        }

        std::vector<bool> reseeded(static_cast<std::size_t>(t), false);
        for (Index c = 0; c < k; ++c) {
            const auto& members = res.state.memberships[static_cast<std::size_t>(c)];
            if (!members.empty()) {
                columns[static_cast<std::size_t>(c)] = update_cluster(gram, std::span<const Index>(members)).second;
                continue;
            }
            Index worst = -1;
            Scalar worst_err = Scalar(-1);
            for (Index i = 0; i < t; ++i) {
                if (reseeded[static_cast<std::size_t>(i)]) continue;
                const Scalar w = res.state.weights(i);
                const Scalar err = diag(i) - w * w;
                if (err > worst_err) {
                    worst_err = err;
                    worst = i;
                }
            }
            reseeded[static_cast<std::size_t>(worst)] = true;
            columns[static_cast<std::size_t>(c)] = {{worst, Scalar(1) / std::sqrt(diag(worst))}};
        }
        res.dictionary.coeffs = detail::build_coeffs<Scalar>(t, columns);

        if (it == max_iters) {
            ClusterState<Scalar> last = assign(gram, res.dictionary);
            res.converged = last.memberships == res.state.memberships;
            res.state = std::move(last);
            res.objective_trace.push_back(res.state.objective);
        }
    }
    res.dictionary.atom_gram = detail::atom_gram(gram, res.dictionary.coeffs);
    return res;
}

/// Feature-space objective Σ_i ‖Φ(y_i) − w_i Φ(Y)a_{c(i)}‖² recomputed from Gram entries.
template <typename Scalar>
Scalar clustering_objective(const KernelMatrix<Scalar>& gram, const KernelDictionary<Scalar>& dict,
                            const ClusterState<Scalar>& st) {
    const auto corr = gram.times(dict.coeffs);
    const auto diag = gram.diagonal();
    Scalar total = 0;
    for (Eigen::Index i = 0; i < gram.size(); ++i) {
        const Eigen::Index c = st.assignment[static_cast<std::size_t>(i)];
        const Scalar w = st.weights(i);
        total += diag(i) - Scalar(2) * w * corr(i, c) + w * w * dict.atom_gram(c, c);
    }
    return total;
}

}  // namespace kernseg
