#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kernseg/errors.hpp"
#include "kernseg/kernels.hpp"

namespace kernseg {

struct SolverConfig {
    double lambda = 0.1;
    double kkt_tol = 1e-6;
    std::optional<int> max_nonzeros;

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("SolverConfig: lambda must be >= 0");
        if (!(kkt_tol > 0.0)) throw DomainError("SolverConfig: kkt_tol must be > 0");
        if (max_nonzeros && *max_nonzeros <= 0) throw DomainError("SolverConfig: max_nonzeros must be positive");
    }
};

/// Atom-atom similarity matrix K_DD, checked once for symmetry and PSD so that per-pixel coding
/// problems can share it without revalidation.
template <typename Scalar>
class AtomGram {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    explicit AtomGram(Matrix m, Scalar psd_tol = Scalar(kPsdTolerance)) : m_(std::move(m)) {
        if (m_.rows() != m_.cols() || m_.rows() == 0) throw DomainError("AtomGram: must be square and nonempty");
        if (!m_.allFinite()) throw DomainError("AtomGram: non-finite entries");
        if (!validate_psd<Scalar>(m_, psd_tol)) throw DomainError("AtomGram: atom Gram is not positive semidefinite");
    }

    const Matrix& matrix() const noexcept { return m_; }
    Eigen::Index size() const noexcept { return m_.rows(); }

private:
    Matrix m_;
};

/// Kernel sparse coding inputs: K(y,y), K(D,y) and the shared K(D,D).
template <typename Scalar>
struct CodingProblem {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Scalar k_yy{1};
    Vector k_dy;
    std::shared_ptr<const AtomGram<Scalar>> k_dd;

    void validate() const {
        if (!k_dd) throw DomainError("CodingProblem: missing atom Gram");
        if (k_dy.size() != k_dd->size()) throw DomainError("CodingProblem: K_Dy length does not match K_DD");
        if (!(k_yy > Scalar(0)) || !std::isfinite(k_yy)) throw DomainError("CodingProblem: K_yy must be positive");
        if (!k_dy.allFinite()) throw DomainError("CodingProblem: non-finite K_Dy");
    }
};

template <typename Scalar>
CodingProblem<Scalar> make_problem(Scalar k_yy, Eigen::Matrix<Scalar, Eigen::Dynamic, 1> k_dy,
                                   Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> k_dd) {
    CodingProblem<Scalar> p{k_yy, std::move(k_dy), std::make_shared<const AtomGram<Scalar>>(std::move(k_dd))};
    p.validate();
    return p;
}

template <typename Scalar>
struct SparseCode {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coefficients;
    std::vector<Eigen::Index> support;  // ascending
    Scalar objective_value{0};
    Scalar residual_sq{0};
    int steps = 0;

    Scalar l1() const { return coefficients.template lpNorm<1>(); }
};

/// Raised when the feature-sign iteration budget runs out; carries the best iterate reached.
template <typename Scalar>
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, SparseCode<Scalar> best)
        : std::runtime_error(what), best_(std::move(best)) {}
    const SparseCode<Scalar>& best_iterate() const noexcept { return best_; }

private:
    SparseCode<Scalar> best_;
};

namespace detail {

template <typename Matrix, typename Vector>
Vector solve_spd_or_pinv(const Matrix& a, const Vector& b) {
    Eigen::LDLT<Matrix> ldlt(a);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-12) return ldlt.solve(b);
    return Eigen::CompleteOrthogonalDecomposition<Matrix>(a).solve(b);
}

template <typename Scalar>
int sign_of(Scalar v) {
    return (v > Scalar(0)) - (v < Scalar(0));
}

}  // namespace detail

/// K_yy - 2 xᵀK_Dy + xᵀK_DD x, i.e. the squared feature-space residual of code x.
template <typename Scalar, typename Derived>
Scalar residual_sq(const CodingProblem<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
    p.validate();
    if (x.size() != p.k_dy.size()) throw DomainError("residual_sq: code length does not match dictionary size");
    const Scalar r = p.k_yy - Scalar(2) * x.dot(p.k_dy) + x.dot(p.k_dd->matrix() * x);
    if (r >= Scalar(0)) return r;
    if (r >= Scalar(-1e-10)) return Scalar(0);
    throw DomainError("residual_sq: negative residual " + std::to_string(static_cast<double>(r)) +
                      "; kernel data is inconsistent");
}

/// Minimizes K_yy - 2xᵀK_Dy + xᵀK_DD x + lambda |x|_1 by feature-sign search. Activation picks the
/// largest gradient violation among zero coefficients (lowest index on ties); each feature-sign step
/// solves the active-set quadratic and line-searches over sign changes.
template <typename Scalar>
SparseCode<Scalar> solve(const CodingProblem<Scalar>& p, const SolverConfig& cfg) {
    using Index = Eigen::Index;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    p.validate();
    cfg.validate();
    const Matrix& g = p.k_dd->matrix();
    const Index n = g.rows();
    const Scalar lambda = static_cast<Scalar>(cfg.lambda);
    const Scalar half_lambda = lambda / Scalar(2);
    // Activation threshold on |gradient|; strictly above lambda so duplicated atoms are never added.
    const Scalar activate_above = lambda + std::max(Scalar(1e-12), Scalar(1e-9) * lambda);
    const Scalar inner_tol = Scalar(1e-11) * std::max(Scalar(1), lambda);
    const int budget = std::max<int>(10, 10 * static_cast<int>(n));
    const std::size_t cap = cfg.max_nonzeros ? static_cast<std::size_t>(*cfg.max_nonzeros) : std::size_t(n);

    Vector x = Vector::Zero(n);
    std::vector<Index> active;
    Vector kx_minus = -p.k_dy;  // K_DD x - K_Dy; gradient of the smooth part is twice this

    auto refresh_gradient = [&] {
        kx_minus = -p.k_dy;
        for (Index j : active) kx_minus.noalias() += g.col(j) * x(j);
    };
    auto finish = [&](int steps) {
        SparseCode<Scalar> code;
        code.coefficients = x;
        for (Index i = 0; i < n; ++i)
            if (x(i) != Scalar(0)) code.support.push_back(i);
        const Scalar quad = p.k_yy - Scalar(2) * x.dot(p.k_dy) + x.dot(g * x);
        code.residual_sq = quad < Scalar(0) && quad >= Scalar(-1e-10) ? Scalar(0) : quad;
        code.objective_value = code.residual_sq + lambda * x.template lpNorm<1>();
        code.steps = steps;
        return code;
    };

    int steps = 0;
    for (;;) {
        // Activate the zero coefficient with the largest violation.
        Index pick = -1;
        Scalar best = activate_above;
        if (active.size() < cap) {
            for (Index i = 0; i < n; ++i) {
                if (x(i) != Scalar(0)) continue;
                const Scalar v = Scalar(2) * std::abs(kx_minus(i));
                if (v > best) {
                    best = v;
                    pick = i;
                }
            }
        }
        if (pick < 0) break;
        active.push_back(pick);
        std::sort(active.begin(), active.end());

        // Feature-sign steps until the active set is optimal. theta holds the sign pattern;
        // the freshly activated coordinate takes the sign that decreases the objective.
        std::vector<int> theta(active.size());
        for (std::size_t a = 0; a < active.size(); ++a) {
            const Index j = active[a];
            theta[a] = j == pick ? -detail::sign_of(kx_minus(j)) : detail::sign_of(x(j));
        }
        for (;;) {
            if (++steps > budget)
                throw SolverError<Scalar>("solve: feature-sign step budget exhausted", finish(steps));
            const Index m = static_cast<Index>(active.size());
            Matrix gaa(m, m);
            Vector rhs(m), cur(m);
            for (Index b = 0; b < m; ++b) {
                for (Index a = 0; a < m; ++a) gaa(a, b) = g(active[a], active[b]);
                rhs(b) = p.k_dy(active[b]) - half_lambda * Scalar(theta[b]);
                cur(b) = x(active[b]);
            }
            const Vector target = detail::solve_spd_or_pinv(gaa, rhs);
            Vector kdy_a(m);
            for (Index a = 0; a < m; ++a) kdy_a(a) = p.k_dy(active[a]);
            auto objective = [&](const Vector& z) {
                return p.k_yy - Scalar(2) * z.dot(kdy_a) + z.dot(gaa * z) + lambda * z.template lpNorm<1>();
            };

            // Candidate points: every sign change along cur -> target, then target itself.
            std::vector<std::pair<Scalar, Index>> crossings;
            for (Index a = 0; a < m; ++a) {
                if (cur(a) != Scalar(0) && detail::sign_of(target(a)) != detail::sign_of(cur(a))) {
                    const Scalar t = cur(a) / (cur(a) - target(a));
                    if (t > Scalar(0) && t < Scalar(1)) crossings.emplace_back(t, a);
                }
            }
            std::sort(crossings.begin(), crossings.end());
            Vector best_z = target;
            Scalar best_f = objective(target);
            for (const auto& [t, a] : crossings) {
                Vector z = cur + t * (target - cur);
                z(a) = Scalar(0);
                const Scalar f = objective(z);
                if (f < best_f) {
                    best_f = f;
                    best_z = std::move(z);
                }
            }
            for (Index a = 0; a < m; ++a) x(active[a]) = best_z(a);

            std::vector<Index> kept;
            for (Index j : active)
                if (x(j) != Scalar(0)) kept.push_back(j);
            active = std::move(kept);
            theta.assign(active.size(), 0);
            for (std::size_t a = 0; a < active.size(); ++a) theta[a] = detail::sign_of(x(active[a]));
            refresh_gradient();

            Scalar worst = 0;
            for (Index j : active)
                worst = std::max(worst, std::abs(Scalar(2) * kx_minus(j) + lambda * Scalar(detail::sign_of(x(j)))));
            if (worst <= inner_tol) break;
        }
    }
    return finish(steps);
}

/// Greedy support growth (orthogonal matching pursuit in feature space) with least-squares refit;
/// entry s is the squared residual using at most s atoms. Uses an incremental Cholesky factor so the
/// error drops by a nonnegative square at each step.
template <typename Scalar>
std::vector<std::pair<int, Scalar>> reconstruction_curve(const CodingProblem<Scalar>& p, int max_s) {
    using Index = Eigen::Index;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    p.validate();
    const Matrix& g = p.k_dd->matrix();
    const Index n = g.rows();
    if (max_s <= 0) throw DomainError("reconstruction_curve: max_s must be positive");
    if (max_s > n) throw DomainError("reconstruction_curve: max_s exceeds dictionary size");

    std::vector<Index> support;
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    Matrix chol = Matrix::Zero(max_s, max_s);  // lower-triangular factor of K_SS
    Vector z = Vector::Zero(max_s);            // chol^{-1} K_Dy restricted to the support
    Vector residual_corr = p.k_dy;
    Scalar err = p.k_yy;

    std::vector<std::pair<int, Scalar>> curve;
    for (int s = 1; s <= max_s; ++s) {
        const Index m = static_cast<Index>(support.size());
        std::vector<Index> order;
        for (Index i = 0; i < n; ++i)
            if (!used[static_cast<std::size_t>(i)]) order.push_back(i);
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            return std::abs(residual_corr(a)) > std::abs(residual_corr(b));
        });

        for (Index cand : order) {
            Vector w(m);
            for (Index a = 0; a < m; ++a) w(a) = g(support[a], cand);
            if (m > 0) chol.topLeftCorner(m, m).template triangularView<Eigen::Lower>().solveInPlace(w);
            const Scalar pivot = g(cand, cand) - w.squaredNorm();
            if (!(pivot > Scalar(1e-12) * std::max(Scalar(1), g(cand, cand)))) {
                used[static_cast<std::size_t>(cand)] = true;  // linearly dependent on the support
                continue;
            }
            const Scalar d = std::sqrt(pivot);
            chol.row(m).head(m) = w.transpose();
            chol(m, m) = d;
            z(m) = (p.k_dy(cand) - (m > 0 ? w.dot(z.head(m)) : Scalar(0))) / d;
            err -= z(m) * z(m);
            support.push_back(cand);
            used[static_cast<std::size_t>(cand)] = true;

            const Index k = m + 1;
            Vector coef = chol.topLeftCorner(k, k).template triangularView<Eigen::Lower>().transpose().solve(z.head(k));
            residual_corr = p.k_dy;
            for (Index a = 0; a < k; ++a) residual_corr.noalias() -= g.col(support[a]) * coef(a);
            break;
        }
        curve.emplace_back(s, std::max(err, Scalar(0)));
    }
    return curve;
}

}  // namespace kernseg
