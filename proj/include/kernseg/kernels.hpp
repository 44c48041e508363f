#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "kernseg/errors.hpp"

namespace kernseg {

enum class IntensityScale : std::uint8_t { Raw0To255 = 0, UnitInterval = 1 };
enum class DistanceFn : std::uint8_t { AbsoluteScalar = 0, Euclidean = 1 };
enum class Fusion : std::uint8_t { WeightedSum = 0, Hadamard = 1 };
enum class KernelKind : std::uint8_t { Intensity = 0, Location = 1, Ensemble = 2, Generic = 3 };

/// RBF parameters for the per-pixel intensity kernel.
class KernelConfig {
public:
    explicit KernelConfig(double gamma_intensity = 0.3,
                          IntensityScale scale = IntensityScale::Raw0To255,
                          DistanceFn distance = DistanceFn::AbsoluteScalar)
        : gamma_(gamma_intensity), scale_(scale), distance_(distance) {
        if (!(gamma_ > 0.0) || !std::isfinite(gamma_))
            throw DomainError("KernelConfig: gamma_intensity must be a positive finite value");
    }

    double gamma_intensity() const noexcept { return gamma_; }
    IntensityScale intensity_scale() const noexcept { return scale_; }
    DistanceFn distance_fn() const noexcept { return distance_; }

    /// Intensity value as seen by the kernel.
    double scaled(double raw) const noexcept {
        return scale_ == IntensityScale::UnitInterval ? raw / 255.0 : raw;
    }

    friend bool operator==(const KernelConfig&, const KernelConfig&) = default;

private:
    double gamma_;
    IntensityScale scale_;
    DistanceFn distance_;
};

/// How base kernels are combined, plus the spatial-location kernel parameters.
class EnsembleConfig {
public:
    explicit EnsembleConfig(Fusion fusion = Fusion::Hadamard, std::vector<double> weights = {},
                            double gamma_location = 0.5, int neighborhood_radius = 5)
        : fusion_(fusion), weights_(std::move(weights)), gamma_location_(gamma_location),
          radius_(neighborhood_radius) {
        if (!(gamma_location_ > 0.0) || !std::isfinite(gamma_location_))
            throw DomainError("EnsembleConfig: gamma_location must be a positive finite value");
        if (radius_ < 0) throw DomainError("EnsembleConfig: neighborhood_radius must be >= 0");
        if (fusion_ == Fusion::WeightedSum) {
            bool any_positive = false;
            for (double b : weights_) {
                if (!(b >= 0.0) || !std::isfinite(b))
                    throw DomainError("EnsembleConfig: fusion weights must be finite and nonnegative");
                any_positive = any_positive || b > 0.0;
            }
            if (!any_positive) throw DomainError("EnsembleConfig: weighted_sum needs a positive weight");
        }
    }

    Fusion fusion() const noexcept { return fusion_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    double gamma_location() const noexcept { return gamma_location_; }
    int neighborhood_radius() const noexcept { return radius_; }

    friend bool operator==(const EnsembleConfig&, const EnsembleConfig&) = default;

private:
    Fusion fusion_;
    std::vector<double> weights_;
    double gamma_location_;
    int radius_;
};

template <typename Scalar>
using Location = Eigen::Matrix<Scalar, 2, 1>;

/// Symmetric Gram matrix with either dense or compressed-column storage. Sparse storage is used for
/// large pixel populations where most entries underflow (narrow RBF, bounded neighborhoods).
template <typename Scalar>
class KernelMatrix {
public:
    using Index = Eigen::Index;
    using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Sparse = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, Index>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    static constexpr double kSymmetryTol = 1e-12;

    KernelMatrix(Dense entries, KernelKind kind) : storage_(std::move(entries)), kind_(kind) {
        const auto& m = std::get<Dense>(storage_);
        if (m.rows() != m.cols() || m.rows() == 0)
            throw DomainError("KernelMatrix: entries must be a nonempty square matrix");
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol)
            throw DomainError("KernelMatrix: entries are not symmetric");
    }

    KernelMatrix(Sparse entries, KernelKind kind) : storage_(std::move(entries)), kind_(kind) {
        auto& m = std::get<Sparse>(storage_);
        if (m.rows() != m.cols() || m.rows() == 0)
            throw DomainError("KernelMatrix: entries must be a nonempty square matrix");
        m.makeCompressed();
    }

    Index size() const noexcept {
        return std::visit([](const auto& m) { return static_cast<Index>(m.rows()); }, storage_);
    }
    KernelKind kind() const noexcept { return kind_; }
    bool is_sparse() const noexcept { return std::holds_alternative<Sparse>(storage_); }

    const Dense& dense() const {
        if (is_sparse()) throw DomainError("KernelMatrix: dense() on sparse storage");
        return std::get<Dense>(storage_);
    }
    const Sparse& sparse() const {
        if (!is_sparse()) throw DomainError("KernelMatrix: sparse() on dense storage");
        return std::get<Sparse>(storage_);
    }
    Dense to_dense() const { return is_sparse() ? Dense(sparse()) : dense(); }

    Scalar coeff(Index i, Index j) const {
        return is_sparse() ? sparse().coeff(i, j) : dense()(i, j);
    }

    Vector diagonal() const {
        if (!is_sparse()) return dense().diagonal();
        Vector d(size());
        for (Index j = 0; j < size(); ++j) d(j) = sparse().coeff(j, j);
        return d;
    }

    Vector column(Index j) const {
        if (!is_sparse()) return dense().col(j);
        Vector c = Vector::Zero(size());
        for (typename Sparse::InnerIterator it(sparse(), j); it; ++it) c(it.row()) = it.value();
        return c;
    }

    /// Principal submatrix on the given (unique) indices, in the given order.
    Dense principal(std::span<const Index> idx) const {
        const Index n = static_cast<Index>(idx.size());
        Dense out(n, n);
        if (!is_sparse()) {
            for (Index b = 0; b < n; ++b)
                for (Index a = 0; a < n; ++a) out(a, b) = dense()(idx[a], idx[b]);
            return out;
        }
        out.setZero();
        std::vector<std::pair<Index, Index>> order(idx.size());
        for (Index a = 0; a < n; ++a) order[a] = {idx[a], a};
        std::sort(order.begin(), order.end());
        for (Index b = 0; b < n; ++b) {
            for (typename Sparse::InnerIterator it(sparse(), idx[b]); it; ++it) {
                auto found = std::lower_bound(order.begin(), order.end(), std::make_pair(it.row(), Index{0}));
                if (found != order.end() && found->first == it.row()) out(found->second, b) = it.value();
            }
        }
        return out;
    }

    /// Gram times a sparse coefficient matrix (T x K), returned dense.
    Dense times(const Sparse& coeffs) const {
        if (coeffs.rows() != size()) throw DomainError("KernelMatrix::times: dimension mismatch");
        Dense out = Dense::Zero(size(), coeffs.cols());
        for (Index k = 0; k < coeffs.cols(); ++k) {
            for (typename Sparse::InnerIterator a(coeffs, k); a; ++a) {
                if (is_sparse()) {
                    for (typename Sparse::InnerIterator g(sparse(), a.row()); g; ++g)
                        out(g.row(), k) += a.value() * g.value();
                } else {
                    out.col(k) += a.value() * dense().col(a.row());
                }
            }
        }
        return out;
    }

private:
    std::variant<Dense, Sparse> storage_;
    KernelKind kind_;
};

/// exp(-gamma (a-b)^2).
template <typename Scalar>
Scalar rbf_eval(Scalar a, Scalar b, Scalar gamma) {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(gamma))
        throw DomainError("rbf_eval: non-finite input");
    if (!(gamma > Scalar(0))) throw DomainError("rbf_eval: gamma must be positive");
    const Scalar d = a - b;
    return std::exp(-gamma * d * d);
}

template <typename Scalar>
KernelMatrix<Scalar> gram_intensity(std::span<const Scalar> samples, const KernelConfig& cfg) {
    if (samples.empty()) throw DomainError("gram_intensity: empty sample list");
    const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
    const Scalar gamma = static_cast<Scalar>(cfg.gamma_intensity());
    typename KernelMatrix<Scalar>::Dense g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        g(j, j) = Scalar(1);
        const Scalar bj = static_cast<Scalar>(cfg.scaled(samples[j]));
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const Scalar v = rbf_eval(static_cast<Scalar>(cfg.scaled(samples[i])), bj, gamma);
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return KernelMatrix<Scalar>(std::move(g), KernelKind::Intensity);
}

template <typename Scalar>
Scalar chebyshev(const Location<Scalar>& a, const Location<Scalar>& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

/// exp(-gamma_L |l_i - l_j|^2) inside the Chebyshev neighborhood, 0 outside.
template <typename Scalar>
Scalar location_kernel(const Location<Scalar>& a, const Location<Scalar>& b, const EnsembleConfig& cfg) {
    if (chebyshev(a, b) > static_cast<Scalar>(cfg.neighborhood_radius())) return Scalar(0);
    return std::exp(-static_cast<Scalar>(cfg.gamma_location()) * (a - b).squaredNorm());
}

template <typename Scalar>
KernelMatrix<Scalar> gram_location(std::span<const Location<Scalar>> locations, const EnsembleConfig& cfg) {
    if (locations.empty()) throw DomainError("gram_location: empty location list");
    const Eigen::Index n = static_cast<Eigen::Index>(locations.size());
    typename KernelMatrix<Scalar>::Dense g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        g(j, j) = Scalar(1);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const Scalar v = location_kernel(locations[i], locations[j], cfg);
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return KernelMatrix<Scalar>(std::move(g), KernelKind::Location);
}

/// RBF on Euclidean distance between sample columns.
template <typename Derived>
KernelMatrix<typename Derived::Scalar> gram_vectors(const Eigen::MatrixBase<Derived>& samples, double gamma) {
    using Scalar = typename Derived::Scalar;
    if (samples.cols() == 0) throw DomainError("gram_vectors: empty sample list");
    if (!(gamma > 0.0)) throw DomainError("gram_vectors: gamma must be positive");
    const Eigen::Index n = samples.cols();
    typename KernelMatrix<Scalar>::Dense g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        g(j, j) = Scalar(1);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const Scalar v = std::exp(-Scalar(gamma) * (samples.col(i) - samples.col(j)).squaredNorm());
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return KernelMatrix<Scalar>(std::move(g), KernelKind::Generic);
}

/// Plain inner-product Gram YᵀY; feature space equals input space.
template <typename Derived>
KernelMatrix<typename Derived::Scalar> gram_linear(const Eigen::MatrixBase<Derived>& samples) {
    using Scalar = typename Derived::Scalar;
    if (samples.cols() == 0) throw DomainError("gram_linear: empty sample list");
    typename KernelMatrix<Scalar>::Dense g = samples.transpose() * samples;
    g = (g + g.transpose()).eval() / Scalar(2);
    return KernelMatrix<Scalar>(std::move(g), KernelKind::Generic);
}

/// Mercer check: true iff the smallest eigenvalue is >= -tol.
template <typename Scalar>
bool validate_psd(const typename KernelMatrix<Scalar>::Dense& m, Scalar tol) {
    if (m.rows() != m.cols() || m.rows() == 0) throw DomainError("validate_psd: matrix must be square and nonempty");
    const Scalar scale = std::max(Scalar(1), m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale)
        throw DomainError("validate_psd: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<typename KernelMatrix<Scalar>::Dense> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("validate_psd: eigensolver failed");
    return es.eigenvalues().minCoeff() >= -tol;
}

template <typename Scalar>
bool validate_psd(const KernelMatrix<Scalar>& m, Scalar tol) {
    return validate_psd<Scalar>(m.to_dense(), tol);
}

inline constexpr double kPsdTolerance = 1e-8;

/// Weighted sum or Hadamard product of same-size Grams; the result is PSD-validated.
template <typename Scalar>
KernelMatrix<Scalar> fuse(std::span<const KernelMatrix<Scalar>> matrices, const EnsembleConfig& cfg) {
    if (matrices.empty()) throw DomainError("fuse: no matrices");
    const Eigen::Index n = matrices.front().size();
    for (const auto& m : matrices)
        if (m.size() != n) throw DomainError("fuse: matrix size mismatch");

    typename KernelMatrix<Scalar>::Dense out;
    if (cfg.fusion() == Fusion::WeightedSum) {
        if (cfg.weights().size() != matrices.size())
            throw DomainError("fuse: weight count does not match matrix count");
        out = KernelMatrix<Scalar>::Dense::Zero(n, n);
        for (std::size_t r = 0; r < matrices.size(); ++r) {
            if (cfg.weights()[r] == 0.0) continue;
            out += static_cast<Scalar>(cfg.weights()[r]) * matrices[r].to_dense();
        }
    } else {
        out = matrices.front().to_dense();
        for (std::size_t r = 1; r < matrices.size(); ++r) out = out.cwiseProduct(matrices[r].to_dense());
    }
    if (!validate_psd<Scalar>(out, static_cast<Scalar>(kPsdTolerance)))
        throw ValidationError("fuse: ensemble kernel violates the Mercer condition");
    return KernelMatrix<Scalar>(std::move(out), KernelKind::Ensemble);
}

/// RBF values for 8-bit intensity pairs, indexed by (a - b + 255).
template <typename Scalar>
class IntensityLut {
public:
    explicit IntensityLut(const KernelConfig& cfg) {
        for (int d = -255; d <= 255; ++d) {
            const double s = cfg.scaled(static_cast<double>(d));
            table_[static_cast<std::size_t>(d + 255)] = static_cast<Scalar>(std::exp(-cfg.gamma_intensity() * s * s));
        }
    }
    Scalar operator()(std::uint8_t a, std::uint8_t b) const noexcept {
        return table_[static_cast<std::size_t>(int(a) - int(b) + 255)];
    }

private:
    std::array<Scalar, 511> table_{};
};

/// Sparse intensity Gram for 8-bit samples; entries below drop_tol are omitted.
template <typename Scalar>
KernelMatrix<Scalar> gram_intensity_sparse(std::span<const std::uint8_t> samples, const KernelConfig& cfg,
                                           Scalar drop_tol) {
    using Sparse = typename KernelMatrix<Scalar>::Sparse;
    using Index = Eigen::Index;
    if (samples.empty()) throw DomainError("gram_intensity_sparse: empty sample list");
    const IntensityLut<Scalar> lut(cfg);
    const Index n = static_cast<Index>(samples.size());

    // Bucket sample indices by value so each column only visits nearby intensities.
    std::array<std::vector<Index>, 256> by_value;
    for (Index i = 0; i < n; ++i) by_value[samples[i]].push_back(i);
    int reach = 0;
    while (reach < 255 && lut(std::uint8_t(reach + 1), 0) >= drop_tol) ++reach;

    std::vector<Index> outer(static_cast<std::size_t>(n) + 1, 0);
    std::vector<Index> inner;
    std::vector<Scalar> values;
    std::vector<Index> rows;
    for (Index j = 0; j < n; ++j) {
        const int vj = samples[j];
        rows.clear();
        for (int v = std::max(0, vj - reach); v <= std::min(255, vj + reach); ++v)
            rows.insert(rows.end(), by_value[v].begin(), by_value[v].end());
        std::sort(rows.begin(), rows.end());
        for (Index i : rows) {
            const Scalar g = lut(samples[i], samples[j]);
            if (g >= drop_tol) {
                inner.push_back(i);
                values.push_back(g);
            }
        }
        outer[j + 1] = static_cast<Index>(inner.size());
    }
    Sparse m(n, n);
    m.resizeNonZeros(static_cast<Index>(inner.size()));
    std::copy(outer.begin(), outer.end(), m.outerIndexPtr());
    std::copy(inner.begin(), inner.end(), m.innerIndexPtr());
    std::copy(values.begin(), values.end(), m.valuePtr());
    return KernelMatrix<Scalar>(std::move(m), KernelKind::Intensity);
}

/// Sparse Hadamard ensemble K_I ⊙ K_L for 8-bit intensities with locations. Only pairs inside the
/// Chebyshev neighborhood are visited.
template <typename Scalar>
KernelMatrix<Scalar> gram_ensemble_sparse(std::span<const std::uint8_t> intensities,
                                          std::span<const Location<Scalar>> locations, const KernelConfig& kcfg,
                                          const EnsembleConfig& ecfg, Scalar drop_tol) {
    using Sparse = typename KernelMatrix<Scalar>::Sparse;
    using Index = Eigen::Index;
    if (intensities.empty()) throw DomainError("gram_ensemble_sparse: empty sample list");
    if (intensities.size() != locations.size()) throw DomainError("gram_ensemble_sparse: size mismatch");
    if (ecfg.fusion() != Fusion::Hadamard)
        throw DomainError("gram_ensemble_sparse: only Hadamard fusion yields a sparse ensemble");
    const IntensityLut<Scalar> lut(kcfg);
    const Index n = static_cast<Index>(intensities.size());
    const Scalar radius = static_cast<Scalar>(ecfg.neighborhood_radius());
    const Scalar cell = std::max(Scalar(1), radius);

    Scalar min_r = locations[0](0), min_c = locations[0](1), max_r = min_r, max_c = min_c;
    for (const auto& l : locations) {
        min_r = std::min(min_r, l(0));
        min_c = std::min(min_c, l(1));
        max_r = std::max(max_r, l(0));
        max_c = std::max(max_c, l(1));
    }
    const Index grid_rows = static_cast<Index>(std::floor((max_r - min_r) / cell)) + 1;
    const Index grid_cols = static_cast<Index>(std::floor((max_c - min_c) / cell)) + 1;
    auto cell_of = [&](const Location<Scalar>& l) {
        return std::pair<Index, Index>{static_cast<Index>(std::floor((l(0) - min_r) / cell)),
                                       static_cast<Index>(std::floor((l(1) - min_c) / cell))};
    };
    std::vector<std::vector<Index>> buckets(static_cast<std::size_t>(grid_rows * grid_cols));
    for (Index i = 0; i < n; ++i) {
        auto [r, c] = cell_of(locations[i]);
        buckets[static_cast<std::size_t>(r * grid_cols + c)].push_back(i);
    }

    std::vector<Index> outer(static_cast<std::size_t>(n) + 1, 0);
    std::vector<Index> inner;
    std::vector<Scalar> values;
    std::vector<Index> rows;
    for (Index j = 0; j < n; ++j) {
        auto [r, c] = cell_of(locations[j]);
        rows.clear();
        for (Index rr = std::max<Index>(0, r - 1); rr <= std::min(grid_rows - 1, r + 1); ++rr)
            for (Index cc = std::max<Index>(0, c - 1); cc <= std::min(grid_cols - 1, c + 1); ++cc) {
                const auto& b = buckets[static_cast<std::size_t>(rr * grid_cols + cc)];
                rows.insert(rows.end(), b.begin(), b.end());
            }
        std::sort(rows.begin(), rows.end());
        for (Index i : rows) {
            const Scalar ki = lut(intensities[i], intensities[j]);
            if (ki < drop_tol) continue;
            const Scalar g = ki * location_kernel(locations[i], locations[j], ecfg);
            if (g >= drop_tol) {
                inner.push_back(i);
                values.push_back(g);
            }
        }
        outer[j + 1] = static_cast<Index>(inner.size());
    }
    Sparse m(n, n);
    m.resizeNonZeros(static_cast<Index>(inner.size()));
    std::copy(outer.begin(), outer.end(), m.outerIndexPtr());
    std::copy(inner.begin(), inner.end(), m.innerIndexPtr());
    std::copy(values.begin(), values.end(), m.valuePtr());
    return KernelMatrix<Scalar>(std::move(m), KernelKind::Ensemble);
}

}  // namespace kernseg
