#include "kernseg/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "kernseg/errors.hpp"

namespace kernseg {

namespace {

struct SparseRow {
    std::vector<std::pair<Eigen::Index, double>> entries;
    double sq_norm = 1.0;  // includes the constant bias feature

    double dot(const Eigen::VectorXd& w, double b) const {
        double s = b;
        for (const auto& [i, v] : entries) s += w(i) * v;
        return s;
    }
};

}  // namespace

double LinearClassifier::decision(const Eigen::VectorXd& code) const {
    if (code.size() != weights.size()) throw DomainError("LinearClassifier: code dimension mismatch");
    return weights.dot(code) + bias;
}

double svm_objective(const LinearClassifier& clf, std::span<const Eigen::VectorXd> codes,
                     std::span<const int> labels) {
    double loss = 0.0;
    for (std::size_t i = 0; i < codes.size(); ++i)
        loss += std::max(0.0, 1.0 - labels[i] * clf.decision(codes[i]));
    return 0.5 * (clf.weights.squaredNorm() + clf.bias * clf.bias) + clf.reg_c * loss;
}

LinearClassifier svm_train(std::span<const Eigen::VectorXd> codes, std::span<const int> labels, double reg_c,
                           std::uint64_t seed, SvmTrainInfo* info, int max_epochs) {
    if (codes.empty() || codes.size() != labels.size())
        throw DomainError("svm_train: codes and labels must be nonempty and aligned");
    if (!(reg_c > 0.0) || !std::isfinite(reg_c)) throw DomainError("svm_train: reg_c must be positive");
    const Eigen::Index dim = codes.front().size();
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i].size() != dim) throw DomainError("svm_train: codes differ in dimension");
        if (labels[i] == 1)
            has_pos = true;
        else if (labels[i] == -1)
            has_neg = true;
        else
            throw DomainError("svm_train: labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) throw DomainError("svm_train: both classes are required");

    const std::size_t n = codes.size();
    std::vector<SparseRow> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j)
            if (codes[i](j) != 0.0) rows[i].entries.emplace_back(j, codes[i](j));
        rows[i].sq_norm = 1.0 + codes[i].squaredNorm();
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
    double b = 0.0;
    std::vector<double> alpha(n, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);

    auto primal = [&] {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) loss += std::max(0.0, 1.0 - labels[i] * rows[i].dot(w, b));
        return 0.5 * (w.squaredNorm() + b * b) + reg_c * loss;
    };
    auto dual = [&] {
        double s = 0.0;
        for (double a : alpha) s += a;
        return s - 0.5 * (w.squaredNorm() + b * b);
    };

    SvmTrainInfo local;
    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i : order) {
            const double y = labels[i];
            const double grad = y * rows[i].dot(w, b) - 1.0;
            const double old = alpha[i];
            const double next = std::clamp(old - grad / rows[i].sq_norm, 0.0, reg_c);
            const double delta = next - old;
            if (delta == 0.0) continue;
            alpha[i] = next;
            for (const auto& [j, v] : rows[i].entries) w(j) += delta * y * v;
            b += delta * y;
        }
        local.epochs = epoch;
        local.primal = primal();
        local.dual = dual();
        if (local.primal - local.dual <= kSvmRelativeGap * std::max(local.primal, 1e-12)) {
            local.converged = true;
            break;
        }
    }
    if (info) *info = local;
    return LinearClassifier{std::move(w), b, reg_c};
}

int svm_predict(const LinearClassifier& clf, const Eigen::VectorXd& code) {
    return clf.decision(code) >= 0.0 ? 1 : -1;
}

PixelClass error_classify(double e_n, double e_t, const ErrorClassifier& clf) {
    return e_n - e_t >= clf.epsilon ? PixelClass::Tumor : PixelClass::NonTumor;
}

}  // namespace kernseg
