#include <doctest.h>

#include <random>

#include "kernseg/classify.hpp"
#include "kernseg/errors.hpp"
#include "oracles.hpp"

using namespace kernseg;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

struct Blobs {
    std::vector<VectorXd> x;
    std::vector<int> y;
};

Blobs blobs(std::mt19937_64& rng, int per_class, int dim, double separation, double spread) {
    std::normal_distribution<double> z(0.0, spread);
    Blobs b;
    for (int label : {1, -1})
        for (int i = 0; i < per_class; ++i) {
            VectorXd v(dim);
            for (int d = 0; d < dim; ++d) v(d) = z(rng);
            v(0) += label * separation / 2;
            b.x.push_back(v);
            b.y.push_back(label);
        }
    return b;
}

}  // namespace

TEST_CASE("svm: one-dimensional pair") {
    const std::vector<VectorXd> x{vec({1.0}), vec({-1.0})};
    const std::vector<int> y{1, -1};
    SvmTrainInfo info;
    const auto clf = svm_train(x, y, 10.0, 1, &info);
    // with the bias regularized, the optimum is w = 1, b = 0
    CHECK(clf.weights(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(clf.bias == doctest::Approx(0.0).scale(1).epsilon(1e-6));
    CHECK(info.converged);
    CHECK(svm_predict(clf, vec({0.3})) == 1);
    CHECK(svm_predict(clf, vec({-0.3})) == -1);
}

TEST_CASE("svm: decision boundary ties go to tumor") {
    LinearClassifier clf{vec({1.0, -1.0}), 0.0, 1.0};
    CHECK(svm_predict(clf, vec({2.0, 2.0})) == 1);
    CHECK(svm_predict(clf, vec({1.0, 2.0})) == -1);
    CHECK(clf.decision(vec({3.0, 1.0})) == doctest::Approx(2.0));
    CHECK(svm_predict(LinearClassifier{vec({1.0, 0.0}), 0.0, 1.0}, vec({2.0, 0.0})) == 1);
    CHECK(svm_predict(LinearClassifier{vec({1.0, 0.0}), -0.5, 1.0}, vec({0.0, 3.0})) == -1);
    CHECK_THROWS_AS(svm_predict(clf, vec({1.0})), DomainError);
}

TEST_CASE("svm: separable blobs are classified perfectly") {
    std::mt19937_64 rng(17);
    const auto b = blobs(rng, 100, 5, 8.0, 1.0);
    const auto clf = svm_train(b.x, b.y, 1.0, 4);
    int errors = 0;
    for (std::size_t i = 0; i < b.x.size(); ++i) errors += svm_predict(clf, b.x[i]) != b.y[i];
    CHECK(errors == 0);
}

TEST_CASE("svm: objective matches an independent dual solver") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const auto b = blobs(rng, 40, 4, 2.0, 1.0);  // overlapping, so slack is active
        for (double c : {0.1, 1.0}) {
            SvmTrainInfo info;
            const auto clf = svm_train(b.x, b.y, c, 9, &info);
            const auto ref = oracle::svm_dual_pg(b.x, b.y, c);
            const double ours = svm_objective(clf, b.x, b.y);
            CHECK(info.converged);
            CHECK(ours == doctest::Approx(oracle::svm_primal(b.x, b.y, clf.weights, clf.bias, c)).epsilon(1e-12));
            CHECK(std::abs(ours - ref.objective) <= 1e-4 * std::max(1.0, ref.objective));
            CHECK(ours <= ref.objective + 1e-4 * std::max(1.0, ref.objective));
        }
    }
}

TEST_CASE("svm: prediction is invariant to positive rescaling") {
    std::mt19937_64 rng(29);
    const auto b = blobs(rng, 50, 3, 1.5, 1.0);
    const auto clf = svm_train(b.x, b.y, 1.0, 2);
    for (double scale : {1e-3, 0.5, 7.0, 1e4}) {
        const LinearClassifier scaled{scale * clf.weights, scale * clf.bias, clf.reg_c};
        for (const auto& x : b.x) CHECK(svm_predict(scaled, x) == svm_predict(clf, x));
    }
}

TEST_CASE("svm: larger C never adds margin violations") {
    for (std::uint64_t seed : {41, 42, 43}) {
        std::mt19937_64 rng(seed);
        const auto b = blobs(rng, 60, 3, 2.0, 1.0);
        int prev = std::numeric_limits<int>::max();
        for (double c : {0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64, 1.28}) {
            const auto clf = svm_train(b.x, b.y, c, 1);
            int violations = 0;
            for (std::size_t i = 0; i < b.x.size(); ++i) violations += b.y[i] * clf.decision(b.x[i]) < 1.0 - 1e-9;
            CHECK(violations <= prev);
            prev = violations;
        }
    }
}

TEST_CASE("svm: deterministic for a fixed seed") {
    std::mt19937_64 rng(5);
    const auto b = blobs(rng, 30, 3, 1.0, 1.0);
    const auto a = svm_train(b.x, b.y, 1.0, 7), c = svm_train(b.x, b.y, 1.0, 7);
    CHECK(a.weights == c.weights);
    CHECK(a.bias == c.bias);
}

TEST_CASE("svm: invalid input") {
    const std::vector<VectorXd> x{vec({1.0}), vec({2.0})};
    CHECK_THROWS_AS(svm_train(x, std::vector<int>{1, 1}, 1.0, 0), DomainError);
    CHECK_THROWS_AS(svm_train(x, std::vector<int>{1, 0}, 1.0, 0), DomainError);
    CHECK_THROWS_AS(svm_train(x, std::vector<int>{1, -1}, 0.0, 0), DomainError);
    CHECK_THROWS_AS(svm_train(x, std::vector<int>{1}, 1.0, 0), DomainError);
    const std::vector<VectorXd> ragged{vec({1.0}), vec({2.0, 3.0})};
    CHECK_THROWS_AS(svm_train(ragged, std::vector<int>{1, -1}, 1.0, 0), DomainError);
}

TEST_CASE("error classifier") {
    const ErrorClassifier zero{0.0};
    CHECK(error_classify(0.5, 0.2, zero) == PixelClass::Tumor);
    CHECK(error_classify(0.2, 0.5, zero) == PixelClass::NonTumor);
    CHECK(error_classify(0.3, 0.3, zero) == PixelClass::Tumor);
    CHECK(error_classify(0.5, 0.2, ErrorClassifier{0.4}) == PixelClass::NonTumor);
    CHECK(error_classify(0.2, 0.5, ErrorClassifier{-0.4}) == PixelClass::Tumor);

    // raising epsilon can only remove tumor decisions
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double en = u(rng), et = u(rng);
        bool prev = true;
        for (double eps = -1.0; eps <= 1.0; eps += 0.1) {
            const bool tumor = error_classify(en, et, ErrorClassifier{eps}) == PixelClass::Tumor;
            CHECK((prev || !tumor));
            prev = tumor;
        }
    }
}
