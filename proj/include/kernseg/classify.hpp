#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>

namespace kernseg {

enum class PixelClass : std::uint8_t { NonTumor = 0, Tumor = 1 };

/// Linear max-margin classifier on sparse codes. The bias is learned as the weight of a constant unit
/// feature, so training minimizes ½(‖w‖² + b²) + C Σ max(0, 1 − y_i(w·x_i + b)).
struct LinearClassifier {
    Eigen::VectorXd weights;
    double bias = 0.0;
    double reg_c = 1.0;

    double decision(const Eigen::VectorXd& code) const;
};

struct SvmTrainInfo {
    double primal = 0.0;
    double dual = 0.0;
    int epochs = 0;
    bool converged = false;
};

struct ErrorClassifier {
    double epsilon = 0.0;
};

inline constexpr double kSvmRelativeGap = 1e-7;

/// Dual coordinate descent over a seeded permutation per epoch; stops once the duality gap falls
/// below kSvmRelativeGap relative to the primal objective.
LinearClassifier svm_train(std::span<const Eigen::VectorXd> codes, std::span<const int> labels, double reg_c,
                           std::uint64_t seed, SvmTrainInfo* info = nullptr, int max_epochs = 20000);

double svm_objective(const LinearClassifier& clf, std::span<const Eigen::VectorXd> codes,
                     std::span<const int> labels);

/// +1 (tumor) when w·x + b >= 0, else −1.
int svm_predict(const LinearClassifier& clf, const Eigen::VectorXd& code);

/// Tumor iff e_n − e_t >= epsilon.
PixelClass error_classify(double e_n, double e_t, const ErrorClassifier& clf);

}  // namespace kernseg
