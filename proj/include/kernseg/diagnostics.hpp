#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "kernseg/imaging.hpp"
#include "kernseg/ksc.hpp"
#include "kernseg/metrics.hpp"

namespace kernseg {

/// Isotropic Gaussian clusters; samples are columns.
struct BlobCorpus {
    Eigen::MatrixXd samples;
    std::vector<int> labels;
};

BlobCorpus make_blob_corpus(int classes, int per_class, int dim, double separation, double spread,
                            std::uint64_t seed);

struct BlobCodingConfig {
    double gamma = 0.5;
    Eigen::Index atoms = 6;
    SolverConfig solver;
    std::uint64_t seed = 0;
};

/// Learns a kernel dictionary on the corpus, codes every sample and reports code correlation.
CorrelationReport blob_code_correlation(const BlobCorpus& corpus, const BlobCodingConfig& cfg);

struct ReconCurve {
    std::size_t sample = 0;                       // index into the training pixels
    std::vector<std::pair<int, double>> errors;  // (sparsity, residual)
};

/// Intensity dictionary on sampled phantom pixels, then greedy reconstruction curves for
/// `curves` of the training pixels up to full support.
std::vector<ReconCurve> phantom_recon_curves(const TrainingCorpus& corpus, std::size_t per_class, Eigen::Index atoms,
                                             double gamma, int curves, std::uint64_t seed);

}  // namespace kernseg
