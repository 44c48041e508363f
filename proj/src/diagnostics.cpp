#include "kernseg/diagnostics.hpp"

#include <random>

#include "kernseg/errors.hpp"
#include "kernseg/kernels.hpp"
#include "kernseg/kklines.hpp"
#include "kernseg/pipeline.hpp"

namespace kernseg {

BlobCorpus make_blob_corpus(int classes, int per_class, int dim, double separation, double spread,
                            std::uint64_t seed) {
    if (classes <= 0 || per_class <= 0 || dim <= 0) throw DomainError("make_blob_corpus: sizes must be positive");
    if (!(spread > 0)) throw DomainError("make_blob_corpus: spread must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    BlobCorpus out;
    out.samples.resize(dim, static_cast<Eigen::Index>(classes) * per_class);
    Eigen::Index col = 0;
    for (int c = 0; c < classes; ++c) {
        // Centers on the coordinate axes (wrapping into negative axes past dim) so classes are equidistant.
        Eigen::VectorXd center = Eigen::VectorXd::Zero(dim);
        center(c % dim) = (c / dim) % 2 ? -separation : separation;
        for (int i = 0; i < per_class; ++i, ++col) {
            for (int d = 0; d < dim; ++d) out.samples(d, col) = center(d) + spread * z(rng);
            out.labels.push_back(c);
        }
    }
    return out;
}

CorrelationReport blob_code_correlation(const BlobCorpus& corpus, const BlobCodingConfig& cfg) {
    const auto gram = gram_vectors(corpus.samples, cfg.gamma);
    const auto learned = learn(gram, cfg.atoms, cfg.seed);
    const Eigen::MatrixXd k_dy = gram.times(learned.dictionary.coeffs);  // T x K
    const auto atom_gram = std::make_shared<const AtomGram<double>>(learned.dictionary.atom_gram);
    std::vector<Eigen::VectorXd> codes;
    for (Eigen::Index i = 0; i < gram.size(); ++i) {
        CodingProblem<double> p{gram.coeff(i, i), k_dy.row(i).transpose(), atom_gram};
        codes.push_back(solve(p, cfg.solver).coefficients);
    }
    return code_correlation_report(codes, corpus.labels);
}

std::vector<ReconCurve> phantom_recon_curves(const TrainingCorpus& corpus, std::size_t per_class, Eigen::Index atoms,
                                             double gamma, int curves, std::uint64_t seed) {
    if (curves <= 0) throw DomainError("phantom_recon_curves: curves must be positive");
    const auto samples = sample_pixels(corpus, per_class, seed);
    const KernelConfig kernel(gamma);
    const PixelDictionary dict = learn_pixel_dictionary(samples, kernel, std::nullopt, atoms, seed);
    const PixelCoder coder(dict, SolverConfig{});

    std::vector<ReconCurve> out;
    const std::size_t stride = std::max<std::size_t>(1, samples.size() / static_cast<std::size_t>(curves));
    for (std::size_t i = 0; i < samples.size() && out.size() < static_cast<std::size_t>(curves); i += stride) {
        const auto p = coder.problem(samples[i].intensity, samples[i].location());
        out.push_back({i, reconstruction_curve(p, static_cast<int>(atoms))});
    }
    return out;
}

}  // namespace kernseg
