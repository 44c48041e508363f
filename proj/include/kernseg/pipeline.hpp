#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "kernseg/classify.hpp"
#include "kernseg/imaging.hpp"
#include "kernseg/kernels.hpp"
#include "kernseg/kklines.hpp"
#include "kernseg/ksc.hpp"
#include "kernseg/metrics.hpp"

namespace kernseg {

/// Kernel values below this are treated as exact zeros, both in training Grams and at test time.
inline constexpr double kGramDropTolerance = 1e-12;

/// A kernel dictionary over stored training pixels, with the data needed to code new pixels.
/// Locations are present only when the dictionary was built on the ensemble kernel.
struct PixelDictionary {
    KernelConfig kernel;
    std::optional<EnsembleConfig> ensemble;
    std::vector<std::uint8_t> intensities;
    std::vector<Location<double>> locations;
    KernelDictionary<double> dict;

    bool uses_locations() const noexcept { return ensemble.has_value(); }
};

/// Learns a dictionary from sampled pixels. The ensemble config, when given, selects K_I ⊙ K_L.
PixelDictionary learn_pixel_dictionary(std::span<const PixelSample> samples, const KernelConfig& kernel,
                                       const std::optional<EnsembleConfig>& ensemble, Eigen::Index k,
                                       std::uint64_t seed, std::string train_ref = {});

/// Precomputed lookup structures for coding arbitrary pixels against a PixelDictionary.
class PixelCoder {
public:
    PixelCoder(const PixelDictionary& dict, const SolverConfig& solver);
    ~PixelCoder();
    PixelCoder(PixelCoder&&) noexcept;
    PixelCoder& operator=(PixelCoder&&) noexcept;

    /// K(y,y), K(D,y) and K(D,D) for a pixel of the given intensity and normalized location.
    CodingProblem<double> problem(std::uint8_t intensity, const Location<double>& loc) const;
    SparseCode<double> code(std::uint8_t intensity, const Location<double>& loc) const;
    Eigen::Index num_atoms() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Counts sparse-coding calls made during segmentation.
struct SegmentStats {
    std::atomic<std::size_t> coding_calls{0};
};

struct KscaModel {
    KernelConfig kernel;
    EnsembleConfig ensemble;
    SolverConfig solver;
    PixelDictionary dictionary;
    LinearClassifier classifier;
};

struct KscaOptions {
    SolverConfig solver;
    double reg_c = 1.0;
};

/// Balanced sampling of corpus.sample_budget pixels (half per class), ensemble Gram, kernel K-lines,
/// coding of every training pixel and a linear SVM on the codes.
KscaModel train_ksca(const TrainingCorpus& corpus, const KernelConfig& kernel, const EnsembleConfig& ensemble,
                     Eigen::Index k, std::uint64_t seed, const KscaOptions& opts = {});

SegMask segment_ksca(const KscaModel& model, const ImageGrid& image, SegmentStats* stats = nullptr);

struct KscsaModel {
    KernelConfig kernel;
    SolverConfig solver;
    PixelDictionary tumor;
    PixelDictionary nontumor;
    std::optional<double> epsilon;  // set by sweep_epsilon
};

KscsaModel train_kscsa(const TrainingCorpus& corpus, const KernelConfig& kernel, Eigen::Index k,
                       std::size_t per_class_budget, std::uint64_t seed, const SolverConfig& solver = {});

/// E_N − E_T for every pixel inside roi (row-major); NaN outside.
std::vector<double> kscsa_margins(const KscsaModel& model, const ImageGrid& image, const SegMask& roi,
                                  SegmentStats* stats = nullptr);

/// Tumor where the margin is at least epsilon; everything outside roi is NonTumor.
SegMask threshold_margins(std::span<const double> margins, const SegMask& roi, double epsilon);

/// Uses model.epsilon; throws DomainError when it has not been set.
SegMask segment_kscsa(const KscsaModel& model, const ImageGrid& image, const SegMask& roi,
                      SegmentStats* stats = nullptr);

struct SweepRow {
    double epsilon = 0.0;
    double mean_acc = 0.0;
    double mean_cr = 0.0;
    std::vector<std::size_t> tumor_pixels;  // per validation image
};

struct SweepResult {
    double best_epsilon = 0.0;
    std::vector<SweepRow> table;
};

/// Evenly spaced grid spanning [min, max] of the finite margins.
std::vector<double> default_epsilon_grid(std::span<const std::vector<double>> margins, int points = 21);

/// Picks the ε with the largest mean CR, ties broken by mean Acc, then by grid order. An empty grid
/// selects the default grid.
SweepResult sweep_epsilon(const KscsaModel& model, const TrainingCorpus& validation, std::span<const SegMask> rois,
                          std::vector<double> grid = {});

void write_sweep_csv(std::ostream& out, const SweepResult& sweep);

// Binary artifacts: magic, format version, raw doubles.
inline constexpr std::uint32_t kFormatVersion = 1;

void save_dictionary(std::ostream& out, const PixelDictionary& dict);
PixelDictionary load_dictionary(std::istream& in);
void save_model(std::ostream& out, const KscaModel& model);
void save_model(std::ostream& out, const KscsaModel& model);
KscaModel load_ksca(std::istream& in);
KscsaModel load_kscsa(std::istream& in);

void save_model(const std::filesystem::path& path, const KscaModel& model);
void save_model(const std::filesystem::path& path, const KscsaModel& model);
KscaModel load_ksca(const std::filesystem::path& path);
KscsaModel load_kscsa(const std::filesystem::path& path);

}  // namespace kernseg
