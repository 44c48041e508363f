#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kernseg/kernels.hpp"

namespace kernseg {

/// Side of the reference frame that pixel locations are normalized to, so location kernels are
/// comparable across images of different sizes.
inline constexpr double kReferenceFrame = 256.0;

struct ImageGrid {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    ImageGrid() = default;
    ImageGrid(int w, int h, std::uint8_t fill = 0);

    std::size_t size() const noexcept { return pixels.size(); }
    std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
    std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }

    friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

struct SegMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> labels;  // 0 = non-tumor, 1 = tumor

    SegMask() = default;
    SegMask(int w, int h, std::uint8_t fill = 0);

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t count() const noexcept;
    bool at(int row, int col) const { return labels[static_cast<std::size_t>(row) * width + col] != 0; }
    void set(int row, int col, bool v) { labels[static_cast<std::size_t>(row) * width + col] = v ? 1 : 0; }
    bool same_shape(const SegMask& o) const noexcept { return width == o.width && height == o.height; }
    bool same_shape(const ImageGrid& o) const noexcept { return width == o.width && height == o.height; }

    friend bool operator==(const SegMask&, const SegMask&) = default;
};

/// Pixel location in the reference frame.
Location<double> normalized_location(int row, int col, int width, int height);

/// Chebyshev dilation of a mask by the given radius.
SegMask dilate(const SegMask& mask, int radius);

// P5 (binary) PGM with maxval 255.
std::vector<std::uint8_t> encode_pgm(const ImageGrid& grid);
ImageGrid decode_pgm(std::span<const std::uint8_t> bytes);
ImageGrid read_pgm(const std::filesystem::path& path);
void write_pgm(const ImageGrid& grid, const std::filesystem::path& path);

// Masks are PGMs with 0 for non-tumor and 255 for tumor; any nonzero byte decodes as tumor.
SegMask mask_from_grid(const ImageGrid& grid);
ImageGrid grid_from_mask(const SegMask& mask);
SegMask read_mask(const std::filesystem::path& path);
void write_mask(const SegMask& mask, const std::filesystem::path& path);

struct IntensityBand {
    int lo = 0;
    int hi = 0;
    friend bool operator==(const IntensityBand&, const IntensityBand&) = default;
};

/// Geometry and appearance of one synthetic ring-enhancing tumor slice.
struct PhantomSpec {
    std::uint64_t seed = 0;
    int width = 256;
    int height = 256;
    double brain_cx = 128, brain_cy = 128, brain_rx = 105, brain_ry = 90;
    double tumor_cx = 128, tumor_cy = 128, tumor_rx = 20, tumor_ry = 16, tumor_angle = 0;
    double core_fraction = 0.5;  // core radius relative to the outer boundary; 0 = no necrotic core
    double jaggedness = 0.06;    // amplitude of the radial boundary perturbation
    IntensityBand ring{190, 230};
    IntensityBand core{10, 40};
    IntensityBand tissue{60, 110};
    IntensityBand background{130, 160};
    double noise_sigma = 6.0;
    int band_margin = 10;

    void validate() const;
    /// Analytic tumor area π·rx·ry (unperturbed ellipse).
    double tumor_area() const;
    /// Draws tumor placement, size and shape from the seed, keeping default bands.
    static PhantomSpec random(std::uint64_t seed);

    friend bool operator==(const PhantomSpec&, const PhantomSpec&) = default;
};

struct Phantom {
    ImageGrid image;
    SegMask mask;
};

Phantom gen_phantom(const PhantomSpec& spec);

struct TrainingCorpus {
    std::vector<ImageGrid> images;
    std::vector<SegMask> masks;
    std::size_t sample_budget = 0;

    void validate() const;
};

struct PixelSample {
    std::uint8_t intensity = 0;
    int row = 0;
    int col = 0;
    int width = 0;
    int height = 0;
    int label = 0;  // 1 tumor, 0 non-tumor
    std::size_t image = 0;

    Location<double> location() const { return normalized_location(row, col, width, height); }
    friend bool operator==(const PixelSample&, const PixelSample&) = default;
};

struct SampleReport {
    std::size_t requested = 0;
    std::size_t tumor_taken = 0;
    std::size_t nontumor_taken = 0;
    bool clamped = false;
};

/// Uniform sampling without replacement, per_class_budget pixels from each class (tumor first).
/// Budgets above a class population are clamped and reported.
std::vector<PixelSample> sample_pixels(const TrainingCorpus& corpus, std::size_t per_class_budget,
                                       std::uint64_t seed, SampleReport* report = nullptr);

struct ManifestEntry {
    std::filesystem::path image_path;
    std::filesystem::path mask_path;
    std::string split;
};

/// One JSON object per line: {"image_path", "mask_path", "split"}. Relative paths resolve against the
/// manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

/// Loads the entries of one split (all entries when split is empty).
TrainingCorpus load_corpus(const std::vector<ManifestEntry>& entries, const std::string& split);

}  // namespace kernseg
