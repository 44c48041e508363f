#include "kernseg/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "kernseg/errors.hpp"

namespace kernseg {

ImageGrid::ImageGrid(int w, int h, std::uint8_t fill) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw DomainError("ImageGrid: dimensions must be positive");
    pixels.assign(static_cast<std::size_t>(w) * h, fill);
}

SegMask::SegMask(int w, int h, std::uint8_t fill) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw DomainError("SegMask: dimensions must be positive");
    labels.assign(static_cast<std::size_t>(w) * h, fill ? 1 : 0);
}

std::size_t SegMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

Location<double> normalized_location(int row, int col, int width, int height) {
    return {row * kReferenceFrame / height, col * kReferenceFrame / width};
}

SegMask dilate(const SegMask& mask, int radius) {
    if (radius < 0) throw DomainError("dilate: radius must be >= 0");
    // Separable Chebyshev dilation: rows, then columns.
    SegMask rows_pass(mask.width, mask.height);
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c) {
            bool hit = false;
            for (int d = std::max(0, c - radius); d <= std::min(mask.width - 1, c + radius) && !hit; ++d)
                hit = mask.at(r, d);
            rows_pass.set(r, c, hit);
        }
    SegMask out(mask.width, mask.height);
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c) {
            bool hit = false;
            for (int d = std::max(0, r - radius); d <= std::min(mask.height - 1, r + radius) && !hit; ++d)
                hit = rows_pass.at(d, c);
            out.set(r, c, hit);
        }
    return out;
}

std::vector<std::uint8_t> encode_pgm(const ImageGrid& grid) {
    if (grid.size() != static_cast<std::size_t>(grid.width) * grid.height)
        throw DomainError("encode_pgm: pixel count does not match dimensions");
    const std::string header = "P5\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), grid.pixels.begin(), grid.pixels.end());
    return out;
}

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_] - '0');
            if (v > 1'000'000) throw ParseError(std::string("PGM: ") + what + " too large", start);
            ++pos_;
        }
        if (pos_ == start) throw ParseError(std::string("PGM: expected ") + what, start);
        return v;
    }

    std::size_t pos_ = 0;
    std::span<const std::uint8_t> bytes_;
};

}  // namespace

ImageGrid decode_pgm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw ParseError("PGM: missing P5 magic", 0);
    HeaderReader hr(bytes);
    hr.pos_ = 2;
    if (hr.pos_ >= bytes.size() || !std::isspace(bytes[hr.pos_]))
        throw ParseError("PGM: expected whitespace after magic", hr.pos_);
    const long width = hr.number("width");
    const long height = hr.number("height");
    const std::size_t maxval_pos = hr.pos_;
    const long maxval = hr.number("maxval");
    if (width <= 0 || height <= 0) throw ParseError("PGM: dimensions must be positive", maxval_pos);
    if (maxval != 255) throw ParseError("PGM: maxval must be 255", maxval_pos);
    if (hr.pos_ >= bytes.size() || !std::isspace(bytes[hr.pos_]))
        throw ParseError("PGM: expected single whitespace before payload", hr.pos_);
    const std::size_t payload = hr.pos_ + 1;
    const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - payload < need) throw ParseError("PGM: truncated payload", bytes.size());
    ImageGrid grid(static_cast<int>(width), static_cast<int>(height));
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(payload), need, grid.pixels.begin());
    return grid;
}

ImageGrid read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("read_pgm: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pgm(bytes);
}

void write_pgm(const ImageGrid& grid, const std::filesystem::path& path) {
    const auto bytes = encode_pgm(grid);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("write_pgm: cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DomainError("write_pgm: write failed for " + path.string());
}

SegMask mask_from_grid(const ImageGrid& grid) {
    SegMask m(grid.width, grid.height);
    for (std::size_t i = 0; i < grid.size(); ++i) m.labels[i] = grid.pixels[i] != 0 ? 1 : 0;
    return m;
}

ImageGrid grid_from_mask(const SegMask& mask) {
    ImageGrid g(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.size(); ++i) g.pixels[i] = mask.labels[i] ? 255 : 0;
    return g;
}

SegMask read_mask(const std::filesystem::path& path) { return mask_from_grid(read_pgm(path)); }

void write_mask(const SegMask& mask, const std::filesystem::path& path) { write_pgm(grid_from_mask(mask), path); }

void PhantomSpec::validate() const {
    if (width <= 0 || height <= 0) throw DomainError("PhantomSpec: dimensions must be positive");
    for (const auto* b : {&ring, &core, &tissue, &background})
        if (b->lo < 0 || b->hi > 255 || b->lo > b->hi) throw DomainError("PhantomSpec: band outside 0..255");
    if (band_margin < 0) throw DomainError("PhantomSpec: band_margin must be >= 0");
    auto separated = [&](const IntensityBand& a, const IntensityBand& b) {
        return a.hi + band_margin <= b.lo || b.hi + band_margin <= a.lo;
    };
    for (const auto* t : {&ring, &core})
        for (const auto* n : {&tissue, &background})
            if (!separated(*t, *n)) throw DomainError("PhantomSpec: tumor and non-tumor bands overlap beyond margin");
    if (!(noise_sigma >= 0.0)) throw DomainError("PhantomSpec: noise_sigma must be >= 0");
    if (!(tumor_rx > 0 && tumor_ry > 0 && brain_rx > 0 && brain_ry > 0))
        throw DomainError("PhantomSpec: radii must be positive");
    if (core_fraction < 0.0 || core_fraction >= 1.0) throw DomainError("PhantomSpec: core_fraction must be in [0,1)");
    if (jaggedness < 0.0 || jaggedness > 0.1) throw DomainError("PhantomSpec: jaggedness must be in [0,0.1]");
}

double PhantomSpec::tumor_area() const { return std::numbers::pi * tumor_rx * tumor_ry; }

PhantomSpec PhantomSpec::random(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PhantomSpec s;
    s.seed = seed;
    s.brain_cx = 128 + 8 * (u(rng) - 0.5);
    s.brain_cy = 128 + 8 * (u(rng) - 0.5);
    s.brain_rx = 100 + 10 * u(rng);
    s.brain_ry = 85 + 10 * u(rng);
    const double offset = 30 * std::sqrt(u(rng));
    const double heading = 2 * std::numbers::pi * u(rng);
    s.tumor_cx = s.brain_cx + offset * std::cos(heading);
    s.tumor_cy = s.brain_cy + offset * std::sin(heading);
    s.tumor_rx = 14 + 10 * u(rng);
    s.tumor_ry = s.tumor_rx * (0.7 + 0.3 * u(rng));
    s.tumor_angle = std::numbers::pi * u(rng);
    s.core_fraction = u(rng) < 0.2 ? 0.0 : 0.35 + 0.25 * u(rng);
    return s;
}

Phantom gen_phantom(const PhantomSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Radial boundary perturbation: low-order harmonics with seeded amplitudes and phases.
    struct Harmonic {
        int order;
        double amp;
        double phase;
    };
    std::vector<Harmonic> harmonics;
    for (int m = 3; m <= 8; ++m)
        harmonics.push_back({m, spec.jaggedness * (0.5 + 0.5 * unit(rng)) * 3.0 / m, 2 * std::numbers::pi * unit(rng)});
    auto boundary = [&](double theta) {
        double r = 1.0;
        for (const auto& h : harmonics) r += h.amp * std::cos(h.order * theta + h.phase);
        return r;
    };

    Phantom out{ImageGrid(spec.width, spec.height), SegMask(spec.width, spec.height)};
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);
    const double ca = std::cos(spec.tumor_angle), sa = std::sin(spec.tumor_angle);
    for (int r = 0; r < spec.height; ++r) {
        for (int c = 0; c < spec.width; ++c) {
            const double bx = (c - spec.brain_cx) / spec.brain_rx;
            const double by = (r - spec.brain_cy) / spec.brain_ry;
            const bool in_brain = bx * bx + by * by <= 1.0;

            const double dx = c - spec.tumor_cx, dy = r - spec.tumor_cy;
            const double u = (dx * ca + dy * sa) / spec.tumor_rx;
            const double v = (-dx * sa + dy * ca) / spec.tumor_ry;
            const double rho = std::hypot(u, v);
            const double edge = boundary(std::atan2(v, u));
            const bool in_tumor = in_brain && rho <= edge;
            const bool in_core = in_tumor && rho <= spec.core_fraction * edge;

            const IntensityBand& band =
                in_core ? spec.core : in_tumor ? spec.ring : in_brain ? spec.tissue : spec.background;
            std::uniform_int_distribution<int> pick(band.lo, band.hi);
            double value = pick(rng);
            if (spec.noise_sigma > 0) value += noise(rng);
            out.image.at(r, c) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
            out.mask.set(r, c, in_tumor);
        }
    }
    return out;
}

void TrainingCorpus::validate() const {
    if (images.empty()) throw DomainError("TrainingCorpus: no images");
    if (images.size() != masks.size()) throw DomainError("TrainingCorpus: image and mask counts differ");
    for (std::size_t i = 0; i < images.size(); ++i)
        if (!masks[i].same_shape(images[i])) throw DomainError("TrainingCorpus: mask dimensions differ from image");
}

std::vector<PixelSample> sample_pixels(const TrainingCorpus& corpus, std::size_t per_class_budget,
                                       std::uint64_t seed, SampleReport* report) {
    corpus.validate();
    struct Ref {
        std::size_t image;
        std::size_t pixel;
    };
    std::vector<Ref> pools[2];
    for (std::size_t im = 0; im < corpus.images.size(); ++im)
        for (std::size_t p = 0; p < corpus.masks[im].size(); ++p)
            pools[corpus.masks[im].labels[p] ? 1 : 0].push_back({im, p});
    if (per_class_budget > 0 && (pools[0].empty() || pools[1].empty()))
        throw DomainError("sample_pixels: corpus must contain both tumor and non-tumor pixels");

    SampleReport rep;
    rep.requested = per_class_budget;
    std::mt19937_64 rng(seed);
    std::vector<PixelSample> out;
    for (int label : {1, 0}) {
        auto& pool = pools[label];
        const std::size_t take = std::min(per_class_budget, pool.size());
        rep.clamped = rep.clamped || take < per_class_budget;
        // Partial Fisher-Yates: the first `take` slots become a uniform sample without replacement.
        for (std::size_t i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng)]);
            const auto& img = corpus.images[pool[i].image];
            const int row = static_cast<int>(pool[i].pixel / static_cast<std::size_t>(img.width));
            const int col = static_cast<int>(pool[i].pixel % static_cast<std::size_t>(img.width));
            out.push_back({img.pixels[pool[i].pixel], row, col, img.width, img.height, label, pool[i].image});
        }
        (label == 1 ? rep.tumor_taken : rep.nontumor_taken) = take;
    }
    if (report) *report = rep;
    return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("read_manifest: cannot open " + path.string());
    const auto base = path.parent_path();
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("manifest: ") + e.what(), line_start + e.byte);
        }
        if (!j.is_object() || !j.contains("image_path") || !j.contains("mask_path"))
            throw ParseError("manifest: entry needs image_path and mask_path", line_start);
        ManifestEntry e;
        e.image_path = j.at("image_path").get<std::string>();
        e.mask_path = j.at("mask_path").get<std::string>();
        e.split = j.value("split", std::string{});
        if (e.image_path.is_relative()) e.image_path = base / e.image_path;
        if (e.mask_path.is_relative()) e.mask_path = base / e.mask_path;
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DomainError("write_manifest: cannot open " + path.string());
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["image_path"] = e.image_path.generic_string();
        j["mask_path"] = e.mask_path.generic_string();
        j["split"] = e.split;
        out << j.dump() << '\n';
    }
}

TrainingCorpus load_corpus(const std::vector<ManifestEntry>& entries, const std::string& split) {
    TrainingCorpus corpus;
    for (const auto& e : entries) {
        if (!split.empty() && e.split != split) continue;
        corpus.images.push_back(read_pgm(e.image_path));
        corpus.masks.push_back(read_mask(e.mask_path));
    }
    if (corpus.images.empty()) throw DomainError("load_corpus: no entries for split '" + split + "'");
    corpus.validate();
    return corpus;
}

}  // namespace kernseg
