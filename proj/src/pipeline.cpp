#include "kernseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "kernseg/errors.hpp"
#include "kernseg/parallel.hpp"
#include "kernseg/serialize.hpp"

namespace kernseg {

using Index = Eigen::Index;

PixelDictionary learn_pixel_dictionary(std::span<const PixelSample> samples, const KernelConfig& kernel,
                                       const std::optional<EnsembleConfig>& ensemble, Index k, std::uint64_t seed,
                                       std::string train_ref) {
    if (samples.empty()) throw DomainError("learn_pixel_dictionary: no training pixels");
    PixelDictionary out;
    out.kernel = kernel;
    out.ensemble = ensemble;
    out.intensities.reserve(samples.size());
    for (const auto& s : samples) out.intensities.push_back(s.intensity);

    std::optional<KernelMatrix<double>> gram;
    if (ensemble) {
        out.locations.reserve(samples.size());
        for (const auto& s : samples) out.locations.push_back(s.location());
        gram.emplace(gram_ensemble_sparse<double>(out.intensities, out.locations, kernel, *ensemble,
                                                  kGramDropTolerance));
    } else {
        gram.emplace(gram_intensity_sparse<double>(out.intensities, kernel, kGramDropTolerance));
    }
    auto learned = learn(*gram, k, seed, 100, std::move(train_ref));
    out.dict = std::move(learned.dictionary);
    out.dict.coeffs.makeCompressed();
    return out;
}

// ---------------------------------------------------------------------------------------------
// PixelCoder

struct PixelCoder::Impl {
    const PixelDictionary* dict = nullptr;
    SolverConfig solver;
    std::shared_ptr<const AtomGram<double>> atom_gram;
    IntensityLut<double> lut;
    Index atoms = 0;

    // Intensity-only dictionaries: for each value v present in training, S_v = Σ_{i: y_i = v} A(i,:).
    std::vector<std::pair<std::uint8_t, Eigen::VectorXd>> per_value;
    int reach = 255;

    // Ensemble dictionaries: rows of A and a spatial bucket grid over training locations.
    std::vector<std::vector<std::pair<Index, double>>> rows;
    std::vector<std::vector<Index>> buckets;
    double min_r = 0, min_c = 0, cell = 1;
    Index grid_rows = 0, grid_cols = 0;

    explicit Impl(const PixelDictionary& d, const SolverConfig& s) : dict(&d), solver(s), lut(d.kernel) {
        solver.validate();
        atoms = d.dict.num_atoms();
        const Index t = d.dict.num_train();
        if (static_cast<std::size_t>(t) != d.intensities.size())
            throw DomainError("PixelCoder: dictionary and training pixels disagree in size");
        if (d.uses_locations() && d.locations.size() != d.intensities.size())
            throw DomainError("PixelCoder: missing training locations");
        atom_gram = std::make_shared<const AtomGram<double>>(d.dict.atom_gram);

        rows.assign(static_cast<std::size_t>(t), {});
        for (Index c = 0; c < d.dict.coeffs.outerSize(); ++c)
            for (typename KernelDictionary<double>::Sparse::InnerIterator it(d.dict.coeffs, c); it; ++it)
                rows[static_cast<std::size_t>(it.row())].emplace_back(c, it.value());

        if (!d.uses_locations()) {
            std::array<std::optional<Eigen::VectorXd>, 256> sums;
            for (Index i = 0; i < t; ++i) {
                auto& s = sums[d.intensities[static_cast<std::size_t>(i)]];
                if (!s) s = Eigen::VectorXd::Zero(atoms);
                for (const auto& [c, v] : rows[static_cast<std::size_t>(i)]) (*s)(c) += v;
            }
            for (int v = 0; v < 256; ++v)
                if (sums[v]) per_value.emplace_back(static_cast<std::uint8_t>(v), std::move(*sums[v]));
            rows.clear();
            reach = 0;
            while (reach < 255 && lut(std::uint8_t(reach + 1), 0) >= kGramDropTolerance) ++reach;
            return;
        }

        cell = std::max(1.0, static_cast<double>(d.ensemble->neighborhood_radius()));
        min_r = min_c = std::numeric_limits<double>::infinity();
        double max_r = -min_r, max_c = -min_c;
        for (const auto& l : d.locations) {
            min_r = std::min(min_r, l(0));
            min_c = std::min(min_c, l(1));
            max_r = std::max(max_r, l(0));
            max_c = std::max(max_c, l(1));
        }
        grid_rows = static_cast<Index>(std::floor((max_r - min_r) / cell)) + 1;
        grid_cols = static_cast<Index>(std::floor((max_c - min_c) / cell)) + 1;
        buckets.assign(static_cast<std::size_t>(grid_rows * grid_cols), {});
        for (Index i = 0; i < t; ++i) {
            const auto& l = d.locations[static_cast<std::size_t>(i)];
            const auto r = static_cast<Index>(std::floor((l(0) - min_r) / cell));
            const auto c = static_cast<Index>(std::floor((l(1) - min_c) / cell));
            buckets[static_cast<std::size_t>(r * grid_cols + c)].push_back(i);
        }
    }

    Eigen::VectorXd k_dy(std::uint8_t y, const Location<double>& loc) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(atoms);
        if (!dict->uses_locations()) {
            for (const auto& [v, sum] : per_value) {
                if (std::abs(int(v) - int(y)) > reach) continue;
                const double g = lut(y, v);
                if (g >= kGramDropTolerance) out.noalias() += g * sum;
            }
            return out;
        }
        const auto r = static_cast<Index>(std::floor((loc(0) - min_r) / cell));
        const auto c = static_cast<Index>(std::floor((loc(1) - min_c) / cell));
        for (Index rr = std::max<Index>(0, r - 1); rr <= std::min(grid_rows - 1, r + 1); ++rr)
            for (Index cc = std::max<Index>(0, c - 1); cc <= std::min(grid_cols - 1, c + 1); ++cc)
                for (Index i : buckets[static_cast<std::size_t>(rr * grid_cols + cc)]) {
                    const auto ui = static_cast<std::size_t>(i);
                    const double ki = lut(dict->intensities[ui], y);
                    if (ki < kGramDropTolerance) continue;
                    const double g = ki * location_kernel(dict->locations[ui], loc, *dict->ensemble);
                    if (g < kGramDropTolerance) continue;
                    for (const auto& [atom, a] : rows[ui]) out(atom) += a * g;
                }
        return out;
    }
};

PixelCoder::PixelCoder(const PixelDictionary& dict, const SolverConfig& solver)
    : impl_(std::make_unique<Impl>(dict, solver)) {}
PixelCoder::~PixelCoder() = default;
PixelCoder::PixelCoder(PixelCoder&&) noexcept = default;
PixelCoder& PixelCoder::operator=(PixelCoder&&) noexcept = default;

CodingProblem<double> PixelCoder::problem(std::uint8_t intensity, const Location<double>& loc) const {
    // Both the intensity RBF and the location kernel equal 1 on the diagonal.
    return CodingProblem<double>{1.0, impl_->k_dy(intensity, loc), impl_->atom_gram};
}

SparseCode<double> PixelCoder::code(std::uint8_t intensity, const Location<double>& loc) const {
    return solve(problem(intensity, loc), impl_->solver);
}

Index PixelCoder::num_atoms() const noexcept { return impl_->atoms; }

// ---------------------------------------------------------------------------------------------
// KSCA

namespace {

std::string describe_corpus(const char* tag, const TrainingCorpus& corpus, std::size_t budget, std::uint64_t seed) {
    return std::string(tag) + ":images=" + std::to_string(corpus.images.size()) + ":budget=" +
           std::to_string(budget) + ":seed=" + std::to_string(seed);
}

std::vector<PixelSample> sample_both_classes(const TrainingCorpus& corpus, std::size_t per_class, std::uint64_t seed) {
    corpus.validate();
    if (per_class == 0) throw DomainError("sample budget must be positive");
    SampleReport rep;
    auto samples = sample_pixels(corpus, per_class, seed, &rep);
    if (rep.tumor_taken == 0) throw DomainError("corpus has no tumor pixels");
    if (rep.nontumor_taken == 0) throw DomainError("corpus has no non-tumor pixels");
    return samples;
}

}  // namespace

KscaModel train_ksca(const TrainingCorpus& corpus, const KernelConfig& kernel, const EnsembleConfig& ensemble,
                     Index k, std::uint64_t seed, const KscaOptions& opts) {
    if (ensemble.fusion() != Fusion::Hadamard) throw DomainError("train_ksca: ensemble fusion must be Hadamard");
    opts.solver.validate();
    const auto samples = sample_both_classes(corpus, corpus.sample_budget / 2, seed);

    KscaModel model;
    model.kernel = kernel;
    model.ensemble = ensemble;
    model.solver = opts.solver;
    model.dictionary =
        learn_pixel_dictionary(samples, kernel, ensemble, k, seed, describe_corpus("ksca", corpus, corpus.sample_budget, seed));

    const PixelCoder coder(model.dictionary, model.solver);
    std::vector<Eigen::VectorXd> codes;
    std::vector<int> labels;
    codes.reserve(samples.size());
    labels.reserve(samples.size());
    for (const auto& s : samples) {
        codes.push_back(coder.code(s.intensity, s.location()).coefficients);
        labels.push_back(s.label ? 1 : -1);
    }
    model.classifier = svm_train(codes, labels, opts.reg_c, seed);
    return model;
}

SegMask segment_ksca(const KscaModel& model, const ImageGrid& image, SegmentStats* stats) {
    if (image.width <= 0 || image.height <= 0) throw DomainError("segment_ksca: empty image");
    const PixelCoder coder(model.dictionary, model.solver);
    SegMask out(image.width, image.height);
    parallel_for(static_cast<std::size_t>(image.height), [&](std::size_t row) {
        const int r = static_cast<int>(row);
        for (int c = 0; c < image.width; ++c) {
            const auto code = coder.code(image.at(r, c), normalized_location(r, c, image.width, image.height));
            if (stats) stats->coding_calls.fetch_add(1, std::memory_order_relaxed);
            out.set(r, c, svm_predict(model.classifier, code.coefficients) > 0);
        }
    });
    return out;
}

// ---------------------------------------------------------------------------------------------
// KSCSA

KscsaModel train_kscsa(const TrainingCorpus& corpus, const KernelConfig& kernel, Index k,
                       std::size_t per_class_budget, std::uint64_t seed, const SolverConfig& solver) {
    solver.validate();
    const auto samples = sample_both_classes(corpus, per_class_budget, seed);
    std::vector<PixelSample> tumor, nontumor;
    for (const auto& s : samples) (s.label ? tumor : nontumor).push_back(s);

    KscsaModel model;
    model.kernel = kernel;
    model.solver = solver;
    model.tumor = learn_pixel_dictionary(tumor, kernel, std::nullopt, k, seed,
                                         describe_corpus("kscsa-tumor", corpus, per_class_budget, seed));
    model.nontumor = learn_pixel_dictionary(nontumor, kernel, std::nullopt, k, seed + 1,
                                            describe_corpus("kscsa-nontumor", corpus, per_class_budget, seed));
    return model;
}

std::vector<double> kscsa_margins(const KscsaModel& model, const ImageGrid& image, const SegMask& roi,
                                  SegmentStats* stats) {
    if (!roi.same_shape(image)) throw DomainError("segment_kscsa: roi and image dimensions differ");
    if (roi.count() == 0) throw DomainError("segment_kscsa: roi is empty");
    const PixelCoder coder_t(model.tumor, model.solver);
    const PixelCoder coder_n(model.nontumor, model.solver);
    std::vector<double> margins(static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height),
                                std::numeric_limits<double>::quiet_NaN());
    parallel_for(static_cast<std::size_t>(image.height), [&](std::size_t row) {
        const int r = static_cast<int>(row);
        for (int c = 0; c < image.width; ++c) {
            if (!roi.at(r, c)) continue;
            const std::uint8_t v = image.at(r, c);
            const Location<double> loc = normalized_location(r, c, image.width, image.height);
            const double e_t = std::sqrt(std::max(0.0, coder_t.code(v, loc).residual_sq));
            const double e_n = std::sqrt(std::max(0.0, coder_n.code(v, loc).residual_sq));
            if (stats) stats->coding_calls.fetch_add(1, std::memory_order_relaxed);
            margins[row * static_cast<std::size_t>(image.width) + static_cast<std::size_t>(c)] = e_n - e_t;
        }
    });
    return margins;
}

SegMask threshold_margins(std::span<const double> margins, const SegMask& roi, double epsilon) {
    if (margins.size() != roi.size()) throw DomainError("threshold_margins: size mismatch");
    SegMask out(roi.width, roi.height);
    for (std::size_t i = 0; i < margins.size(); ++i)
        out.labels[i] = roi.labels[i] && !std::isnan(margins[i]) && margins[i] >= epsilon;
    return out;
}

SegMask segment_kscsa(const KscsaModel& model, const ImageGrid& image, const SegMask& roi, SegmentStats* stats) {
    if (!model.epsilon) throw DomainError("segment_kscsa: epsilon is unset; run sweep_epsilon first");
    const auto margins = kscsa_margins(model, image, roi, stats);
    return threshold_margins(margins, roi, *model.epsilon);
}

std::vector<double> default_epsilon_grid(std::span<const std::vector<double>> margins, int points) {
    if (points < 2) throw DomainError("default_epsilon_grid: need at least two points");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& m : margins)
        for (double v : m)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    if (!std::isfinite(lo)) throw DomainError("default_epsilon_grid: no finite margins");
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    return grid;
}

SweepResult sweep_epsilon(const KscsaModel& model, const TrainingCorpus& validation, std::span<const SegMask> rois,
                          std::vector<double> grid) {
    validation.validate();
    if (validation.images.empty()) throw DomainError("sweep_epsilon: empty validation set");
    if (rois.size() != validation.images.size()) throw DomainError("sweep_epsilon: one roi per validation image required");

    std::vector<std::vector<double>> margins;
    for (std::size_t i = 0; i < validation.images.size(); ++i)
        margins.push_back(kscsa_margins(model, validation.images[i], rois[i]));
    if (grid.empty()) grid = default_epsilon_grid(margins);

    SweepResult res;
    std::optional<std::size_t> best;
    for (double eps : grid) {
        SweepRow row;
        row.epsilon = eps;
        std::vector<MetricsRow> per_image;
        for (std::size_t i = 0; i < margins.size(); ++i) {
            const SegMask pred = threshold_margins(margins[i], rois[i], eps);
            row.tumor_pixels.push_back(pred.count());
            per_image.push_back({std::to_string(i), score(pred, validation.masks[i])});
        }
        const MetricsSummary s = summarize(per_image);
        row.mean_acc = s.mean_acc;
        row.mean_cr = s.mean_cr;
        res.table.push_back(std::move(row));
        const auto& cur = res.table.back();
        if (!best) {
            best = res.table.size() - 1;
            continue;
        }
        const auto& b = res.table[*best];
        if (cur.mean_cr > b.mean_cr || (cur.mean_cr == b.mean_cr && cur.mean_acc > b.mean_acc))
            best = res.table.size() - 1;
    }
    res.best_epsilon = res.table[*best].epsilon;
    return res;
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
    char buf[128];
    out << "epsilon,mean_acc,mean_cr,tumor_pixels\n";
    for (const auto& row : sweep.table) {
        std::size_t total = 0;
        for (auto n : row.tumor_pixels) total += n;
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%zu\n", row.epsilon, row.mean_acc, row.mean_cr, total);
        out << buf;
    }
}

// ---------------------------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::string_view kDictMagic = "KSEGDICT";
constexpr std::string_view kKscaMagic = "KSEGKSCA";
constexpr std::string_view kKscsaMagic = "KSEGKSCS";
constexpr std::uint64_t kMaxCount = std::uint64_t(1) << 32;

void check_version(io::Reader& r) {
    const std::size_t at = r.offset();
    const auto v = r.get<std::uint32_t>();
    if (v != kFormatVersion) throw ParseError("unsupported format version " + std::to_string(v), at);
}

void put_kernel(io::Writer& w, const KernelConfig& k) {
    w.put(k.gamma_intensity());
    w.put(static_cast<std::uint8_t>(k.intensity_scale()));
    w.put(static_cast<std::uint8_t>(k.distance_fn()));
}

KernelConfig get_kernel(io::Reader& r) {
    const auto gamma = r.get<double>();
    const auto scale = r.get<std::uint8_t>();
    const auto dist = r.get<std::uint8_t>();
    if (scale > 1 || dist > 1) throw ParseError("bad kernel config", r.offset());
    return KernelConfig(gamma, static_cast<IntensityScale>(scale), static_cast<DistanceFn>(dist));
}

void put_ensemble(io::Writer& w, const EnsembleConfig& e) {
    w.put(static_cast<std::uint8_t>(e.fusion()));
    w.put<std::uint64_t>(e.weights().size());
    w.put_array(e.weights().data(), e.weights().size());
    w.put(e.gamma_location());
    w.put<std::int32_t>(e.neighborhood_radius());
}

EnsembleConfig get_ensemble(io::Reader& r) {
    const auto fusion = r.get<std::uint8_t>();
    if (fusion > 1) throw ParseError("bad fusion tag", r.offset());
    std::vector<double> weights(r.get_count(1024));
    r.get_array(weights.data(), weights.size());
    const auto gamma = r.get<double>();
    const auto radius = r.get<std::int32_t>();
    return EnsembleConfig(static_cast<Fusion>(fusion), std::move(weights), gamma, radius);
}

void put_solver(io::Writer& w, const SolverConfig& s) {
    w.put(s.lambda);
    w.put(s.kkt_tol);
    w.put<std::int32_t>(s.max_nonzeros.value_or(-1));
}

SolverConfig get_solver(io::Reader& r) {
    SolverConfig s;
    s.lambda = r.get<double>();
    s.kkt_tol = r.get<double>();
    const auto nz = r.get<std::int32_t>();
    if (nz >= 0) s.max_nonzeros = nz;
    s.validate();
    return s;
}

void put_dictionary(io::Writer& w, const PixelDictionary& d) {
    w.put_magic(kDictMagic);
    w.put(kFormatVersion);
    put_kernel(w, d.kernel);
    w.put<std::uint8_t>(d.uses_locations());
    if (d.ensemble) put_ensemble(w, *d.ensemble);
    const auto& a = d.dict.coeffs;
    if (!a.isCompressed()) throw DomainError("save_dictionary: coefficients must be compressed");
    const auto t = static_cast<std::uint64_t>(a.rows()), k = static_cast<std::uint64_t>(a.cols());
    w.put(t);
    w.put(k);
    w.put_string(d.dict.train_ref);
    w.put_array(d.intensities.data(), d.intensities.size());
    if (d.ensemble)
        for (const auto& l : d.locations) {
            w.put(l(0));
            w.put(l(1));
        }
    const auto nnz = static_cast<std::uint64_t>(a.nonZeros());
    w.put(nnz);
    for (Index c = 0; c <= a.cols(); ++c) w.put<std::int64_t>(a.outerIndexPtr()[c]);
    for (Index i = 0; i < a.nonZeros(); ++i) w.put<std::int64_t>(a.innerIndexPtr()[i]);
    w.put_array(a.valuePtr(), static_cast<std::size_t>(nnz));
    w.put_array(d.dict.atom_gram.data(), static_cast<std::size_t>(d.dict.atom_gram.size()));
    w.check();
}

PixelDictionary get_dictionary(io::Reader& r) {
    r.expect_magic(kDictMagic);
    check_version(r);
    PixelDictionary d;
    d.kernel = get_kernel(r);
    if (r.get<std::uint8_t>()) d.ensemble = get_ensemble(r);
    const auto t = r.get_count(kMaxCount);
    const auto k = r.get_count(kMaxCount);
    if (t == 0 || k == 0 || k > t) throw ParseError("bad dictionary shape", r.offset());
    d.dict.train_ref = r.get_string();
    d.intensities.resize(t);
    r.get_array(d.intensities.data(), t);
    if (d.ensemble) {
        d.locations.resize(t);
        for (auto& l : d.locations) {
            l(0) = r.get<double>();
            l(1) = r.get<double>();
        }
    }
    const auto nnz = r.get_count(t * k);
    KernelDictionary<double>::Sparse a(static_cast<Index>(t), static_cast<Index>(k));
    a.resizeNonZeros(static_cast<Index>(nnz));
    for (std::uint64_t c = 0; c <= k; ++c) {
        const auto v = r.get<std::int64_t>();
        if (v < 0 || static_cast<std::uint64_t>(v) > nnz) throw ParseError("bad column pointer", r.offset());
        a.outerIndexPtr()[c] = static_cast<Index>(v);
    }
    for (std::uint64_t i = 0; i < nnz; ++i) {
        const auto v = r.get<std::int64_t>();
        if (v < 0 || static_cast<std::uint64_t>(v) >= t) throw ParseError("bad row index", r.offset());
        a.innerIndexPtr()[i] = static_cast<Index>(v);
    }
    r.get_array(a.valuePtr(), nnz);
    d.dict.coeffs = std::move(a);
    d.dict.atom_gram.resize(static_cast<Index>(k), static_cast<Index>(k));
    r.get_array(d.dict.atom_gram.data(), k * k);
    return d;
}

void put_classifier(io::Writer& w, const LinearClassifier& c) {
    w.put<std::uint64_t>(static_cast<std::uint64_t>(c.weights.size()));
    w.put_array(c.weights.data(), static_cast<std::size_t>(c.weights.size()));
    w.put(c.bias);
    w.put(c.reg_c);
}

LinearClassifier get_classifier(io::Reader& r) {
    LinearClassifier c;
    c.weights.resize(static_cast<Index>(r.get_count(kMaxCount)));
    r.get_array(c.weights.data(), static_cast<std::size_t>(c.weights.size()));
    c.bias = r.get<double>();
    c.reg_c = r.get<double>();
    return c;
}

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    fn(out);
    if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}

std::ifstream open_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

}  // namespace

void save_dictionary(std::ostream& out, const PixelDictionary& dict) {
    io::Writer w(out);
    put_dictionary(w, dict);
}

PixelDictionary load_dictionary(std::istream& in) {
    io::Reader r(in);
    return get_dictionary(r);
}

void save_model(std::ostream& out, const KscaModel& m) {
    io::Writer w(out);
    w.put_magic(kKscaMagic);
    w.put(kFormatVersion);
    put_kernel(w, m.kernel);
    put_ensemble(w, m.ensemble);
    put_solver(w, m.solver);
    put_dictionary(w, m.dictionary);
    put_classifier(w, m.classifier);
    w.check();
}

void save_model(std::ostream& out, const KscsaModel& m) {
    io::Writer w(out);
    w.put_magic(kKscsaMagic);
    w.put(kFormatVersion);
    put_kernel(w, m.kernel);
    put_solver(w, m.solver);
    put_dictionary(w, m.tumor);
    put_dictionary(w, m.nontumor);
    w.put<std::uint8_t>(m.epsilon.has_value());
    w.put(m.epsilon.value_or(0.0));
    w.check();
}

KscaModel load_ksca(std::istream& in) {
    io::Reader r(in);
    r.expect_magic(kKscaMagic);
    check_version(r);
    KscaModel m;
    m.kernel = get_kernel(r);
    m.ensemble = get_ensemble(r);
    m.solver = get_solver(r);
    m.dictionary = get_dictionary(r);
    m.classifier = get_classifier(r);
    if (m.classifier.weights.size() != m.dictionary.dict.num_atoms())
        throw ParseError("classifier and dictionary sizes disagree", r.offset());
    return m;
}

KscsaModel load_kscsa(std::istream& in) {
    io::Reader r(in);
    r.expect_magic(kKscsaMagic);
    check_version(r);
    KscsaModel m;
    m.kernel = get_kernel(r);
    m.solver = get_solver(r);
    m.tumor = get_dictionary(r);
    m.nontumor = get_dictionary(r);
    const bool has_eps = r.get<std::uint8_t>() != 0;
    const double eps = r.get<double>();
    if (has_eps) m.epsilon = eps;
    return m;
}

void save_model(const std::filesystem::path& path, const KscaModel& model) {
    write_file(path, [&](std::ostream& out) { save_model(out, model); });
}

void save_model(const std::filesystem::path& path, const KscsaModel& model) {
    write_file(path, [&](std::ostream& out) { save_model(out, model); });
}

KscaModel load_ksca(const std::filesystem::path& path) {
    auto in = open_file(path);
    return load_ksca(in);
}

KscsaModel load_kscsa(const std::filesystem::path& path) {
    auto in = open_file(path);
    return load_kscsa(in);
}

}  // namespace kernseg
