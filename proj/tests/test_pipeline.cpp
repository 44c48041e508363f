#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kernseg/errors.hpp"
#include "kernseg/pipeline.hpp"
#include "oracles.hpp"

using namespace kernseg;
using Eigen::Index;
using Eigen::VectorXd;

namespace {

// Half-resolution phantom: same layout as the default generator, scaled to 128 x 128.
Phantom small_phantom(std::uint64_t seed) {
    PhantomSpec s = PhantomSpec::random(seed);
    s.width = s.height = 128;
    for (double* v : {&s.brain_cx, &s.brain_cy, &s.brain_rx, &s.brain_ry, &s.tumor_cx, &s.tumor_cy, &s.tumor_rx,
                      &s.tumor_ry})
        *v *= 0.5;
    return gen_phantom(s);
}

TrainingCorpus small_corpus(std::uint64_t first_seed, int n) {
    TrainingCorpus c;
    for (int i = 0; i < n; ++i) {
        const auto p = small_phantom(first_seed + static_cast<std::uint64_t>(i));
        c.images.push_back(p.image);
        c.masks.push_back(p.mask);
    }
    return c;
}

std::vector<SegMask> rois_for(const TrainingCorpus& c, int radius = 4) {
    std::vector<SegMask> rois;
    for (const auto& m : c.masks) rois.push_back(dilate(m, radius));
    return rois;
}

const EnsembleConfig kWideLocation(Fusion::Hadamard, {}, 5e-4, 48);

// Shared fixtures: training is the expensive part, so each model is built once.
const TrainingCorpus& train_set() {
    static const TrainingCorpus c = [] {
        auto out = small_corpus(100, 3);
        out.sample_budget = 2000;
        return out;
    }();
    return c;
}

const KscsaModel& kscsa() {
    static const KscsaModel m = train_kscsa(train_set(), KernelConfig(), 48, 1000, 7);
    return m;
}

const KscaModel& ksca() {
    static const KscaModel m = train_ksca(train_set(), KernelConfig(), kWideLocation, 160, 7);
    return m;
}

std::string bytes_of(const auto& model) {
    std::ostringstream out;
    save_model(out, model);
    return out.str();
}

}  // namespace

TEST_CASE("pixel coder matches the dense kernel product") {
    const auto samples = sample_pixels(train_set(), 150, 2);
    for (bool with_locations : {false, true}) {
        const auto ensemble = with_locations ? std::optional<EnsembleConfig>(kWideLocation) : std::nullopt;
        const auto dict = learn_pixel_dictionary(samples, KernelConfig(), ensemble, 20, 3);
        REQUIRE(dict.dict.num_train() == static_cast<Index>(samples.size()));
        CHECK(dict.uses_locations() == with_locations);
        const PixelCoder coder(dict, SolverConfig{});
        CHECK(coder.num_atoms() == 20);
        const Eigen::MatrixXd a(dict.dict.coeffs);
        for (const auto& q : sample_pixels(train_set(), 20, 9)) {
            // K(D, y) = Aᵀ k(Y, y) with the same drop rule on each kernel entry
            VectorXd k_yy_col(static_cast<Index>(samples.size()));
            for (std::size_t i = 0; i < samples.size(); ++i) {
                double v = std::exp(-0.3 * std::pow(double(samples[i].intensity) - q.intensity, 2));
                if (with_locations && v >= kGramDropTolerance) {
                    const auto d = samples[i].location() - q.location();
                    v = d.cwiseAbs().maxCoeff() > 48 ? 0.0 : v * std::exp(-5e-4 * d.squaredNorm());
                }
                k_yy_col(static_cast<Index>(i)) = v >= kGramDropTolerance ? v : 0.0;
            }
            const VectorXd want = a.transpose() * k_yy_col;
            const auto p = coder.problem(q.intensity, q.location());
            CHECK(p.k_yy == 1.0);
            CHECK((p.k_dy - want).cwiseAbs().maxCoeff() <= 1e-10);
            const auto code = coder.code(q.intensity, q.location());
            CHECK(oracle::kkt_ok(p.k_dy, p.k_dd->matrix(), code.coefficients, 0.1, 1e-6));
        }
    }
    CHECK_THROWS_AS(learn_pixel_dictionary({}, KernelConfig(), std::nullopt, 2, 0), DomainError);
}

TEST_CASE("KSCSA: held-in segmentation, counters and ROI handling") {
    const auto& model = kscsa();
    const auto& c = train_set();
    const auto rois = rois_for(c);
    const auto sweep = sweep_epsilon(model, c, rois);
    KscsaModel tuned = model;
    tuned.epsilon = sweep.best_epsilon;

    for (std::size_t i = 0; i < c.images.size(); ++i) {
        SegmentStats stats;
        const auto pred = segment_kscsa(tuned, c.images[i], rois[i], &stats);
        CHECK(stats.coding_calls == rois[i].count());
        const auto r = score(pred, c.masks[i]);
        CHECK(r.acc >= 0.95);
        CHECK(r.cr >= 0.9);
        for (std::size_t p = 0; p < pred.size(); ++p)
            if (!rois[i].labels[p]) CHECK(pred.labels[p] == 0);
        const auto margins = kscsa_margins(model, c.images[i], rois[i]);
        for (std::size_t p = 0; p < margins.size(); ++p) CHECK(std::isnan(margins[p]) == !rois[i].labels[p]);
    }
    CHECK_THROWS_AS(segment_kscsa(model, c.images[0], rois[0]), DomainError);
    CHECK_THROWS_AS(kscsa_margins(model, c.images[0], SegMask(128, 128)), DomainError);
    CHECK_THROWS_AS(kscsa_margins(model, c.images[0], SegMask(64, 128, 1)), DomainError);
}

TEST_CASE("epsilon sweep") {
    const auto& c = train_set();
    const auto rois = rois_for(c);
    const auto sweep = sweep_epsilon(kscsa(), c, rois);
    REQUIRE(sweep.table.size() == 21);
    for (std::size_t i = 1; i < sweep.table.size(); ++i) {
        CHECK(sweep.table[i].epsilon > sweep.table[i - 1].epsilon);
        for (std::size_t im = 0; im < c.images.size(); ++im)
            CHECK(sweep.table[i].tumor_pixels[im] <= sweep.table[i - 1].tumor_pixels[im]);
    }
    double best_cr = -1e300;
    for (const auto& row : sweep.table) best_cr = std::max(best_cr, row.mean_cr);
    const auto chosen = std::find_if(sweep.table.begin(), sweep.table.end(),
                                     [&](const SweepRow& r) { return r.epsilon == sweep.best_epsilon; });
    REQUIRE(chosen != sweep.table.end());
    CHECK(chosen->mean_cr == best_cr);

    SUBCASE("a single-point grid selects that point") {
        CHECK(sweep_epsilon(kscsa(), c, rois, {0.25}).best_epsilon == 0.25);
    }
    SUBCASE("ties keep the first grid entry") {
        // every threshold above the largest margin yields an empty prediction
        const auto far = sweep_epsilon(kscsa(), c, rois, {1e6, 2e6});
        CHECK(far.best_epsilon == 1e6);
        CHECK(far.table[0].mean_acc == 0.0);
    }
    SUBCASE("csv layout") {
        std::ostringstream out;
        write_sweep_csv(out, sweep);
        const std::string csv = out.str();
        CHECK(csv.rfind("epsilon,mean_acc,mean_cr,tumor_pixels\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 22);
    }
    const std::vector<std::vector<double>> nan_only{{std::nan("")}};
    CHECK_THROWS_AS(default_epsilon_grid(nan_only), DomainError);
    const std::vector<std::vector<double>> two{{-1.0, std::nan("")}, {3.0}};
    const auto g = default_epsilon_grid(two, 5);
    CHECK(g == std::vector<double>{-1.0, 0.0, 1.0, 2.0, 3.0});
    CHECK_THROWS_AS(sweep_epsilon(kscsa(), c, std::span<const SegMask>(rois).first(1)), DomainError);
}

TEST_CASE("threshold_margins") {
    SegMask roi(3, 1);
    roi.labels = {1, 1, 0};
    const std::vector<double> m{0.5, -0.5, std::nan("")};
    CHECK(threshold_margins(m, roi, 0.0).labels == std::vector<std::uint8_t>{1, 0, 0});
    CHECK(threshold_margins(m, roi, -0.5).labels == std::vector<std::uint8_t>{1, 1, 0});
    CHECK(threshold_margins(m, roi, 0.5).labels == std::vector<std::uint8_t>{1, 0, 0});
    CHECK_THROWS_AS(threshold_margins(std::vector<double>{0.0}, roi, 0.0), DomainError);
}

TEST_CASE("KSCA: held-in segmentation and counters") {
    const auto& model = ksca();
    const auto& c = train_set();
    CHECK(model.dictionary.uses_locations());
    for (std::size_t i = 0; i < c.images.size(); ++i) {
        SegmentStats stats;
        const auto pred = segment_ksca(model, c.images[i], &stats);
        CHECK(stats.coding_calls == c.images[i].size());
        const auto r = score(pred, c.masks[i]);
        CHECK(r.acc >= 0.95);
        CHECK(r.cr >= 0.9);
    }
    const EnsembleConfig weighted(Fusion::WeightedSum, {1.0, 1.0});
    CHECK_THROWS_AS(train_ksca(c, KernelConfig(), weighted, 8, 1), DomainError);
    TrainingCorpus no_budget = c;
    no_budget.sample_budget = 0;
    CHECK_THROWS_AS(train_ksca(no_budget, KernelConfig(), kWideLocation, 8, 1), DomainError);
}

TEST_CASE("training is deterministic per seed") {
    CHECK(bytes_of(kscsa()) == bytes_of(train_kscsa(train_set(), KernelConfig(), 48, 1000, 7)));
    CHECK(bytes_of(kscsa()) != bytes_of(train_kscsa(train_set(), KernelConfig(), 48, 1000, 8)));
}

TEST_CASE("model serialization") {
    const auto& c = train_set();
    const auto rois = rois_for(c);
    SUBCASE("KSCSA round trip") {
        KscsaModel m = kscsa();
        m.epsilon = -0.125;
        const auto b = bytes_of(m);
        std::istringstream in(b);
        const auto back = load_kscsa(in);
        CHECK(back.epsilon == m.epsilon);
        CHECK(bytes_of(back) == b);
        CHECK(segment_kscsa(back, c.images[0], rois[0]) == segment_kscsa(m, c.images[0], rois[0]));
    }
    SUBCASE("KSCA round trip") {
        const auto b = bytes_of(ksca());
        std::istringstream in(b);
        const auto back = load_ksca(in);
        CHECK(bytes_of(back) == b);
        CHECK(back.classifier.weights == ksca().classifier.weights);
        CHECK(back.dictionary.locations == ksca().dictionary.locations);
    }
    SUBCASE("dictionary round trip") {
        std::ostringstream out;
        save_dictionary(out, kscsa().tumor);
        std::istringstream in(out.str());
        const auto d = load_dictionary(in);
        CHECK(d.intensities == kscsa().tumor.intensities);
        CHECK(Eigen::MatrixXd(d.dict.coeffs) == Eigen::MatrixXd(kscsa().tumor.dict.coeffs));
        CHECK(d.dict.atom_gram == kscsa().tumor.dict.atom_gram);
    }
    SUBCASE("corrupt input is rejected") {
        const auto b = bytes_of(kscsa());
        for (std::size_t cut : {std::size_t(0), std::size_t(5), b.size() / 2, b.size() - 1}) {
            std::istringstream in(b.substr(0, cut));
            CHECK_THROWS_AS(load_kscsa(in), ParseError);
        }
        std::istringstream wrong_kind(b);
        CHECK_THROWS_AS(load_ksca(wrong_kind), ParseError);
        std::string bumped = b;
        bumped[8] = static_cast<char>(bumped[8] + 1);  // version field follows the 8-byte magic
        std::istringstream in(bumped);
        CHECK_THROWS_AS(load_kscsa(in), ParseError);
    }
}

TEST_CASE("KSCA decision values separate held-out pixels") {
    const auto held_out = small_corpus(200, 2);
    const PixelCoder coder(ksca().dictionary, ksca().solver);
    std::vector<double> scores;
    std::vector<int> positive;
    for (const auto& px : sample_pixels(held_out, 300, 4)) {
        scores.push_back(ksca().classifier.decision(coder.code(px.intensity, px.location()).coefficients));
        positive.push_back(px.label);
    }
    CHECK(oracle::auc(scores, positive) > 0.95);
}
