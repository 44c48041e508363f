// Command-line front end: phantom generation, training, segmentation, evaluation and diagnostics.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "kernseg/acm.hpp"
#include "kernseg/diagnostics.hpp"
#include "kernseg/errors.hpp"
#include "kernseg/metrics.hpp"
#include "kernseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace kernseg;

namespace {

struct Options {
    std::uint64_t seed = 0;
    double gamma = 0.3;
    double gamma_loc = 0.5;
    int radius = 5;
    double lambda = 0.1;
    long atoms = 256;
    std::size_t budget = 0;
    std::string epsilon_grid;
    std::string roi;
    std::string out;
    std::string manifest;
    std::string split;
    std::string model;
    std::string image;
    std::string table;
    std::vector<std::string> pred, truth;
    int roi_dilate = 6;
    int n_train = 10, n_validation = 4, n_test = 10;
    std::optional<double> epsilon;
    AcmConfig acm;
    int classes = 3, per_class = 100, curves = 5;
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    return out;
}

TrainingCorpus corpus_from(const Options& o, const std::string& split) {
    return load_corpus(read_manifest(o.manifest), split);
}

SolverConfig solver_from(const Options& o) {
    SolverConfig s;
    s.lambda = o.lambda;
    s.validate();
    return s;
}

/// "a,b,c" lists values; "lo:hi:n" is an n-point linear grid.
std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    if (text.empty()) return grid;
    if (text.find(':') != std::string::npos) {
        double lo = 0, hi = 0;
        int n = 0;
        char c1 = 0, c2 = 0;
        std::istringstream in(text);
        if (!(in >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' || n < 2)
            throw CLI::ValidationError("--epsilon-grid", "expected lo:hi:n with n >= 2");
        for (int i = 0; i < n; ++i) grid.push_back(lo + (hi - lo) * i / (n - 1));
        return grid;
    }
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            std::size_t used = 0;
            grid.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--epsilon-grid", "bad value '" + tok + "'");
        }
    }
    return grid;
}

int run_phantom_gen(const Options& o) {
    const fs::path dir = o.out;
    fs::create_directories(dir);
    std::vector<ManifestEntry> entries;
    const std::pair<const char*, int> splits[] = {{"train", o.n_train}, {"validation", o.n_validation}, {"test", o.n_test}};
    std::uint64_t index = 0;
    for (const auto& [split, count] : splits)
        for (int i = 0; i < count; ++i, ++index) {
            const Phantom p = gen_phantom(PhantomSpec::random(o.seed * 1000003ULL + index));
            char stem[64];
            std::snprintf(stem, sizeof stem, "%s_%03d", split, i);
            const fs::path img = dir / (std::string(stem) + ".pgm");
            const fs::path mask = dir / (std::string(stem) + "_mask.pgm");
            write_pgm(p.image, img);
            write_mask(p.mask, mask);
            write_mask(dilate(p.mask, o.roi_dilate), dir / (std::string(stem) + "_roi.pgm"));
            entries.push_back({img.filename(), mask.filename(), split});
        }
    const fs::path manifest = o.manifest.empty() ? dir / "manifest.jsonl" : fs::path(o.manifest);
    write_manifest(entries, manifest);
    std::cout << "wrote " << entries.size() << " phantoms, manifest " << manifest.string() << "\n";
    return 0;
}

int run_train_ksca(const Options& o) {
    TrainingCorpus corpus = corpus_from(o, o.split.empty() ? "train" : o.split);
    corpus.sample_budget = o.budget ? o.budget : 15000;
    KscaOptions opts;
    opts.solver = solver_from(o);
    const KscaModel model = train_ksca(corpus, KernelConfig(o.gamma), EnsembleConfig(Fusion::Hadamard, {}, o.gamma_loc, o.radius),
                                       o.atoms, o.seed, opts);
    save_model(fs::path(o.out), model);
    return 0;
}

int run_train_kscsa(const Options& o) {
    const TrainingCorpus corpus = corpus_from(o, o.split.empty() ? "train" : o.split);
    const KscsaModel model =
        train_kscsa(corpus, KernelConfig(o.gamma), o.atoms, o.budget ? o.budget : 10000, o.seed, solver_from(o));
    save_model(fs::path(o.out), model);
    return 0;
}

int run_sweep(const Options& o) {
    KscsaModel model = load_kscsa(fs::path(o.model));
    const TrainingCorpus validation = corpus_from(o, o.split.empty() ? "validation" : o.split);
    std::vector<SegMask> rois;
    for (const auto& m : validation.masks) rois.push_back(dilate(m, o.roi_dilate));
    const SweepResult sweep = sweep_epsilon(model, validation, rois, parse_grid(o.epsilon_grid));
    model.epsilon = sweep.best_epsilon;
    save_model(fs::path(o.out), model);
    if (!o.table.empty()) {
        auto out = open_out(o.table);
        write_sweep_csv(out, sweep);
    } else {
        write_sweep_csv(std::cout, sweep);
    }
    std::printf("epsilon=%.6f\n", sweep.best_epsilon);
    return 0;
}

int run_segment_auto(const Options& o) {
    const KscaModel model = load_ksca(fs::path(o.model));
    write_mask(segment_ksca(model, read_pgm(o.image)), o.out);
    return 0;
}

int run_segment_semi(const Options& o) {
    KscsaModel model = load_kscsa(fs::path(o.model));
    if (o.epsilon) model.epsilon = *o.epsilon;
    write_mask(segment_kscsa(model, read_pgm(o.image), read_mask(o.roi)), o.out);
    return 0;
}

int run_baseline_acm(const Options& o) {
    const AcmResult res = evolve(read_pgm(o.image), read_mask(o.roi), o.acm);
    write_mask(res.mask, o.out);
    std::printf("iterations=%d energy=%.6f\n", res.iterations, res.energy_trace.back());
    return 0;
}

int run_eval(const Options& o) {
    if (o.pred.size() != o.truth.size()) throw CLI::ValidationError("--pred/--truth", "must be given in pairs");
    std::vector<MetricsRow> rows;
    for (std::size_t i = 0; i < o.pred.size(); ++i)
        rows.push_back({fs::path(o.pred[i]).stem().string(), score(read_mask(o.pred[i]), read_mask(o.truth[i]))});
    if (!o.out.empty()) {
        auto out = open_out(o.out);
        write_metrics_csv(out, rows);
    }
    const MetricsReport& r = rows.size() == 1 ? rows.front().report : summarize(rows).pooled;
    std::printf("acc=%.6f cr=%.6f\n", r.acc, r.cr);
    return 0;
}

int run_diag_correlation(const Options& o) {
    const BlobCorpus corpus = make_blob_corpus(o.classes, o.per_class, 4, 3.0, 0.5, o.seed);
    BlobCodingConfig cfg;
    cfg.gamma = o.gamma;
    cfg.atoms = o.atoms;
    cfg.solver = solver_from(o);
    cfg.seed = o.seed;
    const CorrelationReport rep = blob_code_correlation(corpus, cfg);
    if (!o.out.empty()) {
        auto out = open_out(o.out);
        char buf[32];
        for (Eigen::Index r = 0; r < rep.correlation.rows(); ++r) {
            for (Eigen::Index c = 0; c < rep.correlation.cols(); ++c) {
                std::snprintf(buf, sizeof buf, "%s%.6f", c ? "," : "", rep.correlation(r, c));
                out << buf;
            }
            out << "\n";
        }
    }
    std::printf("intra=%.6f inter=%s excluded=%zu\n", rep.intra_mean.value_or(0.0),
                rep.inter_mean ? std::to_string(*rep.inter_mean).c_str() : "absent", rep.excluded);
    return 0;
}

int run_diag_recon(const Options& o) {
    const TrainingCorpus corpus = corpus_from(o, o.split.empty() ? "train" : o.split);
    const auto curves = phantom_recon_curves(corpus, o.budget ? o.budget : 500, o.atoms, o.gamma, o.curves, o.seed);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!o.out.empty()) {
        file = open_out(o.out);
        out = &file;
    }
    *out << "sample,sparsity,error\n";
    char buf[96];
    for (const auto& c : curves)
        for (const auto& [s, e] : c.errors) {
            std::snprintf(buf, sizeof buf, "%zu,%d,%.6e\n", c.sample, s, e);
            *out << buf;
        }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel sparse coding tumor segmentation"};
    app.require_subcommand(1);
    Options o;

    auto seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Random seed"); };
    auto kernel = [&](CLI::App* c) {
        c->add_option("--gamma", o.gamma, "Intensity RBF gamma")->check(CLI::PositiveNumber);
        c->add_option("--lambda", o.lambda, "Sparsity penalty")->check(CLI::NonNegativeNumber);
        c->add_option("--atoms", o.atoms, "Dictionary size")->check(CLI::PositiveNumber);
    };
    auto manifest = [&](CLI::App* c) {
        c->add_option("--manifest", o.manifest, "Corpus manifest (JSONL)")->required()->check(CLI::ExistingFile);
        c->add_option("--split", o.split, "Manifest split to use");
    };

    auto* gen = app.add_subcommand("phantom-gen", "Generate a train/validation/test phantom corpus");
    seed(gen);
    gen->add_option("--out", o.out, "Output directory")->required();
    gen->add_option("--manifest", o.manifest, "Manifest path (default <out>/manifest.jsonl)");
    gen->add_option("--train", o.n_train)->check(CLI::NonNegativeNumber);
    gen->add_option("--validation", o.n_validation)->check(CLI::NonNegativeNumber);
    gen->add_option("--test", o.n_test)->check(CLI::NonNegativeNumber);
    gen->add_option("--roi-dilate", o.roi_dilate, "ROI = ground truth dilated by this radius")->check(CLI::NonNegativeNumber);

    auto* tka = app.add_subcommand("train-ksca", "Train the automated (ensemble kernel + SVM) model");
    seed(tka);
    kernel(tka);
    manifest(tka);
    tka->add_option("--gamma-loc", o.gamma_loc, "Location kernel gamma")->check(CLI::PositiveNumber);
    tka->add_option("--radius", o.radius, "Location neighborhood radius")->check(CLI::NonNegativeNumber);
    tka->add_option("--budget", o.budget, "Total training pixels (default 15000)");
    tka->add_option("--out", o.out, "Model output path")->required();

    auto* tks = app.add_subcommand("train-kscsa", "Train the semi-automated (two dictionary) model");
    seed(tks);
    kernel(tks);
    manifest(tks);
    tks->add_option("--budget", o.budget, "Training pixels per class (default 10000)");
    tks->add_option("--out", o.out, "Model output path")->required();

    auto* sweep = app.add_subcommand("sweep-epsilon", "Choose the error threshold on validation data");
    manifest(sweep);
    sweep->add_option("--model", o.model, "KSCSA model")->required()->check(CLI::ExistingFile);
    sweep->add_option("--epsilon-grid", o.epsilon_grid, "a,b,c or lo:hi:n (default: 21 points over observed range)");
    sweep->add_option("--roi-dilate", o.roi_dilate, "Validation ROI dilation radius")->check(CLI::NonNegativeNumber);
    sweep->add_option("--table", o.table, "CSV output for the sweep table (default stdout)");
    sweep->add_option("--out", o.out, "Updated model path")->required();

    auto* sa = app.add_subcommand("segment-auto", "Segment an image with a KSCA model");
    sa->add_option("--model", o.model)->required()->check(CLI::ExistingFile);
    sa->add_option("--image", o.image)->required()->check(CLI::ExistingFile);
    sa->add_option("--out", o.out, "Output mask (PGM)")->required();

    auto* ss = app.add_subcommand("segment-semi", "Segment an image inside an ROI with a KSCSA model");
    ss->add_option("--model", o.model)->required()->check(CLI::ExistingFile);
    ss->add_option("--image", o.image)->required()->check(CLI::ExistingFile);
    ss->add_option("--roi", o.roi, "ROI mask (PGM)")->required()->check(CLI::ExistingFile);
    ss->add_option("--epsilon", o.epsilon, "Override the model threshold");
    ss->add_option("--out", o.out, "Output mask (PGM)")->required();

    auto* acm = app.add_subcommand("baseline-acm", "Chan-Vese active contour from an initial mask");
    acm->add_option("--image", o.image)->required()->check(CLI::ExistingFile);
    acm->add_option("--roi", o.roi, "Initial mask (PGM)")->required()->check(CLI::ExistingFile);
    acm->add_option("--out", o.out, "Output mask (PGM)")->required();
    acm->add_option("--max-iters", o.acm.max_iters)->check(CLI::PositiveNumber);
    acm->add_option("--mu", o.acm.mu)->check(CLI::NonNegativeNumber);
    acm->add_option("--step", o.acm.step_size)->check(CLI::PositiveNumber);

    auto* ev = app.add_subcommand("eval", "Score predicted masks against ground truth");
    ev->add_option("--pred", o.pred)->required()->check(CLI::ExistingFile);
    ev->add_option("--truth", o.truth)->required()->check(CLI::ExistingFile);
    ev->add_option("--out", o.out, "Metrics CSV");

    auto* dc = app.add_subcommand("diag-correlation", "Code correlation on a synthetic multi-class corpus");
    seed(dc);
    dc->add_option("--gamma", o.gamma)->check(CLI::PositiveNumber);
    dc->add_option("--lambda", o.lambda)->check(CLI::NonNegativeNumber);
    dc->add_option("--atoms", o.atoms)->check(CLI::PositiveNumber);
    dc->add_option("--classes", o.classes)->check(CLI::PositiveNumber);
    dc->add_option("--per-class", o.per_class)->check(CLI::PositiveNumber);
    dc->add_option("--out", o.out, "Correlation matrix CSV");

    auto* dr = app.add_subcommand("diag-recon-curve", "Reconstruction error against sparsity on phantom pixels");
    seed(dr);
    manifest(dr);
    dr->add_option("--gamma", o.gamma)->check(CLI::PositiveNumber);
    dr->add_option("--atoms", o.atoms)->check(CLI::PositiveNumber);
    dr->add_option("--budget", o.budget, "Training pixels per class (default 500)");
    dr->add_option("--curves", o.curves)->check(CLI::PositiveNumber);
    dr->add_option("--out", o.out, "CSV output (default stdout)");

    // Defaults that differ from the shared Options for some subcommands.
    dc->preparse_callback([&](std::size_t) {
        o.gamma = 0.5;
        o.atoms = 6;
    });
    dr->preparse_callback([&](std::size_t) { o.atoms = 32; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen) return run_phantom_gen(o);
        if (*tka) return run_train_ksca(o);
        if (*tks) return run_train_kscsa(o);
        if (*sweep) return run_sweep(o);
        if (*sa) return run_segment_auto(o);
        if (*ss) return run_segment_semi(o);
        if (*acm) return run_baseline_acm(o);
        if (*ev) return run_eval(o);
        if (*dc) return run_diag_correlation(o);
        if (*dr) return run_diag_recon(o);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
