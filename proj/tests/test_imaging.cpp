#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "kernseg/errors.hpp"
#include "kernseg/imaging.hpp"
#include "oracles.hpp"

using namespace kernseg;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("kernseg_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("PGM encoding") {
    ImageGrid g(2, 2);
    g.pixels = {0, 255, 128, 7};
    const auto enc = encode_pgm(g);
    auto want = bytes("P5\n2 2\n255\n");
    want.insert(want.end(), {0, 255, 128, 7});
    CHECK(enc == want);
    CHECK(decode_pgm(enc) == g);
}

TEST_CASE("PGM decoding: header variants and errors") {
    auto with_comment = bytes("P5\n# a comment\n3  1\n255\n");
    with_comment.insert(with_comment.end(), {1, 2, 3});
    const auto g = decode_pgm(with_comment);
    CHECK(g.width == 3);
    CHECK(g.height == 1);
    CHECK(g.pixels == std::vector<std::uint8_t>{1, 2, 3});

    auto truncated = bytes("P5\n2 2\n255\n");
    truncated.insert(truncated.end(), {1, 2, 3});
    CHECK_THROWS_AS(decode_pgm(truncated), ParseError);
    try {
        decode_pgm(truncated);
    } catch (const ParseError& e) {
        CHECK(e.offset() == truncated.size());
    }
    CHECK_THROWS_AS(decode_pgm(bytes("P2\n1 1\n255\n0")), ParseError);
    CHECK_THROWS_AS(decode_pgm(bytes("P5\n1 1\n65535\n\1\1")), ParseError);
    CHECK_THROWS_AS(decode_pgm(bytes("P5\n0 1\n255\n")), ParseError);
    CHECK_THROWS_AS(decode_pgm(bytes("P5\nx 1\n255\n\1")), ParseError);
    CHECK_THROWS_AS(decode_pgm(bytes("")), ParseError);
}

TEST_CASE("PGM and mask files round trip") {
    const auto dir = scratch_dir("pgm");
    const auto p = gen_phantom(PhantomSpec::random(4));
    write_pgm(p.image, dir / "img.pgm");
    write_mask(p.mask, dir / "mask.pgm");
    CHECK(read_pgm(dir / "img.pgm") == p.image);
    CHECK(read_mask(dir / "mask.pgm") == p.mask);
    CHECK(grid_from_mask(p.mask).pixels[0] % 255 == 0);
    CHECK_THROWS_AS(read_pgm(dir / "missing.pgm"), DomainError);
    fs::remove_all(dir);
}

TEST_CASE("phantom generation") {
    PhantomSpec spec;
    spec.seed = 99;
    SUBCASE("noise-free pixels sit inside their bands") {
        spec.noise_sigma = 0.0;
        const auto p = gen_phantom(spec);
        CHECK(p.image.width == 256);
        CHECK(p.mask.count() > 0);
        for (std::size_t i = 0; i < p.image.size(); ++i) {
            const int v = p.image.pixels[i];
            if (p.mask.labels[i]) {
                const bool ring = v >= spec.ring.lo && v <= spec.ring.hi;
                const bool core = v >= spec.core.lo && v <= spec.core.hi;
                CHECK((ring || core));
            } else {
                const bool tissue = v >= spec.tissue.lo && v <= spec.tissue.hi;
                const bool bg = v >= spec.background.lo && v <= spec.background.hi;
                CHECK((tissue || bg));
            }
        }
    }
    SUBCASE("tumor area is close to the analytic ellipse") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto r = PhantomSpec::random(s);
            const double area = static_cast<double>(gen_phantom(r).mask.count());
            CHECK(std::abs(area - r.tumor_area()) <= 0.1 * r.tumor_area());
        }
    }
    SUBCASE("deterministic per seed") {
        CHECK(gen_phantom(PhantomSpec::random(5)).image == gen_phantom(PhantomSpec::random(5)).image);
        CHECK_FALSE(gen_phantom(PhantomSpec::random(5)).image == gen_phantom(PhantomSpec::random(6)).image);
    }
    SUBCASE("invalid specs") {
        PhantomSpec bad = spec;
        bad.ring = {100, 120};  // overlaps the tissue band
        CHECK_THROWS_AS(gen_phantom(bad), DomainError);
        bad = spec;
        bad.noise_sigma = -1;
        CHECK_THROWS_AS(gen_phantom(bad), DomainError);
        bad = spec;
        bad.width = 0;
        CHECK_THROWS_AS(gen_phantom(bad), DomainError);
    }
}

TEST_CASE("dilate") {
    SegMask m(7, 7);
    m.set(3, 3, true);
    const auto d = dilate(m, 2);
    CHECK(d.count() == 25);
    CHECK(d.at(1, 1));
    CHECK_FALSE(d.at(0, 3));
    CHECK(dilate(m, 0) == m);
    SegMask corner(4, 4);
    corner.set(0, 0, true);
    CHECK(dilate(corner, 10).count() == 16);
    CHECK_THROWS_AS(dilate(m, -1), DomainError);
}

TEST_CASE("normalized_location") {
    CHECK(normalized_location(0, 0, 100, 50) == Location<double>(0, 0));
    const auto l = normalized_location(25, 50, 100, 50);
    CHECK(l(0) == doctest::Approx(128.0));
    CHECK(l(1) == doctest::Approx(128.0));
}

TEST_CASE("pixel sampling") {
    TrainingCorpus corpus;
    for (std::uint64_t s = 0; s < 3; ++s) {
        const auto p = gen_phantom(PhantomSpec::random(s));
        corpus.images.push_back(p.image);
        corpus.masks.push_back(p.mask);
    }
    std::size_t tumor_total = 0;
    for (const auto& m : corpus.masks) tumor_total += m.count();

    SUBCASE("zero budget") {
        SampleReport rep;
        CHECK(sample_pixels(corpus, 0, 1, &rep).empty());
        CHECK_FALSE(rep.clamped);
    }
    SUBCASE("labels, uniqueness and clamping") {
        SampleReport rep;
        const auto s = sample_pixels(corpus, tumor_total + 10, 1, &rep);
        CHECK(rep.clamped);
        CHECK(rep.tumor_taken == tumor_total);
        CHECK(rep.nontumor_taken == tumor_total + 10);
        std::set<std::tuple<std::size_t, int, int>> seen;
        for (const auto& px : s) {
            CHECK(corpus.masks[px.image].at(px.row, px.col) == (px.label == 1));
            CHECK(corpus.images[px.image].at(px.row, px.col) == px.intensity);
            seen.insert({px.image, px.row, px.col});
        }
        CHECK(seen.size() == s.size());
    }
    SUBCASE("non-tumor samples are spatially uniform") {
        // quadrant counts of the non-tumor pool versus the sample, chi-square goodness of fit
        const std::size_t budget = 20000;
        const auto s = sample_pixels(corpus, budget, 11);
        double pool[4] = {0, 0, 0, 0}, got[4] = {0, 0, 0, 0};
        double pool_total = 0;
        for (std::size_t im = 0; im < corpus.masks.size(); ++im) {
            const auto& m = corpus.masks[im];
            for (int r = 0; r < m.height; ++r)
                for (int c = 0; c < m.width; ++c)
                    if (!m.at(r, c)) {
                        pool[(r >= m.height / 2) * 2 + (c >= m.width / 2)] += 1;
                        pool_total += 1;
                    }
        }
        for (const auto& px : s)
            if (px.label == 0) got[(px.row >= px.height / 2) * 2 + (px.col >= px.width / 2)] += 1;
        double stat = 0;
        for (int q = 0; q < 4; ++q) {
            const double expect = budget * pool[q] / pool_total;
            stat += (got[q] - expect) * (got[q] - expect) / expect;
        }
        CHECK(oracle::chi_square_pvalue(stat, 3) > 0.01);
    }
    SUBCASE("deterministic") { CHECK(sample_pixels(corpus, 500, 3) == sample_pixels(corpus, 500, 3)); }
    SUBCASE("single-class corpus") {
        TrainingCorpus empty;
        empty.images.push_back(ImageGrid(4, 4, 10));
        empty.masks.push_back(SegMask(4, 4));
        CHECK_THROWS_AS(sample_pixels(empty, 5, 1), DomainError);
        CHECK(sample_pixels(empty, 0, 1).empty());
    }
}

TEST_CASE("manifest") {
    const auto dir = scratch_dir("manifest");
    const std::vector<ManifestEntry> entries{{"a.pgm", "a_mask.pgm", "train"}, {"b.pgm", "b_mask.pgm", "test"}};
    for (std::uint64_t s = 0; s < 2; ++s) {
        const auto p = gen_phantom(PhantomSpec::random(s));
        write_pgm(p.image, dir / entries[s].image_path);
        write_mask(p.mask, dir / entries[s].mask_path);
    }
    write_manifest(entries, dir / "manifest.jsonl");
    const auto back = read_manifest(dir / "manifest.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0].image_path == dir / "a.pgm");
    CHECK(back[1].split == "test");
    CHECK(load_corpus(back, "train").images.size() == 1);
    CHECK(load_corpus(back, "").images.size() == 2);
    CHECK_THROWS_AS(load_corpus(back, "validation"), DomainError);

    const std::string good_line = "{\"image_path\": \"a.pgm\", \"mask_path\": \"a_mask.pgm\"}\n";
    std::ofstream(dir / "bad.jsonl") << good_line << "{broken\n";
    try {
        read_manifest(dir / "bad.jsonl");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() >= good_line.size());  // points into the second line
    }
    std::ofstream(dir / "missing_key.jsonl") << "{\"image_path\": \"a.pgm\"}\n";
    CHECK_THROWS_AS(read_manifest(dir / "missing_key.jsonl"), ParseError);
    fs::remove_all(dir);
}
