#include <doctest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "kernseg/errors.hpp"
#include "kernseg/metrics.hpp"

using namespace kernseg;
using Eigen::VectorXd;

namespace {

// Ground truth of `gt` tumor pixels; the prediction hits `tp` of them and adds `fp` outside.
std::pair<SegMask, SegMask> masks(int gt, int tp, int fp) {
    SegMask truth(100, 10), pred(100, 10);
    for (int i = 0; i < gt; ++i) truth.labels[static_cast<std::size_t>(i)] = 1;
    for (int i = 0; i < tp; ++i) pred.labels[static_cast<std::size_t>(i)] = 1;
    for (int i = 0; i < fp; ++i) pred.labels[static_cast<std::size_t>(500 + i)] = 1;
    return {pred, truth};
}

}  // namespace

TEST_CASE("score") {
    const auto [pred, truth] = masks(100, 80, 20);
    const auto r = score(pred, truth);
    CHECK(r.tp == 80);
    CHECK(r.fp == 20);
    CHECK(r.gt_count == 100);
    CHECK(r.acc == doctest::Approx(0.8));
    CHECK(r.cr == doctest::Approx(0.7));

    const auto [perfect_pred, perfect_truth] = masks(50, 50, 0);
    CHECK(score(perfect_pred, perfect_truth).cr == 1.0);

    const auto [noisy, t2] = masks(10, 2, 30);
    CHECK(score(noisy, t2).cr == doctest::Approx(-1.3));

    CHECK_THROWS_AS(score(SegMask(3, 3), SegMask(3, 3)), DomainError);
    CHECK_THROWS_AS(score(SegMask(3, 3), SegMask(4, 3)), DomainError);
}

TEST_CASE("score invariants") {
    std::mt19937_64 rng(4);
    std::bernoulli_distribution coin(0.3);
    for (int trial = 0; trial < 50; ++trial) {
        SegMask pred(17, 13), truth(17, 13);
        for (auto& l : pred.labels) l = coin(rng);
        for (auto& l : truth.labels) l = coin(rng);
        truth.labels[0] = 1;
        const auto r = score(pred, truth);
        CHECK(r.cr <= r.acc);
        CHECK((r.cr == r.acc) == (r.fp == 0));
        // a joint permutation of the pixels changes nothing
        std::vector<std::size_t> perm(pred.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        SegMask pp = pred, tt = truth;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            pp.labels[i] = pred.labels[perm[i]];
            tt.labels[i] = truth.labels[perm[i]];
        }
        const auto q = score(pp, tt);
        CHECK(q.tp == r.tp);
        CHECK(q.fp == r.fp);
        CHECK(q.cr == r.cr);
    }
}

TEST_CASE("summary and CSV") {
    const auto [p1, t1] = masks(100, 80, 20);
    const auto [p2, t2] = masks(100, 100, 0);
    const auto [p3, t3] = masks(200, 100, 0);
    const std::vector<MetricsRow> rows{{"a", score(p1, t1)}, {"b", score(p2, t2)}, {"c", score(p3, t3)}};
    const auto s = summarize(rows);
    CHECK(s.median_acc == doctest::Approx(0.8));
    CHECK(s.mean_acc == doctest::Approx((0.8 + 1.0 + 0.5) / 3));
    CHECK(s.pooled.tp == 280);
    CHECK(s.pooled.acc == doctest::Approx(0.7));

    std::ostringstream out;
    write_metrics_csv(out, rows);
    CHECK(out.str() ==
          "name,tp,fp,gt,acc,cr\n"
          "a,80,20,100,0.800000,0.700000\n"
          "b,100,0,100,1.000000,1.000000\n"
          "c,100,0,200,0.500000,0.500000\n"
          "aggregate,280,20,400,0.700000,0.675000\n");
}

TEST_CASE("median") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(median({}) == 0.0);
}

TEST_CASE("code correlation report") {
    SUBCASE("orthogonal classes") {
        const std::vector<VectorXd> codes{VectorXd::Unit(2, 0), 2 * VectorXd::Unit(2, 0), VectorXd::Unit(2, 1)};
        const std::vector<int> labels{0, 0, 1};
        const auto r = code_correlation_report(codes, labels);
        REQUIRE(r.intra_mean);
        REQUIRE(r.inter_mean);
        CHECK(*r.intra_mean == doctest::Approx(1.0));
        CHECK(*r.inter_mean == doctest::Approx(0.0));
        CHECK(r.correlation.rows() == 3);
        CHECK(r.excluded == 0);
    }
    SUBCASE("zero codes are excluded and a single class has no inter mean") {
        const std::vector<VectorXd> codes{VectorXd::Zero(2), VectorXd::Unit(2, 0), -VectorXd::Unit(2, 0)};
        const std::vector<int> labels{1, 1, 1};
        const auto r = code_correlation_report(codes, labels);
        CHECK(r.excluded == 1);
        CHECK_FALSE(r.inter_mean);
        REQUIRE(r.intra_mean);
        CHECK(*r.intra_mean == doctest::Approx(-1.0));
    }
    SUBCASE("rows grouped by label") {
        const std::vector<VectorXd> codes{VectorXd::Unit(2, 1), VectorXd::Unit(2, 0), VectorXd::Unit(2, 1)};
        const std::vector<int> labels{1, 0, 1};
        const auto r = code_correlation_report(codes, labels);
        CHECK(std::is_sorted(r.labels.begin(), r.labels.end()));
        CHECK(r.order.front() == 1);
    }
    CHECK_THROWS_AS(code_correlation_report(std::vector<VectorXd>{VectorXd::Zero(1)}, std::vector<int>{}), DomainError);
}
