#include "kernseg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <numeric>

#include "kernseg/errors.hpp"

namespace kernseg {

MetricsReport score(const SegMask& pred, const SegMask& truth) {
    if (!pred.same_shape(truth)) throw DomainError("score: prediction and ground truth dimensions differ");
    MetricsReport r;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool t = truth.labels[i] != 0;
        const bool p = pred.labels[i] != 0;
        r.gt_count += t;
        r.tp += t && p;
        r.fp += !t && p;
    }
    if (r.gt_count == 0) throw DomainError("score: ground truth has no tumor pixels");
    const double gt = static_cast<double>(r.gt_count);
    r.acc = static_cast<double>(r.tp) / gt;
    r.cr = (static_cast<double>(r.tp) - 0.5 * static_cast<double>(r.fp)) / gt;
    return r;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MetricsSummary summarize(std::span<const MetricsRow> rows) {
    MetricsSummary s;
    if (rows.empty()) return s;
    std::vector<double> acc, cr;
    for (const auto& row : rows) {
        acc.push_back(row.report.acc);
        cr.push_back(row.report.cr);
        s.pooled.tp += row.report.tp;
        s.pooled.fp += row.report.fp;
        s.pooled.gt_count += row.report.gt_count;
    }
    s.mean_acc = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
    s.mean_cr = std::accumulate(cr.begin(), cr.end(), 0.0) / static_cast<double>(cr.size());
    s.median_acc = median(acc);
    s.median_cr = median(cr);
    if (s.pooled.gt_count > 0) {
        const double gt = static_cast<double>(s.pooled.gt_count);
        s.pooled.acc = static_cast<double>(s.pooled.tp) / gt;
        s.pooled.cr = (static_cast<double>(s.pooled.tp) - 0.5 * static_cast<double>(s.pooled.fp)) / gt;
    }
    return s;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
    char buf[256];
    out << "name,tp,fp,gt,acc,cr\n";
    auto line = [&](const std::string& name, const MetricsReport& r) {
        std::snprintf(buf, sizeof buf, ",%zu,%zu,%zu,%.6f,%.6f\n", r.tp, r.fp, r.gt_count, r.acc, r.cr);
        out << name << buf;
    };
    for (const auto& row : rows) line(row.name, row.report);
    if (rows.size() > 1) line("aggregate", summarize(rows).pooled);
}

CorrelationReport code_correlation_report(std::span<const Eigen::VectorXd> codes, std::span<const int> labels) {
    if (codes.size() != labels.size()) throw DomainError("code_correlation_report: codes and labels differ in length");
    CorrelationReport rep;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i].norm() == 0.0) {
            ++rep.excluded;
            continue;
        }
        kept.push_back(i);
    }
    if (rep.excluded > 0)
        std::cerr << "warning: code_correlation_report excluded " << rep.excluded << " zero-norm code(s)\n";
    std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
    rep.order = kept;
    for (std::size_t i : kept) rep.labels.push_back(labels[i]);

    const auto n = static_cast<Eigen::Index>(kept.size());
    rep.correlation.resize(n, n);
    double intra = 0.0, inter = 0.0;
    std::size_t n_intra = 0, n_inter = 0;
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto& ca = codes[kept[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < n; ++b) {
            const auto& cb = codes[kept[static_cast<std::size_t>(b)]];
            const double v = ca.dot(cb) / (ca.norm() * cb.norm());
            rep.correlation(a, b) = v;
            if (a == b) continue;
            if (rep.labels[static_cast<std::size_t>(a)] == rep.labels[static_cast<std::size_t>(b)]) {
                intra += v;
                ++n_intra;
            } else {
                inter += v;
                ++n_inter;
            }
        }
    }
    if (n_intra) rep.intra_mean = intra / static_cast<double>(n_intra);
    if (n_inter) rep.inter_mean = inter / static_cast<double>(n_inter);
    return rep;
}

}  // namespace kernseg
