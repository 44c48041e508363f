#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kernseg/imaging.hpp"

namespace kernseg {

/// Acc = TP / GT and CR = (TP − 0.5 FP) / GT for one prediction.
struct MetricsReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t gt_count = 0;
    double acc = 0.0;
    double cr = 0.0;
};

MetricsReport score(const SegMask& pred, const SegMask& truth);

struct MetricsRow {
    std::string name;
    MetricsReport report;
};

struct MetricsSummary {
    double mean_acc = 0.0;
    double mean_cr = 0.0;
    double median_acc = 0.0;
    double median_cr = 0.0;
    MetricsReport pooled;  // counts summed over rows
};

MetricsSummary summarize(std::span<const MetricsRow> rows);

/// CSV with header name,tp,fp,gt,acc,cr; reals at fixed 6 decimals. Appends an "aggregate" row of
/// pooled counts.
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

double median(std::vector<double> values);

struct CorrelationReport {
    Eigen::MatrixXd correlation;       // cosine similarity, rows/cols grouped by label
    std::vector<std::size_t> order;    // original sample index of each row
    std::vector<int> labels;           // label of each row
    std::size_t excluded = 0;          // zero-norm codes dropped
    std::optional<double> intra_mean;  // mean over same-label pairs (i != j)
    std::optional<double> inter_mean;  // mean over different-label pairs; absent for a single class
};

CorrelationReport code_correlation_report(std::span<const Eigen::VectorXd> codes, std::span<const int> labels);

}  // namespace kernseg
