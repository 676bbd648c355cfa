#pragma once

#include <string>
#include <utility>
#include <vector>

#include "adasiam/metrics.hpp"

namespace adasiam {

// Everything one evaluated sequence contributes to the report.
struct SequenceResult {
    std::string name;
    std::vector<double> overlaps;    // per frame
    std::vector<double> regularity;  // per frame
    std::vector<bool> change;        // per frame
    std::vector<std::vector<double>> segment_overlaps;
    int failures = 0;
    MetricsReport metrics;
};

struct EvalReport {
    std::vector<SequenceResult> sequences;
    std::vector<std::pair<std::string, std::string>> config_echo;  // emitted in order
};

// Suite-level rollup: mean ratios, summed failures and runtime, robustness
// recomputed over the pooled frame count, eao_lite = mean of sequence values.
MetricsReport aggregate_metrics(const std::vector<SequenceResult>& sequences);

// Writes <dir>/report.json and <dir>/curves/<name>.csv. Sequences are sorted
// by name first so output bytes do not depend on evaluation order. All reals
// are 6-decimal fixed point; newlines are LF.
void emit_report(const EvalReport& report, const std::string& dir);

struct AblationRow {
    std::string mode;
    double eao_lite = 0.0;
    double robustness = 0.0;
};

// Writes the ablation grid as CSV: mode,eao_lite,robustness.
void write_table(const std::vector<AblationRow>& rows, const std::string& path);

}  // namespace adasiam
