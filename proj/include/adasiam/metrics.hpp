#pragma once

#include <vector>

#include "adasiam/image.hpp"

namespace adasiam {

// OTB-style success AUC: success(theta) = fraction of frames with overlap
// strictly above theta, sampled at 21 thresholds 0, 0.05, ..., 1.0; the AUC
// is their mean. A perfect trajectory therefore scores 20/21, not 1.
double success_auc(const std::vector<double>& overlaps);
double success_auc(const std::vector<BBox>& predicted, const std::vector<BBox>& ground_truth);

// Fraction of frames whose predicted center lies within `radius` pixels of
// the ground-truth center (inclusive boundary).
double precision_at(const std::vector<BBox>& predicted, const std::vector<BBox>& ground_truth,
                    double radius = 20.0);

struct RobustnessEao {
    double robustness = 0.0;  // failures per 1000 frames
    double eao_lite = 0.0;    // mean over segments of the segment's mean overlap
};

// Both values deliberately diverge from the official VOT toolkit (which
// buckets by sequence length); they preserve ordering for ablations.
RobustnessEao robustness_and_eao(const std::vector<std::vector<double>>& segment_overlaps,
                                 int failures, int frame_count);

struct MetricsReport {
    double success_auc = 0.0;
    double precision_at_20 = 0.0;
    int failures = 0;
    double robustness = 0.0;
    double eao_lite = 0.0;
    double runtime_seconds = 0.0;
};

}  // namespace adasiam
