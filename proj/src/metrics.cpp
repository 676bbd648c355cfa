#include "adasiam/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace adasiam {

namespace {

void check_aligned(std::size_t a, std::size_t b) {
    if (a != b) throw std::invalid_argument("metrics: trajectory/ground-truth length mismatch");
}

}  // namespace

double success_auc(const std::vector<double>& overlaps) {
    if (overlaps.empty()) throw std::invalid_argument("metrics: empty trajectory");
    const int kThresholds = 21;
    double auc = 0.0;
    for (int t = 0; t < kThresholds; ++t) {
        double theta = t * 0.05;
        int hits = 0;
        for (double o : overlaps)
            if (o > theta) ++hits;
        auc += static_cast<double>(hits) / static_cast<double>(overlaps.size());
    }
    return auc / kThresholds;
}

double success_auc(const std::vector<BBox>& predicted,
                   const std::vector<BBox>& ground_truth) {
    check_aligned(predicted.size(), ground_truth.size());
    std::vector<double> overlaps(predicted.size());
    for (std::size_t i = 0; i < predicted.size(); ++i)
        overlaps[i] = iou(predicted[i], ground_truth[i]);
    return success_auc(overlaps);
}

double precision_at(const std::vector<BBox>& predicted,
                    const std::vector<BBox>& ground_truth, double radius) {
    check_aligned(predicted.size(), ground_truth.size());
    if (predicted.empty()) throw std::invalid_argument("metrics: empty trajectory");
    int hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        double dx = predicted[i].cx() - ground_truth[i].cx();
        double dy = predicted[i].cy() - ground_truth[i].cy();
        if (std::sqrt(dx * dx + dy * dy) <= radius) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

RobustnessEao robustness_and_eao(const std::vector<std::vector<double>>& segment_overlaps,
                                 int failures, int frame_count) {
    if (frame_count < 1) throw std::invalid_argument("metrics: zero frames");
    if (failures < 0) throw std::invalid_argument("metrics: negative failure count");
    RobustnessEao out;
    out.robustness = failures * 1000.0 / frame_count;
    if (segment_overlaps.empty()) throw std::invalid_argument("metrics: no segments");
    double sum = 0.0;
    for (const auto& seg : segment_overlaps) {
        if (seg.empty()) throw std::invalid_argument("metrics: empty segment");
        double s = 0.0;
        for (double o : seg) s += o;
        sum += s / static_cast<double>(seg.size());
    }
    out.eao_lite = sum / static_cast<double>(segment_overlaps.size());
    return out;
}

}  // namespace adasiam
