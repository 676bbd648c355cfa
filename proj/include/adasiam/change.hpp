// Change detection over generated templates: converts the generator's
// reconstruction error into a regularity score, flags abrupt target changes
// against a threshold, and manages the FIFO template buffer whose newest
// entry can be revoked when a push turns out to be a bad idea.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adasiam/generator.hpp"
#include "adasiam/image.hpp"
#include "adasiam/synthdata.hpp"

namespace adasiam {

struct CalibrationStats {
    double e_min = 0.0;  // 1st percentile of validation reconstruction error
    double e_max = 1.0;  // 99th percentile; must stay > e_min
    double tau = 0.5;    // change threshold carried alongside for persistence
};

struct RegularityRecord {
    double e = 0.0;
    double s = 1.0;
    bool is_change = false;
    int frame_index = 0;
};

// Nearest-rank percentile calibration over a raw error sample. Needs at
// least 50 values; throws if the 1st and 99th percentiles coincide.
CalibrationStats stats_from_errors(std::vector<double> errors, double tau);

// Runs the generator over every window of k consecutive ground-truth
// templates of every validation sequence and calibrates on the resulting
// error sample. Crops are jittered by up to jitter_px so the spread covers
// the slightly misaligned templates a real tracker produces. The error of a
// clip is its prediction's MSE against the newest input template — exactly
// the comparison made at tracking time.
struct CalibConfig {
    int k = 4;
    double tau = 0.5;
    double jitter_px = 5.0;
    int template_side = 64;
    double template_context = 1.0;
    int min_clips = 50;
    std::uint64_t seed = 1;
};
CalibrationStats calibrate(const GeneratorParams& gen, const std::vector<Sequence>& validation,
                           const CalibConfig& config);

// s = 1 - (e - e_min)/e_max, clamped to [0,1]. Monotone non-increasing in e.
double regularity(double e, const CalibrationStats& stats);

// A change is an abnormally irregular template: s strictly below tau.
bool detect_change(double s, double tau);

// Small JSON document {"e_min":..., "e_max":..., "tau":...} stored next to
// the generator checkpoint. Reader validates invariants and names missing
// fields; writer emits value-exact doubles.
void write_calibration(const std::string& path, const CalibrationStats& stats);
CalibrationStats read_calibration(const std::string& path);

// Chronological template stack, oldest first. push() evicts the oldest once
// at capacity and marks the new entry revocable; revoke_last() restores the
// exact pre-push contents (including a revived evictee) and may be called
// once per push.
class TemplateBuffer {
public:
    explicit TemplateBuffer(int capacity);

    void push(const Image& t);
    void revoke_last();

    int capacity() const { return capacity_; }
    int size() const { return static_cast<int>(slots_.size()); }
    bool full() const { return size() == capacity_; }
    bool last_push_pending() const { return pending_; }
    const std::vector<Image>& slots() const { return slots_; }

private:
    int capacity_;
    std::vector<Image> slots_;
    bool pending_ = false;
    bool had_eviction_ = false;
    Image evicted_;
};

}  // namespace adasiam
