// Per-frame tracking pipeline: search extraction, generative template
// prediction, change-gated buffer updates, attention fusion, correlation
// matching, and the VOT-style reinitialization protocol used for scoring.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adasiam/adapt.hpp"
#include "adasiam/backbone.hpp"
#include "adasiam/change.hpp"
#include "adasiam/generator.hpp"
#include "adasiam/image.hpp"

namespace adasiam {

// Ablation tiers, weakest to strongest template maintenance.
enum class UpdateMode {
    kFrozen,               // initial template forever
    kMovingAverage,        // exponential feature average
    kUpdatenetStyle,       // attention fusion of the raw tracker crop
    kGenerative,           // fusion of the generated template
    kGenerativeBlend,      // generated template blended with the crop
    kGenerativeBlendChange,  // full system: blend gated by change detection
};

UpdateMode update_mode_from_string(const std::string& name);
std::string update_mode_to_string(UpdateMode mode);

struct TrackerConfig {
    int k = 4;
    double tau = 0.5;
    double alpha = 0.5;     // blend weight toward the generated template
    double context = 2.0;   // search crop = context * max(w,h) frame pixels
    int template_side = 64;
    int search_side = 128;
    bool residual = true;
    double gamma = 0.1;     // moving-average rate (baseline + warm-up)
    double lambda = 10.0;   // adaptation constraint weight (training-time)
    UpdateMode update_mode = UpdateMode::kGenerativeBlendChange;

    // Template crops keep the same frame-pixels-per-pixel scale as search
    // crops: context shrunk by the side ratio.
    double template_context() const {
        return context * static_cast<double>(template_side) / static_cast<double>(search_side);
    }
};

struct TrackerModels {
    BackboneParams backbone;
    std::optional<GeneratorParams> generator;  // generative modes
    std::optional<AdapterParams> adapter;      // fusion modes
    std::optional<CalibrationStats> stats;     // change gating scale
    double correlation_bias = 0.0;
};

struct TrackState {
    BBox bbox;
    FeatureMap phi_init;
    FeatureMap phi_tilde;
    TemplateBuffer buffer;
    Image last_output_template;  // tracker-output crop from the latest frame
    int frame_index = 0;
    int distinct_pushes = 0;  // counts real candidate pushes (warm-up gate)
    int generator_calls = 0;
    int adapter_calls = 0;
};

struct TrackerOutput {
    int frame_index = 0;
    BBox bbox;
    double peak_score = 0.0;
    double regularity = 1.0;  // 1.0 during warm-up and in generator-free modes
    bool change = false;
};

// Crops the initial template, seeds the buffer with k copies of it, and
// starts from phi_tilde = phi_init. Throws if the box is degenerate or
// leaves the frame, or if the mode's models are missing.
TrackState init(const Image& frame, const BBox& box, const TrackerModels& models,
                const TrackerConfig& config);

// One frame forward: localized bbox plus the update dictated by the mode.
// On change steps the template state (phi_tilde, buffer) is left bit-exactly
// as it was before the step.
TrackerOutput step(TrackState& state, const Image& frame, const TrackerModels& models,
                   const TrackerConfig& config);

// init on frame 0, step on the rest. Throws on an empty sequence.
std::vector<TrackerOutput> run(const std::vector<Image>& frames, const BBox& init_box,
                               const TrackerModels& models, const TrackerConfig& config);

struct VotResult {
    std::vector<TrackerOutput> trajectory;
    std::vector<double> overlaps;  // per frame; 0 during failure windows
    std::vector<std::vector<double>> segment_overlaps;  // split at re-inits
    int failures = 0;
};

// Protocol core, tracker-agnostic for testability: `predict` is called once
// per live frame with the ground-truth box when (re)initializing (frame 0
// and each restart) and null otherwise, and returns the predicted box. A
// failure is the first frame with zero overlap; the following 4 frames are
// skipped (scored 0, predict not called) and tracking restarts from ground
// truth 5 frames after the failure — unless the sequence ends first.
VotResult run_vot_protocol(int n_frames, const std::vector<BBox>& ground_truth,
                           const std::function<BBox(int frame, const BBox* reinit)>& predict);

// Full-protocol run of the real tracker, including trajectory records.
VotResult run_vot_protocol(const std::vector<Image>& frames,
                           const std::vector<BBox>& ground_truth, const TrackerModels& models,
                           const TrackerConfig& config);

}  // namespace adasiam
