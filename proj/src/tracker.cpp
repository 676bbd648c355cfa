#include "adasiam/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adasiam {

namespace {

bool needs_generator(UpdateMode mode) {
    return mode == UpdateMode::kGenerative || mode == UpdateMode::kGenerativeBlend ||
           mode == UpdateMode::kGenerativeBlendChange;
}

bool needs_adapter(UpdateMode mode) {
    return mode == UpdateMode::kUpdatenetStyle || needs_generator(mode);
}

FeatureMap template_features(const BackboneParams& backbone, const Image& crop) {
    return extract_features(backbone, to_real(crop));
}

Image output_template(const Image& frame, const BBox& box, const TrackerConfig& config) {
    return crop_and_resize(frame, box, config.template_context(), config.template_side);
}

BBox clip_to_frame(BBox box, const Image& frame) {
    // Shift inside without shrinking: localization keeps the init box size.
    box.x = std::clamp(box.x, 0.0, std::max(0.0, frame.width - box.w));
    box.y = std::clamp(box.y, 0.0, std::max(0.0, frame.height - box.h));
    return box;
}

// Fusion update shared by updatenet_style and the generative modes.
void fuse_update(TrackState& state, const FeatureMap& phi_z, const Image& new_template,
                 const TrackerModels& models, const TrackerConfig& config) {
    FeatureMap phi_hat = template_features(models.backbone, new_template);
    AttentionVector a = channel_attention(*models.adapter, phi_z, state.phi_init, phi_hat);
    state.phi_tilde = fuse(*models.adapter, state.phi_tilde, phi_hat, a, state.phi_init,
                           config.residual);
    ++state.adapter_calls;
}

}  // namespace

UpdateMode update_mode_from_string(const std::string& name) {
    if (name == "frozen") return UpdateMode::kFrozen;
    if (name == "moving_average") return UpdateMode::kMovingAverage;
    if (name == "updatenet_style") return UpdateMode::kUpdatenetStyle;
    if (name == "generative") return UpdateMode::kGenerative;
    if (name == "generative+blend") return UpdateMode::kGenerativeBlend;
    if (name == "generative+blend+change") return UpdateMode::kGenerativeBlendChange;
    throw std::invalid_argument(
        "unknown update mode '" + name +
        "' (expected frozen, moving_average, updatenet_style, generative, "
        "generative+blend, or generative+blend+change)");
}

std::string update_mode_to_string(UpdateMode mode) {
    switch (mode) {
        case UpdateMode::kFrozen: return "frozen";
        case UpdateMode::kMovingAverage: return "moving_average";
        case UpdateMode::kUpdatenetStyle: return "updatenet_style";
        case UpdateMode::kGenerative: return "generative";
        case UpdateMode::kGenerativeBlend: return "generative+blend";
        case UpdateMode::kGenerativeBlendChange: return "generative+blend+change";
    }
    throw std::logic_error("unreachable update mode");
}

TrackState init(const Image& frame, const BBox& box, const TrackerModels& models,
                const TrackerConfig& config) {
    if (!box.valid() || box.x < 0.0 || box.y < 0.0 || box.x + box.w > frame.width ||
        box.y + box.h > frame.height)
        throw std::invalid_argument("init: box invalid or outside frame");
    if (config.k < 1) throw std::invalid_argument("init: k must be positive");
    if (config.alpha < 0.0 || config.alpha > 1.0)
        throw std::invalid_argument("init: alpha must lie in [0,1]");
    if (config.tau <= 0.0 || config.tau >= 1.0)
        throw std::invalid_argument("init: tau must lie in (0,1)");
    if (needs_generator(config.update_mode)) {
        if (!models.generator) throw std::invalid_argument("init: mode requires a generator");
        if (!models.stats) throw std::invalid_argument("init: mode requires calibration stats");
        if (models.generator->template_side != config.template_side)
            throw std::invalid_argument("init: generator template side does not match config");
    }
    if (needs_adapter(config.update_mode) && !models.adapter)
        throw std::invalid_argument("init: mode requires an adapter");

    Image t_init = output_template(frame, box, config);
    TrackState state{box,
                     template_features(models.backbone, t_init),
                     {},
                     TemplateBuffer(config.k),
                     t_init};
    state.phi_tilde = state.phi_init;
    if (models.adapter && models.adapter->channels != state.phi_init.dim(0))
        throw std::invalid_argument("init: adapter channels do not match backbone features");
    for (int i = 0; i < config.k; ++i) state.buffer.push(t_init);
    return state;
}

TrackerOutput step(TrackState& state, const Image& frame, const TrackerModels& models,
                   const TrackerConfig& config) {
    // (1) Search region around the previous box.
    Image search = crop_and_resize(frame, state.bbox, config.context, config.search_side);
    FeatureMap phi_z = extract_features(models.backbone, to_real(search));

    // (2)-(4) Template maintenance. The tracker-output crop from the previous
    // frame is this step's update candidate.
    const Image candidate = state.last_output_template;
    double s = 1.0;
    bool change = false;
    const UpdateMode mode = config.update_mode;

    if (!needs_generator(mode) || state.distinct_pushes < config.k) {
        // Generator-free modes, and the warm-up of the generative ones.
        state.buffer.push(candidate);
        ++state.distinct_pushes;
        if (mode == UpdateMode::kUpdatenetStyle) {
            fuse_update(state, phi_z, candidate, models, config);
        } else if (mode != UpdateMode::kFrozen) {
            // moving_average mode, or generative warm-up fallback.
            state.phi_tilde = moving_average(
                state.phi_tilde, template_features(models.backbone, candidate), config.gamma);
        }
    } else {
        // Candidate joins the clip, then the generator predicts what the
        // next template should look like if the target evolved normally.
        state.buffer.push(candidate);
        Image predicted = generate_next(*models.generator, state.buffer.slots());
        ++state.generator_calls;
        double e = reconstruction_error(predicted, candidate);
        s = regularity(e, *models.stats);
        change = mode == UpdateMode::kGenerativeBlendChange && detect_change(s, config.tau);
        if (change) {
            // Anomalous template: reject the candidate, keep phi_tilde.
            state.buffer.revoke_last();
        } else {
            state.buffer.revoke_last();
            Image updated = mode == UpdateMode::kGenerative
                                ? predicted
                                : blend(predicted, candidate, config.alpha);
            state.buffer.push(updated);
            ++state.distinct_pushes;
            fuse_update(state, phi_z, updated, models, config);
        }
    }

    // (5)-(6) Localize and re-crop the output template at the new box.
    Tensor score = cross_correlate(state.phi_tilde, phi_z, models.correlation_bias);
    double peak = score[0];
    for (std::size_t i = 1; i < score.size(); ++i) peak = std::max(peak, score[i]);
    double crop_scale =
        std::max(state.bbox.w, state.bbox.h) * config.context / config.search_side;
    state.bbox = clip_to_frame(
        argmax_to_bbox(score, state.bbox, models.backbone.stride, crop_scale), frame);
    state.last_output_template = output_template(frame, state.bbox, config);
    ++state.frame_index;

    return {state.frame_index, state.bbox, peak, s, change};
}

std::vector<TrackerOutput> run(const std::vector<Image>& frames, const BBox& init_box,
                               const TrackerModels& models, const TrackerConfig& config) {
    if (frames.empty()) throw std::invalid_argument("run: empty sequence");
    TrackState state = init(frames.front(), init_box, models, config);
    std::vector<TrackerOutput> trajectory;
    trajectory.reserve(frames.size());
    trajectory.push_back({0, init_box, 0.0, 1.0, false});
    for (std::size_t f = 1; f < frames.size(); ++f)
        trajectory.push_back(step(state, frames[f], models, config));
    return trajectory;
}

VotResult run_vot_protocol(int n_frames, const std::vector<BBox>& ground_truth,
                           const std::function<BBox(int frame, const BBox* reinit)>& predict) {
    if (n_frames < 1) throw std::invalid_argument("vot: empty sequence");
    if (static_cast<int>(ground_truth.size()) != n_frames)
        throw std::invalid_argument("vot: ground-truth length does not match sequence");

    VotResult res;
    res.overlaps.assign(static_cast<std::size_t>(n_frames), 0.0);
    std::vector<double> segment;
    bool need_init = true;
    int f = 0;
    while (f < n_frames) {
        const BBox gt = ground_truth[static_cast<std::size_t>(f)];
        BBox pred = predict(f, need_init ? &gt : nullptr);
        need_init = false;
        double overlap = iou(pred, gt);
        res.overlaps[static_cast<std::size_t>(f)] = overlap;
        segment.push_back(overlap);
        if (overlap == 0.0) {
            ++res.failures;
            // The four frames after a failure stay unscored-zero; tracking
            // resumes from ground truth five frames out if any remain.
            for (int g = f + 1; g < std::min(f + 5, n_frames); ++g) segment.push_back(0.0);
            f += 5;
            if (f < n_frames) {
                res.segment_overlaps.push_back(std::move(segment));
                segment.clear();
                need_init = true;
            }
        } else {
            ++f;
        }
    }
    if (!segment.empty()) res.segment_overlaps.push_back(std::move(segment));
    return res;
}

VotResult run_vot_protocol(const std::vector<Image>& frames,
                           const std::vector<BBox>& ground_truth, const TrackerModels& models,
                           const TrackerConfig& config) {
    if (frames.size() != ground_truth.size())
        throw std::invalid_argument("vot: ground-truth length does not match sequence");
    const int n = static_cast<int>(frames.size());

    std::optional<TrackState> state;
    std::vector<TrackerOutput> live;
    auto predict = [&](int f, const BBox* reinit) -> BBox {
        if (reinit) {
            state = init(frames[static_cast<std::size_t>(f)], *reinit, models, config);
            state->frame_index = f;
            live.push_back({f, *reinit, 0.0, 1.0, false});
            return *reinit;
        }
        TrackerOutput out = step(*state, frames[static_cast<std::size_t>(f)], models, config);
        live.push_back(out);
        return out.bbox;
    };
    VotResult res = run_vot_protocol(n, ground_truth, predict);

    // Fill the skipped frames so the trajectory covers every frame.
    res.trajectory.reserve(static_cast<std::size_t>(n));
    std::size_t next_live = 0;
    for (int f = 0; f < n; ++f) {
        if (next_live < live.size() && live[next_live].frame_index == f) {
            res.trajectory.push_back(live[next_live++]);
        } else {
            TrackerOutput gap;
            gap.frame_index = f;
            gap.bbox = res.trajectory.empty() ? ground_truth.front()
                                              : res.trajectory.back().bbox;
            gap.peak_score = 0.0;
            gap.regularity = 0.0;
            gap.change = false;
            res.trajectory.push_back(gap);
        }
    }
    return res;
}

}  // namespace adasiam
