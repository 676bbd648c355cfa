// Template adaptation: channel cross-attention over search/initial/generated
// features, a two-layer 1x1-conv fusion network with bounded output, the
// moving-average baseline, and the inequality-constrained training objective
// that makes the fused template beat plain averaging.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adasiam/autodiff.hpp"
#include "adasiam/backbone.hpp"
#include "adasiam/generator.hpp"
#include "adasiam/nn.hpp"
#include "adasiam/synthdata.hpp"

namespace adasiam {

// Per-channel gate in (0,1), one entry per backbone channel.
using AttentionVector = std::vector<double>;

struct AdapterParams {
    ParamSet params;
    int channels = 32;  // C: backbone feature channels
    int hidden = 16;    // attention perceptron mid layer
};

AdapterParams make_adapter(std::uint64_t seed, int channels = 32, int hidden = 16);

// Rebuilds the struct from a loaded checkpoint, inferring dimensions from
// attn.w1 and validating every shape.
AdapterParams adapter_from_params(ParamSet params);

// One attention stream: global average pool -> shared two-layer perceptron
// -> sigmoid. Exposed so the three-stream mean is separately testable.
AttentionVector attention_stream(const AdapterParams& params, const FeatureMap& phi);

// A = mean of the three per-stream outputs. Search- and template-shaped maps
// both collapse to length-C vectors under the pooling. Throws on channel
// mismatch with the params.
AttentionVector channel_attention(const AdapterParams& params, const FeatureMap& phi_z,
                                  const FeatureMap& phi_init, const FeatureMap& phi_hat);

// phi_concat = [phi_prev ; A * phi_hat] -> two 1x1 conv layers with tanh ->
// residual add of phi_init when `residual` (the default tracking form), else
// the raw bounded response.
FeatureMap fuse(const AdapterParams& params, const FeatureMap& phi_prev,
                const FeatureMap& phi_hat, const AttentionVector& attention,
                const FeatureMap& phi_init, bool residual);

// (1-gamma)*phi_prev + gamma*phi_new.
FeatureMap moving_average(const FeatureMap& phi_prev, const FeatureMap& phi_new, double gamma);

// Elementwise mean; bit-identical to moving_average at gamma = 0.5.
FeatureMap average_template(const FeatureMap& phi_init, const FeatureMap& phi_prev);

// Mean squared error to the future ground truth plus lambda * relu of how
// much farther the fused template sits from it than the averaging baseline.
double adaptation_loss(const FeatureMap& phi_gt, const FeatureMap& phi_fused,
                       const FeatureMap& phi_avg, double lambda);

// Tape builders shared by inference wrappers and training.
int attention_stream_graph(Tape& tape, const std::map<std::string, int>& ids, int phi);
int channel_attention_graph(Tape& tape, const std::map<std::string, int>& ids, int phi_z,
                            int phi_init, int phi_hat);
int fuse_graph(Tape& tape, const std::map<std::string, int>& ids, int phi_prev, int phi_hat,
               int attention, int phi_init, bool residual);
int adaptation_loss_graph(Tape& tape, int phi_gt, int phi_fused, int phi_avg, double lambda);

// One training sample: everything the fusion step sees at tracking time,
// built from a chronological clip with the frame after it as ground truth.
struct AdaptSample {
    FeatureMap phi_init;  // first-frame template features
    FeatureMap phi_hat;   // features of the generated next template
    FeatureMap phi_z;     // search-region features at the target frame
    FeatureMap phi_prev;  // features of the latest real template before it
    FeatureMap phi_gt;    // features of the target frame's true template
};

struct AdaptTrainConfig {
    int k = 4;
    int template_side = 64;
    double template_context = 1.0;
    int search_side = 128;
    double search_context = 2.0;
    double lambda = 10.0;
    double gamma = 0.1;  // EMA rate for the accumulated previous-template stand-in
    bool residual = true;
    int hidden = 16;
    int epochs = 10;
    int batch = 16;
    double lr = 1e-3;
    int min_samples = 50;
    int max_samples = 2000;
    std::uint64_t seed = 1;
    std::string log_path;           // JSONL; empty disables
    std::string checkpoint_prefix;  // save after training; empty disables
};

struct AdaptTrainResult {
    AdapterParams adapter;
    // Held-out fraction of samples with D_E(gt, fused) <= D_E(gt, avg),
    // before (fresh params) and after training.
    double constraint_rate_before = 0.0;
    double constraint_rate_after = 0.0;
    double final_loss = 0.0;
};

// Extracts features for every chronological clip of the given sequences,
// capped at max_samples by even striding. Generator and backbone are used
// frozen, exactly as at tracking time.
std::vector<AdaptSample> build_adapt_samples(const GeneratorParams& gen,
                                             const BackboneParams& backbone,
                                             const std::vector<Sequence>& sequences,
                                             const AdaptTrainConfig& config);

// Adam over adaptation_loss with seeded ordering; backbone and generator
// stay frozen. Throws below min_samples; aborts on non-finite loss.
AdaptTrainResult train_adapter(const GeneratorParams& gen, const BackboneParams& backbone,
                               const std::vector<Sequence>& sequences,
                               const AdaptTrainConfig& config);

}  // namespace adasiam
