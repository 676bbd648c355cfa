// Video autoencoder that predicts the next template from the k most recent
// ones, plus the patch discriminator and adversarial training loop that give
// its predictions crisp target texture instead of an MSE blur.
//
// Layout: a 3-conv encoder squeezes each 64x64 template to an 8x8x64
// bottleneck, one convolutional LSTM cell (hidden 16) carries state across
// the clip, and a 3-deconv decoder expands the final hidden state back to a
// 64x64 prediction in [0,1]. The discriminator is a 4-conv patch classifier
// with a global-average-pool head. Losses follow least-squares GAN form.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adasiam/autodiff.hpp"
#include "adasiam/image.hpp"
#include "adasiam/nn.hpp"

namespace adasiam {

struct GeneratorParams {
    ParamSet params;
    int hidden = 16;         // ConvLSTM channels; derivable from lstm.b
    int template_side = 64;  // must be divisible by 8 (three stride-2 stages)
};

// Fresh, seeded parameter sets. `make_generator` throws if side % 8 != 0.
GeneratorParams make_generator(std::uint64_t seed, int hidden = 16, int template_side = 64);
ParamSet make_discriminator(std::uint64_t seed);

// Wraps a loaded checkpoint, inferring `hidden` from lstm.b and validating
// that every expected parameter is present with a consistent shape.
GeneratorParams generator_from_params(ParamSet params, int template_side = 64);

// Predicts the template that should follow `clip` (oldest first, exactly
// k >= 1 frames, all single-channel and template-sized). Deterministic;
// output is quantized to 8-bit like every stored template.
Image generate_next(const GeneratorParams& gen, const std::vector<Image>& clip);

// Graph builders shared by inference and training. `clip_ids` are tape nodes
// holding 1xSxS tensors in [0,1]; the return value is the node id of the
// prediction (generator) or the scalar score in (0,1) (discriminator).
int generator_forward(Tape& tape, const std::map<std::string, int>& ids,
                      const std::vector<int>& clip_ids, int hidden);
int discriminator_forward(Tape& tape, const std::map<std::string, int>& ids, int image_id);

// Mean squared error between two equally shaped 8-bit images, computed on
// the [0,1] scale. Throws on shape mismatch.
double reconstruction_error(const Image& truth, const Image& pred);

// Least-squares adversarial objectives. Scores are discriminator outputs.
double discriminator_loss(double d_real, double d_fake);
double generator_loss(const Image& truth, const Image& pred, double d_fake, double adv_weight);

struct GenTrainConfig {
    int k = 4;                   // clip length fed to the LSTM
    int hidden = 16;
    int template_side = 64;
    double template_context = 1.0;  // crop side = max(w,h) * this, in frame px
    int epochs = 8;
    int batches_per_epoch = 50;
    int batch = 16;
    double lr_gen = 1e-3;
    double lr_disc = 2e-4;
    double adv_weight = 0.05;
    int min_clips = 500;   // refuse to train on less
    int max_val_clips = 200;
    std::uint64_t seed = 1;
    std::string log_path;  // JSONL epoch log; empty disables logging
};

struct GenTrainResult {
    GeneratorParams gen;
    ParamSet disc;
    double final_val_mse = 0.0;
    double untrained_val_mse = 0.0;
};

// Crops the ground-truth template from every frame of every sequence.
// Result is indexed [sequence][frame]; this is the shared currency between
// generator training, calibration, and adapter training.
std::vector<std::vector<Image>> load_template_crops(const std::string& dataset_dir,
                                                    int template_side,
                                                    double template_context);

// Adversarial training over clips of k+1 consecutive templates (first k in,
// last one the target). Roughly one sequence in ten is held out to report
// val_mse. Throws if fewer than min_clips training clips exist; aborts with
// a diagnostic if any loss goes non-finite.
GenTrainResult train_generator(const std::vector<std::vector<Image>>& sequences,
                               const GenTrainConfig& config);

}  // namespace adasiam
