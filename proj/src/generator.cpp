#include "adasiam/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "adasiam/rng.hpp"
#include "adasiam/synthdata.hpp"

namespace adasiam {

namespace {

constexpr int kBottleneckChannels = 64;

Tensor image_to_unit_tensor(const Image& img) {
    if (img.channels != 1)
        throw std::invalid_argument("generator: templates must be single-channel");
    Tensor t({1, img.height, img.width});
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            t.at(0, y, x) = static_cast<double>(img.at(y, x, 0)) / 255.0;
    return t;
}

Image unit_tensor_to_image(const Tensor& t) {
    RealImage out(t.dim(1), t.dim(2), 1);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.at(y, x, 0) = t.at(0, y, x);
    return to_image(out);
}

std::map<std::string, std::vector<int>> generator_shapes(int hidden) {
    const int in = kBottleneckChannels + hidden;
    return {
        {"enc1.w", {16, 1, 3, 3}},      {"enc1.b", {16}},
        {"enc2.w", {32, 16, 3, 3}},     {"enc2.b", {32}},
        {"enc3.w", {64, 32, 3, 3}},     {"enc3.b", {64}},
        {"lstm.w", {4 * hidden, in, 3, 3}}, {"lstm.b", {4 * hidden}},
        {"dec1.w", {hidden, 32, 3, 3}}, {"dec1.b", {32}},
        {"dec2.w", {32, 16, 3, 3}},     {"dec2.b", {16}},
        {"dec3.w", {16, 1, 3, 3}},      {"dec3.b", {1}},
    };
}

void check_side(int side) {
    if (side < 8 || side % 8 != 0)
        throw std::invalid_argument("generator: template side must be a positive multiple of 8");
}

}  // namespace

GeneratorParams make_generator(std::uint64_t seed, int hidden, int template_side) {
    check_side(template_side);
    if (hidden < 1) throw std::invalid_argument("generator: hidden channels must be positive");
    Rng rng(seed);
    Rng re1 = rng.substream("gen.enc1");
    Rng re2 = rng.substream("gen.enc2");
    Rng re3 = rng.substream("gen.enc3");
    Rng rl = rng.substream("gen.lstm");
    Rng rd1 = rng.substream("gen.dec1");
    Rng rd2 = rng.substream("gen.dec2");
    Rng rd3 = rng.substream("gen.dec3");

    GeneratorParams gp;
    gp.hidden = hidden;
    gp.template_side = template_side;
    gp.params.add("enc1.w", init_conv_weight(re1, 16, 1, 3, 3));
    gp.params.add("enc1.b", zeros({16}));
    gp.params.add("enc2.w", init_conv_weight(re2, 32, 16, 3, 3));
    gp.params.add("enc2.b", zeros({32}));
    gp.params.add("enc3.w", init_conv_weight(re3, 64, 32, 3, 3));
    gp.params.add("enc3.b", zeros({64}));
    gp.params.add("lstm.w",
                  init_conv_weight(rl, 4 * hidden, kBottleneckChannels + hidden, 3, 3));
    Tensor lb({4 * hidden});
    for (int i = hidden; i < 2 * hidden; ++i) lb[i] = 1.0;  // open forget gates at start
    gp.params.add("lstm.b", std::move(lb));
    gp.params.add("dec1.w", init_deconv_weight(rd1, hidden, 32, 3, 3));
    gp.params.add("dec1.b", zeros({32}));
    gp.params.add("dec2.w", init_deconv_weight(rd2, 32, 16, 3, 3));
    gp.params.add("dec2.b", zeros({16}));
    gp.params.add("dec3.w", init_deconv_weight(rd3, 16, 1, 3, 3));
    gp.params.add("dec3.b", zeros({1}));
    return gp;
}

ParamSet make_discriminator(std::uint64_t seed) {
    Rng rng(seed);
    Rng r1 = rng.substream("disc.conv1");
    Rng r2 = rng.substream("disc.conv2");
    Rng r3 = rng.substream("disc.conv3");
    Rng r4 = rng.substream("disc.conv4");
    Rng rh = rng.substream("disc.head");

    ParamSet p;
    p.add("d1.w", init_conv_weight(r1, 8, 1, 3, 3));
    p.add("d1.b", zeros({8}));
    p.add("d2.w", init_conv_weight(r2, 16, 8, 3, 3));
    p.add("d2.b", zeros({16}));
    p.add("d3.w", init_conv_weight(r3, 32, 16, 3, 3));
    p.add("d3.b", zeros({32}));
    p.add("d4.w", init_conv_weight(r4, 32, 32, 3, 3));
    p.add("d4.b", zeros({32}));
    p.add("head.w", init_linear_weight(rh, 1, 32));
    p.add("head.b", zeros({1}));
    return p;
}

GeneratorParams generator_from_params(ParamSet params, int template_side) {
    check_side(template_side);
    const Tensor& lb = params.at("lstm.b");
    if (lb.rank() != 1 || lb.dim(0) % 4 != 0)
        throw std::invalid_argument("generator: lstm.b has invalid shape " + lb.shape_str());
    const int hidden = lb.dim(0) / 4;
    auto expected = generator_shapes(hidden);
    if (params.count() != expected.size())
        throw std::invalid_argument("generator: checkpoint has wrong parameter count");
    for (const auto& [name, shape] : expected) {
        const Tensor& t = params.at(name);
        if (t.shape() != shape)
            throw std::invalid_argument("generator: parameter '" + name + "' has shape " +
                                        t.shape_str() + ", expected " +
                                        Tensor(shape).shape_str());
    }
    GeneratorParams gp;
    gp.params = std::move(params);
    gp.hidden = hidden;
    gp.template_side = template_side;
    return gp;
}

int generator_forward(Tape& tape, const std::map<std::string, int>& ids,
                      const std::vector<int>& clip_ids, int hidden) {
    const Tensor& x0 = tape.value(clip_ids.front());
    const int bottleneck = x0.dim(1) / 8;
    int h = tape.leaf(Tensor({hidden, bottleneck, bottleneck}), false);
    int c = tape.leaf(Tensor({hidden, bottleneck, bottleneck}), false);
    for (int x : clip_ids) {
        int e = tape.tanh(tape.conv2d(x, ids.at("enc1.w"), ids.at("enc1.b"), 2, 1));
        e = tape.tanh(tape.conv2d(e, ids.at("enc2.w"), ids.at("enc2.b"), 2, 1));
        e = tape.tanh(tape.conv2d(e, ids.at("enc3.w"), ids.at("enc3.b"), 2, 1));
        int gates = tape.conv2d(tape.concat_channels(e, h), ids.at("lstm.w"),
                                ids.at("lstm.b"), 1, 1);
        int gi = tape.sigmoid(tape.slice_channels(gates, 0, hidden));
        int gf = tape.sigmoid(tape.slice_channels(gates, hidden, hidden));
        int go = tape.sigmoid(tape.slice_channels(gates, 2 * hidden, hidden));
        int gg = tape.tanh(tape.slice_channels(gates, 3 * hidden, hidden));
        c = tape.add(tape.mul(gf, c), tape.mul(gi, gg));
        h = tape.mul(go, tape.tanh(c));
    }
    int d = tape.tanh(tape.conv_transpose2d(h, ids.at("dec1.w"), ids.at("dec1.b"), 2, 1, 1));
    d = tape.tanh(tape.conv_transpose2d(d, ids.at("dec2.w"), ids.at("dec2.b"), 2, 1, 1));
    return tape.sigmoid(tape.conv_transpose2d(d, ids.at("dec3.w"), ids.at("dec3.b"), 2, 1, 1));
}

int discriminator_forward(Tape& tape, const std::map<std::string, int>& ids, int image_id) {
    int d = tape.tanh(tape.conv2d(image_id, ids.at("d1.w"), ids.at("d1.b"), 2, 1));
    d = tape.tanh(tape.conv2d(d, ids.at("d2.w"), ids.at("d2.b"), 2, 1));
    d = tape.tanh(tape.conv2d(d, ids.at("d3.w"), ids.at("d3.b"), 2, 1));
    d = tape.tanh(tape.conv2d(d, ids.at("d4.w"), ids.at("d4.b"), 2, 1));
    return tape.sigmoid(tape.linear(tape.global_avg_pool(d), ids.at("head.w"), ids.at("head.b")));
}

static void check_clip(const std::vector<Image>& clip, int side) {
    if (clip.empty()) throw std::invalid_argument("generate_next: empty clip");
    for (const Image& im : clip) {
        if (im.channels != 1 || im.height != side || im.width != side)
            throw std::invalid_argument("generate_next: clip templates must be single-channel " +
                                        std::to_string(side) + "x" + std::to_string(side));
    }
}

Image generate_next(const GeneratorParams& gen, const std::vector<Image>& clip) {
    check_clip(clip, gen.template_side);
    Tape tape;
    auto ids = register_frozen(tape, gen.params);
    std::vector<int> clip_ids;
    clip_ids.reserve(clip.size());
    for (const Image& im : clip) clip_ids.push_back(tape.leaf(image_to_unit_tensor(im), false));
    int pred = generator_forward(tape, ids, clip_ids, gen.hidden);
    return unit_tensor_to_image(tape.value(pred));
}

double reconstruction_error(const Image& truth, const Image& pred) {
    if (!truth.same_shape(pred))
        throw std::invalid_argument("reconstruction_error: image shapes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < truth.data.size(); ++i) {
        double d = (static_cast<double>(truth.data[i]) - static_cast<double>(pred.data[i])) / 255.0;
        acc += d * d;
    }
    return acc / static_cast<double>(truth.data.size());
}

double discriminator_loss(double d_real, double d_fake) {
    return 0.5 * (d_real - 1.0) * (d_real - 1.0) + 0.5 * d_fake * d_fake;
}

double generator_loss(const Image& truth, const Image& pred, double d_fake, double adv_weight) {
    return reconstruction_error(truth, pred) + adv_weight * 0.5 * (d_fake - 1.0) * (d_fake - 1.0);
}

std::vector<std::vector<Image>> load_template_crops(const std::string& dataset_dir,
                                                    int template_side,
                                                    double template_context) {
    std::vector<std::vector<Image>> out;
    for (const std::string& name : list_sequences(dataset_dir)) {
        Sequence seq = read_sequence((std::filesystem::path(dataset_dir) / name).string());
        std::vector<Image> crops;
        crops.reserve(seq.frames.size());
        for (std::size_t f = 0; f < seq.frames.size(); ++f)
            crops.push_back(crop_and_resize(seq.frames[f], seq.annotations[f].box,
                                            template_context, template_side));
        out.push_back(std::move(crops));
    }
    return out;
}

namespace {

struct ClipRef {
    int seq = 0;
    int pos = 0;  // first input frame; target is pos + k
};

std::vector<ClipRef> clip_refs(const std::vector<std::vector<Image>>& seqs,
                               const std::vector<int>& seq_indices, int k) {
    std::vector<ClipRef> refs;
    for (int s : seq_indices) {
        int n = static_cast<int>(seqs[static_cast<std::size_t>(s)].size());
        for (int a = 0; a + k < n; ++a) refs.push_back({s, a});
    }
    return refs;
}

double mean_val_error(const GeneratorParams& gen,
                      const std::vector<std::vector<Image>>& seqs,
                      const std::vector<ClipRef>& val_refs, int k, int max_clips) {
    int step = std::max(1, static_cast<int>(val_refs.size()) / std::max(1, max_clips));
    double acc = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < val_refs.size() && n < max_clips; i += static_cast<std::size_t>(step)) {
        const ClipRef& r = val_refs[i];
        const auto& seq = seqs[static_cast<std::size_t>(r.seq)];
        std::vector<Image> clip(seq.begin() + r.pos, seq.begin() + r.pos + k);
        acc += reconstruction_error(seq[static_cast<std::size_t>(r.pos + k)],
                                    generate_next(gen, clip));
        ++n;
    }
    return n > 0 ? acc / n : 0.0;
}

}  // namespace

GenTrainResult train_generator(const std::vector<std::vector<Image>>& sequences,
                               const GenTrainConfig& config) {
    if (config.k < 1) throw std::invalid_argument("train_generator: k must be positive");
    const int k = config.k;

    // Hold out roughly one sequence in ten (at least one when there are
    // five or more) so val_mse measures generalization, not memorization.
    const int n_seq = static_cast<int>(sequences.size());
    int n_val = n_seq >= 5 ? std::max(1, n_seq / 10) : 0;
    std::vector<int> train_idx, val_idx;
    for (int s = 0; s < n_seq; ++s)
        (s >= n_seq - n_val ? val_idx : train_idx).push_back(s);

    std::vector<ClipRef> train_refs = clip_refs(sequences, train_idx, k);
    std::vector<ClipRef> val_refs =
        n_val > 0 ? clip_refs(sequences, val_idx, k) : train_refs;
    if (static_cast<int>(train_refs.size()) < config.min_clips)
        throw std::invalid_argument("train_generator: need at least " +
                                    std::to_string(config.min_clips) + " clips, have " +
                                    std::to_string(train_refs.size()));

    Rng root(config.seed);
    GeneratorParams gen = make_generator(root.substream("init.gen").next_u64(), config.hidden,
                                         config.template_side);
    ParamSet disc = make_discriminator(root.substream("init.disc").next_u64());
    Rng order = root.substream("order");

    const double untrained = mean_val_error(gen, sequences, val_refs, k, config.max_val_clips);

    AdamConfig gcfg;
    gcfg.lr = config.lr_gen;
    AdamConfig dcfg;
    dcfg.lr = config.lr_disc;
    Adam opt_gen(gcfg), opt_disc(dcfg);

    std::ofstream log;
    if (!config.log_path.empty()) {
        log.open(config.log_path);
        if (!log) throw std::runtime_error("train_generator: cannot open log " + config.log_path);
    }

    auto sample_ref = [&]() -> const ClipRef& {
        return train_refs[static_cast<std::size_t>(
            order.uniform_int(0, static_cast<int>(train_refs.size()) - 1))];
    };
    auto clip_tensors = [&](const ClipRef& r, Tape& tape, std::vector<int>& ids, Tensor& target) {
        const auto& seq = sequences[static_cast<std::size_t>(r.seq)];
        ids.clear();
        for (int j = 0; j < k; ++j)
            ids.push_back(tape.leaf(image_to_unit_tensor(seq[static_cast<std::size_t>(r.pos + j)]),
                                    false));
        target = image_to_unit_tensor(seq[static_cast<std::size_t>(r.pos + k)]);
    };

    double val_mse = untrained;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double d_loss_sum = 0.0, g_loss_sum = 0.0;
        for (int it = 0; it < config.batches_per_epoch; ++it) {
            // Discriminator pass: predictions are detached by re-running the
            // generator on a throwaway tape and feeding its value in as data.
            std::map<std::string, Tensor> dgrads;
            double d_loss_batch = 0.0;
            for (int b = 0; b < config.batch; ++b) {
                const ClipRef& r = sample_ref();
                Tape gt;
                auto gids = register_frozen(gt, gen.params);
                std::vector<int> clip_ids;
                Tensor target;
                clip_tensors(r, gt, clip_ids, target);
                Tensor fake = gt.value(generator_forward(gt, gids, clip_ids, gen.hidden));

                Tape dt;
                auto dids = register_params(dt, disc);
                int d_real = discriminator_forward(dt, dids, dt.leaf(std::move(target), false));
                int d_fake = discriminator_forward(dt, dids, dt.leaf(std::move(fake), false));
                int lr = dt.add_const(d_real, -1.0);
                int loss = dt.add(dt.scale(dt.mul(lr, lr), 0.5),
                                  dt.scale(dt.mul(d_fake, d_fake), 0.5));
                dt.backward(loss);
                accumulate_grads(dgrads, dt, dids);
                d_loss_batch += dt.scalar(loss);
            }
            scale_grads(dgrads, 1.0 / config.batch);
            opt_disc.step(disc, dgrads);
            d_loss_sum += d_loss_batch / config.batch;

            // Generator pass: discriminator frozen, gradients flow through
            // its forward into the prediction.
            std::map<std::string, Tensor> ggrads;
            double g_loss_batch = 0.0;
            for (int b = 0; b < config.batch; ++b) {
                const ClipRef& r = sample_ref();
                Tape t;
                auto gids = register_params(t, gen.params);
                auto dids = register_frozen(t, disc);
                std::vector<int> clip_ids;
                Tensor target;
                clip_tensors(r, t, clip_ids, target);
                int pred = generator_forward(t, gids, clip_ids, gen.hidden);
                int mse = t.mean_sq_diff(pred, t.leaf(std::move(target), false));
                int df = t.add_const(discriminator_forward(t, dids, pred), -1.0);
                int loss = t.add(mse, t.scale(t.mul(df, df), 0.5 * config.adv_weight));
                t.backward(loss);
                accumulate_grads(ggrads, t, gids);
                g_loss_batch += t.scalar(loss);
            }
            scale_grads(ggrads, 1.0 / config.batch);
            opt_gen.step(gen.params, ggrads);
            g_loss_sum += g_loss_batch / config.batch;
        }

        double d_loss = d_loss_sum / config.batches_per_epoch;
        double g_loss = g_loss_sum / config.batches_per_epoch;
        if (!std::isfinite(d_loss) || !std::isfinite(g_loss))
            throw std::runtime_error("train_generator: non-finite loss at epoch " +
                                     std::to_string(epoch));
        val_mse = mean_val_error(gen, sequences, val_refs, k, config.max_val_clips);
        if (log) {
            char line[160];
            std::snprintf(line, sizeof line,
                          "{\"epoch\":%d,\"d_loss\":%.6f,\"g_loss\":%.6f,\"val_mse\":%.6f}\n",
                          epoch, d_loss, g_loss, val_mse);
            log << line;
        }
    }

    GenTrainResult res;
    res.gen = std::move(gen);
    res.disc = std::move(disc);
    res.final_val_mse = val_mse;
    res.untrained_val_mse = untrained;
    return res;
}

}  // namespace adasiam
