#include "adasiam/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "adasiam/checkpoint.hpp"
#include "adasiam/rng.hpp"

namespace adasiam {

namespace {

std::map<std::string, std::vector<int>> adapter_shapes(int channels, int hidden) {
    return {
        {"attn.w1", {hidden, channels}},          {"attn.b1", {hidden}},
        {"attn.w2", {channels, hidden}},          {"attn.b2", {channels}},
        {"eta1.w", {channels, 2 * channels, 1, 1}}, {"eta1.b", {channels}},
        {"eta2.w", {channels, channels, 1, 1}},     {"eta2.b", {channels}},
    };
}

void check_feature(const FeatureMap& phi, int channels, const char* name) {
    if (phi.rank() != 3 || phi.dim(0) != channels)
        throw std::invalid_argument(std::string("adapter: ") + name + " must have " +
                                    std::to_string(channels) + " channels, got shape " +
                                    phi.shape_str());
}

}  // namespace

AdapterParams make_adapter(std::uint64_t seed, int channels, int hidden) {
    if (channels < 1 || hidden < 1)
        throw std::invalid_argument("adapter: channels and hidden must be positive");
    Rng rng(seed);
    Rng r1 = rng.substream("adapt.attn1");
    Rng r2 = rng.substream("adapt.attn2");
    Rng r3 = rng.substream("adapt.eta1");
    Rng r4 = rng.substream("adapt.eta2");

    AdapterParams ap;
    ap.channels = channels;
    ap.hidden = hidden;
    ap.params.add("attn.w1", init_linear_weight(r1, hidden, channels));
    ap.params.add("attn.b1", zeros({hidden}));
    ap.params.add("attn.w2", init_linear_weight(r2, channels, hidden));
    ap.params.add("attn.b2", zeros({channels}));
    ap.params.add("eta1.w", init_conv_weight(r3, channels, 2 * channels, 1, 1));
    ap.params.add("eta1.b", zeros({channels}));
    ap.params.add("eta2.w", init_conv_weight(r4, channels, channels, 1, 1));
    ap.params.add("eta2.b", zeros({channels}));
    return ap;
}

AdapterParams adapter_from_params(ParamSet params) {
    const Tensor& w1 = params.at("attn.w1");
    if (w1.rank() != 2) throw std::invalid_argument("adapter: attn.w1 must be a matrix");
    const int hidden = w1.dim(0);
    const int channels = w1.dim(1);
    auto expected = adapter_shapes(channels, hidden);
    if (params.count() != expected.size())
        throw std::invalid_argument("adapter: checkpoint has wrong parameter count");
    for (const auto& [name, shape] : expected) {
        const Tensor& t = params.at(name);
        if (t.shape() != shape)
            throw std::invalid_argument("adapter: parameter '" + name + "' has shape " +
                                        t.shape_str() + ", expected " + Tensor(shape).shape_str());
    }
    AdapterParams ap;
    ap.params = std::move(params);
    ap.channels = channels;
    ap.hidden = hidden;
    return ap;
}

int attention_stream_graph(Tape& tape, const std::map<std::string, int>& ids, int phi) {
    int g = tape.global_avg_pool(phi);
    int h = tape.tanh(tape.linear(g, ids.at("attn.w1"), ids.at("attn.b1")));
    return tape.sigmoid(tape.linear(h, ids.at("attn.w2"), ids.at("attn.b2")));
}

int channel_attention_graph(Tape& tape, const std::map<std::string, int>& ids, int phi_z,
                            int phi_init, int phi_hat) {
    int sum = tape.add(tape.add(attention_stream_graph(tape, ids, phi_z),
                                attention_stream_graph(tape, ids, phi_init)),
                       attention_stream_graph(tape, ids, phi_hat));
    return tape.scale(sum, 1.0 / 3.0);
}

int fuse_graph(Tape& tape, const std::map<std::string, int>& ids, int phi_prev, int phi_hat,
               int attention, int phi_init, bool residual) {
    int scaled = tape.channel_scale(phi_hat, attention);
    int cc = tape.concat_channels(phi_prev, scaled);
    int r = tape.tanh(tape.conv2d(cc, ids.at("eta1.w"), ids.at("eta1.b"), 1, 0));
    r = tape.tanh(tape.conv2d(r, ids.at("eta2.w"), ids.at("eta2.b"), 1, 0));
    return residual ? tape.add(phi_init, r) : r;
}

int adaptation_loss_graph(Tape& tape, int phi_gt, int phi_fused, int phi_avg, double lambda) {
    int mse = tape.mean_sq_diff(phi_fused, phi_gt);
    int gap = tape.sub(tape.l2_distance(phi_gt, phi_fused), tape.l2_distance(phi_gt, phi_avg));
    return tape.add(mse, tape.scale(tape.relu(gap), lambda));
}

AttentionVector attention_stream(const AdapterParams& params, const FeatureMap& phi) {
    check_feature(phi, params.channels, "attention input");
    Tape tape;
    auto ids = register_frozen(tape, params.params);
    const Tensor& out = tape.value(attention_stream_graph(tape, ids, tape.leaf(phi, false)));
    return {out.vec().begin(), out.vec().end()};
}

AttentionVector channel_attention(const AdapterParams& params, const FeatureMap& phi_z,
                                  const FeatureMap& phi_init, const FeatureMap& phi_hat) {
    check_feature(phi_z, params.channels, "phi_z");
    check_feature(phi_init, params.channels, "phi_init");
    check_feature(phi_hat, params.channels, "phi_hat");
    Tape tape;
    auto ids = register_frozen(tape, params.params);
    int a = channel_attention_graph(tape, ids, tape.leaf(phi_z, false),
                                    tape.leaf(phi_init, false), tape.leaf(phi_hat, false));
    const Tensor& out = tape.value(a);
    return {out.vec().begin(), out.vec().end()};
}

FeatureMap fuse(const AdapterParams& params, const FeatureMap& phi_prev,
                const FeatureMap& phi_hat, const AttentionVector& attention,
                const FeatureMap& phi_init, bool residual) {
    check_feature(phi_prev, params.channels, "phi_prev");
    check_feature(phi_hat, params.channels, "phi_hat");
    check_feature(phi_init, params.channels, "phi_init");
    if (!phi_prev.same_shape(phi_hat) || !phi_prev.same_shape(phi_init))
        throw std::invalid_argument("fuse: feature map shapes differ");
    if (static_cast<int>(attention.size()) != params.channels)
        throw std::invalid_argument("fuse: attention length does not match channels");
    Tape tape;
    auto ids = register_frozen(tape, params.params);
    Tensor a({params.channels}, std::vector<double>(attention.begin(), attention.end()));
    int out = fuse_graph(tape, ids, tape.leaf(phi_prev, false), tape.leaf(phi_hat, false),
                         tape.leaf(std::move(a), false), tape.leaf(phi_init, false), residual);
    return tape.value(out);
}

FeatureMap moving_average(const FeatureMap& phi_prev, const FeatureMap& phi_new, double gamma) {
    if (!phi_prev.same_shape(phi_new))
        throw std::invalid_argument("moving_average: shapes differ");
    Tensor out(phi_prev.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (1.0 - gamma) * phi_prev[i] + gamma * phi_new[i];
    return out;
}

FeatureMap average_template(const FeatureMap& phi_init, const FeatureMap& phi_prev) {
    return moving_average(phi_init, phi_prev, 0.5);
}

double adaptation_loss(const FeatureMap& phi_gt, const FeatureMap& phi_fused,
                       const FeatureMap& phi_avg, double lambda) {
    if (!phi_gt.same_shape(phi_fused) || !phi_gt.same_shape(phi_avg))
        throw std::invalid_argument("adaptation_loss: shapes differ");
    double mse = 0.0, d_fused = 0.0, d_avg = 0.0;
    for (std::size_t i = 0; i < phi_gt.size(); ++i) {
        double df = phi_gt[i] - phi_fused[i];
        double da = phi_gt[i] - phi_avg[i];
        mse += df * df;
        d_fused += df * df;
        d_avg += da * da;
    }
    mse /= static_cast<double>(phi_gt.size());
    double gap = std::sqrt(d_fused) - std::sqrt(d_avg);
    return mse + lambda * std::max(gap, 0.0);
}

std::vector<AdaptSample> build_adapt_samples(const GeneratorParams& gen,
                                             const BackboneParams& backbone,
                                             const std::vector<Sequence>& sequences,
                                             const AdaptTrainConfig& config) {
    const int k = config.k;
    auto template_features = [&](const Image& crop) {
        return extract_features(backbone, to_real(crop));
    };
    auto template_crop = [&](const Sequence& seq, int f) {
        return crop_and_resize(seq.frames[static_cast<std::size_t>(f)],
                               seq.annotations[static_cast<std::size_t>(f)].box,
                               config.template_context, config.template_side);
    };

    // Enumerate all clip positions first so capping strides evenly.
    std::vector<std::pair<int, int>> refs;
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        int n = static_cast<int>(sequences[s].frames.size());
        for (int a = 0; a + k < n; ++a) refs.push_back({static_cast<int>(s), a});
    }
    std::size_t stride = 1;
    if (config.max_samples > 0 && refs.size() > static_cast<std::size_t>(config.max_samples))
        stride = (refs.size() + static_cast<std::size_t>(config.max_samples) - 1) /
                 static_cast<std::size_t>(config.max_samples);

    // Per-sequence cache of every frame's template features. The previous-
    // template stand-in is the EMA of the clip-frame features seeded at the
    // initial template: a fused template stays anchored at phi_init (the
    // residual head adds a bounded correction), so the stand-in must too.
    int cached_seq = -1;
    std::vector<FeatureMap> frame_features;
    std::vector<AdaptSample> samples;
    for (std::size_t i = 0; i < refs.size(); i += stride) {
        auto [s, a] = refs[i];
        const Sequence& seq = sequences[static_cast<std::size_t>(s)];
        if (s != cached_seq) {
            int n = static_cast<int>(seq.frames.size());
            frame_features.assign(static_cast<std::size_t>(n), {});
            for (int f = 0; f < n; ++f)
                frame_features[static_cast<std::size_t>(f)] = template_features(template_crop(seq, f));
            cached_seq = s;
        }

        std::vector<Image> clip;
        clip.reserve(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) clip.push_back(template_crop(seq, a + j));

        FeatureMap prev = frame_features[0];
        for (int j = 0; j < k; ++j)
            prev = moving_average(prev, frame_features[static_cast<std::size_t>(a + j)], config.gamma);

        AdaptSample smp;
        smp.phi_init = frame_features[0];
        smp.phi_hat = template_features(generate_next(gen, clip));
        smp.phi_prev = std::move(prev);
        smp.phi_z = extract_features(
            backbone, to_real(crop_and_resize(seq.frames[static_cast<std::size_t>(a + k)],
                                              seq.annotations[static_cast<std::size_t>(a + k)].box,
                                              config.search_context, config.search_side)));
        smp.phi_gt = frame_features[static_cast<std::size_t>(a + k)];
        samples.push_back(std::move(smp));
    }
    return samples;
}

namespace {

// D_E(gt, fused) <= D_E(gt, avg) satisfaction over a sample set.
double constraint_rate(const AdapterParams& adapter, const std::vector<AdaptSample>& samples,
                       bool residual) {
    if (samples.empty()) return 0.0;
    int ok = 0;
    for (const AdaptSample& smp : samples) {
        AttentionVector a = channel_attention(adapter, smp.phi_z, smp.phi_init, smp.phi_hat);
        FeatureMap fused = fuse(adapter, smp.phi_prev, smp.phi_hat, a, smp.phi_init, residual);
        FeatureMap avg = average_template(smp.phi_init, smp.phi_prev);
        double d_fused = 0.0, d_avg = 0.0;
        for (std::size_t i = 0; i < fused.size(); ++i) {
            double df = smp.phi_gt[i] - fused[i];
            double da = smp.phi_gt[i] - avg[i];
            d_fused += df * df;
            d_avg += da * da;
        }
        if (std::sqrt(d_fused) <= std::sqrt(d_avg)) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(samples.size());
}

}  // namespace

AdaptTrainResult train_adapter(const GeneratorParams& gen, const BackboneParams& backbone,
                               const std::vector<Sequence>& sequences,
                               const AdaptTrainConfig& config) {
    const int n_seq = static_cast<int>(sequences.size());
    int n_val = n_seq >= 5 ? std::max(1, n_seq / 10) : 0;
    std::vector<Sequence> train_seqs(sequences.begin(), sequences.end() - n_val);
    std::vector<Sequence> val_seqs(sequences.end() - n_val, sequences.end());

    std::vector<AdaptSample> train_samples = build_adapt_samples(gen, backbone, train_seqs, config);
    if (static_cast<int>(train_samples.size()) < config.min_samples)
        throw std::invalid_argument("train_adapter: need at least " +
                                    std::to_string(config.min_samples) + " samples, have " +
                                    std::to_string(train_samples.size()));
    AdaptTrainConfig val_cfg = config;
    val_cfg.max_samples = std::min(config.max_samples, 300);
    std::vector<AdaptSample> val_samples =
        n_val > 0 ? build_adapt_samples(gen, backbone, val_seqs, val_cfg) : train_samples;

    const int channels = train_samples.front().phi_init.dim(0);
    Rng root(config.seed);
    AdapterParams adapter =
        make_adapter(root.substream("init").next_u64(), channels, config.hidden);

    // The constraint's fixed anchor: how far plain averaging lands from gt.
    std::vector<FeatureMap> avgs;
    avgs.reserve(train_samples.size());
    for (const AdaptSample& smp : train_samples)
        avgs.push_back(average_template(smp.phi_init, smp.phi_prev));

    const double rate_before = constraint_rate(adapter, val_samples, config.residual);

    AdamConfig acfg;
    acfg.lr = config.lr;
    Adam opt(acfg);

    std::ofstream log;
    if (!config.log_path.empty()) {
        log.open(config.log_path);
        if (!log) throw std::runtime_error("train_adapter: cannot open log " + config.log_path);
    }

    std::vector<std::size_t> order(train_samples.size());
    std::iota(order.begin(), order.end(), 0);
    double epoch_loss = 0.0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng shuf = root.substream("order", static_cast<std::uint64_t>(epoch));
        shuf.shuffle(order.begin(), order.end());

        double loss_sum = 0.0;
        int satisfied = 0;
        std::size_t done = 0;
        while (done < order.size()) {
            std::size_t batch_end = std::min(done + static_cast<std::size_t>(config.batch),
                                             order.size());
            std::map<std::string, Tensor> grads;
            for (std::size_t bi = done; bi < batch_end; ++bi) {
                const AdaptSample& smp = train_samples[order[bi]];
                Tape t;
                auto ids = register_params(t, adapter.params);
                int z = t.leaf(smp.phi_z, false);
                int init = t.leaf(smp.phi_init, false);
                int hat = t.leaf(smp.phi_hat, false);
                int prev = t.leaf(smp.phi_prev, false);
                int gt = t.leaf(smp.phi_gt, false);
                int avg = t.leaf(avgs[order[bi]], false);

                int attn = channel_attention_graph(t, ids, z, init, hat);
                int fused = fuse_graph(t, ids, prev, hat, attn, init, config.residual);
                int d_fused = t.l2_distance(gt, fused);
                int d_avg = t.l2_distance(gt, avg);
                int loss = t.add(t.mean_sq_diff(fused, gt),
                                 t.scale(t.relu(t.sub(d_fused, d_avg)), config.lambda));
                t.backward(loss);
                accumulate_grads(grads, t, ids);
                loss_sum += t.scalar(loss);
                if (t.scalar(d_fused) <= t.scalar(d_avg)) ++satisfied;
            }
            scale_grads(grads, 1.0 / static_cast<double>(batch_end - done));
            opt.step(adapter.params, grads);
            done = batch_end;
        }

        epoch_loss = loss_sum / static_cast<double>(order.size());
        double rate = static_cast<double>(satisfied) / static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("train_adapter: non-finite loss at epoch " +
                                     std::to_string(epoch));
        if (log) {
            char line[160];
            std::snprintf(line, sizeof line,
                          "{\"epoch\":%d,\"loss\":%.6f,\"constraint_rate\":%.6f}\n", epoch,
                          epoch_loss, rate);
            log << line;
        }
    }

    AdaptTrainResult res;
    res.constraint_rate_before = rate_before;
    res.constraint_rate_after = constraint_rate(adapter, val_samples, config.residual);
    res.final_loss = epoch_loss;
    if (!config.checkpoint_prefix.empty())
        save_checkpoint(config.checkpoint_prefix, adapter.params);
    res.adapter = std::move(adapter);
    return res;
}

}  // namespace adasiam
