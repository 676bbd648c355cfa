#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "adasiam/adapt.hpp"
#include "adasiam/checkpoint.hpp"
#include "adasiam/rng.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace adasiam;

namespace {

Tensor random_map(Rng& r, int c, int h, int w, double lo = -1.0, double hi = 1.0) {
    Tensor t({c, h, w});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("channel attention averages the three streams") {
    // The combination rule itself: mean of per-stream sigmoids.
    std::vector<double> s1{0.2, 0.8}, s2{0.4, 0.6}, s3{0.6, 0.4};
    for (int i = 0; i < 2; ++i)
        CHECK((s1[i] + s2[i] + s3[i]) / 3.0 ==
              doctest::Approx(i == 0 ? 0.4 : 0.6));

    AdapterParams ap = make_adapter(5, 4, 2);
    Rng r(31);
    Tensor z = random_map(r, 4, 5, 5);
    Tensor init = random_map(r, 4, 3, 3);
    Tensor hat = random_map(r, 4, 3, 3);

    AttentionVector a = channel_attention(ap, z, init, hat);
    AttentionVector az = attention_stream(ap, z);
    AttentionVector ai = attention_stream(ap, init);
    AttentionVector ah = attention_stream(ap, hat);
    REQUIRE(a.size() == 4);
    for (int c = 0; c < 4; ++c) {
        CHECK(a[c] == doctest::Approx((az[c] + ai[c] + ah[c]) / 3.0).epsilon(1e-12));
        CHECK(a[c] > 0.0);
        CHECK(a[c] < 1.0);
    }

    // Identical streams collapse to the single-stream output.
    AttentionVector same = channel_attention(ap, init, init, init);
    for (int c = 0; c < 4; ++c) CHECK(same[c] == doctest::Approx(ai[c]).epsilon(1e-12));

    AdapterParams zero = make_adapter(1, 4, 2);
    for (auto& [name, t] : zero.params.items()) t.fill(0.0);
    for (double v : channel_attention(zero, z, init, hat)) CHECK(v == 0.5);

    CHECK_THROWS_WITH_AS(channel_attention(ap, random_map(r, 3, 5, 5), init, hat),
                         doctest::Contains("channels"), std::invalid_argument);
}

TEST_CASE("fusion is a bounded residual over the initial template") {
    AdapterParams ap = make_adapter(7, 4, 2);
    Rng r(13);
    Tensor prev = random_map(r, 4, 3, 3);
    Tensor hat = random_map(r, 4, 3, 3);
    Tensor init = random_map(r, 4, 3, 3);
    AttentionVector a{0.3, 0.5, 0.7, 0.9};

    // Zero fusion weights: tanh(0) = 0, the residual form returns phi_init.
    AdapterParams zero = ap;
    zero.params.at("eta1.w").fill(0.0);
    zero.params.at("eta1.b").fill(0.0);
    zero.params.at("eta2.w").fill(0.0);
    zero.params.at("eta2.b").fill(0.0);
    CHECK(bitwise_equal(fuse(zero, prev, hat, a, init, true), init));

    // Attention zero: the generated half of the concat is wiped out.
    AttentionVector off{0.0, 0.0, 0.0, 0.0};
    Tensor other_hat = random_map(r, 4, 3, 3);
    CHECK(bitwise_equal(fuse(ap, prev, hat, off, init, true),
                        fuse(ap, prev, other_hat, off, init, true)));

    Tensor bare = fuse(ap, prev, hat, a, init, false);
    Tensor res = fuse(ap, prev, hat, a, init, true);
    for (std::size_t i = 0; i < bare.size(); ++i) {
        CHECK(std::abs(bare[i]) < 1.0);
        CHECK(std::abs(res[i] - init[i]) < 1.0);
    }

    CHECK_THROWS_WITH_AS(fuse(ap, prev, hat, {0.5, 0.5}, init, true),
                         doctest::Contains("attention"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(fuse(ap, prev, random_map(r, 4, 2, 2), a, init, true),
                         doctest::Contains("shapes"), std::invalid_argument);
}

TEST_CASE("fusion matches an independent layer-by-layer evaluation") {
    const int C = 4, H = 3, W = 3, hid = 2;
    AdapterParams ap = make_adapter(11, C, hid);
    Rng r(17);
    Tensor prev = random_map(r, C, H, W);
    Tensor hat = random_map(r, C, H, W);
    Tensor init = random_map(r, C, H, W);
    Tensor z = random_map(r, C, 5, 5);

    auto stream_oracle = [&](const Tensor& phi) {
        std::vector<double> g(C, 0.0);
        for (int c = 0; c < C; ++c) {
            for (int y = 0; y < phi.dim(1); ++y)
                for (int x = 0; x < phi.dim(2); ++x) g[static_cast<std::size_t>(c)] += phi.at(c, y, x);
            g[static_cast<std::size_t>(c)] /= phi.dim(1) * phi.dim(2);
        }
        const Tensor& w1 = ap.params.at("attn.w1");
        const Tensor& b1 = ap.params.at("attn.b1");
        std::vector<double> h(hid);
        for (int o = 0; o < hid; ++o) {
            double acc = b1[static_cast<std::size_t>(o)];
            for (int i = 0; i < C; ++i) acc += w1[static_cast<std::size_t>(o * C + i)] * g[static_cast<std::size_t>(i)];
            h[static_cast<std::size_t>(o)] = std::tanh(acc);
        }
        const Tensor& w2 = ap.params.at("attn.w2");
        const Tensor& b2 = ap.params.at("attn.b2");
        std::vector<double> s(C);
        for (int o = 0; o < C; ++o) {
            double acc = b2[static_cast<std::size_t>(o)];
            for (int i = 0; i < hid; ++i) acc += w2[static_cast<std::size_t>(o * hid + i)] * h[static_cast<std::size_t>(i)];
            s[static_cast<std::size_t>(o)] = 1.0 / (1.0 + std::exp(-acc));
        }
        return s;
    };
    auto sz = stream_oracle(z), si = stream_oracle(init), sh = stream_oracle(hat);
    std::vector<double> a(C);
    for (int c = 0; c < C; ++c)
        a[static_cast<std::size_t>(c)] = (sz[static_cast<std::size_t>(c)] + si[static_cast<std::size_t>(c)] + sh[static_cast<std::size_t>(c)]) / 3.0;

    // concat [prev ; a*hat], then two per-pixel matvecs with tanh.
    Tensor cc({2 * C, H, W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                cc.at(c, y, x) = prev.at(c, y, x);
                cc.at(C + c, y, x) = a[static_cast<std::size_t>(c)] * hat.at(c, y, x);
            }
    auto conv1x1 = [](const Tensor& in, const Tensor& w, const Tensor& b) {
        int out_c = w.dim(0), in_c = w.dim(1);
        Tensor out({out_c, in.dim(1), in.dim(2)});
        for (int o = 0; o < out_c; ++o)
            for (int y = 0; y < in.dim(1); ++y)
                for (int x = 0; x < in.dim(2); ++x) {
                    double acc = b[static_cast<std::size_t>(o)];
                    for (int i = 0; i < in_c; ++i)
                        acc += w[static_cast<std::size_t>(o * in_c + i)] * in.at(i, y, x);
                    out.at(o, y, x) = std::tanh(acc);
                }
        return out;
    };
    Tensor r1 = conv1x1(cc, ap.params.at("eta1.w"), ap.params.at("eta1.b"));
    Tensor r2 = conv1x1(r1, ap.params.at("eta2.w"), ap.params.at("eta2.b"));
    for (std::size_t i = 0; i < r2.size(); ++i) r2[i] += init[i];

    AttentionVector attn = channel_attention(ap, z, init, hat);
    Tensor got = fuse(ap, prev, hat, attn, init, true);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i)
        max_diff = std::max(max_diff, std::abs(got[i] - r2[i]));
    CHECK(max_diff <= 1e-6);
}

TEST_CASE("moving average and template averaging") {
    Rng r(3);
    Tensor a = random_map(r, 2, 3, 3);
    Tensor b = random_map(r, 2, 3, 3);
    CHECK(bitwise_equal(moving_average(a, b, 0.0), a));
    CHECK(bitwise_equal(moving_average(a, b, 1.0), b));

    Tensor two({1, 1, 1}, {2.0});
    Tensor four({1, 1, 1}, {4.0});
    CHECK(moving_average(two, four, 0.5)[0] == 3.0);

    CHECK_THROWS_WITH_AS(moving_average(a, random_map(r, 2, 2, 2), 0.5),
                         doctest::Contains("shapes"), std::invalid_argument);

    // Geometric decay toward a constant zero input.
    for (double gamma : {0.1, 0.5, 0.9}) {
        Tensor cur = a;
        Tensor zero(a.shape());
        for (int n = 1; n <= 50; ++n) {
            cur = moving_average(cur, zero, gamma);
            double want = std::pow(1.0 - gamma, n);
            for (std::size_t i = 0; i < cur.size(); ++i)
                CHECK(testutil::rel_err(cur[i], want * a[i]) < 1e-12);
        }
    }

    CHECK(bitwise_equal(average_template(a, a), a));
    Tensor zero1({1, 1, 1}, {0.0});
    Tensor one1({1, 1, 1}, {1.0});
    CHECK(average_template(zero1, one1)[0] == 0.5);
    CHECK(bitwise_equal(average_template(a, b), moving_average(a, b, 0.5)));
}

TEST_CASE("adaptation loss rewards beating the averaging baseline") {
    Tensor gt({1}, {0.0});
    Tensor fused({1}, {2.0});
    Tensor avg({1}, {1.0});
    CHECK(adaptation_loss(gt, fused, avg, 10.0) == 14.0);
    CHECK(adaptation_loss(gt, gt, avg, 10.0) == 0.0);
    CHECK(adaptation_loss(gt, fused, avg, 0.0) == 4.0);

    // Penalty is exactly zero whenever the constraint is satisfied.
    Rng r(7);
    Tensor g = random_map(r, 3, 4, 4);
    Tensor near = g;
    for (std::size_t i = 0; i < near.size(); ++i) near[i] += 0.01;
    Tensor far = g;
    for (std::size_t i = 0; i < far.size(); ++i) far[i] += 1.0;
    double mse = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double d = g[i] - near[i];
        mse += d * d;
    }
    mse /= static_cast<double>(g.size());
    CHECK(adaptation_loss(g, near, far, 10.0) == doctest::Approx(mse).epsilon(1e-12));
    CHECK(adaptation_loss(g, far, near, 10.0) > adaptation_loss(g, far, near, 0.0));

    // Graph and direct evaluations agree.
    Tape t;
    int loss = adaptation_loss_graph(t, t.leaf(g, false), t.leaf(far, false),
                                     t.leaf(near, false), 10.0);
    CHECK(t.scalar(loss) == doctest::Approx(adaptation_loss(g, far, near, 10.0)).epsilon(1e-12));
}

TEST_CASE("adapter gradients match finite differences") {
    const int C = 4, hid = 2;
    AdapterParams ap = make_adapter(19, C, hid);
    Rng r(23);
    Tensor z = random_map(r, C, 5, 5);
    Tensor init = random_map(r, C, 3, 3);
    Tensor hat = random_map(r, C, 3, 3);
    Tensor prev = random_map(r, C, 3, 3);
    Tensor gt = random_map(r, C, 3, 3);
    // Anchor close to gt so the inequality penalty is active.
    Tensor avg = gt;
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += 0.01;

    for (bool residual : {true, false}) {
        auto build = [&](Tape& t, const std::map<std::string, int>& ids) {
            int attn = channel_attention_graph(t, ids, t.leaf(z, false), t.leaf(init, false),
                                               t.leaf(hat, false));
            int fused = fuse_graph(t, ids, t.leaf(prev, false), t.leaf(hat, false), attn,
                                   t.leaf(init, false), residual);
            return adaptation_loss_graph(t, t.leaf(gt, false), fused, t.leaf(avg, false), 10.0);
        };
        auto loss_value = [&]() {
            Tape t;
            auto ids = register_frozen(t, ap.params);
            return t.scalar(build(t, ids));
        };

        Tape t;
        auto ids = register_params(t, ap.params);
        int loss = build(t, ids);
        CHECK(t.scalar(loss) > 0.0);
        t.backward(loss);

        const double step = 1e-5;
        for (const auto& [name, id] : ids) {
            Tensor& p = ap.params.at(name);
            const Tensor& g = t.grad(id);
            for (std::size_t i = 0; i < p.size(); ++i) {
                double keep = p[i];
                p[i] = keep + step;
                double up = loss_value();
                p[i] = keep - step;
                double dn = loss_value();
                p[i] = keep;
                double want = (up - dn) / (2 * step);
                CAPTURE(name);
                CHECK(std::abs(g[i] - want) <= 1e-7 + 1e-4 * std::abs(want));
            }
        }
    }
}

TEST_CASE("adapter training smoke: runs, logs, deterministic, inert at lr zero") {
    SequenceSpec spec;
    spec.length = 30;
    spec.seed = 61;
    std::vector<Sequence> seqs = {generate_sequence(spec)};
    spec.seed = 62;
    seqs.push_back(generate_sequence(spec));

    GeneratorParams gen = make_generator(3, 2, 32);
    BackboneParams backbone = make_backbone(4);
    AdaptTrainConfig cfg;
    cfg.template_side = 32;
    cfg.search_side = 64;
    cfg.hidden = 4;
    cfg.epochs = 2;
    cfg.batch = 8;
    cfg.max_samples = 100;
    cfg.seed = 9;
    cfg.log_path = "adapt_train_log.jsonl";
    cfg.checkpoint_prefix = "adapt_ckpt";

    AdaptTrainResult a = train_adapter(gen, backbone, seqs, cfg);
    CHECK(a.constraint_rate_before >= 0.0);
    CHECK(a.constraint_rate_before <= 1.0);
    CHECK(a.constraint_rate_after >= 0.0);
    CHECK(a.constraint_rate_after <= 1.0);
    CHECK(std::isfinite(a.final_loss));
    CHECK(a.adapter.channels == 32);
    CHECK(a.adapter.hidden == 4);

    std::ifstream log(cfg.log_path);
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
        ++lines;
        CHECK(line.find("\"epoch\":" + std::to_string(lines)) != std::string::npos);
        CHECK(line.find("\"loss\":") != std::string::npos);
        CHECK(line.find("\"constraint_rate\":") != std::string::npos);
    }
    CHECK(lines == 2);
    std::remove(cfg.log_path.c_str());

    // Checkpoint round trip rebuilds an equivalent adapter.
    AdapterParams loaded = adapter_from_params(load_checkpoint("adapt_ckpt"));
    CHECK(loaded.channels == 32);
    CHECK(loaded.hidden == 4);
    for (const auto& [name, t] : a.adapter.params.items()) {
        const Tensor& lt = loaded.params.at(name);
        for (std::size_t i = 0; i < t.size(); ++i)
            CHECK(lt[i] == static_cast<double>(static_cast<float>(t[i])));
    }
    std::remove("adapt_ckpt.manifest");
    std::remove("adapt_ckpt.blob");

    cfg.checkpoint_prefix.clear();
    cfg.log_path.clear();
    AdaptTrainResult b = train_adapter(gen, backbone, seqs, cfg);
    for (const auto& [name, t] : a.adapter.params.items())
        CHECK(bitwise_equal(t, b.adapter.params.at(name)));

    cfg.lr = 0.0;
    cfg.epochs = 1;
    AdaptTrainResult z1 = train_adapter(gen, backbone, seqs, cfg);
    cfg.epochs = 3;
    AdaptTrainResult z3 = train_adapter(gen, backbone, seqs, cfg);
    for (const auto& [name, t] : z1.adapter.params.items())
        CHECK(bitwise_equal(t, z3.adapter.params.at(name)));
    CHECK(z1.constraint_rate_before == z1.constraint_rate_after);

    cfg.min_samples = 1000;
    CHECK_THROWS_WITH_AS(train_adapter(gen, backbone, seqs, cfg),
                         doctest::Contains("samples"), std::invalid_argument);
}
