#include <doctest.h>

#include <functional>

#include "adasiam/autodiff.hpp"
#include "adasiam/nn.hpp"
#include "adasiam/rng.hpp"
#include "helpers.hpp"

using adasiam::Adam;
using adasiam::AdamConfig;
using adasiam::ParamSet;
using adasiam::Rng;
using adasiam::Tape;
using adasiam::Tensor;

namespace {

Tensor random_tensor(Rng& rng, const std::vector<int>& shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Checks d loss / d leaf against central differences for one leaf while the
// graph builder receives all leaves.
void gradcheck(const std::vector<Tensor>& leaves,
               const std::function<int(Tape&, const std::vector<int>&)>& build, double tol = 1e-6) {
    Tape tape;
    std::vector<int> ids;
    ids.reserve(leaves.size());
    for (const auto& l : leaves) ids.push_back(tape.leaf(l, true));
    int loss = build(tape, ids);
    tape.backward(loss);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor numeric = testutil::numeric_grad(
            [&](const Tensor& x) {
                Tape t2;
                std::vector<int> ids2;
                for (std::size_t j = 0; j < leaves.size(); ++j)
                    ids2.push_back(t2.leaf(j == li ? x : leaves[j], false));
                return t2.scalar(build(t2, ids2));
            },
            leaves[li]);
        CHECK(testutil::max_rel_err(tape.grad(ids[li]), numeric) < tol);
    }
}

}  // namespace

TEST_CASE("conv2d gradients") {
    Rng rng(301);
    std::vector<Tensor> leaves{random_tensor(rng, {2, 5, 5}), random_tensor(rng, {3, 2, 3, 3}),
                               random_tensor(rng, {3})};
    gradcheck(leaves, [](Tape& t, const std::vector<int>& id) {
        int y = t.conv2d(id[0], id[1], id[2], 2, 1);
        return t.mean_sq_diff(y, t.leaf(Tensor(t.value(y).shape())));
    });
}

TEST_CASE("conv_transpose2d gradients") {
    Rng rng(303);
    std::vector<Tensor> leaves{random_tensor(rng, {3, 3, 3}), random_tensor(rng, {3, 2, 3, 3}),
                               random_tensor(rng, {2})};
    gradcheck(leaves, [](Tape& t, const std::vector<int>& id) {
        int y = t.conv_transpose2d(id[0], id[1], id[2], 2, 1, 1);
        return t.mean_sq_diff(y, t.leaf(Tensor(t.value(y).shape())));
    });
}

TEST_CASE("linear gradients") {
    Rng rng(305);
    std::vector<Tensor> leaves{random_tensor(rng, {6}), random_tensor(rng, {4, 6}),
                               random_tensor(rng, {4})};
    gradcheck(leaves, [](Tape& t, const std::vector<int>& id) {
        int y = t.linear(id[0], id[1], id[2]);
        return t.mean_sq_diff(y, t.leaf(Tensor({4})));
    });
}

TEST_CASE("activation gradients") {
    Rng rng(307);
    std::vector<Tensor> leaves{random_tensor(rng, {2, 4, 4}, 0.3, 1.5)};
    gradcheck(leaves, [](Tape& t, const std::vector<int>& id) {
        int a = t.tanh(id[0]);
        int b = t.sigmoid(a);
        int c = t.relu(b);
        return t.mean_all(c);
    });
}

TEST_CASE("arithmetic op gradients") {
    Rng rng(311);
    std::vector<Tensor> leaves{random_tensor(rng, {3, 3}), random_tensor(rng, {3, 3})};
    gradcheck(leaves, [](Tape& t, const std::vector<int>& id) {
        int s = t.add(id[0], id[1]);
        int d = t.sub(s, id[1]);
        int m = t.mul(d, id[1]);
        int sc = t.scale(m, 1.7);
        int ac = t.add_const(sc, 0.3);
        return t.mean_all(ac);
    });
}

TEST_CASE("concat and slice gradients") {
    Rng rng(313);
    std::vector<Tensor> leaves{random_tensor(rng, {2, 3, 3}), random_tensor(rng, {3, 3, 3})};
    gradcheck(leaves, [](Tape& t, const std::vector<int>& id) {
        int cat = t.concat_channels(id[0], id[1]);
        int sl = t.slice_channels(cat, 1, 3);
        return t.mean_all(sl);
    });
}

TEST_CASE("channel_scale and global_avg_pool gradients") {
    Rng rng(317);
    std::vector<Tensor> leaves{random_tensor(rng, {4, 5, 5}), random_tensor(rng, {4})};
    gradcheck(leaves, [](Tape& t, const std::vector<int>& id) {
        int scaled = t.channel_scale(id[0], id[1]);
        int pooled = t.global_avg_pool(scaled);
        return t.mean_sq_diff(pooled, t.leaf(Tensor({4})));
    });
}

TEST_CASE("distance gradients") {
    Rng rng(319);
    std::vector<Tensor> leaves{random_tensor(rng, {3, 4, 4}), random_tensor(rng, {3, 4, 4})};
    gradcheck(leaves, [](Tape& t, const std::vector<int>& id) {
        int l2 = t.l2_distance(id[0], id[1]);
        int ms = t.mean_sq_diff(id[0], id[1]);
        return t.add(l2, ms);
    });
}

TEST_CASE("backward leaves non-path grads at zero") {
    Tape tape;
    Tensor a({2});
    a[0] = 1.0;
    a[1] = 2.0;
    int x = tape.leaf(a, true);
    int unused = tape.leaf(a, true);
    int loss = tape.mean_all(x);
    tape.backward(loss);
    CHECK(tape.grad(unused)[0] == 0.0);
    CHECK(tape.grad(x)[0] == doctest::Approx(0.5));
}

TEST_CASE("adam with lr 0 leaves params bit-exact") {
    Rng rng(323);
    ParamSet p;
    p.add("w", random_tensor(rng, {3, 3}));
    Tensor before = p.at("w");
    Adam opt(AdamConfig{.lr = 0.0});
    std::map<std::string, Tensor> grads;
    grads.emplace("w", random_tensor(rng, {3, 3}));
    opt.step(p, grads);
    CHECK(adasiam::bitwise_equal(p.at("w"), before));
}

TEST_CASE("adam first step moves by roughly lr") {
    ParamSet p;
    Tensor w({1});
    w[0] = 1.0;
    p.add("w", w);
    Adam opt(AdamConfig{.lr = 0.01});
    Tensor g({1});
    g[0] = 5.0;
    std::map<std::string, Tensor> grads;
    grads.emplace("w", g);
    opt.step(p, grads);
    // bias-corrected m̂ = g, v̂ = g², so the step is lr·g/(|g|+eps)
    CHECK(p.at("w")[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
}
