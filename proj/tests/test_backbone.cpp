#include <doctest.h>

#include <stdexcept>
#include <string>

#include "adasiam/backbone.hpp"
#include "adasiam/rng.hpp"
#include "helpers.hpp"

using adasiam::BackboneParams;
using adasiam::BBox;
using adasiam::RealImage;
using adasiam::Rng;
using adasiam::Tensor;

namespace {

RealImage random_real(Rng& rng, int side) {
    RealImage img(side, side, 1);
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("feature shapes at the standard crop sides") {
    BackboneParams bp = adasiam::make_backbone(99);
    Rng rng(501);
    Tensor tf = adasiam::extract_features(bp, random_real(rng, 64));
    REQUIRE(tf.rank() == 3);
    CHECK(tf.dim(0) == 32);
    CHECK(tf.dim(1) == 15);
    CHECK(tf.dim(2) == 15);
    Tensor sf = adasiam::extract_features(bp, random_real(rng, 128));
    CHECK(sf.dim(1) == 31);
    CHECK(sf.dim(2) == 31);
    Tensor score = adasiam::cross_correlate(tf, sf, 0.0);
    CHECK(score.dim(0) == 17);
    CHECK(score.dim(1) == 17);
}

TEST_CASE("too-small image names the minimum side") {
    BackboneParams bp = adasiam::make_backbone(99);
    RealImage img(14, 14, 1);
    try {
        adasiam::extract_features(bp, img);
        FAIL("expected a throw");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("15") != std::string::npos);
    }
}

TEST_CASE("extraction is deterministic and finite") {
    BackboneParams a = adasiam::make_backbone(1234);
    BackboneParams b = adasiam::make_backbone(1234);
    Rng rng(503);
    RealImage img = random_real(rng, 64);
    Tensor fa = adasiam::extract_features(a, img);
    Tensor fb = adasiam::extract_features(b, img);
    CHECK(adasiam::bitwise_equal(fa, fb));
    for (std::size_t i = 0; i < fa.size(); ++i) CHECK(std::isfinite(fa[i]));
}

TEST_CASE("zero stack maps any image to zero features") {
    BackboneParams bp = adasiam::make_backbone(7);
    for (auto& [name, t] : bp.params.items())
        if (name.rfind("conv", 0) == 0) t.fill(0.0);
    Rng rng(505);
    Tensor f = adasiam::extract_features(bp, random_real(rng, 32));
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == 0.0);
}

TEST_CASE("argmax decoding") {
    Tensor map({17, 17});
    BBox prev{10, 20, 8, 6};

    SUBCASE("center peak leaves the box alone") {
        map.at(8, 8) = 1.0;
        BBox out = adasiam::argmax_to_bbox(map, prev, 4, 1.0);
        CHECK(out.x == prev.x);
        CHECK(out.y == prev.y);
        CHECK(out.w == prev.w);
        CHECK(out.h == prev.h);
    }

    SUBCASE("one cell right at stride 4 moves +4 px in x") {
        map.at(8, 9) = 1.0;
        BBox out = adasiam::argmax_to_bbox(map, prev, 4, 1.0);
        CHECK(out.x == doctest::Approx(prev.x + 4.0));
        CHECK(out.y == doctest::Approx(prev.y));
    }

    SUBCASE("crop scale stretches the displacement") {
        map.at(10, 8) = 1.0;
        BBox out = adasiam::argmax_to_bbox(map, prev, 4, 1.5);
        CHECK(out.y == doctest::Approx(prev.y + 2 * 4 * 1.5));
    }

    SUBCASE("ties break at the smaller row-major index") {
        map.at(3, 5) = 2.0;
        map.at(12, 1) = 2.0;
        BBox out = adasiam::argmax_to_bbox(map, prev, 4, 1.0);
        CHECK(out.y == doctest::Approx(prev.y + (3 - 8) * 4.0));
        CHECK(out.x == doctest::Approx(prev.x + (5 - 8) * 4.0));
    }
}

TEST_CASE("shifting search content shifts the peak") {
    BackboneParams bp = adasiam::make_backbone(31);
    Rng rng(507);
    RealImage big(140, 140, 1);
    for (auto& v : big.data) v = rng.uniform();

    auto window = [&](int oy, int ox) {
        RealImage w(128, 128, 1);
        for (int y = 0; y < 128; ++y)
            for (int x = 0; x < 128; ++x) w.at(y, x, 0) = big.at(y + oy, x + ox, 0);
        return w;
    };

    RealImage s0 = window(4, 4);
    RealImage tmpl(64, 64, 1);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) tmpl.at(y, x, 0) = s0.at(y + 32, x + 32, 0);

    Tensor tf = adasiam::extract_features(bp, tmpl);
    Tensor f0 = adasiam::cross_correlate(tf, adasiam::extract_features(bp, s0), 0.0);
    Tensor f1 = adasiam::cross_correlate(
        tf, adasiam::extract_features(bp, window(4, 8)), 0.0);  // shift one feature cell in x

    auto argmax = [](const Tensor& m) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(m.size()); ++i)
            if (m[static_cast<std::size_t>(i)] > m[static_cast<std::size_t>(best)]) best = i;
        return std::pair{best / m.dim(1), best % m.dim(1)};
    };
    auto [r0, c0] = argmax(f0);
    auto [r1, c1] = argmax(f1);
    CHECK(r0 == 8);
    CHECK(c0 == 8);
    CHECK(r1 == r0);
    CHECK(c1 == c0 - 1);
}
