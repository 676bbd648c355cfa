#include "adasiam/backbone.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "adasiam/nnops.hpp"

namespace adasiam {

BackboneParams make_backbone(std::uint64_t seed) {
    Rng rng(seed);
    Rng r1 = rng.substream("backbone.conv1");
    Rng r2 = rng.substream("backbone.conv2");
    Rng r3 = rng.substream("backbone.conv3");

    BackboneParams bp;
    bp.params.add("conv1.w", init_conv_weight(r1, 16, 1, 3, 3));
    bp.params.add("conv1.b", zeros({16}));
    bp.params.add("conv2.w", init_conv_weight(r2, 32, 16, 3, 3));
    bp.params.add("conv2.b", zeros({32}));
    bp.params.add("conv3.w", init_conv_weight(r3, 32, 32, 3, 3));
    bp.params.add("conv3.b", zeros({32}));

    // Input normalization: (x - mean) * scale maps [0,1] to [-1,1].
    Tensor mean({1});
    mean[0] = 0.5;
    Tensor scale({1});
    scale[0] = 2.0;
    bp.params.add("norm.mean", std::move(mean));
    bp.params.add("norm.scale", std::move(scale));
    bp.stride = 4;
    return bp;
}

Tensor image_to_tensor(const RealImage& img) {
    Tensor t({img.channels, img.height, img.width});
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) t.at(c, y, x) = img.at(y, x, c);
    return t;
}

static void tanh_inplace(Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::tanh(t[i]);
}

FeatureMap extract_features(const BackboneParams& params, const RealImage& img) {
    int min_side = BackboneParams::kReceptiveField;
    if (img.height < min_side || img.width < min_side)
        throw std::invalid_argument("image " + std::to_string(img.width) + "x" +
                                    std::to_string(img.height) + " below minimum side " +
                                    std::to_string(min_side));
    if (img.channels != 1) throw std::invalid_argument("backbone expects a single-channel image");

    Tensor x = image_to_tensor(img);
    double mean = params.params.at("norm.mean")[0];
    double scale = params.params.at("norm.scale")[0];
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - mean) * scale;

    Tensor h1 = nnops::conv2d(x, params.params.at("conv1.w"), params.params.at("conv1.b"), 2, 0);
    tanh_inplace(h1);
    Tensor h2 = nnops::conv2d(h1, params.params.at("conv2.w"), params.params.at("conv2.b"), 2, 0);
    tanh_inplace(h2);
    Tensor h3 = nnops::conv2d(h2, params.params.at("conv3.w"), params.params.at("conv3.b"), 1, 1);
    tanh_inplace(h3);
    return h3;
}

Tensor cross_correlate(const FeatureMap& tmpl, const FeatureMap& search, double bias) {
    return nnops::cross_correlation(tmpl, search, bias);
}

BBox argmax_to_bbox(const Tensor& score_map, const BBox& prev, int stride, double crop_scale) {
    if (score_map.rank() != 2 || score_map.size() == 0)
        throw std::invalid_argument("argmax_to_bbox: need a non-empty HxW score map");
    int h = score_map.dim(0), w = score_map.dim(1);
    int best = 0;
    for (int i = 1; i < h * w; ++i)
        if (score_map[static_cast<std::size_t>(i)] > score_map[static_cast<std::size_t>(best)]) best = i;
    int row = best / w, col = best % w;
    double dy = (row - (h - 1) / 2) * static_cast<double>(stride) * crop_scale;
    double dx = (col - (w - 1) / 2) * static_cast<double>(stride) * crop_scale;
    BBox out = prev;
    out.x += dx;
    out.y += dy;
    return out;
}

}  // namespace adasiam
