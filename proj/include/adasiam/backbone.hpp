// Feature extraction and template/search matching.
//
// Fixed small stack: 3 convs (1->16->32->32, 3x3, strides 2,2,1, pads 0,0,1),
// tanh after each, total stride 4. A 64 px template maps to 15x15x32 features,
// a 128 px search region to 31x31x32, giving a 17x17 score map.

#pragma once

#include <cstdint>

#include "adasiam/image.hpp"
#include "adasiam/nn.hpp"
#include "adasiam/tensor.hpp"

namespace adasiam {

// Feature maps are rank-3 tensors, C x H x W.
using FeatureMap = Tensor;

struct BackboneParams {
    ParamSet params;  // conv{1,2,3}.{w,b} + norm.{mean,scale}
    int stride = 4;   // product of layer strides

    static constexpr int kReceptiveField = 15;  // minimum input side
};

// Seeded random-feature backbone; weights are fixed at construction and act
// as a frozen embedding for matching.
BackboneParams make_backbone(std::uint64_t seed);

// Converts an interleaved real image to a C x H x W tensor.
Tensor image_to_tensor(const RealImage& img);

// Forward pass. Throws std::invalid_argument naming the minimum side when the
// image is smaller than the receptive field.
FeatureMap extract_features(const BackboneParams& params, const RealImage& img);

// Valid cross-correlation of the template over the search features plus a
// scalar bias. Throws on channel mismatch or template larger than search.
Tensor cross_correlate(const FeatureMap& tmpl, const FeatureMap& search, double bias);

// Decodes the score-map peak into a displaced copy of `prev`. Ties break at
// the smallest row-major index. `crop_scale` is frame pixels per search-crop
// pixel; a peak d cells off center moves the box d * stride * crop_scale px.
BBox argmax_to_bbox(const Tensor& score_map, const BBox& prev, int stride, double crop_scale);

}  // namespace adasiam
