#include "adasiam/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

namespace adasiam {

RealImage to_real(const Image& img) {
    RealImage out(img.height, img.width, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = img.data[i] / 255.0;
    return out;
}

Image to_image(const RealImage& img) {
    Image out(img.height, img.width, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = std::round(img.data[i] * 255.0);
        out.data[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return out;
}

namespace {

// Per-channel mean of the whole frame, used as the out-of-frame pad value.
void frame_mean(const Image& frame, double mean[3]) {
    double acc[3] = {0.0, 0.0, 0.0};
    const std::size_t px = static_cast<std::size_t>(frame.height) * frame.width;
    for (std::size_t i = 0; i < px; ++i)
        for (int c = 0; c < frame.channels; ++c)
            acc[c] += frame.data[i * frame.channels + c];
    for (int c = 0; c < frame.channels; ++c) mean[c] = acc[c] / static_cast<double>(px);
}

double sample_or_pad(const Image& frame, int y, int x, int c, const double mean[3]) {
    if (y < 0 || y >= frame.height || x < 0 || x >= frame.width) return mean[c];
    return frame.at(y, x, c);
}

}  // namespace

Image crop_and_resize(const Image& frame, const BBox& box, double context, int out_side) {
    if (!box.valid())
        throw std::invalid_argument("crop_and_resize: invalid box (w and h must be > 0)");
    if (out_side < 4) throw std::invalid_argument("crop_and_resize: out_side must be >= 4");
    if (context < 1.0) throw std::invalid_argument("crop_and_resize: context must be >= 1.0");

    const double side = context * std::max(box.w, box.h);
    const double x0 = box.cx() - 0.5 * side;
    const double y0 = box.cy() - 0.5 * side;
    const double scale = side / static_cast<double>(out_side);

    double mean[3] = {0.0, 0.0, 0.0};
    frame_mean(frame, mean);

    Image out(out_side, out_side, frame.channels);
    for (int oy = 0; oy < out_side; ++oy) {
        // align-corners-false: sample at the center of each destination pixel
        const double sy = y0 + (oy + 0.5) * scale - 0.5;
        const int iy = static_cast<int>(std::floor(sy));
        const double fy = sy - iy;
        for (int ox = 0; ox < out_side; ++ox) {
            const double sx = x0 + (ox + 0.5) * scale - 0.5;
            const int ix = static_cast<int>(std::floor(sx));
            const double fx = sx - ix;
            for (int c = 0; c < frame.channels; ++c) {
                const double v00 = sample_or_pad(frame, iy, ix, c, mean);
                const double v01 = sample_or_pad(frame, iy, ix + 1, c, mean);
                const double v10 = sample_or_pad(frame, iy + 1, ix, c, mean);
                const double v11 = sample_or_pad(frame, iy + 1, ix + 1, c, mean);
                const double v = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) +
                                 fy * ((1.0 - fx) * v10 + fx * v11);
                out.at(oy, ox, c) =
                    static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
            }
        }
    }
    return out;
}

double iou(const BBox& a, const BBox& b) {
    // canonical operand order keeps the result bit-identical under argument
    // swap even when the compiler contracts the area sums into FMAs
    const BBox* p = &a;
    const BBox* q = &b;
    if (std::tie(q->x, q->y, q->w, q->h) < std::tie(p->x, p->y, p->w, p->h)) std::swap(p, q);
    const double ix = std::max(0.0, std::min(p->x + p->w, q->x + q->w) - std::max(p->x, q->x));
    const double iy = std::max(0.0, std::min(p->y + p->h, q->y + q->h) - std::max(p->y, q->y));
    const double inter = ix * iy;
    const double uni = p->area() + q->area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

Image blend(const Image& a, const Image& b, double alpha) {
    if (!a.same_shape(b)) throw std::invalid_argument("blend: shape mismatch");
    Image out(a.height, a.width, a.channels);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double v = alpha * a.data[i] + (1.0 - alpha) * b.data[i];
        out.data[i] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
    }
    return out;
}

bool images_equal(const Image& a, const Image& b) {
    return a.same_shape(b) && a.data == b.data;
}

}  // namespace adasiam
