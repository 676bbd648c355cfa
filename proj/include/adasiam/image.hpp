// Raster and bounding-box primitives shared by the whole toolkit.

#pragma once

#include <cstdint>
#include <vector>

namespace adasiam {

// 8-bit raster, row-major, channel-interleaved. channels is 1 or 3.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int h, int w, int c, std::uint8_t fill = 0)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    std::uint8_t& at(int y, int x, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool valid() const {
        return height >= 1 && width >= 1 && (channels == 1 || channels == 3) &&
               data.size() == static_cast<std::size_t>(height) * width * channels;
    }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// Same layout as Image with intensities mapped into [0,1].
struct RealImage {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<double> data;

    RealImage() = default;
    RealImage(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    double& at(int y, int x, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool same_shape(const RealImage& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// Axis-aligned box, top-left corner plus size, real-valued pixels.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
    double area() const { return w * h; }
    bool valid() const { return w > 0.0 && h > 0.0; }
};

RealImage to_real(const Image& img);
Image to_image(const RealImage& img);  // round-to-nearest, clamped

// Square crop of side context*max(w,h) centered on the box, padded with the
// frame's per-channel mean intensity where it leaves the frame, bilinearly
// resized (align-corners-false) to out_side x out_side.
Image crop_and_resize(const Image& frame, const BBox& box, double context, int out_side);

double iou(const BBox& a, const BBox& b);

// Per-pixel alpha*a + (1-alpha)*b, rounded to nearest.
Image blend(const Image& a, const Image& b, double alpha);

bool images_equal(const Image& a, const Image& b);

}  // namespace adasiam
