#include "adasiam/nnops.hpp"

#include <Eigen/Core>

#include <stdexcept>

namespace adasiam::nnops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using CMapRow = Eigen::Map<const RowMat>;

// Lowered patches: rows are (c,ky,kx), columns are output positions.
RowMat im2col(const Tensor& x, int kh, int kw, int stride, int pad, int oh, int ow) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    RowMat cols(c * kh * kw, oh * ow);
    cols.setZero();
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const int row = (ci * kh + ky) * kw + kx;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    const double* src = x.data() + (static_cast<std::size_t>(ci) * h + iy) * w;
                    double* dst = cols.data() + static_cast<std::size_t>(row) * (oh * ow) +
                                  static_cast<std::size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst[ox] = src[ix];
                    }
                }
            }
        }
    }
    return cols;
}

// Scatter-add inverse of im2col.
Tensor col2im(const RowMat& cols, int c, int h, int w, int kh, int kw, int stride, int pad,
              int oh, int ow) {
    Tensor x({c, h, w});
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const int row = (ci * kh + ky) * kw + kx;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    double* dst = x.data() + (static_cast<std::size_t>(ci) * h + iy) * w;
                    const double* src = cols.data() + static_cast<std::size_t>(row) * (oh * ow) +
                                        static_cast<std::size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
    return x;
}

void check_chw(const Tensor& t, const char* what) {
    if (t.rank() != 3) throw std::invalid_argument(std::string(what) + ": expected CxHxW tensor");
}

}  // namespace

int conv_out_dim(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

int conv_transpose_out_dim(int in, int kernel, int stride, int pad, int out_pad) {
    return (in - 1) * stride - 2 * pad + kernel + out_pad;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    check_chw(x, "conv2d input");
    if (w.rank() != 4) throw std::invalid_argument("conv2d: weight must be OxCxKhxKw");
    const int co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (x.dim(0) != ci) throw std::invalid_argument("conv2d: channel mismatch");
    const int oh = conv_out_dim(x.dim(1), kh, stride, pad);
    const int ow = conv_out_dim(x.dim(2), kw, stride, pad);
    if (oh < 1 || ow < 1) throw std::invalid_argument("conv2d: input too small for kernel");

    const RowMat cols = im2col(x, kh, kw, stride, pad, oh, ow);
    Tensor y({co, oh, ow});
    CMapRow wm(w.data(), co, ci * kh * kw);
    MapRow ym(y.data(), co, oh * ow);
    ym.noalias() = wm * cols;
    for (int o = 0; o < co; ++o) ym.row(o).array() += b[static_cast<std::size_t>(o)];
    return y;
}

Tensor conv2d_grad_input(const Tensor& gy, const Tensor& w, int stride, int pad,
                         int in_h, int in_w) {
    const int co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int oh = gy.dim(1), ow = gy.dim(2);
    CMapRow wm(w.data(), co, ci * kh * kw);
    CMapRow gym(gy.data(), co, oh * ow);
    RowMat cols = wm.transpose() * gym;
    return col2im(cols, ci, in_h, in_w, kh, kw, stride, pad, oh, ow);
}

Tensor conv2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int pad,
                          int kh, int kw) {
    const int co = gy.dim(0), ci = x.dim(0);
    const int oh = gy.dim(1), ow = gy.dim(2);
    const RowMat cols = im2col(x, kh, kw, stride, pad, oh, ow);
    Tensor gw({co, ci, kh, kw});
    CMapRow gym(gy.data(), co, oh * ow);
    MapRow gwm(gw.data(), co, ci * kh * kw);
    gwm.noalias() = gym * cols.transpose();
    return gw;
}

Tensor conv2d_grad_bias(const Tensor& gy) {
    const int co = gy.dim(0);
    Tensor gb({co});
    const std::size_t plane = static_cast<std::size_t>(gy.dim(1)) * gy.dim(2);
    for (int o = 0; o < co; ++o) {
        double acc = 0.0;
        const double* p = gy.data() + o * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
        gb[static_cast<std::size_t>(o)] = acc;
    }
    return gb;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                        int pad, int out_pad) {
    check_chw(x, "conv_transpose2d input");
    if (w.rank() != 4) throw std::invalid_argument("conv_transpose2d: weight must be CxOxKhxKw");
    const int ci = w.dim(0), co = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (x.dim(0) != ci) throw std::invalid_argument("conv_transpose2d: channel mismatch");
    const int ih = x.dim(1), iw = x.dim(2);
    const int oh = conv_transpose_out_dim(ih, kh, stride, pad, out_pad);
    const int ow = conv_transpose_out_dim(iw, kw, stride, pad, out_pad);

    CMapRow wm(w.data(), ci, co * kh * kw);
    CMapRow xm(x.data(), ci, ih * iw);
    RowMat cols = wm.transpose() * xm;
    Tensor y = col2im(cols, co, oh, ow, kh, kw, stride, pad, ih, iw);
    for (int o = 0; o < co; ++o) {
        double* p = y.data() + static_cast<std::size_t>(o) * oh * ow;
        const double bv = b[static_cast<std::size_t>(o)];
        for (int i = 0; i < oh * ow; ++i) p[i] += bv;
    }
    return y;
}

Tensor conv_transpose2d_grad_input(const Tensor& gy, const Tensor& w, int stride, int pad,
                                   int in_h, int in_w) {
    const int ci = w.dim(0), co = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const RowMat cols = im2col(gy, kh, kw, stride, pad, in_h, in_w);
    Tensor gx({ci, in_h, in_w});
    CMapRow wm(w.data(), ci, co * kh * kw);
    MapRow gxm(gx.data(), ci, in_h * in_w);
    gxm.noalias() = wm * cols;
    return gx;
}

Tensor conv_transpose2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int pad,
                                    int kh, int kw) {
    const int ci = x.dim(0), co = gy.dim(0);
    const int ih = x.dim(1), iw = x.dim(2);
    const RowMat cols = im2col(gy, kh, kw, stride, pad, ih, iw);
    Tensor gw({ci, co, kh, kw});
    CMapRow xm(x.data(), ci, ih * iw);
    MapRow gwm(gw.data(), ci, co * kh * kw);
    gwm.noalias() = xm * cols.transpose();
    return gw;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int in = w.dim(1), out = w.dim(0);
    if (static_cast<int>(x.size()) != in) throw std::invalid_argument("linear: size mismatch");
    Tensor y({out});
    CMapRow wm(w.data(), out, in);
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), in);
    Eigen::Map<Eigen::VectorXd> yv(y.data(), out);
    yv.noalias() = wm * xv;
    for (int o = 0; o < out; ++o) y[static_cast<std::size_t>(o)] += b[static_cast<std::size_t>(o)];
    return y;
}

Tensor linear_grad_input(const Tensor& gy, const Tensor& w) {
    const int in = w.dim(1), out = w.dim(0);
    Tensor gx({in});
    CMapRow wm(w.data(), out, in);
    Eigen::Map<const Eigen::VectorXd> gyv(gy.data(), out);
    Eigen::Map<Eigen::VectorXd> gxv(gx.data(), in);
    gxv.noalias() = wm.transpose() * gyv;
    return gx;
}

Tensor linear_grad_weight(const Tensor& gy, const Tensor& x) {
    const int in = static_cast<int>(x.size()), out = static_cast<int>(gy.size());
    Tensor gw({out, in});
    Eigen::Map<const Eigen::VectorXd> gyv(gy.data(), out);
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), in);
    MapRow gwm(gw.data(), out, in);
    gwm.noalias() = gyv * xv.transpose();
    return gw;
}

Tensor cross_correlation(const Tensor& tmpl, const Tensor& search, double bias) {
    if (tmpl.dim(0) != search.dim(0))
        throw std::invalid_argument("cross_correlation: channel mismatch");
    if (tmpl.dim(1) > search.dim(1) || tmpl.dim(2) > search.dim(2))
        throw std::invalid_argument("cross_correlation: template larger than search");
    const int c = tmpl.dim(0), th = tmpl.dim(1), tw = tmpl.dim(2);
    const int oh = search.dim(1) - th + 1;
    const int ow = search.dim(2) - tw + 1;
    const RowMat cols = im2col(search, th, tw, /*stride=*/1, /*pad=*/0, oh, ow);
    Tensor y({oh, ow});
    CMapRow tm(tmpl.data(), 1, c * th * tw);
    MapRow ym(y.data(), 1, oh * ow);
    ym.noalias() = tm * cols;
    ym.array() += bias;
    return y;
}

}  // namespace adasiam::nnops
