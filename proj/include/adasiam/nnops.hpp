// Convolution and dense kernels on CHW tensors, lowered to GEMM.
//
// Weight layouts follow the usual convention: conv weights are
// [out][in][kh][kw]; transposed-conv weights are [in][out][kh][kw].

#pragma once

#include "adasiam/tensor.hpp"

namespace adasiam::nnops {

int conv_out_dim(int in, int kernel, int stride, int pad);
int conv_transpose_out_dim(int in, int kernel, int stride, int pad, int out_pad);

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor conv2d_grad_input(const Tensor& gy, const Tensor& w, int stride, int pad,
                         int in_h, int in_w);
Tensor conv2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int pad,
                          int kh, int kw);
Tensor conv2d_grad_bias(const Tensor& gy);

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                        int pad, int out_pad);
Tensor conv_transpose2d_grad_input(const Tensor& gy, const Tensor& w, int stride, int pad,
                                   int in_h, int in_w);
Tensor conv_transpose2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int pad,
                                    int kh, int kw);

// y = W x + b with W [out][in]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor linear_grad_input(const Tensor& gy, const Tensor& w);
Tensor linear_grad_weight(const Tensor& gy, const Tensor& x);

// Valid cross-correlation of a template over a search map, shared channels:
// out(i,j) = sum_{c,u,v} t(c,u,v) * s(c,i+u,j+v) + bias
Tensor cross_correlation(const Tensor& tmpl, const Tensor& search, double bias);

}  // namespace adasiam::nnops
