// Reverse-mode tape over Tensor values.
//
// A Tape owns every intermediate of one forward pass; backward() walks the
// nodes in reverse creation order. Scalars are rank-1 tensors of size 1.

#pragma once

#include <functional>
#include <vector>

#include "adasiam/tensor.hpp"

namespace adasiam {

class Tape {
public:
    int leaf(Tensor value, bool needs_grad = false);

    int conv2d(int x, int w, int b, int stride, int pad);
    int conv_transpose2d(int x, int w, int b, int stride, int pad, int out_pad);
    int linear(int x, int w, int b);

    int sigmoid(int x);
    int tanh(int x);
    int relu(int x);

    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);  // elementwise, same shape
    int scale(int x, double k);
    int add_const(int x, double k);

    int concat_channels(int a, int b);
    int slice_channels(int x, int from, int count);
    int channel_scale(int x, int weights);  // x: CxHxW, weights: C
    int global_avg_pool(int x);             // CxHxW -> C

    int mean_all(int x);         // scalar mean of entries
    int mean_sq_diff(int a, int b);
    int l2_distance(int a, int b);  // sqrt(sum of squared diffs)

    void backward(int loss);

    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    double scalar(int id) const { return value(id)[0]; }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&)> back;  // empty for leaves and stop-gradient nodes
        bool needs_grad = false;
    };

    int push(Tensor value, bool needs_grad, std::function<void(Tape&)> back);
    void accumulate(int id, const Tensor& g);
    Tensor& grad_ref(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
    bool wants(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

    std::vector<Node> nodes_;
};

}  // namespace adasiam
