#include "adasiam/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "adasiam/nnops.hpp"

namespace adasiam {

int Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&)> back) {
    Node node;
    // Grad storage is lazy: inference-only graphs (no trainable leaves) never
    // pay for it. backward() materializes grads for the nodes that need them.
    node.value = std::move(value);
    node.back = std::move(back);
    node.needs_grad = needs_grad;
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accumulate(int id, const Tensor& g) {
    Tensor& dst = nodes_[static_cast<std::size_t>(id)].grad;
    if (!dst.same_shape(g)) throw std::logic_error("gradient shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

int Tape::leaf(Tensor value, bool needs_grad) {
    return push(std::move(value), needs_grad, {});
}

int Tape::conv2d(int x, int w, int b, int stride, int pad) {
    Tensor y = nnops::conv2d(value(x), value(w), value(b), stride, pad);
    bool ng = wants(x) || wants(w) || wants(b);
    int id = push(std::move(y), ng, {});
    nodes_.back().back = [id, x, w, b, stride, pad](Tape& t) {
        const Tensor& gy = t.grad(id);
        const Tensor& xv = t.value(x);
        const Tensor& wv = t.value(w);
        if (t.wants(x))
            t.accumulate(x, nnops::conv2d_grad_input(gy, wv, stride, pad, xv.dim(1), xv.dim(2)));
        if (t.wants(w))
            t.accumulate(w, nnops::conv2d_grad_weight(gy, xv, stride, pad, wv.dim(2), wv.dim(3)));
        if (t.wants(b)) t.accumulate(b, nnops::conv2d_grad_bias(gy));
    };
    return id;
}

int Tape::conv_transpose2d(int x, int w, int b, int stride, int pad, int out_pad) {
    Tensor y = nnops::conv_transpose2d(value(x), value(w), value(b), stride, pad, out_pad);
    bool ng = wants(x) || wants(w) || wants(b);
    int id = push(std::move(y), ng, {});
    nodes_.back().back = [id, x, w, b, stride, pad](Tape& t) {
        const Tensor& gy = t.grad(id);
        const Tensor& xv = t.value(x);
        const Tensor& wv = t.value(w);
        if (t.wants(x))
            t.accumulate(x, nnops::conv_transpose2d_grad_input(gy, wv, stride, pad, xv.dim(1), xv.dim(2)));
        if (t.wants(w))
            t.accumulate(w, nnops::conv_transpose2d_grad_weight(gy, xv, stride, pad, wv.dim(2), wv.dim(3)));
        if (t.wants(b)) t.accumulate(b, nnops::conv2d_grad_bias(gy));
    };
    return id;
}

int Tape::linear(int x, int w, int b) {
    Tensor y = nnops::linear(value(x), value(w), value(b));
    bool ng = wants(x) || wants(w) || wants(b);
    int id = push(std::move(y), ng, {});
    nodes_.back().back = [id, x, w, b](Tape& t) {
        const Tensor& gy = t.grad(id);
        if (t.wants(x)) t.accumulate(x, nnops::linear_grad_input(gy, t.value(w)));
        if (t.wants(w)) t.accumulate(w, nnops::linear_grad_weight(gy, t.value(x)));
        if (t.wants(b)) t.accumulate(b, gy);
    };
    return id;
}

int Tape::sigmoid(int x) {
    Tensor y(value(x).shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-value(x)[i]));
    int id = push(std::move(y), wants(x), {});
    nodes_.back().back = [id, x](Tape& t) {
        if (!t.wants(x)) return;
        const Tensor& yv = t.value(id);
        Tensor g(yv.shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = t.grad(id)[i] * yv[i] * (1.0 - yv[i]);
        t.accumulate(x, g);
    };
    return id;
}

int Tape::tanh(int x) {
    Tensor y(value(x).shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(value(x)[i]);
    int id = push(std::move(y), wants(x), {});
    nodes_.back().back = [id, x](Tape& t) {
        if (!t.wants(x)) return;
        const Tensor& yv = t.value(id);
        Tensor g(yv.shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = t.grad(id)[i] * (1.0 - yv[i] * yv[i]);
        t.accumulate(x, g);
    };
    return id;
}

int Tape::relu(int x) {
    Tensor y(value(x).shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = value(x)[i] > 0.0 ? value(x)[i] : 0.0;
    int id = push(std::move(y), wants(x), {});
    nodes_.back().back = [id, x](Tape& t) {
        if (!t.wants(x)) return;
        Tensor g(t.value(x).shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = t.value(x)[i] > 0.0 ? t.grad(id)[i] : 0.0;
        t.accumulate(x, g);
    };
    return id;
}

int Tape::add(int a, int b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor y(av.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
    int id = push(std::move(y), wants(a) || wants(b), {});
    nodes_.back().back = [id, a, b](Tape& t) {
        if (t.wants(a)) t.accumulate(a, t.grad(id));
        if (t.wants(b)) t.accumulate(b, t.grad(id));
    };
    return id;
}

int Tape::sub(int a, int b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("sub: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor y(av.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
    int id = push(std::move(y), wants(a) || wants(b), {});
    nodes_.back().back = [id, a, b](Tape& t) {
        if (t.wants(a)) t.accumulate(a, t.grad(id));
        if (t.wants(b)) {
            Tensor g(t.grad(id).shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = -t.grad(id)[i];
            t.accumulate(b, g);
        }
    };
    return id;
}

int Tape::mul(int a, int b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("mul: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor y(av.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
    int id = push(std::move(y), wants(a) || wants(b), {});
    nodes_.back().back = [id, a, b](Tape& t) {
        if (t.wants(a)) {
            Tensor g(t.grad(id).shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = t.grad(id)[i] * t.value(b)[i];
            t.accumulate(a, g);
        }
        if (t.wants(b)) {
            Tensor g(t.grad(id).shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = t.grad(id)[i] * t.value(a)[i];
            t.accumulate(b, g);
        }
    };
    return id;
}

int Tape::scale(int x, double k) {
    Tensor y(value(x).shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = value(x)[i] * k;
    int id = push(std::move(y), wants(x), {});
    nodes_.back().back = [id, x, k](Tape& t) {
        if (!t.wants(x)) return;
        Tensor g(t.grad(id).shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = t.grad(id)[i] * k;
        t.accumulate(x, g);
    };
    return id;
}

int Tape::add_const(int x, double k) {
    Tensor y(value(x).shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = value(x)[i] + k;
    int id = push(std::move(y), wants(x), {});
    nodes_.back().back = [id, x](Tape& t) {
        if (t.wants(x)) t.accumulate(x, t.grad(id));
    };
    return id;
}

int Tape::concat_channels(int a, int b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.rank() != 3 || bv.rank() != 3) throw std::invalid_argument("concat_channels: need CxHxW");
    if (av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
        throw std::invalid_argument("concat_channels: spatial mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor y({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
    std::size_t an = av.size();
    for (std::size_t i = 0; i < an; ++i) y[i] = av[i];
    for (std::size_t i = 0; i < bv.size(); ++i) y[an + i] = bv[i];
    int id = push(std::move(y), wants(a) || wants(b), {});
    nodes_.back().back = [id, a, b](Tape& t) {
        const Tensor& gy = t.grad(id);
        std::size_t an = t.value(a).size();
        if (t.wants(a)) {
            Tensor g(t.value(a).shape());
            for (std::size_t i = 0; i < an; ++i) g[i] = gy[i];
            t.accumulate(a, g);
        }
        if (t.wants(b)) {
            Tensor g(t.value(b).shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = gy[an + i];
            t.accumulate(b, g);
        }
    };
    return id;
}

int Tape::slice_channels(int x, int from, int count) {
    const Tensor& xv = value(x);
    if (xv.rank() != 3) throw std::invalid_argument("slice_channels: need CxHxW");
    if (from < 0 || count <= 0 || from + count > xv.dim(0))
        throw std::invalid_argument("slice_channels: range out of bounds");
    int hw = xv.dim(1) * xv.dim(2);
    Tensor y({count, xv.dim(1), xv.dim(2)});
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[static_cast<std::size_t>(from) * hw + i];
    int id = push(std::move(y), wants(x), {});
    nodes_.back().back = [id, x, from, hw](Tape& t) {
        if (!t.wants(x)) return;
        Tensor g(t.value(x).shape());
        const Tensor& gy = t.grad(id);
        for (std::size_t i = 0; i < gy.size(); ++i) g[static_cast<std::size_t>(from) * hw + i] = gy[i];
        t.accumulate(x, g);
    };
    return id;
}

int Tape::channel_scale(int x, int weights) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(weights);
    if (xv.rank() != 3) throw std::invalid_argument("channel_scale: need CxHxW input");
    if (static_cast<int>(wv.size()) != xv.dim(0)) throw std::invalid_argument("channel_scale: weight count != channels");
    int hw = xv.dim(1) * xv.dim(2);
    Tensor y(xv.shape());
    for (int c = 0; c < xv.dim(0); ++c)
        for (int i = 0; i < hw; ++i)
            y[static_cast<std::size_t>(c) * hw + i] = xv[static_cast<std::size_t>(c) * hw + i] * wv[static_cast<std::size_t>(c)];
    int id = push(std::move(y), wants(x) || wants(weights), {});
    nodes_.back().back = [id, x, weights, hw](Tape& t) {
        const Tensor& gy = t.grad(id);
        const Tensor& xv2 = t.value(x);
        const Tensor& wv2 = t.value(weights);
        if (t.wants(x)) {
            Tensor g(xv2.shape());
            for (int c = 0; c < xv2.dim(0); ++c)
                for (int i = 0; i < hw; ++i)
                    g[static_cast<std::size_t>(c) * hw + i] = gy[static_cast<std::size_t>(c) * hw + i] * wv2[static_cast<std::size_t>(c)];
            t.accumulate(x, g);
        }
        if (t.wants(weights)) {
            Tensor g(wv2.shape());
            for (int c = 0; c < xv2.dim(0); ++c) {
                double s = 0.0;
                for (int i = 0; i < hw; ++i)
                    s += gy[static_cast<std::size_t>(c) * hw + i] * xv2[static_cast<std::size_t>(c) * hw + i];
                g[static_cast<std::size_t>(c)] = s;
            }
            t.accumulate(weights, g);
        }
    };
    return id;
}

int Tape::global_avg_pool(int x) {
    const Tensor& xv = value(x);
    if (xv.rank() != 3) throw std::invalid_argument("global_avg_pool: need CxHxW");
    int hw = xv.dim(1) * xv.dim(2);
    Tensor y({xv.dim(0)});
    for (int c = 0; c < xv.dim(0); ++c) {
        double s = 0.0;
        for (int i = 0; i < hw; ++i) s += xv[static_cast<std::size_t>(c) * hw + i];
        y[static_cast<std::size_t>(c)] = s / hw;
    }
    int id = push(std::move(y), wants(x), {});
    nodes_.back().back = [id, x, hw](Tape& t) {
        if (!t.wants(x)) return;
        const Tensor& gy = t.grad(id);
        Tensor g(t.value(x).shape());
        for (int c = 0; c < t.value(x).dim(0); ++c)
            for (int i = 0; i < hw; ++i)
                g[static_cast<std::size_t>(c) * hw + i] = gy[static_cast<std::size_t>(c)] / hw;
        t.accumulate(x, g);
    };
    return id;
}

int Tape::mean_all(int x) {
    const Tensor& xv = value(x);
    double s = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i];
    Tensor y({1});
    y[0] = s / static_cast<double>(xv.size());
    int id = push(std::move(y), wants(x), {});
    nodes_.back().back = [id, x](Tape& t) {
        if (!t.wants(x)) return;
        double gy = t.grad(id)[0];
        std::size_t n = t.value(x).size();
        Tensor g(t.value(x).shape());
        for (std::size_t i = 0; i < n; ++i) g[i] = gy / static_cast<double>(n);
        t.accumulate(x, g);
    };
    return id;
}

int Tape::mean_sq_diff(int a, int b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("mean_sq_diff: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        double d = av[i] - bv[i];
        s += d * d;
    }
    Tensor y({1});
    y[0] = s / static_cast<double>(av.size());
    int id = push(std::move(y), wants(a) || wants(b), {});
    nodes_.back().back = [id, a, b](Tape& t) {
        double gy = t.grad(id)[0];
        const Tensor& av2 = t.value(a);
        const Tensor& bv2 = t.value(b);
        std::size_t n = av2.size();
        if (t.wants(a)) {
            Tensor g(av2.shape());
            for (std::size_t i = 0; i < n; ++i) g[i] = gy * 2.0 * (av2[i] - bv2[i]) / static_cast<double>(n);
            t.accumulate(a, g);
        }
        if (t.wants(b)) {
            Tensor g(bv2.shape());
            for (std::size_t i = 0; i < n; ++i) g[i] = gy * 2.0 * (bv2[i] - av2[i]) / static_cast<double>(n);
            t.accumulate(b, g);
        }
    };
    return id;
}

int Tape::l2_distance(int a, int b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("l2_distance: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        double d = av[i] - bv[i];
        s += d * d;
    }
    Tensor y({1});
    y[0] = std::sqrt(s);
    int id = push(std::move(y), wants(a) || wants(b), {});
    nodes_.back().back = [id, a, b](Tape& t) {
        double dist = t.value(id)[0];
        if (dist <= 0.0) return;  // gradient undefined at zero; leave it
        double gy = t.grad(id)[0];
        const Tensor& av2 = t.value(a);
        const Tensor& bv2 = t.value(b);
        if (t.wants(a)) {
            Tensor g(av2.shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = gy * (av2[i] - bv2[i]) / dist;
            t.accumulate(a, g);
        }
        if (t.wants(b)) {
            Tensor g(bv2.shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = gy * (bv2[i] - av2[i]) / dist;
            t.accumulate(b, g);
        }
    };
    return id;
}

void Tape::backward(int loss) {
    if (value(loss).size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    for (auto& n : nodes_) {
        if (!n.needs_grad) continue;
        if (n.grad.empty()) n.grad = Tensor(n.value.shape());
        else n.grad.fill(0.0);
    }
    if (!wants(loss)) return;  // nothing on the tape is trainable
    grad_ref(loss)[0] = 1.0;
    for (int i = loss; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.back && n.needs_grad) n.back(*this);
    }
}

}  // namespace adasiam
