#include "adasiam/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace adasiam {

Tensor& ParamSet::add(const std::string& name, Tensor t) {
    auto [it, inserted] = params_.emplace(name, std::move(t));
    if (!inserted) throw std::logic_error("duplicate parameter name: " + name);
    return it->second;
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
}

std::map<std::string, int> register_params(Tape& tape, const ParamSet& params) {
    std::map<std::string, int> ids;
    for (const auto& [name, t] : params.items()) ids[name] = tape.leaf(t, true);
    return ids;
}

std::map<std::string, int> register_frozen(Tape& tape, const ParamSet& params) {
    std::map<std::string, int> ids;
    for (const auto& [name, t] : params.items()) ids[name] = tape.leaf(t, false);
    return ids;
}

void accumulate_grads(std::map<std::string, Tensor>& acc, const Tape& tape,
                      const std::map<std::string, int>& ids) {
    for (const auto& [name, id] : ids) {
        const Tensor& g = tape.grad(id);
        auto it = acc.find(name);
        if (it == acc.end())
            acc.emplace(name, g);
        else
            for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
    }
}

void scale_grads(std::map<std::string, Tensor>& acc, double s) {
    for (auto& [name, g] : acc)
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
}

static Tensor uniform_tensor(Rng& rng, const std::vector<int>& shape, double bound) {
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

Tensor init_conv_weight(Rng& rng, int out_ch, int in_ch, int kh, int kw) {
    double bound = std::sqrt(1.0 / (static_cast<double>(in_ch) * kh * kw));
    return uniform_tensor(rng, {out_ch, in_ch, kh, kw}, bound);
}

Tensor init_deconv_weight(Rng& rng, int in_ch, int out_ch, int kh, int kw) {
    double bound = std::sqrt(1.0 / (static_cast<double>(in_ch) * kh * kw));
    return uniform_tensor(rng, {in_ch, out_ch, kh, kw}, bound);
}

Tensor init_linear_weight(Rng& rng, int out_dim, int in_dim) {
    double bound = std::sqrt(1.0 / static_cast<double>(in_dim));
    return uniform_tensor(rng, {out_dim, in_dim}, bound);
}

Tensor zeros(const std::vector<int>& shape) { return Tensor(shape); }

void Adam::step(ParamSet& params, const Tape& tape, const std::map<std::string, int>& ids) {
    std::map<std::string, Tensor> grads;
    for (const auto& [name, id] : ids) grads.emplace(name, tape.grad(id));
    step(params, grads);
}

void Adam::step(ParamSet& params, const std::map<std::string, Tensor>& grads) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : params.items()) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;  // frozen or untouched this step
        const Tensor& g = git->second;
        if (!g.same_shape(p)) throw std::logic_error("gradient shape mismatch for " + name);
        Tensor& m = m_.try_emplace(name, Tensor(p.shape())).first->second;
        Tensor& v = v_.try_emplace(name, Tensor(p.shape())).first->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            double mh = m[i] / bc1;
            double vh = v[i] / bc2;
            p[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
        }
    }
}

}  // namespace adasiam
