// Named parameter collections, weight init, and Adam.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "adasiam/autodiff.hpp"
#include "adasiam/rng.hpp"
#include "adasiam/tensor.hpp"

namespace adasiam {

// Ordered map of named tensors. Iteration order (lexicographic by name) is the
// canonical order for serialization and optimizer state.
class ParamSet {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    std::size_t count() const { return params_.size(); }

    std::map<std::string, Tensor>& items() { return params_; }
    const std::map<std::string, Tensor>& items() const { return params_; }

private:
    std::map<std::string, Tensor> params_;
};

// Registers every tensor of `params` on `tape` as a trainable leaf; returns
// name -> node id. After backward(), gradients live on the tape.
std::map<std::string, int> register_params(Tape& tape, const ParamSet& params);

// Same, but as constants: gradients flow through them without accumulating,
// for networks held fixed while another one trains against them.
std::map<std::string, int> register_frozen(Tape& tape, const ParamSet& params);

// Batch-gradient plumbing: sum a tape's gradients for `ids` into `acc`
// (creating entries on first use), then rescale before an optimizer step.
void accumulate_grads(std::map<std::string, Tensor>& acc, const Tape& tape,
                      const std::map<std::string, int>& ids);
void scale_grads(std::map<std::string, Tensor>& acc, double s);

// Uniform fan-in init: U(-a, a) with a = sqrt(1 / fan_in).
Tensor init_conv_weight(Rng& rng, int out_ch, int in_ch, int kh, int kw);
Tensor init_deconv_weight(Rng& rng, int in_ch, int out_ch, int kh, int kw);
Tensor init_linear_weight(Rng& rng, int out_dim, int in_dim);
Tensor zeros(const std::vector<int>& shape);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam over a ParamSet. State keyed by name; step() consumes gradients pulled
// off a tape via the id map from register_params.
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    void step(ParamSet& params, const Tape& tape, const std::map<std::string, int>& ids);
    void step(ParamSet& params, const std::map<std::string, Tensor>& grads);

    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

}  // namespace adasiam
