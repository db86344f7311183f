#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cardioforge/tensor.hpp"

namespace cardioforge {

class Rng;

/// Trainable tensor with every weight drawn from N(0, stddev^2).
TensorPtr gaussian_param(std::vector<std::int64_t> shape, Rng& rng, double stddev = 0.02);
/// Trainable tensor filled with a constant.
TensorPtr const_param(std::vector<std::int64_t> shape, double value);

using NamedTensors = std::vector<std::pair<std::string, TensorPtr>>;

struct LinearLayer {
    TensorPtr w, b;

    LinearLayer() = default;
    LinearLayer(std::int64_t in, std::int64_t out, Rng& rng,
                double init_stddev = 0.02);
    TensorPtr forward(Graph& g, const TensorPtr& x) const;
    void named(NamedTensors& out, const std::string& prefix) const;
};

struct Conv1dLayer {
    TensorPtr w, b;
    int stride = 1;
    int padding = 0;

    Conv1dLayer() = default;
    Conv1dLayer(std::int64_t in_ch, std::int64_t out_ch, int kernel, int stride,
                int padding, Rng& rng, double init_stddev = 0.02);
    TensorPtr forward(Graph& g, const TensorPtr& x) const;
    void named(NamedTensors& out, const std::string& prefix) const;
};

struct Deconv1dLayer {
    TensorPtr w, b;
    int stride = 1;
    int padding = 0;

    Deconv1dLayer() = default;
    Deconv1dLayer(std::int64_t in_ch, std::int64_t out_ch, int kernel, int stride,
                  int padding, Rng& rng);
    TensorPtr forward(Graph& g, const TensorPtr& x) const;
    void named(NamedTensors& out, const std::string& prefix) const;
};

struct BatchNorm1dLayer {
    TensorPtr gamma, beta;
    TensorPtr run_mean, run_var;  // buffers, not trained
    double momentum = 0.1;
    double eps = 1e-5;

    BatchNorm1dLayer() = default;
    explicit BatchNorm1dLayer(std::int64_t channels);
    TensorPtr forward(Graph& g, const TensorPtr& x, bool training) const;
    void named(NamedTensors& out, const std::string& prefix) const;
};

/// Adam optimizer state; moment buffers are aligned with the parameter list
/// handed to init().
struct AdamState {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m, v;

    void init(const std::vector<TensorPtr>& params);
};

/// One bias-corrected Adam update from the parameters' current grads.
/// Parameters with no grad buffer are treated as zero-gradient.
void adam_step(const std::vector<TensorPtr>& params, AdamState& state);

/// Collect just the tensors from a named list.
std::vector<TensorPtr> tensors_of(const NamedTensors& named);
void zero_grads(const std::vector<TensorPtr>& params);

}  // namespace cardioforge
