#include "cardioforge/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "cardioforge/kernels.hpp"
#include "cardioforge/rng.hpp"

namespace cardioforge {

TensorPtr gaussian_param(std::vector<std::int64_t> shape, Rng& rng, double stddev) {
    auto t = Tensor::create(std::move(shape), true);
    for (double& v : t->data) v = rng.normal() * stddev;
    return t;
}

TensorPtr const_param(std::vector<std::int64_t> shape, double value) {
    auto t = Tensor::create(std::move(shape), true);
    for (double& v : t->data) v = value;
    return t;
}

LinearLayer::LinearLayer(std::int64_t in, std::int64_t out, Rng& rng, double init_stddev)
    : w(gaussian_param({out, in}, rng, init_stddev)), b(const_param({out}, 0.0)) {}

TensorPtr LinearLayer::forward(Graph& g, const TensorPtr& x) const {
    return fully_connected(g, x, w, b);
}

void LinearLayer::named(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + "/weight", w);
    out.emplace_back(prefix + "/bias", b);
}

Conv1dLayer::Conv1dLayer(std::int64_t in_ch, std::int64_t out_ch, int kernel, int stride,
                         int padding, Rng& rng, double init_stddev)
    : w(gaussian_param({out_ch, in_ch, kernel}, rng, init_stddev)),
      b(const_param({out_ch}, 0.0)),
      stride(stride),
      padding(padding) {}

TensorPtr Conv1dLayer::forward(Graph& g, const TensorPtr& x) const {
    return conv1d(g, x, w, b, stride, padding);
}

void Conv1dLayer::named(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + "/weight", w);
    out.emplace_back(prefix + "/bias", b);
}

Deconv1dLayer::Deconv1dLayer(std::int64_t in_ch, std::int64_t out_ch, int kernel,
                             int stride, int padding, Rng& rng)
    : w(gaussian_param({in_ch, out_ch, kernel}, rng)),
      b(const_param({out_ch}, 0.0)),
      stride(stride),
      padding(padding) {}

TensorPtr Deconv1dLayer::forward(Graph& g, const TensorPtr& x) const {
    return deconv1d(g, x, w, b, stride, padding);
}

void Deconv1dLayer::named(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + "/weight", w);
    out.emplace_back(prefix + "/bias", b);
}

BatchNorm1dLayer::BatchNorm1dLayer(std::int64_t channels)
    : gamma(const_param({channels}, 1.0)),
      beta(const_param({channels}, 0.0)),
      run_mean(Tensor::create({channels}, false)),
      run_var(Tensor::create({channels}, false)) {
    for (double& v : run_var->data) v = 1.0;
}

TensorPtr BatchNorm1dLayer::forward(Graph& g, const TensorPtr& x, bool training) const {
    return batchnorm1d(g, x, gamma, beta, run_mean, run_var, training, momentum, eps);
}

void BatchNorm1dLayer::named(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + "/gamma", gamma);
    out.emplace_back(prefix + "/beta", beta);
    out.emplace_back(prefix + "/running_mean", run_mean);
    out.emplace_back(prefix + "/running_var", run_var);
}

void AdamState::init(const std::vector<TensorPtr>& params) {
    step = 0;
    m.clear();
    v.clear();
    m.reserve(params.size());
    v.reserve(params.size());
    for (const TensorPtr& p : params) {
        m.emplace_back(p->data.size(), 0.0);
        v.emplace_back(p->data.size(), 0.0);
    }
}

void adam_step(const std::vector<TensorPtr>& params, AdamState& state) {
    if (state.m.size() != params.size()) {
        throw std::invalid_argument("adam_step: state not initialised for these parameters");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        if (state.m[i].size() != p.data.size()) {
            throw std::invalid_argument("adam_step: parameter shape changed");
        }
        p.ensure_grad();
        k.adam_update(p.data.data(), p.grad.data(), state.m[i].data(), state.v[i].data(),
                      p.data.size(), state.lr, state.beta1, state.beta2, state.eps, bc1,
                      bc2);
    }
}

std::vector<TensorPtr> tensors_of(const NamedTensors& named) {
    std::vector<TensorPtr> out;
    out.reserve(named.size());
    for (const auto& [name, t] : named) out.push_back(t);
    return out;
}

void zero_grads(const std::vector<TensorPtr>& params) {
    for (const TensorPtr& p : params) p->zero_grad();
}

}  // namespace cardioforge
