#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace cardioforge {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense row-major double tensor participating in reverse-mode autodiff.
/// grad stays empty until backward (or an external seed) touches it.
class Tensor {
  public:
    std::vector<std::int64_t> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;

    static TensorPtr create(std::vector<std::int64_t> shape, bool requires_grad = false);
    static TensorPtr from_data(std::vector<std::int64_t> shape, std::vector<double> values,
                               bool requires_grad = false);
    static TensorPtr scalar(double value, bool requires_grad = false);

    std::int64_t numel() const;
    bool has_grad() const { return !grad.empty(); }
    /// Allocate a zero-filled grad buffer if absent.
    void ensure_grad();
    /// Allocate if needed and fill with zeros.
    void zero_grad();
    void accumulate_grad(const double* g, std::int64_t n);
};

/// Define-by-run tape. Ops append backward closures in creation order;
/// backward() replays them in reverse, which is a valid topological order
/// and fixed for a given graph, so gradient accumulation is deterministic.
/// A Graph instance is confined to one thread.
class Graph {
  public:
    void record(std::function<void()> backward_fn);

    /// Reverse sweep from a scalar loss (seeds d loss/d loss = 1). External
    /// gradient seeds accumulated into interior tensors beforehand are
    /// propagated as well. Throws std::invalid_argument on non-scalar loss.
    void backward(const TensorPtr& loss);

    std::size_t num_ops() const { return ops_.size(); }

  private:
    std::vector<std::function<void()>> ops_;
};

// ---- elementwise / glue ----------------------------------------------------

TensorPtr add(Graph& g, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Graph& g, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Graph& g, const TensorPtr& a, const TensorPtr& b);
TensorPtr add_scalar(Graph& g, const TensorPtr& a, double s);
TensorPtr mul_scalar(Graph& g, const TensorPtr& a, double s);
/// 1 - a
TensorPtr one_minus(Graph& g, const TensorPtr& a);
/// log(max(a, 1e-12)); the floor keeps saturated GAN probabilities from
/// producing infinite losses or gradients.
TensorPtr safe_log(Graph& g, const TensorPtr& a);
TensorPtr mean_all(Graph& g, const TensorPtr& a);
TensorPtr sum_all(Graph& g, const TensorPtr& a);
TensorPtr reshape(Graph& g, const TensorPtr& a, std::vector<std::int64_t> shape);
/// Crop [N,C,T] to [N,C,new_t]; backward zero-pads.
TensorPtr narrow_time(Graph& g, const TensorPtr& a, std::int64_t new_t);
/// Copy of the values, cut off from the graph.
TensorPtr detach(const TensorPtr& a);

// ---- activations ------------------------------------------------------------

TensorPtr relu(Graph& g, const TensorPtr& a);
TensorPtr leaky_relu(Graph& g, const TensorPtr& a, double slope);
TensorPtr sigmoid(Graph& g, const TensorPtr& a);
/// Softmax over the last dimension, numerically stabilised.
TensorPtr softmax(Graph& g, const TensorPtr& a);
/// Max pooling over [N,C,T], no padding; first maximum wins ties.
TensorPtr max_pool1d(Graph& g, const TensorPtr& a, int size, int stride);

// ---- linear algebra -----------------------------------------------------------

/// x[N,In] * w[Out,In]^T + b[Out]; b may be null.
TensorPtr fully_connected(Graph& g, const TensorPtr& x, const TensorPtr& w,
                          const TensorPtr& b);

/// Cross-correlation along time. x[N,Ci,T], w[Co,Ci,K], optional b[Co];
/// output length floor((T + 2*padding - K)/stride) + 1.
TensorPtr conv1d(Graph& g, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int padding);

/// Transposed convolution, the exact adjoint of conv1d for a shared weight:
/// x[N,A,T], w[A,B,K], optional b[B]; output length (T-1)*stride - 2*padding + K.
TensorPtr deconv1d(Graph& g, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                   int stride, int padding);

/// Per-channel batch normalisation for [N,C] or [N,C,T]. In training mode the
/// batch statistics are used and the running buffers updated in place
/// (biased variance, torch-style momentum); eval mode normalises with the
/// running buffers. Training with a single-element batch is an error.
TensorPtr batchnorm1d(Graph& g, const TensorPtr& x, const TensorPtr& gamma,
                      const TensorPtr& beta, const TensorPtr& running_mean,
                      const TensorPtr& running_var, bool training,
                      double momentum = 0.1, double eps = 1e-5);

// ---- losses --------------------------------------------------------------------

/// -mean_i log(probs[i, labels[i]]) over rows of probability vectors.
TensorPtr nll_loss(Graph& g, const TensorPtr& probs, const std::vector<int>& labels);

}  // namespace cardioforge
