#include "cardioforge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "cardioforge/kernels.hpp"

namespace cardioforge {

namespace {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d < 0) throw std::invalid_argument("negative tensor dimension");
        n *= d;
    }
    return n;
}

void check_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
    if (a->shape != b->shape) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}

constexpr double kLogFloor = 1e-12;
constexpr double kProbFloor = 1e-300;

}  // namespace

TensorPtr Tensor::create(std::vector<std::int64_t> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
    t->shape = std::move(shape);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::from_data(std::vector<std::int64_t> shape, std::vector<double> values,
                            bool requires_grad) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
        throw std::invalid_argument("tensor data length does not match shape");
    }
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(data.size()); }

void Tensor::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() { grad.assign(data.size(), 0.0); }

void Tensor::accumulate_grad(const double* g, std::int64_t n) {
    if (n != numel()) throw std::invalid_argument("grad length mismatch");
    ensure_grad();
    kernels::active().axpy(1.0, g, grad.data(), static_cast<std::size_t>(n));
}

void Graph::record(std::function<void()> backward_fn) {
    ops_.push_back(std::move(backward_fn));
}

void Graph::backward(const TensorPtr& loss) {
    if (loss->numel() != 1) {
        throw std::invalid_argument("backward requires a scalar loss tensor");
    }
    loss->ensure_grad();
    loss->grad[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

// ---- elementwise / glue ----------------------------------------------------

TensorPtr add(Graph& g, const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "add");
    auto out = Tensor::create(a->shape, a->requires_grad || b->requires_grad);
    kernels::active().add(a->data.data(), b->data.data(), out->data.data(), a->data.size());
    if (out->requires_grad) {
        g.record([a, b, out]() {
            if (!out->has_grad()) return;
            if (a->requires_grad) a->accumulate_grad(out->grad.data(), out->numel());
            if (b->requires_grad) b->accumulate_grad(out->grad.data(), out->numel());
        });
    }
    return out;
}

TensorPtr sub(Graph& g, const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "sub");
    auto out = Tensor::create(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) {
        out->data[i] = a->data[i] - b->data[i];
    }
    if (out->requires_grad) {
        g.record([a, b, out]() {
            if (!out->has_grad()) return;
            if (a->requires_grad) a->accumulate_grad(out->grad.data(), out->numel());
            if (b->requires_grad) {
                b->ensure_grad();
                kernels::active().axpy(-1.0, out->grad.data(), b->grad.data(),
                                       out->grad.size());
            }
        });
    }
    return out;
}

TensorPtr mul(Graph& g, const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "mul");
    auto out = Tensor::create(a->shape, a->requires_grad || b->requires_grad);
    kernels::active().mul(a->data.data(), b->data.data(), out->data.data(), a->data.size());
    if (out->requires_grad) {
        g.record([a, b, out]() {
            if (!out->has_grad()) return;
            const auto& k = kernels::active();
            std::vector<double> tmp(out->grad.size());
            if (a->requires_grad) {
                a->ensure_grad();
                k.mul(out->grad.data(), b->data.data(), tmp.data(), tmp.size());
                k.axpy(1.0, tmp.data(), a->grad.data(), tmp.size());
            }
            if (b->requires_grad) {
                b->ensure_grad();
                k.mul(out->grad.data(), a->data.data(), tmp.data(), tmp.size());
                k.axpy(1.0, tmp.data(), b->grad.data(), tmp.size());
            }
        });
    }
    return out;
}

TensorPtr add_scalar(Graph& g, const TensorPtr& a, double s) {
    auto out = Tensor::create(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] + s;
    if (out->requires_grad) {
        g.record([a, out]() {
            if (out->has_grad()) a->accumulate_grad(out->grad.data(), out->numel());
        });
    }
    return out;
}

TensorPtr mul_scalar(Graph& g, const TensorPtr& a, double s) {
    auto out = Tensor::create(a->shape, a->requires_grad);
    kernels::active().scale(a->data.data(), s, out->data.data(), a->data.size());
    if (out->requires_grad) {
        g.record([a, out, s]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            kernels::active().axpy(s, out->grad.data(), a->grad.data(), out->grad.size());
        });
    }
    return out;
}

TensorPtr one_minus(Graph& g, const TensorPtr& a) {
    auto out = Tensor::create(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = 1.0 - a->data[i];
    if (out->requires_grad) {
        g.record([a, out]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            kernels::active().axpy(-1.0, out->grad.data(), a->grad.data(), out->grad.size());
        });
    }
    return out;
}

TensorPtr safe_log(Graph& g, const TensorPtr& a) {
    auto out = Tensor::create(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) {
        out->data[i] = std::log(std::max(a->data[i], kLogFloor));
    }
    if (out->requires_grad) {
        g.record([a, out]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            for (std::size_t i = 0; i < a->data.size(); ++i) {
                a->grad[i] += out->grad[i] / std::max(a->data[i], kLogFloor);
            }
        });
    }
    return out;
}

TensorPtr mean_all(Graph& g, const TensorPtr& a) {
    const double n = static_cast<double>(a->numel());
    auto out = Tensor::scalar(kernels::active().sum(a->data.data(), a->data.size()) / n,
                              a->requires_grad);
    if (out->requires_grad) {
        g.record([a, out, n]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            const double go = out->grad[0] / n;
            for (double& v : a->grad) v += go;
        });
    }
    return out;
}

TensorPtr sum_all(Graph& g, const TensorPtr& a) {
    auto out = Tensor::scalar(kernels::active().sum(a->data.data(), a->data.size()),
                              a->requires_grad);
    if (out->requires_grad) {
        g.record([a, out]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            const double go = out->grad[0];
            for (double& v : a->grad) v += go;
        });
    }
    return out;
}

TensorPtr reshape(Graph& g, const TensorPtr& a, std::vector<std::int64_t> shape) {
    if (shape_numel(shape) != a->numel()) {
        throw std::invalid_argument("reshape: element count mismatch");
    }
    auto out = Tensor::from_data(std::move(shape), a->data, a->requires_grad);
    if (out->requires_grad) {
        g.record([a, out]() {
            if (out->has_grad()) a->accumulate_grad(out->grad.data(), out->numel());
        });
    }
    return out;
}

TensorPtr narrow_time(Graph& g, const TensorPtr& a, std::int64_t new_t) {
    if (a->shape.size() != 3) throw std::invalid_argument("narrow_time expects [N,C,T]");
    const std::int64_t n = a->shape[0], c = a->shape[1], t = a->shape[2];
    if (new_t < 1 || new_t > t) throw std::invalid_argument("narrow_time: bad length");
    auto out = Tensor::create({n, c, new_t}, a->requires_grad);
    for (std::int64_t row = 0; row < n * c; ++row) {
        std::memcpy(out->data.data() + row * new_t, a->data.data() + row * t,
                    static_cast<std::size_t>(new_t) * sizeof(double));
    }
    if (out->requires_grad) {
        g.record([a, out, n, c, t, new_t]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            for (std::int64_t row = 0; row < n * c; ++row) {
                kernels::active().axpy(1.0, out->grad.data() + row * new_t,
                                       a->grad.data() + row * t,
                                       static_cast<std::size_t>(new_t));
            }
        });
    }
    return out;
}

TensorPtr detach(const TensorPtr& a) { return Tensor::from_data(a->shape, a->data, false); }

// ---- activations ------------------------------------------------------------

TensorPtr relu(Graph& g, const TensorPtr& a) {
    auto out = Tensor::create(a->shape, a->requires_grad);
    kernels::active().relu_fwd(a->data.data(), out->data.data(), a->data.size());
    if (out->requires_grad) {
        g.record([a, out]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            kernels::active().relu_bwd(a->data.data(), out->grad.data(), a->grad.data(),
                                       a->data.size());
        });
    }
    return out;
}

TensorPtr leaky_relu(Graph& g, const TensorPtr& a, double slope) {
    auto out = Tensor::create(a->shape, a->requires_grad);
    kernels::active().leaky_relu_fwd(a->data.data(), out->data.data(), slope,
                                     a->data.size());
    if (out->requires_grad) {
        g.record([a, out, slope]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            kernels::active().leaky_relu_bwd(a->data.data(), out->grad.data(),
                                             a->grad.data(), slope, a->data.size());
        });
    }
    return out;
}

TensorPtr sigmoid(Graph& g, const TensorPtr& a) {
    auto out = Tensor::create(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) {
        const double v = a->data[i];
        out->data[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                : std::exp(v) / (1.0 + std::exp(v));
    }
    if (out->requires_grad) {
        g.record([a, out]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            for (std::size_t i = 0; i < a->data.size(); ++i) {
                const double y = out->data[i];
                a->grad[i] += out->grad[i] * y * (1.0 - y);
            }
        });
    }
    return out;
}

TensorPtr softmax(Graph& g, const TensorPtr& a) {
    if (a->shape.empty()) throw std::invalid_argument("softmax needs at least 1-d input");
    const std::int64_t cols = a->shape.back();
    const std::int64_t rows = a->numel() / cols;
    auto out = Tensor::create(a->shape, a->requires_grad);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* in = a->data.data() + r * cols;
        double* o = out->data.data() + r * cols;
        double mx = in[0];
        for (std::int64_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
        double total = 0.0;
        for (std::int64_t j = 0; j < cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            total += o[j];
        }
        for (std::int64_t j = 0; j < cols; ++j) o[j] /= total;
    }
    if (out->requires_grad) {
        g.record([a, out, rows, cols]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            for (std::int64_t r = 0; r < rows; ++r) {
                const double* y = out->data.data() + r * cols;
                const double* go = out->grad.data() + r * cols;
                double d = 0.0;
                for (std::int64_t j = 0; j < cols; ++j) d += go[j] * y[j];
                double* ga = a->grad.data() + r * cols;
                for (std::int64_t j = 0; j < cols; ++j) ga[j] += y[j] * (go[j] - d);
            }
        });
    }
    return out;
}

TensorPtr max_pool1d(Graph& g, const TensorPtr& a, int size, int stride) {
    if (a->shape.size() != 3) throw std::invalid_argument("max_pool1d expects [N,C,T]");
    if (size < 1 || stride < 1) throw std::invalid_argument("max_pool1d: bad window");
    const std::int64_t rows = a->shape[0] * a->shape[1];
    const std::int64_t t = a->shape[2];
    if (t < size) throw std::invalid_argument("max_pool1d: window longer than input");
    const std::int64_t to = (t - size) / stride + 1;
    auto out = Tensor::create({a->shape[0], a->shape[1], to}, a->requires_grad);
    auto argmax =
        std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(rows * to));
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* in = a->data.data() + r * t;
        for (std::int64_t o = 0; o < to; ++o) {
            std::int64_t best = o * stride;
            for (int k = 1; k < size; ++k) {
                const std::int64_t idx = o * stride + k;
                if (in[idx] > in[best]) best = idx;
            }
            out->data[r * to + o] = in[best];
            (*argmax)[static_cast<std::size_t>(r * to + o)] = best;
        }
    }
    if (out->requires_grad) {
        g.record([a, out, argmax, rows, t, to]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            for (std::int64_t r = 0; r < rows; ++r) {
                for (std::int64_t o = 0; o < to; ++o) {
                    a->grad[r * t + (*argmax)[static_cast<std::size_t>(r * to + o)]] +=
                        out->grad[r * to + o];
                }
            }
        });
    }
    return out;
}

// ---- linear algebra -----------------------------------------------------------

TensorPtr fully_connected(Graph& g, const TensorPtr& x, const TensorPtr& w,
                          const TensorPtr& b) {
    if (x->shape.size() != 2 || w->shape.size() != 2 || x->shape[1] != w->shape[1]) {
        throw std::invalid_argument("fully_connected: incompatible shapes");
    }
    const std::int64_t n = x->shape[0], in = x->shape[1], out_dim = w->shape[0];
    if (b != nullptr && (b->shape.size() != 1 || b->shape[0] != out_dim)) {
        throw std::invalid_argument("fully_connected: bad bias shape");
    }
    const bool rg = x->requires_grad || w->requires_grad || (b && b->requires_grad);
    auto out = Tensor::create({n, out_dim}, rg);
    const auto& k = kernels::active();
    k.matmul_nt(x->data.data(), w->data.data(), out->data.data(),
                static_cast<std::size_t>(n), static_cast<std::size_t>(out_dim),
                static_cast<std::size_t>(in), false);
    if (b != nullptr) {
        for (std::int64_t i = 0; i < n; ++i) {
            k.axpy(1.0, b->data.data(), out->data.data() + i * out_dim,
                   static_cast<std::size_t>(out_dim));
        }
    }
    if (rg) {
        g.record([x, w, b, out, n, in, out_dim]() {
            if (!out->has_grad()) return;
            const auto& kt = kernels::active();
            if (x->requires_grad) {
                x->ensure_grad();
                kt.matmul_nn(out->grad.data(), w->data.data(), x->grad.data(),
                             static_cast<std::size_t>(n), static_cast<std::size_t>(in),
                             static_cast<std::size_t>(out_dim), true);
            }
            if (w->requires_grad) {
                w->ensure_grad();
                kt.matmul_tn(out->grad.data(), x->data.data(), w->grad.data(),
                             static_cast<std::size_t>(out_dim),
                             static_cast<std::size_t>(in), static_cast<std::size_t>(n),
                             true);
            }
            if (b != nullptr && b->requires_grad) {
                b->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i) {
                    kt.axpy(1.0, out->grad.data() + i * out_dim, b->grad.data(),
                            static_cast<std::size_t>(out_dim));
                }
            }
        });
    }
    return out;
}

namespace {

// col[to, c*K + k] = x[c, to*stride + k - padding], zero outside the input.
void im2col(const double* x, std::int64_t channels, std::int64_t t, int kernel, int stride,
            int padding, std::int64_t to, double* col) {
    for (std::int64_t o = 0; o < to; ++o) {
        double* row = col + o * channels * kernel;
        for (std::int64_t c = 0; c < channels; ++c) {
            const double* xc = x + c * t;
            for (int k = 0; k < kernel; ++k) {
                const std::int64_t src = o * stride + k - padding;
                row[c * kernel + k] = (src >= 0 && src < t) ? xc[src] : 0.0;
            }
        }
    }
}

// Adjoint scatter of im2col.
void col2im_add(const double* col, std::int64_t channels, std::int64_t t, int kernel,
                int stride, int padding, std::int64_t to, double* x) {
    for (std::int64_t o = 0; o < to; ++o) {
        const double* row = col + o * channels * kernel;
        for (std::int64_t c = 0; c < channels; ++c) {
            double* xc = x + c * t;
            for (int k = 0; k < kernel; ++k) {
                const std::int64_t dst = o * stride + k - padding;
                if (dst >= 0 && dst < t) xc[dst] += row[c * kernel + k];
            }
        }
    }
}

}  // namespace

TensorPtr conv1d(Graph& g, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int padding) {
    if (x->shape.size() != 3 || w->shape.size() != 3 || x->shape[1] != w->shape[1]) {
        throw std::invalid_argument("conv1d: incompatible shapes");
    }
    if (stride < 1 || padding < 0) throw std::invalid_argument("conv1d: bad stride/padding");
    const std::int64_t n = x->shape[0], ci = x->shape[1], t = x->shape[2];
    const std::int64_t co = w->shape[0];
    const int kernel = static_cast<int>(w->shape[2]);
    if (t + 2 * padding < kernel) {
        throw std::invalid_argument("conv1d: kernel longer than padded input");
    }
    const std::int64_t to = (t + 2 * padding - kernel) / stride + 1;
    if (b != nullptr && (b->shape.size() != 1 || b->shape[0] != co)) {
        throw std::invalid_argument("conv1d: bad bias shape");
    }
    const bool rg = x->requires_grad || w->requires_grad || (b && b->requires_grad);
    auto out = Tensor::create({n, co, to}, rg);
    const std::int64_t ck = ci * kernel;
    // Unrolled input patches, kept for the backward pass.
    auto cols = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * to * ck));
    const auto& kt = kernels::active();
    for (std::int64_t i = 0; i < n; ++i) {
        double* col = cols->data() + i * to * ck;
        im2col(x->data.data() + i * ci * t, ci, t, kernel, stride, padding, to, col);
        kt.matmul_nt(w->data.data(), col, out->data.data() + i * co * to,
                     static_cast<std::size_t>(co), static_cast<std::size_t>(to),
                     static_cast<std::size_t>(ck), false);
    }
    if (b != nullptr) {
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t c = 0; c < co; ++c) {
                double* row = out->data.data() + (i * co + c) * to;
                const double bv = b->data[static_cast<std::size_t>(c)];
                for (std::int64_t o = 0; o < to; ++o) row[o] += bv;
            }
        }
    }
    if (rg) {
        g.record([x, w, b, out, cols, n, ci, t, co, kernel, stride, padding, to, ck]() {
            if (!out->has_grad()) return;
            const auto& k2 = kernels::active();
            if (w->requires_grad) {
                w->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i) {
                    k2.matmul_nn(out->grad.data() + i * co * to,
                                 cols->data() + i * to * ck, w->grad.data(),
                                 static_cast<std::size_t>(co), static_cast<std::size_t>(ck),
                                 static_cast<std::size_t>(to), true);
                }
            }
            if (x->requires_grad) {
                x->ensure_grad();
                std::vector<double> gcol(static_cast<std::size_t>(to * ck));
                for (std::int64_t i = 0; i < n; ++i) {
                    k2.matmul_tn(out->grad.data() + i * co * to, w->data.data(),
                                 gcol.data(), static_cast<std::size_t>(to),
                                 static_cast<std::size_t>(ck), static_cast<std::size_t>(co),
                                 false);
                    col2im_add(gcol.data(), ci, t, kernel, stride, padding, to,
                               x->grad.data() + i * ci * t);
                }
            }
            if (b != nullptr && b->requires_grad) {
                b->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i) {
                    for (std::int64_t c = 0; c < co; ++c) {
                        b->grad[static_cast<std::size_t>(c)] +=
                            k2.sum(out->grad.data() + (i * co + c) * to,
                                   static_cast<std::size_t>(to));
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr deconv1d(Graph& g, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                   int stride, int padding) {
    if (x->shape.size() != 3 || w->shape.size() != 3 || x->shape[1] != w->shape[0]) {
        throw std::invalid_argument("deconv1d: incompatible shapes");
    }
    if (stride < 1 || padding < 0) {
        throw std::invalid_argument("deconv1d: bad stride/padding");
    }
    const std::int64_t n = x->shape[0], a_ch = x->shape[1], t = x->shape[2];
    const std::int64_t b_ch = w->shape[1];
    const int kernel = static_cast<int>(w->shape[2]);
    const std::int64_t to = (t - 1) * stride - 2 * padding + kernel;
    if (to < 1) throw std::invalid_argument("deconv1d: non-positive output length");
    if (b != nullptr && (b->shape.size() != 1 || b->shape[0] != b_ch)) {
        throw std::invalid_argument("deconv1d: bad bias shape");
    }
    const bool rg = x->requires_grad || w->requires_grad || (b && b->requires_grad);
    auto out = Tensor::create({n, b_ch, to}, rg);
    const std::int64_t ck = b_ch * kernel;
    const auto& kt = kernels::active();
    {
        std::vector<double> col(static_cast<std::size_t>(t * ck));
        for (std::int64_t i = 0; i < n; ++i) {
            // col[t', b*K+k] = sum_a x[a,t'] * w[a, b*K+k], then adjoint scatter.
            kt.matmul_tn(x->data.data() + i * a_ch * t, w->data.data(), col.data(),
                         static_cast<std::size_t>(t), static_cast<std::size_t>(ck),
                         static_cast<std::size_t>(a_ch), false);
            col2im_add(col.data(), b_ch, to, kernel, stride, padding, t,
                       out->data.data() + i * b_ch * to);
        }
    }
    if (b != nullptr) {
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t c = 0; c < b_ch; ++c) {
                double* row = out->data.data() + (i * b_ch + c) * to;
                const double bv = b->data[static_cast<std::size_t>(c)];
                for (std::int64_t o = 0; o < to; ++o) row[o] += bv;
            }
        }
    }
    if (rg) {
        g.record([x, w, b, out, n, a_ch, t, b_ch, kernel, stride, padding, to, ck]() {
            if (!out->has_grad()) return;
            const auto& k2 = kernels::active();
            std::vector<double> gcol(static_cast<std::size_t>(t * ck));
            for (std::int64_t i = 0; i < n; ++i) {
                im2col(out->grad.data() + i * b_ch * to, b_ch, to, kernel, stride, padding,
                       t, gcol.data());
                if (x->requires_grad) {
                    x->ensure_grad();
                    k2.matmul_nt(w->data.data(), gcol.data(),
                                 x->grad.data() + i * a_ch * t,
                                 static_cast<std::size_t>(a_ch), static_cast<std::size_t>(t),
                                 static_cast<std::size_t>(ck), true);
                }
                if (w->requires_grad) {
                    w->ensure_grad();
                    k2.matmul_nn(x->data.data() + i * a_ch * t, gcol.data(), w->grad.data(),
                                 static_cast<std::size_t>(a_ch),
                                 static_cast<std::size_t>(ck), static_cast<std::size_t>(t),
                                 true);
                }
            }
            if (b != nullptr && b->requires_grad) {
                b->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i) {
                    for (std::int64_t c = 0; c < b_ch; ++c) {
                        b->grad[static_cast<std::size_t>(c)] +=
                            k2.sum(out->grad.data() + (i * b_ch + c) * to,
                                   static_cast<std::size_t>(to));
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr batchnorm1d(Graph& g, const TensorPtr& x, const TensorPtr& gamma,
                      const TensorPtr& beta, const TensorPtr& running_mean,
                      const TensorPtr& running_var, bool training, double momentum,
                      double eps) {
    if (x->shape.size() != 2 && x->shape.size() != 3) {
        throw std::invalid_argument("batchnorm1d expects [N,C] or [N,C,T]");
    }
    const std::int64_t n = x->shape[0];
    const std::int64_t c = x->shape[1];
    const std::int64_t t = x->shape.size() == 3 ? x->shape[2] : 1;
    if (gamma->numel() != c || beta->numel() != c || running_mean->numel() != c ||
        running_var->numel() != c) {
        throw std::invalid_argument("batchnorm1d: parameter size mismatch");
    }
    if (training && n < 2) {
        throw std::invalid_argument("batchnorm1d: training mode needs a batch of >= 2");
    }

    const std::int64_t m = n * t;  // elements per channel
    auto mean = std::make_shared<std::vector<double>>(static_cast<std::size_t>(c));
    auto var = std::make_shared<std::vector<double>>(static_cast<std::size_t>(c));
    const auto& kt = kernels::active();
    if (training) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (std::int64_t i = 0; i < n; ++i) {
                s += kt.sum(x->data.data() + (i * c + ch) * t, static_cast<std::size_t>(t));
            }
            const double mu = s / static_cast<double>(m);
            double ss = 0.0;
            for (std::int64_t i = 0; i < n; ++i) {
                const double* row = x->data.data() + (i * c + ch) * t;
                for (std::int64_t j = 0; j < t; ++j) {
                    const double d = row[j] - mu;
                    ss += d * d;
                }
            }
            (*mean)[static_cast<std::size_t>(ch)] = mu;
            (*var)[static_cast<std::size_t>(ch)] = ss / static_cast<double>(m);
        }
        for (std::int64_t ch = 0; ch < c; ++ch) {
            auto& rm = running_mean->data[static_cast<std::size_t>(ch)];
            auto& rv = running_var->data[static_cast<std::size_t>(ch)];
            rm = (1.0 - momentum) * rm + momentum * (*mean)[static_cast<std::size_t>(ch)];
            rv = (1.0 - momentum) * rv + momentum * (*var)[static_cast<std::size_t>(ch)];
        }
    } else {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            (*mean)[static_cast<std::size_t>(ch)] =
                running_mean->data[static_cast<std::size_t>(ch)];
            (*var)[static_cast<std::size_t>(ch)] =
                running_var->data[static_cast<std::size_t>(ch)];
        }
    }

    const bool rg = x->requires_grad || gamma->requires_grad || beta->requires_grad;
    auto out = Tensor::create(x->shape, rg);
    auto xhat = std::make_shared<std::vector<double>>(x->data.size());
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const double inv = 1.0 / std::sqrt((*var)[static_cast<std::size_t>(ch)] + eps);
            const double mu = (*mean)[static_cast<std::size_t>(ch)];
            const double ga = gamma->data[static_cast<std::size_t>(ch)];
            const double be = beta->data[static_cast<std::size_t>(ch)];
            const double* row = x->data.data() + (i * c + ch) * t;
            double* xh = xhat->data() + (i * c + ch) * t;
            double* o = out->data.data() + (i * c + ch) * t;
            for (std::int64_t j = 0; j < t; ++j) {
                xh[j] = (row[j] - mu) * inv;
                o[j] = ga * xh[j] + be;
            }
        }
    }

    if (rg) {
        g.record([x, gamma, beta, out, xhat, var, n, c, t, m, eps, training]() {
            if (!out->has_grad()) return;
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const double inv =
                    1.0 / std::sqrt((*var)[static_cast<std::size_t>(ch)] + eps);
                const double ga = gamma->data[static_cast<std::size_t>(ch)];
                double sum_gy = 0.0;
                double sum_gy_xh = 0.0;
                for (std::int64_t i = 0; i < n; ++i) {
                    const double* go = out->grad.data() + (i * c + ch) * t;
                    const double* xh = xhat->data() + (i * c + ch) * t;
                    for (std::int64_t j = 0; j < t; ++j) {
                        sum_gy += go[j];
                        sum_gy_xh += go[j] * xh[j];
                    }
                }
                if (gamma->requires_grad) {
                    gamma->ensure_grad();
                    gamma->grad[static_cast<std::size_t>(ch)] += sum_gy_xh;
                }
                if (beta->requires_grad) {
                    beta->ensure_grad();
                    beta->grad[static_cast<std::size_t>(ch)] += sum_gy;
                }
                if (x->requires_grad) {
                    x->ensure_grad();
                    const double md = static_cast<double>(m);
                    for (std::int64_t i = 0; i < n; ++i) {
                        const double* go = out->grad.data() + (i * c + ch) * t;
                        const double* xh = xhat->data() + (i * c + ch) * t;
                        double* gx = x->grad.data() + (i * c + ch) * t;
                        for (std::int64_t j = 0; j < t; ++j) {
                            if (training) {
                                gx[j] += ga * inv *
                                         (go[j] - sum_gy / md - xh[j] * sum_gy_xh / md);
                            } else {
                                gx[j] += ga * inv * go[j];
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

// ---- losses --------------------------------------------------------------------

TensorPtr nll_loss(Graph& g, const TensorPtr& probs, const std::vector<int>& labels) {
    if (probs->shape.size() != 2) throw std::invalid_argument("nll_loss expects [N,C]");
    const std::int64_t n = probs->shape[0], c = probs->shape[1];
    if (static_cast<std::int64_t>(labels.size()) != n) {
        throw std::invalid_argument("nll_loss: label count mismatch");
    }
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= c) throw std::invalid_argument("nll_loss: label out of range");
        acc -= std::log(std::max(probs->data[i * c + y], kProbFloor));
    }
    auto out = Tensor::scalar(acc / static_cast<double>(n), probs->requires_grad);
    if (out->requires_grad) {
        auto lab = std::make_shared<std::vector<int>>(labels);
        g.record([probs, out, lab, n, c]() {
            if (!out->has_grad()) return;
            probs->ensure_grad();
            const double go = out->grad[0] / static_cast<double>(n);
            for (std::int64_t i = 0; i < n; ++i) {
                const int y = (*lab)[static_cast<std::size_t>(i)];
                probs->grad[i * c + y] -= go / std::max(probs->data[i * c + y], kProbFloor);
            }
        });
    }
    return out;
}

}  // namespace cardioforge
