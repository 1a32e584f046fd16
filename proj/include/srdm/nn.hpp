#pragma once

/**
 * @file nn.hpp
 * @brief Minimal dense/temporal-convolution layers with hand-written
 *        backward passes, plus an Adam optimizer.
 *
 * Tensors are (channels x length) row-major arrays of doubles; a batch is
 * processed one sample at a time with gradients accumulated into each
 * Param. Forward passes are const and thread-safe; backward passes mutate
 * parameter gradients and belong to the single-threaded training loop.
 */

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "srdm/error.hpp"

namespace srdm::nn {

struct Tensor {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t c, std::size_t l, double fill = 0.0) : channels(c), length(l), data(c * l, fill) {}

  double& operator()(std::size_t c, std::size_t t) { return data[c * length + t]; }
  double operator()(std::size_t c, std::size_t t) const { return data[c * length + t]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return channels == o.channels && length == o.length; }

  Tensor reshaped(std::size_t c, std::size_t l) const {
    if (c * l != data.size()) throw DimensionError("reshape size mismatch");
    Tensor out = *this;
    out.channels = c;
    out.length = l;
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Concatenate along the channel axis; all parts must share a length.
inline Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) return {};
  const std::size_t len = parts.front().length;
  std::size_t channels = 0;
  for (const auto& p : parts) {
    if (p.length != len) throw DimensionError("channel concat with mismatched lengths");
    channels += p.channels;
  }
  Tensor out(channels, len);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.data.size();
  }
  return out;
}

/// Inverse of concat_channels for gradients.
inline std::vector<Tensor> split_channels(const Tensor& t, std::span<const std::size_t> channels) {
  std::vector<Tensor> out;
  std::size_t offset = 0;
  for (std::size_t c : channels) {
    Tensor part(c, t.length);
    std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(offset),
              t.data.begin() + static_cast<std::ptrdiff_t>(offset + part.size()), part.data.begin());
    offset += part.size();
    out.push_back(std::move(part));
  }
  return out;
}

struct Param {
  std::vector<double> value;
  std::vector<double> grad;

  void resize(std::size_t n) {
    value.assign(n, 0.0);
    grad.assign(n, 0.0);
  }
  void init_uniform(std::mt19937_64& rng, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : value) v = dist(rng);
  }
};

using ParamList = std::vector<Param*>;

inline std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

inline void zero_grad(const ParamList& params) {
  for (auto* p : params) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

inline std::vector<double> flatten_values(const ParamList& params) {
  std::vector<double> out;
  out.reserve(parameter_count(params));
  for (const auto* p : params) out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

inline void assign_values(const ParamList& params, std::span<const double> flat) {
  if (flat.size() != parameter_count(params)) throw DimensionError("parameter count mismatch");
  std::size_t offset = 0;
  for (auto* p : params) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + p->value.size()), p->value.begin());
    offset += p->value.size();
  }
}

/// Pointer to the i-th scalar across the whole parameter list (value, grad).
inline std::pair<double*, double*> scalar_at(const ParamList& params, std::size_t index) {
  for (auto* p : params) {
    if (index < p->value.size()) return {&p->value[index], &p->grad[index]};
    index -= p->value.size();
  }
  throw IndexError("parameter index out of range");
}

// ---------------------------------------------------------------------------

/// Temporal convolution, weight layout [out][in][kernel].
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad)
      : in_(in), out_(out), kernel_(kernel), stride_(stride), pad_(pad) {
    weight.resize(out * in * kernel);
    bias.resize(out);
  }

  void init(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * kernel_));
    weight.init_uniform(rng, bound);
    bias.init_uniform(rng, bound);
  }

  std::size_t output_length(std::size_t len) const {
    if (len + 2 * pad_ < kernel_) throw DimensionError("input shorter than kernel");
    return (len + 2 * pad_ - kernel_) / stride_ + 1;
  }

  Tensor forward(const Tensor& x) const {
    if (x.channels != in_) throw DimensionError("conv1d channel mismatch");
    const std::size_t lout = output_length(x.length);
    Tensor y(out_, lout);
    for (std::size_t o = 0; o < out_; ++o) {
      for (std::size_t t = 0; t < lout; ++t) y(o, t) = bias.value[o];
      for (std::size_t i = 0; i < in_; ++i) {
        const double* w = &weight.value[(o * in_ + i) * kernel_];
        for (std::size_t t = 0; t < lout; ++t) {
          double acc = 0.0;
          for (std::size_t j = 0; j < kernel_; ++j) {
            const auto src = static_cast<std::ptrdiff_t>(t * stride_ + j) - static_cast<std::ptrdiff_t>(pad_);
            if (src >= 0 && src < static_cast<std::ptrdiff_t>(x.length)) {
              acc += w[j] * x(i, static_cast<std::size_t>(src));
            }
          }
          y(o, t) += acc;
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor& gy) {
    Tensor gx(in_, x.length);
    for (std::size_t o = 0; o < out_; ++o) {
      for (std::size_t t = 0; t < gy.length; ++t) bias.grad[o] += gy(o, t);
      for (std::size_t i = 0; i < in_; ++i) {
        const std::size_t base = (o * in_ + i) * kernel_;
        for (std::size_t t = 0; t < gy.length; ++t) {
          const double g = gy(o, t);
          for (std::size_t j = 0; j < kernel_; ++j) {
            const auto src = static_cast<std::ptrdiff_t>(t * stride_ + j) - static_cast<std::ptrdiff_t>(pad_);
            if (src >= 0 && src < static_cast<std::ptrdiff_t>(x.length)) {
              const auto s = static_cast<std::size_t>(src);
              weight.grad[base + j] += g * x(i, s);
              gx(i, s) += g * weight.value[base + j];
            }
          }
        }
      }
    }
    return gx;
  }

  ParamList params() { return {&weight, &bias}; }

  Param weight;
  Param bias;

 private:
  std::size_t in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
};

/// Temporal transposed convolution, weight layout [in][out][kernel].
class ConvTranspose1d {
 public:
  ConvTranspose1d() = default;
  ConvTranspose1d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad,
                  std::size_t output_pad)
      : in_(in), out_(out), kernel_(kernel), stride_(stride), pad_(pad), output_pad_(output_pad) {
    weight.resize(in * out * kernel);
    bias.resize(out);
  }

  void init(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * kernel_));
    weight.init_uniform(rng, bound);
    bias.init_uniform(rng, bound);
  }

  std::size_t output_length(std::size_t len) const {
    return (len - 1) * stride_ + kernel_ + output_pad_ - 2 * pad_;
  }

  Tensor forward(const Tensor& x) const {
    if (x.channels != in_) throw DimensionError("conv-transpose channel mismatch");
    const std::size_t lout = output_length(x.length);
    Tensor y(out_, lout);
    for (std::size_t o = 0; o < out_; ++o)
      for (std::size_t t = 0; t < lout; ++t) y(o, t) = bias.value[o];
    for (std::size_t i = 0; i < in_; ++i) {
      for (std::size_t o = 0; o < out_; ++o) {
        const double* w = &weight.value[(i * out_ + o) * kernel_];
        for (std::size_t t = 0; t < x.length; ++t) {
          const double xv = x(i, t);
          for (std::size_t j = 0; j < kernel_; ++j) {
            const auto dst = static_cast<std::ptrdiff_t>(t * stride_ + j) - static_cast<std::ptrdiff_t>(pad_);
            if (dst >= 0 && dst < static_cast<std::ptrdiff_t>(lout)) {
              y(o, static_cast<std::size_t>(dst)) += w[j] * xv;
            }
          }
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor& gy) {
    Tensor gx(in_, x.length);
    for (std::size_t o = 0; o < out_; ++o)
      for (std::size_t t = 0; t < gy.length; ++t) bias.grad[o] += gy(o, t);
    for (std::size_t i = 0; i < in_; ++i) {
      for (std::size_t o = 0; o < out_; ++o) {
        const std::size_t base = (i * out_ + o) * kernel_;
        for (std::size_t t = 0; t < x.length; ++t) {
          const double xv = x(i, t);
          double acc = 0.0;
          for (std::size_t j = 0; j < kernel_; ++j) {
            const auto dst = static_cast<std::ptrdiff_t>(t * stride_ + j) - static_cast<std::ptrdiff_t>(pad_);
            if (dst >= 0 && dst < static_cast<std::ptrdiff_t>(gy.length)) {
              const double g = gy(o, static_cast<std::size_t>(dst));
              weight.grad[base + j] += g * xv;
              acc += g * weight.value[base + j];
            }
          }
          gx(i, t) += acc;
        }
      }
    }
    return gx;
  }

  ParamList params() { return {&weight, &bias}; }

  Param weight;
  Param bias;

 private:
  std::size_t in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0, output_pad_ = 0;
};

/// Fully connected map over the flattened input; output reshaped to
/// (out_channels x out_length).
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out_channels, std::size_t out_length)
      : in_(in), out_c_(out_channels), out_l_(out_length) {
    weight.resize(in * out_channels * out_length);
    bias.resize(out_channels * out_length);
  }

  void init(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    weight.init_uniform(rng, bound);
    bias.init_uniform(rng, bound);
  }

  Tensor forward(const Tensor& x) const {
    if (x.size() != in_) throw DimensionError("linear input size mismatch");
    Tensor y(out_c_, out_l_);
    const std::size_t out = out_c_ * out_l_;
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = &weight.value[o * in_];
      double acc = bias.value[o];
      for (std::size_t i = 0; i < in_; ++i) acc += w[i] * x.data[i];
      y.data[o] = acc;
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor& gy) {
    Tensor gx(x.channels, x.length);
    const std::size_t out = out_c_ * out_l_;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = gy.data[o];
      if (g == 0.0) continue;
      bias.grad[o] += g;
      double* gw = &weight.grad[o * in_];
      const double* w = &weight.value[o * in_];
      for (std::size_t i = 0; i < in_; ++i) {
        gw[i] += g * x.data[i];
        gx.data[i] += g * w[i];
      }
    }
    return gx;
  }

  ParamList params() { return {&weight, &bias}; }

  Param weight;
  Param bias;

 private:
  std::size_t in_ = 0, out_c_ = 0, out_l_ = 0;
};

// ---------------------------------------------------------------------------
// SiLU activation x * sigmoid(x)

inline Tensor silu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data) v = v / (1.0 + std::exp(-v));
  return y;
}

/// Gradient through SiLU given the pre-activation input.
inline Tensor silu_backward(const Tensor& pre, const Tensor& gy) {
  Tensor gx(pre.channels, pre.length);
  for (std::size_t i = 0; i < pre.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-pre.data[i]));
    gx.data[i] = gy.data[i] * s * (1.0 + pre.data[i] * (1.0 - s));
  }
  return gx;
}

// ---------------------------------------------------------------------------

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const ParamList& params, double grad_scale = 1.0) {
    if (m_.empty()) {
      for (const auto* p : params) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i] * grad_scale;
        m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
        v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
        p.value[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
      }
    }
  }

  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace srdm::nn
