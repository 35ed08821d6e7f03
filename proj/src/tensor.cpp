#include "nuwave/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace nuwave {

namespace {

thread_local bool g_grad_enabled = true;

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: extents must be positive");
    n *= d;
  }
  return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

void ensure_grad_buffer(detail::TensorNode& n) {
  if (n.grad.size() != n.data.size()) n.grad.assign(n.data.size(), 0.0);
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_op_result(std::vector<std::int64_t> shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      std::function<void(detail::TensorNode&)> backprop) {
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (g_grad_enabled && needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node_ptr());
    node->backprop = std::move(backprop);
  }
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return from_data(std::vector<double>(static_cast<std::size_t>(n), 0.0), std::move(shape),
                   requires_grad);
}

Tensor Tensor::from_data(std::vector<double> data, std::vector<std::int64_t> shape,
                         bool requires_grad) {
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
    throw std::invalid_argument("Tensor: data length does not match shape");
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_vector(std::vector<double> data, bool requires_grad) {
  const auto n = static_cast<std::int64_t>(data.size());
  return from_data(std::move(data), {n}, requires_grad);
}

Tensor Tensor::scalar(double value) { return from_data({value}, {1}); }

const std::vector<std::int64_t>& Tensor::shape() const {
  if (!node_) throw std::logic_error("Tensor: undefined");
  return node_->shape;
}

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(data().size());
}

double Tensor::item() const {
  if (!is_scalar()) throw std::invalid_argument("Tensor::item: not a scalar");
  return data()[0];
}

const std::vector<double>& Tensor::data() const {
  if (!node_) throw std::logic_error("Tensor: undefined");
  return node_->data;
}

std::vector<double>& Tensor::mutable_data() {
  if (!node_) throw std::logic_error("Tensor: undefined");
  return node_->data;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

const std::vector<double>& Tensor::grad_data() const {
  if (!node_) throw std::logic_error("Tensor: undefined");
  ensure_grad_buffer(*node_);
  return node_->grad;
}

bool Tensor::all_finite() const {
  for (double v : data())
    if (!std::isfinite(v)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// elementwise ops

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& n) {
    for (int p = 0; p < 2; ++p) {
      auto& par = *n.parents[p];
      if (!par.requires_grad) continue;
      ensure_grad_buffer(par);
      for (std::size_t i = 0; i < n.grad.size(); ++i) par.grad[i] += n.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) {
      ensure_grad_buffer(pa);
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    }
    if (pb.requires_grad) {
      ensure_grad_buffer(pb);
      for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) {
      ensure_grad_buffer(pa);
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      ensure_grad_buffer(pb);
      for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  return make_op_result(a.shape(), std::move(out), {a}, [c](detail::TensorNode& n) {
    auto& pa = *n.parents[0];
    if (!pa.requires_grad) return;
    ensure_grad_buffer(pa);
    for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * c;
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
  return make_op_result(a.shape(), std::move(out), {a}, [](detail::TensorNode& n) {
    auto& pa = *n.parents[0];
    if (!pa.requires_grad) return;
    ensure_grad_buffer(pa);
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      pa.grad[i] += n.grad[i] * (1.0 - n.data[i] * n.data[i]);
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a.data()[i]));
  return make_op_result(a.shape(), std::move(out), {a}, [](detail::TensorNode& n) {
    auto& pa = *n.parents[0];
    if (!pa.requires_grad) return;
    ensure_grad_buffer(pa);
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      pa.grad[i] += n.grad[i] * n.data[i] * (1.0 - n.data[i]);
  });
}

Tensor abs(const Tensor& a) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(a.data()[i]);
  return make_op_result(a.shape(), std::move(out), {a}, [](detail::TensorNode& n) {
    auto& pa = *n.parents[0];
    if (!pa.requires_grad) return;
    ensure_grad_buffer(pa);
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double x = pa.data[i];
      pa.grad[i] += n.grad[i] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
    }
  });
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.data()[i]);
  return make_op_result(a.shape(), std::move(out), {a}, [](detail::TensorNode& n) {
    auto& pa = *n.parents[0];
    if (!pa.requires_grad) return;
    ensure_grad_buffer(pa);
    for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] / pa.data[i];
  });
}

Tensor clamp_min(const Tensor& a, double floor) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.data()[i], floor);
  return make_op_result(a.shape(), std::move(out), {a}, [floor](detail::TensorNode& n) {
    auto& pa = *n.parents[0];
    if (!pa.requires_grad) return;
    ensure_grad_buffer(pa);
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      if (pa.data[i] > floor) pa.grad[i] += n.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_op_result({1}, {s}, {a}, [](detail::TensorNode& n) {
    auto& pa = *n.parents[0];
    if (!pa.requires_grad) return;
    ensure_grad_buffer(pa);
    const double g = n.grad[0];
    for (auto& gv : pa.grad) gv += g;
  });
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double inv_n = 1.0 / static_cast<double>(a.data().size());
  return make_op_result({1}, {s * inv_n}, {a}, [inv_n](detail::TensorNode& n) {
    auto& pa = *n.parents[0];
    if (!pa.requires_grad) return;
    ensure_grad_buffer(pa);
    const double g = n.grad[0] * inv_n;
    for (auto& gv : pa.grad) gv += g;
  });
}

// ---------------------------------------------------------------------------
// affine / convolution

Tensor linear(const Tensor& weight, const Tensor& x, const Tensor& bias) {
  if (weight.shape().size() != 2 || x.shape().size() != 1 || bias.shape().size() != 1)
    throw std::invalid_argument("linear: expects weight [out,in], x [in], bias [out]");
  const std::int64_t out_dim = weight.shape()[0];
  const std::int64_t in_dim = weight.shape()[1];
  if (x.shape()[0] != in_dim || bias.shape()[0] != out_dim)
    throw std::invalid_argument("linear: dimension mismatch");

  std::vector<double> out(static_cast<std::size_t>(out_dim));
  const auto& w = weight.data();
  const auto& xv = x.data();
  for (std::int64_t o = 0; o < out_dim; ++o) {
    double acc = bias.data()[static_cast<std::size_t>(o)];
    const double* row = w.data() + o * in_dim;
    for (std::int64_t i = 0; i < in_dim; ++i) acc += row[i] * xv[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(o)] = acc;
  }

  return make_op_result({out_dim}, std::move(out), {weight, x, bias},
                        [out_dim, in_dim](detail::TensorNode& n) {
    auto& pw = *n.parents[0];
    auto& px = *n.parents[1];
    auto& pb = *n.parents[2];
    if (pw.requires_grad) {
      ensure_grad_buffer(pw);
      for (std::int64_t o = 0; o < out_dim; ++o) {
        const double g = n.grad[static_cast<std::size_t>(o)];
        double* row = pw.grad.data() + o * in_dim;
        for (std::int64_t i = 0; i < in_dim; ++i) row[i] += g * px.data[static_cast<std::size_t>(i)];
      }
    }
    if (px.requires_grad) {
      ensure_grad_buffer(px);
      for (std::int64_t o = 0; o < out_dim; ++o) {
        const double g = n.grad[static_cast<std::size_t>(o)];
        const double* row = pw.data.data() + o * in_dim;
        for (std::int64_t i = 0; i < in_dim; ++i) px.grad[static_cast<std::size_t>(i)] += g * row[i];
      }
    }
    if (pb.requires_grad) {
      ensure_grad_buffer(pb);
      for (std::int64_t o = 0; o < out_dim; ++o) pb.grad[static_cast<std::size_t>(o)] += n.grad[static_cast<std::size_t>(o)];
    }
  });
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation) {
  if (input.shape().size() != 2 || weight.shape().size() != 3 || bias.shape().size() != 1)
    throw std::invalid_argument("conv1d: expects input [C_in,L], weight [C_out,C_in,K], bias [C_out]");
  const std::int64_t c_in = input.shape()[0];
  const std::int64_t len = input.shape()[1];
  const std::int64_t c_out = weight.shape()[0];
  const std::int64_t kernel = weight.shape()[2];
  if (weight.shape()[1] != c_in)
    throw std::invalid_argument("conv1d: input channels do not match weight");
  if (bias.shape()[0] != c_out) throw std::invalid_argument("conv1d: bias length mismatch");
  if (kernel % 2 == 0) throw std::invalid_argument("conv1d: kernel size must be odd");
  if (dilation < 1) throw std::invalid_argument("conv1d: dilation must be >= 1");
  if (len <= 0) throw std::invalid_argument("conv1d: zero-length input");

  const std::int64_t half = kernel / 2;
  const bool parallel = c_out * c_in * kernel * len >= (1 << 16);
  std::vector<double> out(static_cast<std::size_t>(c_out * len));
  const auto& in = input.data();
  const auto& w = weight.data();
  const auto& b = bias.data();

  // Per-output accumulation order is fixed (bias, then ci-major k-minor)
  // so the result is bitwise identical to the naive reference loop and
  // independent of the worker partition.
  maybe_parallel_for(parallel, c_out, [&](std::int64_t co_begin, std::int64_t co_end) {
    for (std::int64_t co = co_begin; co < co_end; ++co) {
      double* orow = out.data() + co * len;
      const double bv = b[static_cast<std::size_t>(co)];
      for (std::int64_t l = 0; l < len; ++l) orow[l] = bv;
      for (std::int64_t ci = 0; ci < c_in; ++ci) {
        const double* irow = in.data() + ci * len;
        const double* wrow = w.data() + (co * c_in + ci) * kernel;
        for (std::int64_t k = 0; k < kernel; ++k) {
          const double wv = wrow[k];
          const std::int64_t shift = (k - half) * dilation;
          const std::int64_t l0 = std::max<std::int64_t>(0, -shift);
          const std::int64_t l1 = std::min<std::int64_t>(len, len - shift);
          for (std::int64_t l = l0; l < l1; ++l) orow[l] += wv * irow[l + shift];
        }
      }
    }
  });

  return make_op_result({c_out, len}, std::move(out), {input, weight, bias},
                        [c_in, c_out, len, kernel, half, dilation](detail::TensorNode& n) {
    auto& pin = *n.parents[0];
    auto& pw = *n.parents[1];
    auto& pb = *n.parents[2];
    if (pw.requires_grad) {
      ensure_grad_buffer(pw);
      parallel_for(c_out, [&](std::int64_t co_begin, std::int64_t co_end) {
        for (std::int64_t co = co_begin; co < co_end; ++co) {
          const double* grow = n.grad.data() + co * len;
          for (std::int64_t ci = 0; ci < c_in; ++ci) {
            const double* irow = pin.data.data() + ci * len;
            double* wg = pw.grad.data() + (co * c_in + ci) * kernel;
            for (std::int64_t k = 0; k < kernel; ++k) {
              const std::int64_t shift = (k - half) * dilation;
              const std::int64_t l0 = std::max<std::int64_t>(0, -shift);
              const std::int64_t l1 = std::min<std::int64_t>(len, len - shift);
              double acc = 0.0;
              for (std::int64_t l = l0; l < l1; ++l) acc += grow[l] * irow[l + shift];
              wg[k] += acc;
            }
          }
        }
      });
    }
    if (pb.requires_grad) {
      ensure_grad_buffer(pb);
      for (std::int64_t co = 0; co < c_out; ++co) {
        const double* grow = n.grad.data() + co * len;
        double acc = 0.0;
        for (std::int64_t l = 0; l < len; ++l) acc += grow[l];
        pb.grad[static_cast<std::size_t>(co)] += acc;
      }
    }
    if (pin.requires_grad) {
      ensure_grad_buffer(pin);
      parallel_for(c_in, [&](std::int64_t ci_begin, std::int64_t ci_end) {
        for (std::int64_t ci = ci_begin; ci < ci_end; ++ci) {
          double* ig = pin.grad.data() + ci * len;
          for (std::int64_t co = 0; co < c_out; ++co) {
            const double* grow = n.grad.data() + co * len;
            const double* wrow = pw.data.data() + (co * c_in + ci) * kernel;
            for (std::int64_t k = 0; k < kernel; ++k) {
              const double wv = wrow[k];
              const std::int64_t shift = (k - half) * dilation;
              // out[l] consumed in[l + shift]; distribute back.
              const std::int64_t l0 = std::max<std::int64_t>(0, -shift);
              const std::int64_t l1 = std::min<std::int64_t>(len, len - shift);
              for (std::int64_t l = l0; l < l1; ++l) ig[l + shift] += wv * grow[l];
            }
          }
        }
      });
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.shape().size() != 2 || bias.shape().size() != 1 || bias.shape()[0] != x.shape()[0])
    throw std::invalid_argument("add_channel_bias: expects x [C,L], bias [C]");
  const std::int64_t channels = x.shape()[0];
  const std::int64_t len = x.shape()[1];
  std::vector<double> out(x.data().size());
  for (std::int64_t c = 0; c < channels; ++c) {
    const double bv = bias.data()[static_cast<std::size_t>(c)];
    const double* xi = x.data().data() + c * len;
    double* oi = out.data() + c * len;
    for (std::int64_t l = 0; l < len; ++l) oi[l] = xi[l] + bv;
  }
  return make_op_result(x.shape(), std::move(out), {x, bias},
                        [channels, len](detail::TensorNode& n) {
    auto& px = *n.parents[0];
    auto& pb = *n.parents[1];
    if (px.requires_grad) {
      ensure_grad_buffer(px);
      for (std::size_t i = 0; i < n.grad.size(); ++i) px.grad[i] += n.grad[i];
    }
    if (pb.requires_grad) {
      ensure_grad_buffer(pb);
      for (std::int64_t c = 0; c < channels; ++c) {
        const double* grow = n.grad.data() + c * len;
        double acc = 0.0;
        for (std::int64_t l = 0; l < len; ++l) acc += grow[l];
        pb.grad[static_cast<std::size_t>(c)] += acc;
      }
    }
  });
}

Tensor slice_channels(const Tensor& x, std::int64_t c0, std::int64_t c1) {
  if (x.shape().size() != 2) throw std::invalid_argument("slice_channels: expects [C,L]");
  const std::int64_t channels = x.shape()[0];
  const std::int64_t len = x.shape()[1];
  if (c0 < 0 || c1 <= c0 || c1 > channels)
    throw std::invalid_argument("slice_channels: invalid channel range");
  std::vector<double> out(static_cast<std::size_t>((c1 - c0) * len));
  std::copy(x.data().begin() + c0 * len, x.data().begin() + c1 * len, out.begin());
  return make_op_result({c1 - c0, len}, std::move(out), {x}, [c0, len](detail::TensorNode& n) {
    auto& px = *n.parents[0];
    if (!px.requires_grad) return;
    ensure_grad_buffer(px);
    double* dst = px.grad.data() + c0 * len;
    for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += n.grad[i];
  });
}

Tensor interp_upsample(const Tensor& x, int r) {
  if (x.shape().size() != 1) throw std::invalid_argument("interp_upsample: expects 1-D input");
  if (r < 1) throw std::invalid_argument("interp_upsample: r must be >= 1");
  auto out = interp_linear(x.data(), r);
  const std::int64_t in_len = x.shape()[0];
  const std::int64_t out_len = static_cast<std::int64_t>(out.size());
  return make_op_result({out_len}, std::move(out), {x}, [in_len, r](detail::TensorNode& n) {
    auto& px = *n.parents[0];
    if (!px.requires_grad) return;
    ensure_grad_buffer(px);
    const std::int64_t out_len = static_cast<std::int64_t>(n.grad.size());
    for (std::int64_t j = 0; j < out_len; ++j) {
      const std::int64_t i = j / r;
      const double frac = static_cast<double>(j % r) / static_cast<double>(r);
      const std::int64_t i1 = std::min(i + 1, in_len - 1);
      px.grad[static_cast<std::size_t>(i)] += n.grad[static_cast<std::size_t>(j)] * (1.0 - frac);
      px.grad[static_cast<std::size_t>(i1)] += n.grad[static_cast<std::size_t>(j)] * frac;
    }
  });
}

Tensor reshape(const Tensor& x, std::vector<std::int64_t> shape) {
  if (shape_numel(shape) != x.numel())
    throw std::invalid_argument("reshape: element count mismatch");
  return make_op_result(std::move(shape), x.data(), {x}, [](detail::TensorNode& n) {
    auto& px = *n.parents[0];
    if (!px.requires_grad) return;
    ensure_grad_buffer(px);
    for (std::size_t i = 0; i < n.grad.size(); ++i) px.grad[i] += n.grad[i];
  });
}

// ---------------------------------------------------------------------------
// reverse pass

namespace {

std::vector<detail::TensorNode*> topo_order(detail::TensorNode* root) {
  std::vector<detail::TensorNode*> order;
  std::unordered_set<detail::TensorNode*> visited;
  // Iterative post-order DFS; graphs can be deep for long convolution chains.
  std::vector<std::pair<detail::TensorNode*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      detail::TensorNode* child = node->parents[next_child].get();
      ++next_child;
      if (child && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children; reverse for backprop
}

}  // namespace

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
  if (!loss.is_scalar()) throw std::invalid_argument("backward: loss must be a scalar");
  if (!loss.requires_grad())
    throw std::invalid_argument("backward: loss does not require gradients");

  auto order = topo_order(loss.node());
  for (auto* n : order) n->grad.assign(n->data.size(), 0.0);
  loss.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

std::vector<std::vector<double>> grad(const Tensor& loss, const std::vector<Tensor>& params) {
  backward(loss);
  auto reachable = topo_order(loss.node());
  std::unordered_set<detail::TensorNode*> set(reachable.begin(), reachable.end());
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    if (set.count(p.node())) {
      out.push_back(p.node()->grad);
    } else {
      out.emplace_back(p.data().size(), 0.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// plain helpers

std::vector<double> interp_linear(const std::vector<double>& x, int r) {
  if (x.empty()) throw std::invalid_argument("interp_linear: empty input");
  if (r < 1) throw std::invalid_argument("interp_linear: r must be >= 1");
  const std::size_t in_len = x.size();
  std::vector<double> out(in_len * static_cast<std::size_t>(r));
  for (std::size_t j = 0; j < out.size(); ++j) {
    const std::size_t i = j / static_cast<std::size_t>(r);
    const double frac = static_cast<double>(j % static_cast<std::size_t>(r)) / r;
    const std::size_t i1 = std::min(i + 1, in_len - 1);
    out[j] = (1.0 - frac) * x[i] + frac * x[i1];
  }
  return out;
}

namespace {

int thread_budget() {
  static const int budget = [] {
    if (const char* env = std::getenv("NUWAVE_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(std::min(hc, 8u));
  }();
  return budget;
}

}  // namespace

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  const int workers = static_cast<int>(std::min<std::int64_t>(thread_budget(), n));
  if (workers <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const std::int64_t begin = w * chunk;
    const std::int64_t end = std::min<std::int64_t>(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min<std::int64_t>(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace nuwave
