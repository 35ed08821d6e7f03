#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace nuwave {

namespace detail {

struct TensorNode {
  std::vector<std::int64_t> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Pulls this node's grad into the parents' grads. Empty for leaves.
  std::function<void(TensorNode&)> backprop;
};

}  // namespace detail

// Disables tape recording for the enclosing scope (inference paths).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Dense n-dimensional array of 64-bit reals, row-major, with a dynamically
// recorded reverse-mode tape over a fixed operation set. Values are
// immutable once produced by an operation; mutable_data() exists for the
// optimizer and parameter loading, which only ever touch leaves.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::int64_t> shape, bool requires_grad = false);
  static Tensor from_data(std::vector<double> data, std::vector<std::int64_t> shape,
                          bool requires_grad = false);
  static Tensor from_vector(std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::int64_t>& shape() const;
  std::int64_t numel() const;
  bool is_scalar() const { return numel() == 1; }
  double item() const;

  const std::vector<double>& data() const;
  std::vector<double>& mutable_data();
  bool requires_grad() const;

  // Valid after backward()/grad() visited this tensor.
  const std::vector<double>& grad_data() const;

  bool all_finite() const;

  detail::TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend Tensor make_op_result(std::vector<std::int64_t> shape, std::vector<double> data,
                               std::vector<Tensor> parents,
                               std::function<void(detail::TensorNode&)> backprop);
};

// Elementwise; shapes must match exactly (no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor log(const Tensor& a);
// max(a, floor) elementwise; gradient passes through where a > floor.
Tensor clamp_min(const Tensor& a, double floor);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// y = W x + b with W: [out, in], x: [in], b: [out].
Tensor linear(const Tensor& weight, const Tensor& x, const Tensor& bias);

// Non-causal dilated convolution with symmetric zero padding of
// (K-1)*dilation/2 per side; output length equals input length.
// input: [C_in, L], weight: [C_out, C_in, K] with K odd, bias: [C_out].
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int dilation);

// x: [C, L] plus per-channel bias b: [C], broadcast over positions.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// Channels [c0, c1) of a [C, L] tensor.
Tensor slice_channels(const Tensor& x, std::int64_t c0, std::int64_t c1);

// Length-r*L linear interpolation of a 1-D signal: output j reads source
// coordinate j/r; positions past the last sample replicate it.
Tensor interp_upsample(const Tensor& x, int r);

Tensor reshape(const Tensor& x, std::vector<std::int64_t> shape);

// Reverse-mode accumulation from a scalar loss. Gradients of all reachable
// nodes are reset first, so repeated calls do not mix passes.
void backward(const Tensor& loss);

// Gradient arrays for params, aligned with the input order. Parameters not
// on any path to the loss get zeros.
std::vector<std::vector<double>> grad(const Tensor& loss, const std::vector<Tensor>& params);

// Plain-data linear interpolation, shared with the signal pipeline so the
// baseline upsampler and the network conditioner use identical geometry.
std::vector<double> interp_linear(const std::vector<double>& x, int r);

// Deterministic static-partition parallel loop; each index is processed by
// exactly one worker so results do not depend on the thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace nuwave
