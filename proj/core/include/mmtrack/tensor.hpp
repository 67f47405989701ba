#pragma once

// Dense float64 tensors with a define-by-run tape for reverse-mode
// differentiation. The operation catalog is deliberately small: it covers
// exactly what the motion network needs. Domain kernels (selective scan,
// cross-correlation) register themselves on the tape through record_op().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmtrack {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double operator[](std::size_t i) const { return impl_->data[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }
  bool is_leaf() const { return impl_->is_leaf; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  // Allocates a zero gradient buffer on first use.
  std::span<double> grad_buffer() const;  // handle semantics: grads live in the shared impl
  void clear_grad() { impl_->grad.clear(); }

  // Deep copy of values only; the copy is a fresh leaf.
  Tensor detach() const;

  bool same(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;

  friend Tensor make_op_output(Shape, std::vector<double>, bool);
};

// Ordered record of executed operations. Every operation's inputs are
// produced earlier on the tape or are leaves.
class Tape {
 public:
  struct Entry {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<std::vector<double>()> recompute;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(Entry entry);
  std::size_t size() const { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }

  // Re-executes every recorded operation from its recorded inputs and
  // reports whether each output is bitwise identical to the stored value.
  bool replay_matches() const;

  // Populates gradients of every requires_grad tensor reachable from loss.
  // Leaf gradients accumulate across calls; intermediate ones are reset.
  void backward(const Tensor& loss);

 private:
  std::vector<Entry> entries_;
};

// Makes a tape the active recording target for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// Creates an op result. When any input requires grad and a tape is active
// the result requires grad as well and the entry is recorded.
Tensor make_op_output(Shape shape, std::vector<double> values, bool requires_grad);

// Registers a custom differentiable op. `backward` receives the output
// gradient and must accumulate into inputs that require grad.
Tensor record_op(std::string_view name, const std::vector<Tensor>& inputs, Shape shape,
                 std::function<std::vector<double>()> compute,
                 std::function<void(std::span<const double> out_grad)> backward);

// Throws std::invalid_argument if any value is NaN or infinite.
void require_finite(std::string_view op, const Tensor& t);

// ---- operation catalog ----------------------------------------------------
// Binary elementwise ops accept identical shapes, or a single-element operand
// on either side (scalar-with-tensor). No other broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double value);
Tensor scale(const Tensor& a, double factor);
Tensor neg(const Tensor& a);

// (m, k) x (k, n) -> (m, n)
Tensor matmul(const Tensor& a, const Tensor& b);
// (m, n) -> (n, m)
Tensor transpose2d(const Tensor& a);

// Input (C, H, W), weight (O, C, k, k) with k in {1, 3}, optional bias (O).
// Stride 1, zero padding k / 2.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias = {});
// Bilinear 2x upsample of (C, H, W) with half-pixel centers and edge clamp.
Tensor upsample2x(const Tensor& input);
// (C, H, W) -> (C, W, H)
Tensor transpose_hw(const Tensor& input);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor abs(const Tensor& a);

Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& a, Shape shape);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Numerically stable scalar helpers shared by the kernels and the losses.
double sigmoid_value(double x);
double softplus_value(double x);

// ---- gradient checking ----------------------------------------------------
struct GradCheckReport {
  std::vector<double> errors;  // per checked element
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Relative error per element is |analytic - numeric| / max(1, |analytic|),
// numeric being the central difference with the given step.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& fn, const Tensor& point,
                           double step, double tol);

// Same check against parameters captured by `loss_fn`. `max_per_tensor`
// limits how many elements of each parameter are probed (0 = all); the
// probed indices are drawn deterministically from `seed`.
GradCheckReport grad_check_params(const std::function<Tensor()>& loss_fn,
                                  std::vector<Tensor> params, double step, double tol,
                                  std::size_t max_per_tensor = 0, std::uint64_t seed = 0);

// ---- optimization ---------------------------------------------------------
struct SgdConfig {
  double learning_rate = 0.0001;
  int batch_size = 8;
  int epochs = 10;
  // Heavy-ball momentum; 0 gives the plain update.
  double momentum = 0.0;

  void validate() const;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// p <- p - lr * grad(p), then clears the gradient.
void sgd_step(std::span<NamedTensor> params, const SgdConfig& config);

// Plain SGD with optional momentum buffers keyed by parameter order.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig config);
  void step(std::span<NamedTensor> params);
  const SgdConfig& config() const { return config_; }

 private:
  SgdConfig config_;
  std::vector<std::vector<double>> velocity_;
};

// Uniform in [-k, k], k = 1 / sqrt(fan_in). The stream is seeded from the
// parameter name mixed with `seed`, so initialization never depends on
// construction order.
Tensor init_uniform(const std::string& name, Shape shape, std::size_t fan_in,
                    std::uint64_t seed, bool requires_grad = true);

// ---- checkpoints ----------------------------------------------------------
// "MMCK", u32 version, then records of
// (u32 name length, name, u32 rank, u32 dims..., f32 LE values) until EOF.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, std::span<const NamedTensor> params);
std::vector<NamedTensor> load_checkpoint(const std::string& path);
// Copies checkpoint values into `params` by name; every parameter must be
// present with a matching shape.
void restore_checkpoint(const std::string& path, std::span<NamedTensor> params);

}  // namespace mmtrack
