#include "mmtrack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mmtrack {

namespace {

thread_local Tape* g_active_tape = nullptr;

bool any_requires_grad(const std::vector<Tensor>& inputs) {
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.defined() && t.requires_grad(); });
}

void accumulate(const Tensor& t, std::size_t i, double g) {
  if (t.requires_grad()) t.grad_buffer()[i] += g;
}

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                              shape_str(b));
}

// Binary elementwise ops with an optional single-element operand.
struct Broadcast {
  std::size_t n;
  bool a_scalar;
  bool b_scalar;
  Shape shape;
};

Broadcast broadcast(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return {a.numel(), false, false, a.shape()};
  if (b.numel() == 1) return {a.numel(), false, true, a.shape()};
  if (a.numel() == 1) return {b.numel(), true, false, b.shape()};
  shape_error(op, a.shape(), b.shape());
}

template <class F, class DA, class DB>
Tensor binary_op(std::string_view name, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  require_finite(name, a);
  require_finite(name, b);
  const Broadcast bc = broadcast(name, a, b);
  auto compute = [a, b, bc, f] {
    std::vector<double> out(bc.n);
    const auto ad = a.data();
    const auto bd = b.data();
    for (std::size_t i = 0; i < bc.n; ++i)
      out[i] = f(ad[bc.a_scalar ? 0 : i], bd[bc.b_scalar ? 0 : i]);
    return out;
  };
  auto backward = [a, b, bc, da, db](std::span<const double> g) mutable {
    const auto ad = a.data();
    const auto bd = b.data();
    for (std::size_t i = 0; i < bc.n; ++i) {
      const double x = ad[bc.a_scalar ? 0 : i];
      const double y = bd[bc.b_scalar ? 0 : i];
      accumulate(a, bc.a_scalar ? 0 : i, g[i] * da(x, y));
      accumulate(b, bc.b_scalar ? 0 : i, g[i] * db(x, y));
    }
  };
  return record_op(name, {a, b}, bc.shape, compute, backward);
}

// Unary elementwise op; derivative expressed in terms of input and output.
template <class F, class D>
Tensor unary_op(std::string_view name, const Tensor& a, F f, D d) {
  require_finite(name, a);
  auto compute = [a, f] {
    std::vector<double> out(a.numel());
    const auto ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(ad[i]);
    return out;
  };
  auto backward = [a, d](std::span<const double> g) mutable {
    if (!a.requires_grad()) return;
    const auto ad = a.data();
    auto ga = a.grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * d(ad[i]);
  };
  return record_op(name, {a}, a.shape(), compute, backward);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not hold " +
                                std::to_string(values.size()) + " values");
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  impl->is_leaf = true;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1)
    throw std::invalid_argument("item: tensor of shape " + shape_str(shape()) +
                                " is not a scalar");
  return impl_->data[0];
}

std::span<double> Tensor::grad_buffer() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

Tensor Tensor::detach() const { return from(shape(), impl_->data, false); }

Tensor make_op_output(Shape shape, std::vector<double> values, bool requires_grad) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  impl->is_leaf = !requires_grad;
  return Tensor(std::move(impl));
}

// ---- Tape -------------------------------------------------------------------

void Tape::record(Entry entry) { entries_.push_back(std::move(entry)); }

bool Tape::replay_matches() const {
  for (const auto& e : entries_) {
    const std::vector<double> again = e.recompute();
    const auto stored = e.output.data();
    if (again.size() != stored.size()) return false;
    for (std::size_t i = 0; i < again.size(); ++i) {
      // Bitwise comparison; NaN never appears on a valid tape.
      if (std::memcmp(&again[i], &stored[i], sizeof(double)) != 0) return false;
    }
  }
  return true;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  if (!loss.requires_grad()) return;

  std::size_t end = entries_.size();
  for (std::size_t i = entries_.size(); i-- > 0;) {
    if (entries_[i].output.same(loss)) {
      end = i + 1;
      break;
    }
  }
  for (auto& e : entries_) e.output.clear_grad();

  Tensor root = loss;
  root.grad_buffer()[0] += 1.0;
  for (std::size_t i = end; i-- > 0;) {
    auto& e = entries_[i];
    if (e.output.has_grad()) e.backward();
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

Tensor record_op(std::string_view name, const std::vector<Tensor>& inputs, Shape shape,
                 std::function<std::vector<double>()> compute,
                 std::function<void(std::span<const double>)> backward) {
  std::vector<double> values = compute();
  if (values.size() != shape_numel(shape))
    throw std::logic_error(std::string(name) + ": kernel produced wrong element count");
  Tape* tape = g_active_tape;
  const bool track = tape != nullptr && any_requires_grad(inputs);
  Tensor out = make_op_output(std::move(shape), std::move(values), track);
  if (track) {
    Tensor out_ref = out;
    tape->record(Tape::Entry{
        std::string(name), inputs, out, std::move(compute),
        [out_ref, backward = std::move(backward)]() { backward(out_ref.grad()); }});
  }
  return out;
}

void require_finite(std::string_view op, const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined input");
  for (double v : t.data())
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(op) + ": non-finite input value");
}

// ---- catalog ----------------------------------------------------------------

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary_op(
      "add_scalar", a, [value](double x) { return x + value; }, [](double) { return 1.0; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      "scale", a, [factor](double x) { return x * factor; }, [factor](double) { return factor; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Tensor log(const Tensor& a) {
  for (double v : a.data())
    if (v <= 0.0) throw std::invalid_argument("log: non-positive input");
  return unary_op(
      "log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op("sigmoid", a, sigmoid_value, [](double x) {
    const double s = sigmoid_value(x);
    return s * (1.0 - s);
  });
}

Tensor softplus(const Tensor& a) {
  return unary_op("softplus", a, softplus_value, sigmoid_value);
}

Tensor abs(const Tensor& a) {
  return unary_op(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_finite("matmul", a);
  require_finite("matmul", b);
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto compute = [a, b, m, k, n] {
    std::vector<double> out(m * n, 0.0);
    const auto ad = a.data();
    const auto bd = b.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ad[i * k + p];
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * bd[p * n + j];
      }
    return out;
  };
  auto backward = [a, b, m, k, n](std::span<const double> g) mutable {
    const auto ad = a.data();
    const auto bd = b.data();
    if (a.requires_grad()) {
      auto ga = a.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bd[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (b.requires_grad()) {
      auto gb = b.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = ad[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
    }
  };
  return record_op("matmul", {a, b}, {m, n}, compute, backward);
}

Tensor transpose2d(const Tensor& a) {
  require_finite("transpose2d", a);
  if (a.rank() != 2) throw std::invalid_argument("transpose2d: expected rank 2, got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  auto compute = [a, m, n] {
    std::vector<double> out(m * n);
    const auto ad = a.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ad[i * n + j];
    return out;
  };
  auto backward = [a, m, n](std::span<const double> g) mutable {
    if (!a.requires_grad()) return;
    auto ga = a.grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  };
  return record_op("transpose2d", {a}, {n, m}, compute, backward);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_finite("conv2d", input);
  require_finite("conv2d", weight);
  if (input.rank() != 3) throw std::invalid_argument("conv2d: input must be (C,H,W), got " + shape_str(input.shape()));
  if (weight.rank() != 4 || weight.dim(1) != input.dim(0) || weight.dim(2) != weight.dim(3))
    shape_error("conv2d", input.shape(), weight.shape());
  const std::size_t k = weight.dim(2);
  if (k != 1 && k != 3) throw std::invalid_argument("conv2d: kernel size must be 1 or 3");
  const bool has_bias = bias.defined();
  if (has_bias) {
    require_finite("conv2d", bias);
    if (bias.numel() != weight.dim(0)) shape_error("conv2d", weight.shape(), bias.shape());
  }
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = weight.dim(0);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = h * w;

  auto compute = [=] {
    std::vector<double> out(cout * hw, 0.0);
    const auto x = input.data();
    const auto wt = weight.data();
    for (std::size_t o = 0; o < cout; ++o) {
      double* op = out.data() + o * hw;
      if (has_bias) std::fill(op, op + hw, bias.data()[o]);
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xp = x.data() + c * hw;
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wv = wt[((o * cin + c) * k + ky) * k + kx];
            if (wv == 0.0) continue;
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
            for (std::size_t i = 0; i < h; ++i) {
              const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i) + dy;
              if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
              const std::size_t j0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
              const std::size_t j1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
              const double* src = xp + static_cast<std::size_t>(si) * w;
              double* dst = op + i * w;
              for (std::size_t j = j0; j < j1; ++j) dst[j] += wv * src[j + dx];
            }
          }
      }
    }
    return out;
  };
  auto backward = [=](std::span<const double> g) mutable {
    const auto x = input.data();
    const auto wt = weight.data();
    std::span<double> gx = input.requires_grad() ? input.grad_buffer() : std::span<double>{};
    std::span<double> gw = weight.requires_grad() ? weight.grad_buffer() : std::span<double>{};
    if (has_bias && bias.requires_grad()) {
      Tensor b = bias;
      auto gb = b.grad_buffer();
      for (std::size_t o = 0; o < cout; ++o) {
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) acc += g[o * hw + p];
        gb[o] += acc;
      }
    }
    for (std::size_t o = 0; o < cout; ++o) {
      const double* gp = g.data() + o * hw;
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xp = x.data() + c * hw;
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t widx = ((o * cin + c) * k + ky) * k + kx;
            const double wv = wt[widx];
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
            double wacc = 0.0;
            for (std::size_t i = 0; i < h; ++i) {
              const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i) + dy;
              if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
              const std::size_t j0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
              const std::size_t j1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
              const std::size_t srow = static_cast<std::size_t>(si) * w;
              const double* gr = gp + i * w;
              if (!gw.empty())
                for (std::size_t j = j0; j < j1; ++j) wacc += gr[j] * xp[srow + j + dx];
              if (!gx.empty() && wv != 0.0) {
                double* gxr = gx.data() + c * hw + srow;
                for (std::size_t j = j0; j < j1; ++j) gxr[j + dx] += wv * gr[j];
              }
            }
            if (!gw.empty()) gw[widx] += wacc;
          }
      }
    }
  };
  std::vector<Tensor> inputs{input, weight};
  if (has_bias) inputs.push_back(bias);
  return record_op("conv2d", inputs, {cout, h, w}, compute, backward);
}

namespace {
// Source taps for one output coordinate of a bilinear 2x upsample.
struct Tap {
  std::size_t lo, hi;
  double w_lo, w_hi;
};

std::vector<Tap> upsample_taps(std::size_t n) {
  std::vector<Tap> taps(2 * n);
  for (std::size_t o = 0; o < 2 * n; ++o) {
    double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(n - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double f = src - static_cast<double>(lo);
    taps[o] = {lo, hi, 1.0 - f, f};
  }
  return taps;
}
}  // namespace

Tensor upsample2x(const Tensor& input) {
  require_finite("upsample2x", input);
  if (input.rank() != 3) throw std::invalid_argument("upsample2x: input must be (C,H,W), got " + shape_str(input.shape()));
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const auto ty = upsample_taps(h);
  const auto tx = upsample_taps(w);
  const std::size_t oh = 2 * h, ow = 2 * w;
  auto compute = [input, c, h, w, oh, ow, ty, tx] {
    std::vector<double> out(c * oh * ow);
    const auto x = input.data();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const double* xp = x.data() + ch * h * w;
          const Tap& a = ty[i];
          const Tap& b = tx[j];
          out[(ch * oh + i) * ow + j] =
              a.w_lo * (b.w_lo * xp[a.lo * w + b.lo] + b.w_hi * xp[a.lo * w + b.hi]) +
              a.w_hi * (b.w_lo * xp[a.hi * w + b.lo] + b.w_hi * xp[a.hi * w + b.hi]);
        }
    return out;
  };
  auto backward = [input, c, h, w, oh, ow, ty, tx](std::span<const double> g) mutable {
    if (!input.requires_grad()) return;
    auto gx = input.grad_buffer();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const double gv = g[(ch * oh + i) * ow + j];
          double* gp = gx.data() + ch * h * w;
          const Tap& a = ty[i];
          const Tap& b = tx[j];
          gp[a.lo * w + b.lo] += gv * a.w_lo * b.w_lo;
          gp[a.lo * w + b.hi] += gv * a.w_lo * b.w_hi;
          gp[a.hi * w + b.lo] += gv * a.w_hi * b.w_lo;
          gp[a.hi * w + b.hi] += gv * a.w_hi * b.w_hi;
        }
  };
  return record_op("upsample2x", {input}, {c, oh, ow}, compute, backward);
}

Tensor transpose_hw(const Tensor& input) {
  require_finite("transpose_hw", input);
  if (input.rank() != 3) throw std::invalid_argument("transpose_hw: input must be (C,H,W), got " + shape_str(input.shape()));
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  auto compute = [input, c, h, w] {
    std::vector<double> out(c * h * w);
    const auto x = input.data();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) out[(ch * w + j) * h + i] = x[(ch * h + i) * w + j];
    return out;
  };
  auto backward = [input, c, h, w](std::span<const double> g) mutable {
    if (!input.requires_grad()) return;
    auto gx = input.grad_buffer();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) gx[(ch * h + i) * w + j] += g[(ch * w + j) * h + i];
  };
  return record_op("transpose_hw", {input}, {c, w, h}, compute, backward);
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  std::size_t channels = 0;
  for (const auto& p : parts) {
    require_finite("concat_channels", p);
    if (p.rank() != 3 || p.dim(1) != parts[0].dim(1) || p.dim(2) != parts[0].dim(2))
      shape_error("concat_channels", parts[0].shape(), p.shape());
    channels += p.dim(0);
  }
  const std::size_t h = parts[0].dim(1), w = parts[0].dim(2);
  auto compute = [parts] {
    std::vector<double> out;
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    return out;
  };
  auto backward = [parts](std::span<const double> g) mutable {
    std::size_t offset = 0;
    for (auto& p : parts) {
      if (p.requires_grad()) {
        auto gp = p.grad_buffer();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
      }
      offset += p.numel();
    }
  };
  return record_op("concat_channels", parts, {channels, h, w}, compute, backward);
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_finite("reshape", a);
  if (shape_numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
  auto compute = [a] { return std::vector<double>(a.data().begin(), a.data().end()); };
  auto backward = [a](std::span<const double> g) mutable {
    if (!a.requires_grad()) return;
    auto ga = a.grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  };
  return record_op("reshape", {a}, std::move(shape), compute, backward);
}

Tensor sum(const Tensor& a) {
  require_finite("sum", a);
  auto compute = [a] {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    return std::vector<double>{acc};
  };
  auto backward = [a](std::span<const double> g) mutable {
    if (!a.requires_grad()) return;
    for (double& v : a.grad_buffer()) v += g[0];
  };
  return record_op("sum", {a}, {}, compute, backward);
}

Tensor mean(const Tensor& a) {
  require_finite("mean", a);
  if (a.numel() == 0) throw std::invalid_argument("mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(a.numel());
  auto compute = [a, inv] {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    return std::vector<double>{acc * inv};
  };
  auto backward = [a, inv](std::span<const double> g) mutable {
    if (!a.requires_grad()) return;
    for (double& v : a.grad_buffer()) v += g[0] * inv;
  };
  return record_op("mean", {a}, {}, compute, backward);
}

// ---- gradient checking ----------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& fn, const Tensor& point,
                           double step, double tol) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  Tensor x = Tensor::from(point.shape(), std::vector<double>(point.data().begin(), point.data().end()), true);
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = fn(x);
    tape.backward(loss);
  }
  std::vector<double> analytic(x.numel(), 0.0);
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

  GradCheckReport report;
  report.tolerance = tol;
  Tensor probe = point.detach();
  auto pd = probe.mutable_data();
  for (std::size_t i = 0; i < probe.numel(); ++i) {
    const double orig = pd[i];
    pd[i] = orig + step;
    const double fp = fn(probe).item();
    pd[i] = orig - step;
    const double fm = fn(probe).item();
    pd[i] = orig;
    const double numeric = (fp - fm) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    report.errors.push_back(err);
    report.max_error = std::max(report.max_error, err);
  }
  report.passed = report.max_error < tol;
  return report;
}

GradCheckReport grad_check_params(const std::function<Tensor()>& loss_fn,
                                  std::vector<Tensor> params, double step, double tol,
                                  std::size_t max_per_tensor, std::uint64_t seed) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  for (auto& p : params) {
    p.clear_grad();
    p.set_requires_grad(true);
  }
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
  }
  GradCheckReport report;
  report.tolerance = tol;
  std::mt19937_64 rng(seed);
  for (auto& p : params) {
    std::vector<double> analytic(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    p.clear_grad();
    std::vector<std::size_t> idx(p.numel());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (max_per_tensor > 0 && idx.size() > max_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_tensor);
    }
    auto pd = p.mutable_data();
    for (std::size_t i : idx) {
      const double orig = pd[i];
      pd[i] = orig + step;
      const double fp = loss_fn().item();
      pd[i] = orig - step;
      const double fm = loss_fn().item();
      pd[i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      report.errors.push_back(err);
      report.max_error = std::max(report.max_error, err);
    }
  }
  report.passed = report.max_error < tol;
  return report;
}

// ---- optimization ---------------------------------------------------------

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("sgd: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("sgd: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("sgd: epochs must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("sgd: momentum must be in [0, 1)");
}

void sgd_step(std::span<NamedTensor> params, const SgdConfig& config) {
  config.validate();
  for (const auto& p : params)
    if (!p.tensor.has_grad()) throw std::invalid_argument("sgd_step: parameter '" + p.name + "' has no gradient");
  for (auto& p : params) {
    auto d = p.tensor.mutable_data();
    const auto g = p.tensor.grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= config.learning_rate * g[i];
    p.tensor.clear_grad();
  }
}

SgdOptimizer::SgdOptimizer(SgdConfig config) : config_(config) { config_.validate(); }

void SgdOptimizer::step(std::span<NamedTensor> params) {
  if (config_.momentum == 0.0) {
    sgd_step(params, config_);
    return;
  }
  for (const auto& p : params)
    if (!p.tensor.has_grad()) throw std::invalid_argument("sgd_step: parameter '" + p.name + "' has no gradient");
  if (velocity_.size() != params.size()) {
    velocity_.assign(params.size(), {});
    for (std::size_t k = 0; k < params.size(); ++k) velocity_[k].assign(params[k].tensor.numel(), 0.0);
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto d = params[k].tensor.mutable_data();
    const auto g = params[k].tensor.grad();
    auto& v = velocity_[k];
    for (std::size_t i = 0; i < d.size(); ++i) {
      v[i] = config_.momentum * v[i] + g[i];
      d[i] -= config_.learning_rate * v[i];
    }
    params[k].tensor.clear_grad();
  }
}

Tensor init_uniform(const std::string& name, Shape shape, std::size_t fan_in, std::uint64_t seed,
                    bool requires_grad) {
  const double k = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::mt19937_64 rng(fnv1a(name) ^ (seed * 0x9E3779B97F4A7C15ULL));
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = (2.0 * u - 1.0) * k;
  }
  return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

}  // namespace mmtrack
