#include "mmtrack/ssm.hpp"

#include <cmath>
#include <stdexcept>

namespace mmtrack {

namespace {

// Token stride and sequence layout of one scan direction over (d, H, W).
struct ScanLayout {
  std::size_t channels, length, sequences;
  std::size_t step;  // element stride between consecutive tokens

  std::size_t base(std::size_t c, std::size_t s, std::size_t h, std::size_t w,
                   ScanDirection dir) const {
    // vertical: sequence s is column s; horizontal: sequence s is row s
    return dir == ScanDirection::vertical ? c * h * w + s : c * h * w + s * w;
  }
};

Tensor silu(const Tensor& x) { return mul(x, sigmoid(x)); }

}  // namespace

SsmParams SsmParams::init(std::size_t width, std::size_t state, const std::string& prefix,
                          std::uint64_t seed) {
  if (width == 0 || state == 0) throw std::invalid_argument("ssm: width and state must be >= 1");
  SsmParams p;
  p.width = width;
  p.state = state;
  p.prefix = prefix;
  std::vector<double> a_log(width * state);
  for (std::size_t c = 0; c < width; ++c)
    for (std::size_t n = 0; n < state; ++n) a_log[c * state + n] = std::log(static_cast<double>(n + 1));
  p.a_log = Tensor::from({width, state}, std::move(a_log), true);
  p.b = init_uniform(prefix + ".b", {width, state}, state, seed);
  p.c = init_uniform(prefix + ".c", {width, state}, state, seed);
  p.d_skip = init_uniform(prefix + ".d", {width}, 1, seed);
  p.dt_w1 = init_uniform(prefix + ".dt_w1", {width, width, 1, 1}, width, seed);
  p.dt_b1 = init_uniform(prefix + ".dt_b1", {width}, width, seed);
  p.dt_w2 = init_uniform(prefix + ".dt_w2", {width, width, 1, 1}, width, seed);
  // Step sizes spread geometrically over [0.02, 0.5] across channels.
  std::vector<double> b2(width);
  for (std::size_t c = 0; c < width; ++c) {
    const double frac = width > 1 ? static_cast<double>(c) / static_cast<double>(width - 1) : 0.5;
    const double dt0 = 0.02 * std::pow(25.0, frac);
    b2[c] = std::log(std::expm1(dt0));
  }
  p.dt_b2 = Tensor::from({width}, std::move(b2), true);
  return p;
}

SsmParams SsmParams::zeros(std::size_t width, std::size_t state, const std::string& prefix) {
  SsmParams p;
  p.width = width;
  p.state = state;
  p.prefix = prefix;
  p.a_log = Tensor::zeros({width, state}, true);
  p.b = Tensor::zeros({width, state}, true);
  p.c = Tensor::zeros({width, state}, true);
  p.d_skip = Tensor::zeros({width}, true);
  p.dt_w1 = Tensor::zeros({width, width, 1, 1}, true);
  p.dt_b1 = Tensor::zeros({width}, true);
  p.dt_w2 = Tensor::zeros({width, width, 1, 1}, true);
  p.dt_b2 = Tensor::zeros({width}, true);
  return p;
}

std::vector<NamedTensor> SsmParams::parameters() const {
  return {{prefix + ".a_log", a_log}, {prefix + ".b", b},         {prefix + ".c", c},
          {prefix + ".d", d_skip},    {prefix + ".dt_w1", dt_w1}, {prefix + ".dt_b1", dt_b1},
          {prefix + ".dt_w2", dt_w2}, {prefix + ".dt_b2", dt_b2}};
}

Tensor SsmParams::realized_a() const { return neg(exp(a_log)); }

void SsmParams::validate() const {
  if (width == 0 || state == 0) throw std::invalid_argument("ssm: width and state must be >= 1");
  const Shape ds{width, state};
  if (a_log.shape() != ds || b.shape() != ds || c.shape() != ds || d_skip.numel() != width)
    throw std::invalid_argument("ssm: parameter shapes inconsistent with width " +
                                std::to_string(width) + " and state " + std::to_string(state));
}

Tensor dt_head(const Tensor& feature, const SsmParams& params) {
  Tensor hidden = silu(conv2d(feature, params.dt_w1, params.dt_b1));
  return softplus(conv2d(hidden, params.dt_w2, params.dt_b2));
}

Tensor scan_kernel(const Tensor& x, const Tensor& dt, const Tensor& a, const Tensor& b,
                   const Tensor& c, const Tensor& d_skip, ScanDirection dir) {
  for (const Tensor* t : {&x, &dt, &a, &b, &c, &d_skip}) require_finite("selective_scan", *t);
  if (x.rank() != 3) throw std::invalid_argument("selective_scan: input must be (d,H,W), got " + shape_str(x.shape()));
  if (dt.shape() != x.shape())
    throw std::invalid_argument("selective_scan: dt shape " + shape_str(dt.shape()) +
                                " does not match input " + shape_str(x.shape()));
  const std::size_t d = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h == 0 || w == 0) throw std::invalid_argument("selective_scan: empty sequence");
  if (a.rank() != 2 || a.dim(0) != d)
    throw std::invalid_argument("selective_scan: token width " + std::to_string(d) +
                                " does not match parameter width " + shape_str(a.shape()));
  const std::size_t n = a.dim(1);
  if (b.shape() != a.shape() || c.shape() != a.shape() || d_skip.numel() != d)
    throw std::invalid_argument("selective_scan: parameter shapes inconsistent");

  const bool vertical = dir == ScanDirection::vertical;
  const ScanLayout lay{d, vertical ? h : w, vertical ? w : h, vertical ? w : 1};

  auto compute = [=] {
    std::vector<double> y(x.numel());
    const auto xd = x.data(), dd = dt.data(), ad = a.data(), bd = b.data(), cd = c.data(),
               sd = d_skip.data();
    std::vector<double> state(n);
    for (std::size_t ch = 0; ch < d; ++ch)
      for (std::size_t s = 0; s < lay.sequences; ++s) {
        std::fill(state.begin(), state.end(), 0.0);
        std::size_t idx = lay.base(ch, s, h, w, dir);
        for (std::size_t t = 0; t < lay.length; ++t, idx += lay.step) {
          const double xv = xd[idx], step = dd[idx];
          double out = sd[ch] * xv;
          for (std::size_t k = 0; k < n; ++k) {
            const std::size_t pk = ch * n + k;
            state[k] = std::exp(ad[pk] * step) * state[k] + bd[pk] * step * xv;
            out += cd[pk] * state[k];
          }
          y[idx] = out;
        }
      }
    return y;
  };

  auto backward = [=](std::span<const double> gy) mutable {
    const auto xd = x.data(), dd = dt.data(), ad = a.data(), bd = b.data(), cd = c.data(),
               sd = d_skip.data();
    auto opt_grad = [](const Tensor& t) { return t.requires_grad() ? t.grad_buffer() : std::span<double>{}; };
    auto gx = opt_grad(x), gdt = opt_grad(dt), ga = opt_grad(a), gb = opt_grad(b), gc = opt_grad(c),
         gd = opt_grad(d_skip);
    const std::size_t len = lay.length;
    std::vector<double> hist((len + 1) * n);  // hist[t+1] = h_t, hist[0] = 0
    std::vector<double> decay(len * n);
    std::vector<double> gh(n);
    for (std::size_t ch = 0; ch < d; ++ch)
      for (std::size_t s = 0; s < lay.sequences; ++s) {
        const std::size_t first = lay.base(ch, s, h, w, dir);
        std::fill(hist.begin(), hist.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
        for (std::size_t t = 0, idx = first; t < len; ++t, idx += lay.step) {
          const double xv = xd[idx], step = dd[idx];
          for (std::size_t k = 0; k < n; ++k) {
            const std::size_t pk = ch * n + k;
            const double e = std::exp(ad[pk] * step);
            decay[t * n + k] = e;
            hist[(t + 1) * n + k] = e * hist[t * n + k] + bd[pk] * step * xv;
          }
        }
        std::fill(gh.begin(), gh.end(), 0.0);
        for (std::size_t t = len; t-- > 0;) {
          const std::size_t idx = first + t * lay.step;
          const double g = gy[idx], xv = xd[idx], step = dd[idx];
          double gxv = g * sd[ch];
          double gstep = 0.0;
          if (!gd.empty()) gd[ch] += g * xv;
          for (std::size_t k = 0; k < n; ++k) {
            const std::size_t pk = ch * n + k;
            const double hk = hist[(t + 1) * n + k];
            const double hprev = hist[t * n + k];
            const double e = decay[t * n + k];
            if (!gc.empty()) gc[pk] += g * hk;
            gh[k] += g * cd[pk];
            const double gdecay = gh[k] * hprev;
            if (!ga.empty()) ga[pk] += gdecay * e * step;
            gstep += gdecay * e * ad[pk] + gh[k] * bd[pk] * xv;
            if (!gb.empty()) gb[pk] += gh[k] * step * xv;
            gxv += gh[k] * bd[pk] * step;
            gh[k] *= e;
          }
          if (!gx.empty()) gx[idx] += gxv;
          if (!gdt.empty()) gdt[idx] += gstep;
        }
      }
  };
  return record_op("selective_scan", {x, dt, a, b, c, d_skip}, x.shape(), compute, backward);
}

Tensor directional_ssm(const Tensor& feature, ScanDirection dir, const SsmParams& params) {
  params.validate();
  if (feature.rank() != 3 || feature.dim(0) != params.width)
    throw std::invalid_argument("directional_ssm: feature " + shape_str(feature.shape()) +
                                " does not match width " + std::to_string(params.width));
  const Tensor dt = dt_head(feature, params);
  return scan_kernel(feature, dt, params.realized_a(), params.b, params.c, params.d_skip, dir);
}

Tensor selective_scan(const Tensor& tokens, const SsmParams& params) {
  params.validate();
  if (tokens.rank() != 2 || tokens.dim(0) == 0)
    throw std::invalid_argument("selective_scan: expected non-empty (L, d) tokens, got " +
                                shape_str(tokens.shape()));
  if (tokens.dim(1) != params.width)
    throw std::invalid_argument("selective_scan: token width " + std::to_string(tokens.dim(1)) +
                                " does not match parameter width " + std::to_string(params.width));
  const std::size_t len = tokens.dim(0);
  // (L, d) -> (d, L) -> (d, L, 1): one column, scanned top to bottom.
  Tensor column = reshape(transpose2d(tokens), {params.width, len, 1});
  Tensor out = directional_ssm(column, ScanDirection::vertical, params);
  return transpose2d(reshape(out, {params.width, len}));
}

Tensor motion_mamba_block(const Tensor& feature, const SsmParams& v_params,
                          const SsmParams& h_params, BlockBranches branches) {
  Tensor out = feature;
  if (branches == BlockBranches::vertical || branches == BlockBranches::both)
    out = add(out, directional_ssm(feature, ScanDirection::vertical, v_params));
  if (branches == BlockBranches::horizontal || branches == BlockBranches::both)
    out = add(out, directional_ssm(feature, ScanDirection::horizontal, h_params));
  return out;
}

}  // namespace mmtrack
