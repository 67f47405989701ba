#include "mmtrack/motionnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mmtrack {

void FeaturePyramid::validate(std::size_t image_h, std::size_t image_w) const {
  if (image_h % 32 != 0 || image_w % 32 != 0)
    throw std::invalid_argument("pyramid: image size must be divisible by 32");
  for (std::size_t l = 0; l < 3; ++l) {
    const auto s = static_cast<std::size_t>(kPyramidStrides[l]);
    const Tensor& t = levels[l];
    if (!t.defined() || t.rank() != 3 || t.dim(1) != image_h / s || t.dim(2) != image_w / s)
      throw std::invalid_argument("pyramid: level " + std::to_string(l) + " has wrong shape");
  }
}

void MotionNetConfig::validate() const {
  if (radius < 1) throw std::invalid_argument("motionnet: radius must be >= 1");
  if (width == 0 || state == 0 || feature_channels == 0 || appearance_channels == 0)
    throw std::invalid_argument("motionnet: widths must be positive");
}

Tensor cross_correlation(const Tensor& f_t, const Tensor& f_t1, int radius) {
  require_finite("cross_correlation", f_t);
  require_finite("cross_correlation", f_t1);
  if (f_t.shape() != f_t1.shape() || f_t.rank() != 3)
    throw std::invalid_argument("cross_correlation: shape mismatch " + shape_str(f_t.shape()) +
                                " vs " + shape_str(f_t1.shape()));
  if (radius < 1) throw std::invalid_argument("cross_correlation: radius must be >= 1");
  const std::size_t c = f_t.dim(0), h = f_t.dim(1), w = f_t.dim(2);
  const auto r = static_cast<std::ptrdiff_t>(radius);
  const std::size_t span = static_cast<std::size_t>(2 * radius + 1);
  const double norm = 1.0 / std::sqrt(static_cast<double>(c));
  const auto hh = static_cast<std::ptrdiff_t>(h), ww = static_cast<std::ptrdiff_t>(w);

  // Calls fn(channel k, out index, a index base, b index base) for every
  // in-bounds (displacement, cell) pair.
  auto visit = [=](auto&& fn) {
    for (std::ptrdiff_t u = -r; u <= r; ++u)
      for (std::ptrdiff_t v = -r; v <= r; ++v) {
        const std::size_t k = static_cast<std::size_t>((u + r) * static_cast<std::ptrdiff_t>(span) + (v + r));
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, -u); i < std::min(hh, hh - u); ++i)
          for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, -v); j < std::min(ww, ww - v); ++j)
            fn(k, static_cast<std::size_t>(i * ww + j), static_cast<std::size_t>((i + u) * ww + (j + v)));
      }
  };

  auto compute = [=] {
    std::vector<double> out(span * span * h * w, 0.0);
    const auto a = f_t.data(), b = f_t1.data();
    const std::size_t hw = h * w;
    visit([&](std::size_t k, std::size_t p, std::size_t q) {
      double acc = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) acc += a[ch * hw + p] * b[ch * hw + q];
      out[k * hw + p] = acc * norm;
    });
    return out;
  };
  auto backward = [=](std::span<const double> g) mutable {
    const auto a = f_t.data(), b = f_t1.data();
    Tensor ta = f_t, tb = f_t1;
    auto ga = ta.requires_grad() ? ta.grad_buffer() : std::span<double>{};
    auto gb = tb.requires_grad() ? tb.grad_buffer() : std::span<double>{};
    const std::size_t hw = h * w;
    visit([&](std::size_t k, std::size_t p, std::size_t q) {
      const double gv = g[k * hw + p] * norm;
      if (gv == 0.0) return;
      for (std::size_t ch = 0; ch < c; ++ch) {
        if (!ga.empty()) ga[ch * hw + p] += gv * b[ch * hw + q];
        if (!gb.empty()) gb[ch * hw + q] += gv * a[ch * hw + p];
      }
    });
  };
  return record_op("cross_correlation", {f_t, f_t1}, {span * span, h, w}, compute, backward);
}

Tensor pyramid_fuse(const Tensor& f8, const Tensor& f16, const Tensor& f32, const Tensor& w16,
                    const Tensor& b16, const Tensor& w8, const Tensor& b8) {
  if (f8.rank() != 3 || f16.rank() != 3 || f32.rank() != 3 || f8.dim(0) != f16.dim(0) ||
      f16.dim(0) != f32.dim(0))
    throw std::invalid_argument("pyramid_fuse: inconsistent level widths " + shape_str(f8.shape()) +
                                ", " + shape_str(f16.shape()) + ", " + shape_str(f32.shape()));
  Tensor mid = add(f16, conv2d(upsample2x(f32), w16, b16));
  return add(f8, conv2d(upsample2x(mid), w8, b8));
}

Tensor motion_head(const Tensor& fused, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 4 || weight.dim(0) != 2)
    throw std::invalid_argument("motion_head: weight must be (2, d, 3, 3), got " + shape_str(weight.shape()));
  return conv2d(fused, weight, bias);
}

Tensor motion_l1_loss(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape())
    throw std::invalid_argument("motion_l1_loss: shape mismatch " + shape_str(pred.shape()) +
                                " vs " + shape_str(gt.shape()));
  return mean(abs(sub(pred, gt)));
}

MotionMap gt_motion_map(const FrameAnnotations& ann_t, const FrameAnnotations& ann_t1,
                        const MotionMap& background_flow, std::size_t out_rows,
                        std::size_t out_cols, int stride) {
  for (const auto* frame : {&ann_t, &ann_t1})
    for (const auto& a : *frame)
      if (!a.box.valid())
        throw std::invalid_argument("gt_motion_map: malformed box for id " + std::to_string(a.id));
  const auto s = static_cast<std::size_t>(stride);
  if (background_flow.rows < out_rows * s || background_flow.cols < out_cols * s)
    throw std::invalid_argument("gt_motion_map: background flow smaller than output grid");

  MotionMap out(out_rows, out_cols, stride);
  const double inv = 1.0 / static_cast<double>(s * s);
  for (std::size_t r = 0; r < out_rows; ++r)
    for (std::size_t c = 0; c < out_cols; ++c) {
      double sx = 0.0, sy = 0.0;
      for (std::size_t y = r * s; y < (r + 1) * s; ++y)
        for (std::size_t x = c * s; x < (c + 1) * s; ++x) {
          sx += background_flow.dx(y, x);
          sy += background_flow.dy(y, x);
        }
      out.dx(r, c) = sx * inv;
      out.dy(r, c) = sy * inv;
    }

  struct Paint {
    Box box;
    double ox, oy;
    int id;
  };
  std::vector<Paint> paints;
  for (const auto& a : ann_t) {
    auto it = std::find_if(ann_t1.begin(), ann_t1.end(), [&](const Annotation& b) { return b.id == a.id; });
    if (it == ann_t1.end()) continue;
    paints.push_back({a.box, it->box.cx - a.box.cx, it->box.cy - a.box.cy, a.id});
  }
  std::sort(paints.begin(), paints.end(), [](const Paint& x, const Paint& y) {
    if (x.box.area() != y.box.area()) return x.box.area() > y.box.area();
    return x.id < y.id;
  });
  for (const auto& p : paints) {
    for (std::size_t r = 0; r < out_rows; ++r) {
      const double yc = (static_cast<double>(r) + 0.5) * stride;
      if (yc < p.box.top() || yc >= p.box.bottom()) continue;
      for (std::size_t c = 0; c < out_cols; ++c) {
        const double xc = (static_cast<double>(c) + 0.5) * stride;
        if (xc < p.box.left() || xc >= p.box.right()) continue;
        out.dx(r, c) = p.ox;
        out.dy(r, c) = p.oy;
      }
    }
  }
  return out;
}

// ---- MotionNet --------------------------------------------------------------

MotionNet::MotionNet(MotionNetConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t d = config_.width, cf = config_.feature_channels, ca = config_.appearance_channels;
  const std::size_t cin = config_.cost_channels() + ca;
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string p = "level" + std::to_string(l);
    Level& lv = levels_[l];
    lv.app_w = init_uniform(p + ".app_w", {ca, cf, 1, 1}, cf, seed);
    lv.app_b = init_uniform(p + ".app_b", {ca}, cf, seed);
    lv.in_w = init_uniform(p + ".in_w", {d, cin, 1, 1}, cin, seed);
    lv.in_b = init_uniform(p + ".in_b", {d}, cin, seed);
    for (std::size_t k = 0; k < config_.blocks_per_level; ++k) {
      const std::string bp = p + ".block" + std::to_string(k);
      lv.blocks.emplace_back(SsmParams::init(d, config_.state, bp + ".v", seed),
                             SsmParams::init(d, config_.state, bp + ".h", seed));
    }
  }
  fuse_w16_ = init_uniform("fuse16.w", {d, d, 1, 1}, d, seed);
  fuse_b16_ = init_uniform("fuse16.b", {d}, d, seed);
  fuse_w8_ = init_uniform("fuse8.w", {d, d, 1, 1}, d, seed);
  fuse_b8_ = init_uniform("fuse8.b", {d}, d, seed);
  head_w_ = init_uniform("head.w", {2, d, 3, 3}, d * 9, seed);
  head_b_ = init_uniform("head.b", {2}, d * 9, seed);
}

Tensor MotionNet::level_motion_features(const Tensor& f_t, const Tensor& f_t1, std::size_t level) const {
  const Level& lv = levels_.at(level);
  if (f_t.rank() != 3 || f_t.dim(0) != config_.feature_channels)
    throw std::invalid_argument("level_motion_features: expected " +
                                std::to_string(config_.feature_channels) + " channels, got " +
                                shape_str(f_t.shape()));
  Tensor cost = cross_correlation(f_t, f_t1, config_.radius);
  Tensor appearance = conv2d(f_t1, lv.app_w, lv.app_b);
  Tensor x = conv2d(concat_channels({cost, appearance}), lv.in_w, lv.in_b);
  for (const auto& [v, h] : lv.blocks) x = motion_mamba_block(x, v, h, config_.branches);
  return x;
}

Tensor MotionNet::forward(const FeaturePyramid& t, const FeaturePyramid& t1) const {
  std::array<Tensor, 3> feats;
  for (std::size_t l = 0; l < 3; ++l) feats[l] = level_motion_features(t.levels[l], t1.levels[l], l);
  Tensor fused = pyramid_fuse(feats[0], feats[1], feats[2], fuse_w16_, fuse_b16_, fuse_w8_, fuse_b8_);
  return motion_head(fused, head_w_, head_b_);
}

MotionMap MotionNet::predict(const FeaturePyramid& t, const FeaturePyramid& t1) const {
  return MotionMap::from_tensor(forward(t, t1), kPyramidStrides[0]);
}

std::vector<NamedTensor> MotionNet::parameters() const {
  std::vector<NamedTensor> out;
  const bool use_v = config_.branches == BlockBranches::vertical || config_.branches == BlockBranches::both;
  const bool use_h = config_.branches == BlockBranches::horizontal || config_.branches == BlockBranches::both;
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string p = "level" + std::to_string(l);
    const Level& lv = levels_[l];
    out.push_back({p + ".app_w", lv.app_w});
    out.push_back({p + ".app_b", lv.app_b});
    out.push_back({p + ".in_w", lv.in_w});
    out.push_back({p + ".in_b", lv.in_b});
    for (const auto& [v, h] : lv.blocks) {
      if (use_v)
        for (auto& nt : v.parameters()) out.push_back(nt);
      if (use_h)
        for (auto& nt : h.parameters()) out.push_back(nt);
    }
  }
  out.push_back({"fuse16.w", fuse_w16_});
  out.push_back({"fuse16.b", fuse_b16_});
  out.push_back({"fuse8.w", fuse_w8_});
  out.push_back({"fuse8.b", fuse_b8_});
  out.push_back({"head.w", head_w_});
  out.push_back({"head.b", head_b_});
  return out;
}

TrainResult train_motion(MotionNet& net, const std::vector<MotionSample>& dataset,
                         const SgdConfig& sgd, std::uint64_t seed) {
  sgd.validate();
  if (dataset.empty()) throw std::invalid_argument("train_motion: empty dataset");
  auto params = net.parameters();
  SgdOptimizer optimizer(sgd);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(dataset.size());
  TrainResult result;
  for (int epoch = 0; epoch < sgd.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(sgd.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(sgd.batch_size));
      const double weight = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const MotionSample& s = dataset[order[k]];
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = motion_l1_loss(net.forward(s.t, s.t1), s.gt.to_tensor());
        epoch_sum += loss.item();
        tape.backward(scale(loss, weight));
      }
      optimizer.step(params);
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(dataset.size()));
  }
  return result;
}

double evaluate_motion(const MotionNet& net, const std::vector<MotionSample>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("evaluate_motion: empty dataset");
  double total = 0.0;
  for (const auto& s : dataset) total += motion_l1_loss(net.forward(s.t, s.t1), s.gt.to_tensor()).item();
  return total / static_cast<double>(dataset.size());
}

}  // namespace mmtrack
