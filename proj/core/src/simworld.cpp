#include "mmtrack/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mmtrack {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent streams per purpose, so adding draws to one never shifts another.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
  return std::mt19937_64(splitmix(seed * 0x100000001B3ULL + purpose));
}

double unit_hash(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t h = splitmix(splitmix(a) ^ (b + 0x632BE59BD9B4E019ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

bool in_rate(double v) { return v >= 0.0 && v <= 1.0; }

struct Mover {
  int id;
  int category;
  double x, y, w, h;
  double vx, vy;
};

}  // namespace

Rigid Rigid::then(const Rigid& next) const {
  Rigid r;
  r.cos_t = next.cos_t * cos_t - next.sin_t * sin_t;
  r.sin_t = next.sin_t * cos_t + next.cos_t * sin_t;
  next.apply(tx, ty, r.tx, r.ty);
  return r;
}

Rigid Rigid::inverse() const {
  Rigid r;
  r.cos_t = cos_t;
  r.sin_t = -sin_t;
  r.tx = -(cos_t * tx + sin_t * ty);
  r.ty = -(-sin_t * tx + cos_t * ty);
  return r;
}

Rigid Rigid::from_step(const CameraStep& step, double cx, double cy) {
  Rigid r;
  r.cos_t = std::cos(step.theta);
  r.sin_t = std::sin(step.theta);
  r.tx = cx - (r.cos_t * cx - r.sin_t * cy) + step.tx;
  r.ty = cy - (r.sin_t * cx + r.cos_t * cy) + step.ty;
  return r;
}

void SceneConfig::validate() const {
  if (height == 0 || width == 0 || height % 32 != 0 || width % 32 != 0)
    throw std::invalid_argument("scene: H and W must be positive multiples of 32");
  if (!(speed_min >= 0.0 && speed_min <= speed_max)) throw std::invalid_argument("scene: bad speed range");
  if (!(size_min > 0.0 && size_min <= size_max)) throw std::invalid_argument("scene: bad size range");
  if (!in_rate(spawn_prob) || !in_rate(false_positive_rate) || !in_rate(drop_threshold))
    throw std::invalid_argument("scene: rates must lie in [0, 1]");
  if (box_noise < 0.0 || turn_std < 0.0) throw std::invalid_argument("scene: noise must be >= 0");
  if (categories < 1 || feature_channels == 0) throw std::invalid_argument("scene: need >= 1 category and channel");
  if (camera.heading_drift < 0.0 || camera.min_translation > camera.max_translation ||
      camera.min_rotation > camera.max_rotation)
    throw std::invalid_argument("scene: bad camera schedule");
  blur.validate();
}

std::vector<FrameDetections> SequenceData::plain_detections() const {
  std::vector<FrameDetections> out(detections.size());
  for (std::size_t f = 0; f < detections.size(); ++f)
    for (const auto& d : detections[f]) out[f].push_back(d.det);
  return out;
}

std::vector<std::string> scenario_names() { return {"still", "pan", "rotate", "pan+blur"}; }

SceneConfig scenario(const std::string& name, std::uint64_t seed) {
  SceneConfig c;
  c.name = name;
  c.seed = seed;
  c.false_positive_rate = 0.2;
  if (name == "still") {
    c.camera.kind = CameraKind::still;
  } else if (name == "pan") {
    c.camera.kind = CameraKind::pan;
  } else if (name == "rotate") {
    c.camera.kind = CameraKind::rotate;
    // Rotation alone moves pixels by < 2 px/frame here, so the objects
    // themselves carry the large motion in this scene.
    c.speed_min = 8.0;
    c.speed_max = 14.0;
    c.turn_std = 0.15;
  } else if (name == "pan+blur") {
    c.camera.kind = CameraKind::pan;
    c.speed_max = 30.0;
    c.blur.beta = 0.75;
    c.blur.v_sat = 40.0;
    c.evidence.blur = c.blur;
  } else {
    std::string valid;
    for (const auto& n : scenario_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown scenario '" + name + "' (valid: " + valid + ")");
  }
  return c;
}

double blur_score(double speed, const BlurModel& model) {
  if (speed < 0.0) throw std::invalid_argument("blur_score: speed must be >= 0");
  return model.mean_score(speed);
}

namespace {

std::vector<CameraStep> realize_camera(const SceneConfig& cfg, std::size_t steps) {
  if (!cfg.camera_steps.empty()) {
    std::vector<CameraStep> out(steps);
    for (std::size_t t = 0; t < steps; ++t) out[t] = cfg.camera_steps[std::min(t, cfg.camera_steps.size() - 1)];
    return out;
  }
  auto rng = stream(cfg.seed, 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  const CameraSchedule& cs = cfg.camera;
  std::vector<CameraStep> out(steps);
  switch (cs.kind) {
    case CameraKind::still: break;
    case CameraKind::pan: {
      // fixed speed, slowly wandering heading
      const double mag = cs.min_translation + (cs.max_translation - cs.min_translation) * u01(rng);
      double heading = 2.0 * std::numbers::pi * u01(rng);
      for (auto& step : out) {
        step.tx = mag * std::cos(heading);
        step.ty = mag * std::sin(heading);
        heading += cs.heading_drift * n01(rng);
      }
      break;
    }
    case CameraKind::rotate: {
      const double mag = cs.min_rotation + (cs.max_rotation - cs.min_rotation) * u01(rng);
      const double theta = u01(rng) < 0.5 ? -mag : mag;
      for (auto& step : out) step.theta = theta;
      break;
    }
  }
  return out;
}

}  // namespace

SequenceData generate_sequence(const SceneConfig& cfg, std::size_t n_frames) {
  cfg.validate();
  if (n_frames < 2) throw std::invalid_argument("generate_sequence: need at least 2 frames");
  SequenceData seq;
  seq.config = cfg;
  seq.camera = realize_camera(cfg, n_frames - 1);

  const double W = static_cast<double>(cfg.width), H = static_cast<double>(cfg.height);
  const double cx = 0.5 * W, cy = 0.5 * H;
  seq.poses.push_back(Rigid{});
  for (const auto& step : seq.camera) seq.poses.push_back(seq.poses.back().then(Rigid::from_step(step, cx, cy)));

  auto rng = stream(cfg.seed, 2);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<Mover> movers;
  // last frame's objects carried by the camera alone; a newcomer placed on
  // one of them would be indistinguishable from an object that just left
  std::vector<Mover> ghosts;
  int next_id = 1;

  const auto spawn = [&]() {
    const double margin = 0.5 * cfg.size_max;
    Mover m{};
    for (int attempt = 0; attempt < 20; ++attempt) {
      m.w = cfg.size_min + (cfg.size_max - cfg.size_min) * u01(rng);
      m.h = cfg.size_min + (cfg.size_max - cfg.size_min) * u01(rng);
      m.x = margin + (W - 2 * margin) * u01(rng);
      m.y = margin + (H - 2 * margin) * u01(rng);
      const Box b{m.x, m.y, m.w, m.h};
      const auto hits = [&](const Mover& o) { return iou(b, Box{o.x, o.y, o.w, o.h}) > 0.0; };
      const bool clear = std::none_of(movers.begin(), movers.end(), hits) && std::none_of(ghosts.begin(), ghosts.end(), hits);
      if (clear) break;
      if (attempt == 19) return;  // crowded: try again on a later frame
    }
    const double speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * u01(rng);
    const double heading = 2.0 * std::numbers::pi * u01(rng);
    m.vx = speed * std::cos(heading);
    m.vy = speed * std::sin(heading);
    m.category = static_cast<int>(u01(rng) * cfg.categories) % cfg.categories;
    m.id = next_id++;
    movers.push_back(m);
  };

  for (std::size_t i = 0; i < cfg.n_objects; ++i) spawn();
  for (std::size_t t = 0; t < n_frames; ++t) {
    FrameAnnotations frame;
    for (const auto& m : movers) frame.push_back({m.id, Box{m.x, m.y, m.w, m.h}, m.category});
    seq.annotations.push_back(std::move(frame));
    if (t + 1 == n_frames) break;

    const Rigid step = Rigid::from_step(seq.camera[t], cx, cy);
    const auto overlaps = [](const Mover& m, const std::vector<Mover>& others) {
      return std::any_of(others.begin(), others.end(), [&](const Mover& o) {
        return iou(Box{m.x, m.y, m.w, m.h}, Box{o.x, o.y, o.w, o.h}) > 0.0;
      });
    };
    std::vector<Mover> kept;
    for (const auto& m0 : movers) {
      double a = 0.0;
      if (cfg.turn_std > 0.0) a = cfg.turn_std * n01(rng);
      // Boxes never overlap, so every cell of the painted motion map belongs
      // to at most one object: bounce back, then stand still, else leave.
      Mover m = m0;
      bool placed = false;
      for (double k : {1.0, -1.0, 0.0}) {
        m = m0;
        step.apply(m0.x + k * m0.vx, m0.y + k * m0.vy, m.x, m.y);
        if (!overlaps(m, kept)) {
          placed = true;
          if (k < 0.0) m.vx = -m0.vx, m.vy = -m0.vy;
          break;
        }
      }
      if (!placed) continue;
      // velocity lives in image axes, so it turns with the camera
      const double vx = step.cos_t * m.vx - step.sin_t * m.vy;
      const double vy = step.sin_t * m.vx + step.cos_t * m.vy;
      m.vx = std::cos(a) * vx - std::sin(a) * vy;
      m.vy = std::sin(a) * vx + std::cos(a) * vy;
      if (m.x >= 0.0 && m.x < W && m.y >= 0.0 && m.y < H) kept.push_back(m);
    }
    ghosts = movers;
    for (auto& g : ghosts) {
      const double x = g.x, y = g.y;
      step.apply(x, y, g.x, g.y);
    }
    movers = std::move(kept);
    const std::size_t missing = cfg.n_objects > movers.size() ? cfg.n_objects - movers.size() : 0;
    for (std::size_t i = 0; i < missing; ++i)
      if (u01(rng) < cfg.spawn_prob) spawn();
  }

  seq.detections = detector_sim(seq, cfg);
  return seq;
}

double apparent_speed(const SequenceData& seq, std::size_t t, int id) {
  const auto find = [&](std::size_t f) -> const Annotation* {
    if (f >= seq.annotations.size()) return nullptr;
    for (const auto& a : seq.annotations[f])
      if (a.id == id) return &a;
    return nullptr;
  };
  const Annotation* now = find(t);
  if (now == nullptr) throw std::invalid_argument("apparent_speed: id not present in frame");
  const Annotation* other = find(t + 1);
  if (other == nullptr && t > 0) other = find(t - 1);
  if (other == nullptr) return 0.0;
  return std::hypot(other->box.cx - now->box.cx, other->box.cy - now->box.cy);
}

std::vector<std::vector<SimDetection>> detector_sim(const SequenceData& seq, const SceneConfig& cfg) {
  cfg.validate();
  auto rng = stream(cfg.seed, 3);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double W = static_cast<double>(cfg.width), H = static_cast<double>(cfg.height);
  std::vector<std::vector<SimDetection>> out(seq.annotations.size());
  for (std::size_t f = 0; f < seq.annotations.size(); ++f) {
    for (const auto& a : seq.annotations[f]) {
      SimDetection d;
      d.gt_id = a.id;
      d.speed = apparent_speed(seq, f, a.id);
      d.det.category = a.category;
      d.det.box = a.box;
      if (cfg.box_noise > 0.0) {
        d.det.box.cx += cfg.box_noise * n01(rng);
        d.det.box.cy += cfg.box_noise * n01(rng);
        d.det.box.w = std::max(1.0, d.det.box.w + cfg.box_noise * n01(rng));
        d.det.box.h = std::max(1.0, d.det.box.h + cfg.box_noise * n01(rng));
      }
      d.det.score = cfg.blur.sample_score(d.speed, rng);
      d.evidence = positive_evidence(d.speed, cfg.evidence, rng);
      if (d.det.score < cfg.drop_threshold) continue;
      out[f].push_back(d);
    }
    if (u01(rng) < cfg.false_positive_rate) {
      SimDetection d;
      d.det.box.w = cfg.size_min + (cfg.size_max - cfg.size_min) * u01(rng);
      d.det.box.h = cfg.size_min + (cfg.size_max - cfg.size_min) * u01(rng);
      d.det.box.cx = W * u01(rng);
      d.det.box.cy = H * u01(rng);
      d.det.score = 0.1 + 0.6 * u01(rng);
      d.det.category = static_cast<int>(u01(rng) * cfg.categories) % cfg.categories;
      d.evidence = negative_evidence(cfg.evidence, rng);
      out[f].push_back(d);
    }
  }
  return out;
}

MotionMap camera_flow(const SequenceData& seq, std::size_t t) {
  if (t >= seq.camera.size()) throw std::out_of_range("camera_flow: no step after frame " + std::to_string(t));
  const auto& cfg = seq.config;
  const Rigid step = Rigid::from_step(seq.camera[t], 0.5 * cfg.width, 0.5 * cfg.height);
  MotionMap flow(cfg.height, cfg.width, 1);
  for (std::size_t y = 0; y < cfg.height; ++y)
    for (std::size_t x = 0; x < cfg.width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double qx, qy;
      step.apply(px, py, qx, qy);
      flow.dx(y, x) = qx - px;
      flow.dy(y, x) = qy - py;
    }
  return flow;
}

MotionMap exact_motion_map(const SequenceData& seq, std::size_t t) {
  const auto& cfg = seq.config;
  return gt_motion_map(seq.annotations.at(t), seq.annotations.at(t + 1), camera_flow(seq, t),
                       cfg.height / 8, cfg.width / 8, 8);
}

FeaturePyramid rasterize_features(const SequenceData& seq, std::size_t t) {
  const auto& cfg = seq.config;
  if (t >= seq.annotations.size()) throw std::out_of_range("rasterize_features: frame out of range");
  constexpr int kWaves = 6;
  const std::size_t C = cfg.feature_channels;
  const Rigid to_world = seq.poses.at(t).inverse();
  const double two_pi = 2.0 * std::numbers::pi;

  FeaturePyramid pyr;
  for (std::size_t l = 0; l < 3; ++l) {
    const int s = kPyramidStrides[l];
    const std::size_t rows = cfg.height / s, cols = cfg.width / s;

    // Per-channel sinusoid bank, fixed by the scene seed and level.
    struct Wave {
      double kx, ky, phase, amp;
    };
    std::vector<Wave> waves(C * kWaves);
    auto rng = stream(cfg.seed, 100 + l);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (auto& w : waves) {
      const double lambda = s * (3.0 + 5.0 * u01(rng));
      const double ang = two_pi * u01(rng);
      w.kx = two_pi / lambda * std::cos(ang);
      w.ky = two_pi / lambda * std::sin(ang);
      w.phase = two_pi * u01(rng);
      w.amp = 1.0 / std::sqrt(static_cast<double>(kWaves));
    }

    std::vector<double> data(C * rows * cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        double wx, wy;
        to_world.apply((c + 0.5) * s, (r + 0.5) * s, wx, wy);
        for (std::size_t ch = 0; ch < C; ++ch) {
          double v = 0.0;
          for (int k = 0; k < kWaves; ++k) {
            const Wave& w = waves[ch * kWaves + k];
            v += w.amp * std::sin(w.kx * wx + w.ky * wy + w.phase);
          }
          data[(ch * rows + r) * cols + c] = v;
        }
      }

    for (const auto& a : seq.annotations[t]) {
      // identity-keyed direction in channel space, fixed norm
      std::vector<double> amp(C);
      double norm = 0.0;
      for (std::size_t ch = 0; ch < C; ++ch) {
        amp[ch] = 2.0 * unit_hash(static_cast<std::uint64_t>(a.id), ch) - 1.0;
        norm += amp[ch] * amp[ch];
      }
      norm = std::sqrt(std::max(norm, 1e-12));
      for (auto& v : amp) v *= cfg.blob_gain * std::sqrt(static_cast<double>(C)) / norm;
      const double sigma = std::max(cfg.blob_sigma * std::sqrt(a.box.area()), 0.5 * s);
      const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
      for (std::size_t r = 0; r < rows; ++r) {
        const double dy = (r + 0.5) * s - a.box.cy;
        for (std::size_t c = 0; c < cols; ++c) {
          const double dx = (c + 0.5) * s - a.box.cx;
          const double g = std::exp(-(dx * dx + dy * dy) * inv2s2);
          if (g < 1e-6) continue;
          for (std::size_t ch = 0; ch < C; ++ch) data[(ch * rows + r) * cols + c] += amp[ch] * g;
        }
      }
    }
    if (cfg.normalize_features)
      for (std::size_t i = 0; i < rows * cols; ++i) {
        double ss = 0.0;
        for (std::size_t ch = 0; ch < C; ++ch) ss += data[ch * rows * cols + i] * data[ch * rows * cols + i];
        const double k = 1.0 / std::sqrt(ss / static_cast<double>(C) + 1e-6);
        for (std::size_t ch = 0; ch < C; ++ch) data[ch * rows * cols + i] *= k;
      }
    pyr.levels[l] = Tensor::from({C, rows, cols}, std::move(data));
  }
  return pyr;
}

std::vector<MotionSample> motion_samples(const SequenceData& seq, std::size_t every) {
  if (every == 0) throw std::invalid_argument("motion_samples: every must be >= 1");
  std::vector<MotionSample> out;
  for (std::size_t t = 0; t + 1 < seq.frame_count(); t += every)
    out.push_back({rasterize_features(seq, t), rasterize_features(seq, t + 1), exact_motion_map(seq, t)});
  return out;
}

}  // namespace mmtrack
