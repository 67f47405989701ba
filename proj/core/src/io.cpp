#include "mmtrack/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mmtrack {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path, bool binary = false) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return is;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Data rows of a CSV file: comments and blank lines skipped.
std::vector<std::vector<std::string>> csv_rows(const fs::path& path, std::size_t min_fields) {
  auto is = open_in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (fields.size() < min_fields)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(min_fields) + " fields");
    rows.push_back(std::move(fields));
  }
  return rows;
}

double num(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw std::runtime_error("bad number '" + s + "'");
  return v;
}

int integer(const std::string& s) {
  const double v = num(s);
  if (v != static_cast<double>(static_cast<int>(v))) throw std::runtime_error("bad integer '" + s + "'");
  return static_cast<int>(v);
}

std::size_t frame_index(const std::string& s, std::size_t n_frames, const fs::path& path) {
  const int f = integer(s);
  if (f < 1 || static_cast<std::size_t>(f) > n_frames)
    throw std::runtime_error("mismatched frame ranges: frame " + s + " outside 1.." + std::to_string(n_frames) +
                             " in " + path.string());
  return static_cast<std::size_t>(f - 1);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is, const fs::path& path) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw std::runtime_error("truncated MMAP file " + path.string());
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string ltwh(const Box& b) {
  return fmt(b.left()) + "," + fmt(b.top()) + "," + fmt(b.w) + "," + fmt(b.h);
}

Box parse_ltwh(const std::vector<std::string>& f, std::size_t at) {
  return Box::from_ltwh(num(f[at]), num(f[at + 1]), num(f[at + 2]), num(f[at + 3]));
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* kind_name(CameraKind k) {
  switch (k) {
    case CameraKind::still: return "still";
    case CameraKind::pan: return "pan";
    case CameraKind::rotate: return "rotate";
  }
  return "still";
}

}  // namespace

void write_header(std::ostream& os, const OutputHeader& h) {
  os << "# mmtrack " << h.kind << " format " << kFormatVersion << "\n";
  os << "# command: " << h.command_line << "\n";
  os << "# seed: " << h.seed << "\n";
}

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s == "-0" || s.rfind("-0.", 0) == 0) {
    // print negative zero as zero
    if (s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  }
  return s;
}

void write_motion_map(const fs::path& path, const MotionMap& map) {
  auto os = open_out(path, true);
  os.write("MMAP", 4);
  put_u32(os, static_cast<std::uint32_t>(map.rows));
  put_u32(os, static_cast<std::uint32_t>(map.cols));
  put_u32(os, 2);
  for (std::size_t r = 0; r < map.rows; ++r)
    for (std::size_t c = 0; c < map.cols; ++c)
      for (double v : {map.dx(r, c), map.dy(r, c)})
        put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

MotionMap read_motion_map(const fs::path& path, int stride) {
  auto is = open_in(path, true);
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || std::string(magic.data(), 4) != "MMAP")
    throw std::runtime_error("not an MMAP file: " + path.string());
  const std::uint32_t rows = get_u32(is, path), cols = get_u32(is, path), channels = get_u32(is, path);
  if (channels != 2) throw std::runtime_error("MMAP file must have 2 channels: " + path.string());
  MotionMap m(rows, cols, stride);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      m.dx(r, c) = std::bit_cast<float>(get_u32(is, path));
      m.dy(r, c) = std::bit_cast<float>(get_u32(is, path));
    }
  return m;
}

void write_gt_csv(const fs::path& path, const std::vector<FrameAnnotations>& frames, const OutputHeader& h) {
  auto os = open_out(path);
  write_header(os, h);
  for (std::size_t f = 0; f < frames.size(); ++f)
    for (const auto& a : frames[f])
      os << f + 1 << "," << a.id << "," << ltwh(a.box) << ",1," << a.category << ",1\n";
}

std::vector<FrameAnnotations> read_gt_csv(const fs::path& path, std::size_t n_frames) {
  std::vector<FrameAnnotations> out(n_frames);
  for (const auto& f : csv_rows(path, 8)) {
    Annotation a;
    a.id = integer(f[1]);
    a.box = parse_ltwh(f, 2);
    a.category = integer(f[7]);
    out[frame_index(f[0], n_frames, path)].push_back(a);
  }
  return out;
}

void write_det_csv(const fs::path& path, const std::vector<FrameDetections>& frames, const OutputHeader& h) {
  auto os = open_out(path);
  write_header(os, h);
  for (std::size_t f = 0; f < frames.size(); ++f)
    for (const auto& d : frames[f])
      os << f + 1 << "," << ltwh(d.box) << "," << fmt(d.score) << "," << d.category << ",1\n";
}

std::vector<FrameDetections> read_det_csv(const fs::path& path, std::size_t n_frames) {
  std::vector<FrameDetections> out(n_frames);
  for (const auto& f : csv_rows(path, 7)) {
    Detection d;
    d.box = parse_ltwh(f, 1);
    d.score = num(f[5]);
    d.category = integer(f[6]);
    out[frame_index(f[0], n_frames, path)].push_back(d);
  }
  return out;
}

void write_results_csv(const fs::path& path, const TrajectorySet& tracks, const OutputHeader& h) {
  auto os = open_out(path);
  write_header(os, h);
  for (std::size_t f = 0; f < tracks.frames.size(); ++f)
    for (const auto& t : tracks.frames[f])
      os << f + 1 << "," << t.id << "," << ltwh(t.box) << "," << fmt(t.score) << "," << t.category << "\n";
}

TrajectorySet read_results_csv(const fs::path& path, std::size_t n_frames) {
  TrajectorySet out;
  out.frames.resize(n_frames);
  for (const auto& f : csv_rows(path, 8)) {
    TrackedBox t;
    t.id = integer(f[1]);
    t.box = parse_ltwh(f, 2);
    t.score = num(f[6]);
    t.category = integer(f[7]);
    out.frames[frame_index(f[0], n_frames, path)].push_back(t);
  }
  out.validate();
  return out;
}

void write_eval_report(const fs::path& path, const std::vector<EvalRow>& rows, const OutputHeader& h) {
  auto os = open_out(path);
  write_header(os, h);
  os << "sequence,MOTA,IDF1,FP,FN,IDSW,IDTP,IDFP,IDFN\n";
  for (const auto& r : rows)
    os << r.sequence << "," << fmt(r.mota.mota) << "," << fmt(r.idf1.idf1) << "," << r.mota.fp << ","
       << r.mota.fn << "," << r.mota.idsw << "," << r.idf1.idtp << "," << r.idf1.idfp << "," << r.idf1.idfn
       << "\n";
}

void write_loss_curve(const fs::path& path, const std::vector<double>& epoch_loss, const OutputHeader& h) {
  auto os = open_out(path);
  write_header(os, h);
  os << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) os << e + 1 << "," << fmt(epoch_loss[e], 9) << "\n";
}

std::vector<double> read_loss_curve(const fs::path& path) {
  std::vector<double> out;
  for (const auto& f : csv_rows(path, 2)) {
    if (f[0] == "epoch") continue;
    out.push_back(num(f[1]));
  }
  return out;
}

void write_score_experiment(const fs::path& path, const std::vector<ScoreExperimentRow>& rows,
                            const OutputHeader& h) {
  auto os = open_out(path);
  write_header(os, h);
  os << "velocity_bin_lo,velocity_bin_hi,loss_name,mean_score,n_samples\n";
  for (const auto& r : rows)
    os << fmt(r.bin.lo, 1) << "," << fmt(r.bin.hi, 1) << "," << to_string(r.loss) << ","
       << fmt(r.bin.mean_score) << "," << r.bin.count << "\n";
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  auto is = open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_scene_config(const fs::path& path, const SceneConfig& c, std::size_t n_frames, const OutputHeader& h) {
  auto os = open_out(path);
  write_header(os, h);
  os << "name = " << c.name << "\n"
     << "n_frames = " << n_frames << "\n"
     << "height = " << c.height << "\n"
     << "width = " << c.width << "\n"
     << "n_objects = " << c.n_objects << "\n"
     << "speed_min = " << exact(c.speed_min) << "\n"
     << "speed_max = " << exact(c.speed_max) << "\n"
     << "turn_std = " << exact(c.turn_std) << "\n"
     << "size_min = " << exact(c.size_min) << "\n"
     << "size_max = " << exact(c.size_max) << "\n"
     << "spawn_prob = " << exact(c.spawn_prob) << "\n"
     << "categories = " << c.categories << "\n"
     << "camera = " << kind_name(c.camera.kind) << "\n"
     << "max_translation = " << exact(c.camera.max_translation) << "\n"
     << "min_translation = " << exact(c.camera.min_translation) << "\n"
     << "max_rotation = " << exact(c.camera.max_rotation) << "\n"
     << "min_rotation = " << exact(c.camera.min_rotation) << "\n"
     << "heading_drift = " << exact(c.camera.heading_drift) << "\n"
     << "box_noise = " << exact(c.box_noise) << "\n"
     << "s_base = " << exact(c.blur.s_base) << "\n"
     << "beta = " << exact(c.blur.beta) << "\n"
     << "v_sat = " << exact(c.blur.v_sat) << "\n"
     << "s_min = " << exact(c.blur.s_min) << "\n"
     << "score_noise = " << exact(c.blur.score_noise) << "\n"
     << "false_positive_rate = " << exact(c.false_positive_rate) << "\n"
     << "drop_threshold = " << exact(c.drop_threshold) << "\n"
     << "feature_channels = " << c.feature_channels << "\n"
     << "blob_gain = " << exact(c.blob_gain) << "\n"
     << "seed = " << c.seed << "\n";
}

void apply_scene_overrides(SceneConfig& c, const std::map<std::string, std::string>& kv) {
  const auto size = [](const std::string& v) {
    const double d = num(v);
    if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d))) throw std::runtime_error("bad count '" + v + "'");
    return static_cast<std::size_t>(d);
  };
  for (const auto& [k, v] : kv) {
    if (k == "name") c.name = v;
    else if (k == "n_frames") continue;
    else if (k == "height") c.height = size(v);
    else if (k == "width") c.width = size(v);
    else if (k == "n_objects") c.n_objects = size(v);
    else if (k == "speed_min") c.speed_min = num(v);
    else if (k == "speed_max") c.speed_max = num(v);
    else if (k == "turn_std") c.turn_std = num(v);
    else if (k == "size_min") c.size_min = num(v);
    else if (k == "size_max") c.size_max = num(v);
    else if (k == "spawn_prob") c.spawn_prob = num(v);
    else if (k == "categories") c.categories = integer(v);
    else if (k == "camera") {
      if (v == "still") c.camera.kind = CameraKind::still;
      else if (v == "pan") c.camera.kind = CameraKind::pan;
      else if (v == "rotate") c.camera.kind = CameraKind::rotate;
      else throw std::runtime_error("unknown camera kind '" + v + "'");
    }
    else if (k == "max_translation") c.camera.max_translation = num(v);
    else if (k == "min_translation") c.camera.min_translation = num(v);
    else if (k == "max_rotation") c.camera.max_rotation = num(v);
    else if (k == "min_rotation") c.camera.min_rotation = num(v);
    else if (k == "heading_drift") c.camera.heading_drift = num(v);
    else if (k == "box_noise") c.box_noise = num(v);
    else if (k == "s_base") c.blur.s_base = num(v);
    else if (k == "beta") c.blur.beta = num(v);
    else if (k == "v_sat") c.blur.v_sat = num(v);
    else if (k == "s_min") c.blur.s_min = num(v);
    else if (k == "score_noise") c.blur.score_noise = num(v);
    else if (k == "false_positive_rate") c.false_positive_rate = num(v);
    else if (k == "drop_threshold") c.drop_threshold = num(v);
    else if (k == "feature_channels") c.feature_channels = size(v);
    else if (k == "blob_gain") c.blob_gain = num(v);
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(std::stoull(v));
    else throw std::runtime_error("unknown scene key '" + k + "'");
  }
  c.evidence.blur = c.blur;
}

SceneConfig read_scene_config(const fs::path& path, std::size_t* n_frames) {
  const auto kv = read_key_values(path);
  SceneConfig c;
  apply_scene_overrides(c, kv);
  if (n_frames != nullptr) {
    const auto it = kv.find("n_frames");
    if (it == kv.end()) throw std::runtime_error(path.string() + ": missing n_frames");
    *n_frames = static_cast<std::size_t>(integer(it->second));
  }
  c.validate();
  return c;
}

void write_sequence(const fs::path& dir, const SequenceData& seq, const OutputHeader& h, bool with_flow) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create directory " + dir.string());
  OutputHeader hh = h;
  hh.kind = "config";
  write_scene_config(dir / "config.txt", seq.config, seq.frame_count(), hh);

  hh.kind = "camera";
  auto os = open_out(dir / "camera.csv");
  write_header(os, hh);
  os << "step,tx,ty,theta\n";
  for (std::size_t t = 0; t < seq.camera.size(); ++t)
    os << t + 1 << "," << exact(seq.camera[t].tx) << "," << exact(seq.camera[t].ty) << ","
       << exact(seq.camera[t].theta) << "\n";
  os.close();

  hh.kind = "gt";
  write_gt_csv(dir / "gt.csv", seq.annotations, hh);
  hh.kind = "det";
  write_det_csv(dir / "det.csv", seq.plain_detections(), hh);
  if (with_flow)
    for (std::size_t t = 0; t < seq.camera.size(); ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "%04zu.bin", t + 1);
      write_motion_map(dir / "flow" / name, camera_flow(seq, t));
    }
}

SequenceData read_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("no such sequence directory " + dir.string());
  SequenceData seq;
  std::size_t n = 0;
  seq.config = read_scene_config(dir / "config.txt", &n);
  if (n < 2) throw std::runtime_error(dir.string() + ": sequence needs at least 2 frames");
  for (const auto& f : csv_rows(dir / "camera.csv", 4)) {
    if (f[0] == "step") continue;
    seq.camera.push_back({num(f[1]), num(f[2]), num(f[3])});
  }
  if (seq.camera.size() != n - 1) throw std::runtime_error(dir.string() + ": camera.csv has wrong step count");
  const double cx = 0.5 * seq.config.width, cy = 0.5 * seq.config.height;
  seq.poses.push_back(Rigid{});
  for (const auto& step : seq.camera) seq.poses.push_back(seq.poses.back().then(Rigid::from_step(step, cx, cy)));
  seq.annotations = read_gt_csv(dir / "gt.csv", n);
  const auto dets = read_det_csv(dir / "det.csv", n);
  seq.detections.resize(n);
  for (std::size_t f = 0; f < n; ++f)
    for (const auto& d : dets[f]) seq.detections[f].push_back({d, Evidence{}, -1, 0.0});
  return seq;
}

std::vector<fs::path> list_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) throw std::runtime_error("no such dataset directory " + root.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "config.txt")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace mmtrack
