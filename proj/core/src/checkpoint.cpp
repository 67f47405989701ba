#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mmtrack/tensor.hpp"

namespace mmtrack {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'M', 'C', 'K'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                       static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}

void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }

bool get_u32(std::istream& is, std::uint32_t& v) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

std::uint32_t need_u32(std::istream& is, const std::string& path) {
  std::uint32_t v = 0;
  if (!get_u32(is, v)) throw std::runtime_error("checkpoint: truncated file " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, std::span<const NamedTensor> params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, kCheckpointVersion);
  for (const auto& p : params) {
    put_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(os, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) put_u32(os, static_cast<std::uint32_t>(d));
    for (double v : p.tensor.data()) put_f32(os, static_cast<float>(v));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint32_t version = need_u32(is, path);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  std::vector<NamedTensor> out;
  std::uint32_t name_len = 0;
  while (get_u32(is, name_len)) {
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw std::runtime_error("checkpoint: truncated file " + path);
    const std::uint32_t rank = need_u32(is, path);
    Shape shape(rank);
    for (auto& d : shape) d = need_u32(is, path);
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = std::bit_cast<float>(need_u32(is, path));
    out.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
  }
  return out;
}

void restore_checkpoint(const std::string& path, std::span<NamedTensor> params) {
  const auto stored = load_checkpoint(path);
  for (auto& p : params) {
    auto it = std::find_if(stored.begin(), stored.end(), [&](const NamedTensor& s) { return s.name == p.name; });
    if (it == stored.end()) throw std::runtime_error("checkpoint: missing parameter '" + p.name + "'");
    if (it->tensor.shape() != p.tensor.shape())
      throw std::runtime_error("checkpoint: shape mismatch for '" + p.name + "': " +
                               shape_str(it->tensor.shape()) + " vs " + shape_str(p.tensor.shape()));
    std::copy(it->tensor.data().begin(), it->tensor.data().end(), p.tensor.mutable_data().begin());
  }
}

}  // namespace mmtrack
