#include "orthomatch/descriptor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace orthomatch {

static_assert(std::endian::native == std::endian::little, "OMDS I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'O', 'M', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 16;

template <typename T>
void put(std::vector<char>& buf, T value) {
  const auto* p = reinterpret_cast<const char*>(&value);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<char>& buf, std::size_t& offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

void save_descriptors(const std::filesystem::path& path, const DescriptorSet& set) {
  if (static_cast<std::size_t>(set.vectors.cols()) != set.keypoints.size())
    fail(ErrorCode::InvariantError, "descriptor count does not match keypoint count");
  const auto d = static_cast<std::uint32_t>(set.vectors.rows() > 0 ? set.vectors.rows() : kDescriptorDim);
  std::vector<char> buf;
  buf.reserve(kHeaderBytes + set.size() * (16 + 4 * d));
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put(buf, kVersion);
  put(buf, static_cast<std::uint32_t>(set.size()));
  put(buf, d);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Keypoint& kp = set.keypoints[i];
    put(buf, kp.x);
    put(buf, kp.y);
    put(buf, kp.score);
    put(buf, kp.orientation);
    for (std::uint32_t k = 0; k < d; ++k) put(buf, set.vectors(k, static_cast<Eigen::Index>(i)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IOError, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::IOError, "short write to " + path.string());
}

LoadedDescriptors load_external_descriptors(const std::filesystem::path& path, std::optional<ImageSize> bounds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IOError, "cannot open " + path.string());
  const std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < kHeaderBytes || std::memcmp(buf.data(), kMagic, 4) != 0)
    fail(ErrorCode::FormatError, path.string() + ": missing OMDS header");
  std::size_t offset = 4;
  const auto version = get<std::uint32_t>(buf, offset);
  const auto n = get<std::uint32_t>(buf, offset);
  const auto d = get<std::uint32_t>(buf, offset);
  if (version != kVersion) fail(ErrorCode::FormatError, "unsupported OMDS version " + std::to_string(version));
  if (d == 0 || d > 65536) fail(ErrorCode::FormatError, "invalid descriptor dimension " + std::to_string(d));
  const std::size_t record = 16 + 4 * static_cast<std::size_t>(d);
  if (buf.size() != kHeaderBytes + record * n)
    fail(ErrorCode::FormatError, path.string() + ": size does not match header (truncated or trailing bytes)");

  LoadedDescriptors out;
  out.set.head = HeadTag::External;
  out.set.id = path.filename().string();
  out.set.keypoints.resize(n);
  out.set.vectors.resize(d, n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Keypoint& kp = out.set.keypoints[i];
    kp.x = get<float>(buf, offset);
    kp.y = get<float>(buf, offset);
    kp.score = get<float>(buf, offset);
    kp.orientation = get<float>(buf, offset);
    if (!std::isfinite(kp.x) || !std::isfinite(kp.y) || !std::isfinite(kp.score) || !std::isfinite(kp.orientation))
      fail(ErrorCode::InvariantError, "keypoint " + std::to_string(i) + " has non-finite fields");
    if (kp.x < 0 || kp.y < 0 || (bounds && (kp.x > bounds->width - 1 || kp.y > bounds->height - 1)))
      fail(ErrorCode::InvariantError, "keypoint " + std::to_string(i) + " is outside the image");
    if (kp.score < 0) fail(ErrorCode::InvariantError, "keypoint " + std::to_string(i) + " has a negative score");
    for (std::uint32_t k = 0; k < d; ++k) out.set.vectors(k, i) = get<float>(buf, offset);
    if (!out.set.vectors.col(i).allFinite())
      fail(ErrorCode::InvariantError, "descriptor " + std::to_string(i) + " has non-finite values");
    const double norm = out.set.vectors.col(i).cast<double>().norm();
    if (!(norm > 0)) fail(ErrorCode::InvariantError, "descriptor " + std::to_string(i) + " is zero");
    const double deviation = std::abs(norm - 1.0);
    out.max_norm_deviation = std::max(out.max_norm_deviation, deviation);
    if (deviation > 1e-6)
      out.set.vectors.col(i) = (out.set.vectors.col(i).cast<double>() / norm).cast<float>();
  }
  out.renormalized_beyond_tolerance = out.max_norm_deviation > 1e-3;
  return out;
}

}  // namespace orthomatch
