#include "mfatdnn/features/archive.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mfatdnn/error.hpp"

namespace mfatdnn::features {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes little-endian");

namespace {
constexpr char kMagic[8] = {'M', 'F', 'A', 'F', '0', '0', '0', '1'};

template <typename V>
void put(std::string& s, V v) {
  char b[sizeof(V)];
  std::memcpy(b, &v, sizeof(V));
  s.append(b, sizeof(V));
}

template <typename V>
V take(const std::string& s, std::size_t& pos) {
  if (pos + sizeof(V) > s.size()) throw TruncatedFileError("feature archive truncated in header");
  V v;
  std::memcpy(&v, s.data() + pos, sizeof(V));
  pos += sizeof(V);
  return v;
}
}  // namespace

std::string encode_feature_archive(const FeatureMap& f) {
  const auto d = static_cast<std::uint32_t>(f.bins()), l = static_cast<std::uint32_t>(f.frames());
  std::string s(kMagic, 8);
  put<std::uint32_t>(s, d);
  put<std::uint32_t>(s, l);
  put<float>(s, f.frame_hop_s);
  put<std::uint32_t>(s, static_cast<std::uint32_t>(f.id.size()));
  s += f.id;
  const auto& v = f.data.vec();
  s.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  return s;
}

FeatureMap decode_feature_archive(const std::string& bytes) {
  if (bytes.size() < 8) throw TruncatedFileError("feature archive truncated in magic");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) {
    if (std::memcmp(bytes.data(), kMagic, 4) == 0)
      throw VersionMismatchError("feature archive version '" + bytes.substr(4, 4) + "', expected 0001");
    throw FormatError("not an MFAF feature archive");
  }
  std::size_t pos = 8;
  const auto d = take<std::uint32_t>(bytes, pos);
  const auto l = take<std::uint32_t>(bytes, pos);
  const auto hop = take<float>(bytes, pos);
  const auto id_len = take<std::uint32_t>(bytes, pos);
  if (pos + id_len > bytes.size()) throw TruncatedFileError("feature archive truncated in id");
  FeatureMap f;
  f.id = bytes.substr(pos, id_len);
  pos += id_len;
  const std::size_t n = static_cast<std::size_t>(d) * l;
  if (bytes.size() - pos < n * sizeof(float))
    throw TruncatedFileError("feature archive truncated: " + std::to_string((bytes.size() - pos) / 4) +
                             " of " + std::to_string(n) + " values");
  if (bytes.size() - pos > n * sizeof(float)) throw FormatError("feature archive has trailing bytes");
  std::vector<float> v(n);
  std::memcpy(v.data(), bytes.data() + pos, n * sizeof(float));
  f.data = nn::Tensor<float>({1, d, l}, std::move(v));
  f.frame_hop_s = hop;
  return f;
}

void write_feature_archive(const std::filesystem::path& path, const FeatureMap& f) {
  const std::string s = encode_feature_archive(f);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

FeatureMap read_feature_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_feature_archive(s);
}

}  // namespace mfatdnn::features
