#include "insyn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "insyn/error.hpp"

namespace insyn {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'S', 'Y', 'N', 'C', 'K', '1'};

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) fail("bad-format", "truncated checkpoint");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
  uint32_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

float get_f32(std::istream& in) {
  uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  uint32_t len = get_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) fail("bad-format", "truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const nn::ParamSet*>>& sections) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io", "cannot write '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  put_string(out, meta.dump());

  uint32_t count = 0;
  for (const auto& [name, set] : sections) count += static_cast<uint32_t>(set->names().size());
  put_u32(out, count);
  for (const auto& [section, set] : sections)
    for (const std::string& name : set->names()) {
      const nn::Tensor& t = set->at(name);
      put_string(out, section + "/" + name);
      put_u32(out, static_cast<uint32_t>(t.rows));
      put_u32(out, static_cast<uint32_t>(t.cols));
      for (double v : t.v) put_f32(out, static_cast<float>(v));
    }
  if (!out) fail("io", "write failed for '" + path + "'");
}

nlohmann::json load_checkpoint(
    const std::string& path, const std::vector<std::pair<std::string, nn::ParamSet*>>& sections) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail("bad-format", "'" + path + "' is not an insyn checkpoint");
  nlohmann::json meta = nlohmann::json::parse(get_string(in), nullptr, false);
  if (meta.is_discarded()) fail("bad-format", "corrupt checkpoint metadata");

  std::set<std::string> expected;
  for (const auto& [section, set] : sections)
    for (const std::string& name : set->names()) expected.insert(section + "/" + name);

  uint32_t count = get_u32(in);
  for (uint32_t i = 0; i < count; ++i) {
    std::string key = get_string(in);
    uint32_t rows = get_u32(in);
    uint32_t cols = get_u32(in);
    nn::Tensor* target = nullptr;
    auto slash = key.find('/');
    if (slash != std::string::npos) {
      for (const auto& [section, set] : sections)
        if (section == key.substr(0, slash) && set->has(key.substr(slash + 1)))
          target = &set->at(key.substr(slash + 1));
    }
    if (!target) {
      // skip tensors for sections the caller did not request
      bool wanted = expected.count(key) != 0;
      if (wanted) fail("bad-format", "unresolvable tensor '" + key + "'");
      for (uint64_t k = 0; k < static_cast<uint64_t>(rows) * cols; ++k) get_f32(in);
      continue;
    }
    if (target->rows != static_cast<int>(rows) || target->cols != static_cast<int>(cols))
      fail("shape-mismatch", "checkpoint tensor '" + key + "' is " + std::to_string(rows) + "x" +
                                 std::to_string(cols) + ", model expects " +
                                 nn::shape_str(*target));
    for (double& v : target->v) v = static_cast<double>(get_f32(in));
    expected.erase(key);
  }
  if (!expected.empty())
    fail("bad-format", "checkpoint is missing tensor '" + *expected.begin() + "'");
  return meta;
}

nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail("bad-format", "'" + path + "' is not an insyn checkpoint");
  nlohmann::json meta = nlohmann::json::parse(get_string(in), nullptr, false);
  if (meta.is_discarded()) fail("bad-format", "corrupt checkpoint metadata");
  return meta;
}

}  // namespace insyn
