#include "adalab/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "adalab/common.hpp"

namespace adalab {

namespace {

void put_u16(std::ostream& os, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

uint32_t f32_bits(float f) {
  uint32_t u;
  std::memcpy(&u, &f, 4);
  return u;
}

float bits_f32(uint32_t u) {
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

std::string checkpoint_manifest_path(const std::string& path) { return path + ".manifest.json"; }

void save_checkpoint(const ParamStore& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint: " + path);
  os.write("ADTC", 4);
  put_u16(os, 1);
  for (const auto& [name, t] : params) {
    if (name.size() > 0xffff) throw ContractError("parameter name too long: " + name);
    put_u16(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(t.ndim()));
    for (size_t d : t.shape) put_u64(os, static_cast<uint64_t>(d));
    for (double v : t.data) {
      uint32_t bits = f32_bits(static_cast<float>(v));
      unsigned char b[4];
      for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
      os.write(reinterpret_cast<const char*>(b), 4);
    }
  }
  os.close();
  if (!os) throw IoError("failed writing checkpoint: " + path);

  nlohmann::json manifest;
  manifest["records"] = nlohmann::json::array();
  for (const auto& [name, t] : params) {
    manifest["records"].push_back({{"name", name}, {"shape", t.shape}});
  }
  manifest["content_hash"] = hash_file_hex(path);
  std::ofstream ms(checkpoint_manifest_path(path), std::ios::trunc);
  if (!ms) throw IoError("cannot write checkpoint manifest for: " + path);
  ms << manifest.dump(2) << "\n";
}

ParamStore load_checkpoint(const std::string& path, bool verify_hash) {
  if (verify_hash) {
    std::ifstream ms(checkpoint_manifest_path(path));
    if (ms) {
      nlohmann::json manifest = nlohmann::json::parse(ms, nullptr, /*allow_exceptions=*/false);
      if (manifest.is_discarded())
        throw ChecksumError("unreadable checkpoint manifest for: " + path);
      std::string want = manifest.value("content_hash", "");
      if (!want.empty() && want != hash_file_hex(path))
        throw ChecksumError("checkpoint content hash mismatch: " + path);
    }
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "ADTC", 4) != 0)
    throw IoError("not a checkpoint file (bad magic): " + path);
  uint16_t version = get_u16(is);
  if (version != 1) throw IoError("unsupported checkpoint version " + std::to_string(version));
  ParamStore params;
  while (true) {
    int peek = is.peek();
    if (peek == EOF) break;
    uint16_t name_len = get_u16(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    int ndim = is.get();
    if (ndim < 0) throw IoError("truncated checkpoint: " + path);
    std::vector<size_t> shape(static_cast<size_t>(ndim));
    size_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<size_t>(get_u64(is));
      numel *= d;
    }
    Tensor t = Tensor::zeros(shape);
    for (size_t i = 0; i < numel; ++i) {
      unsigned char b[4];
      is.read(reinterpret_cast<char*>(b), 4);
      uint32_t bits = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                      (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
      t.data[i] = static_cast<double>(bits_f32(bits));
    }
    if (!is) throw IoError("truncated checkpoint record in: " + path);
    params[name] = std::move(t);
  }
  return params;
}

}  // namespace adalab
