#include "mmlc/io/container.hpp"

#include <cstring>
#include <map>

namespace mmlc::io {

namespace {

template <typename T>
void put_le(std::ofstream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& in, const std::string& path) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw IoError("truncated read in " + path);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

Writer::Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw IoError("cannot open for writing: " + path);
}

void Writer::magic(const char tag[8]) { out_.write(tag, 8); }
void Writer::u32(std::uint32_t v) { put_le(out_, v); }
void Writer::i32(std::int32_t v) { put_le(out_, static_cast<std::uint32_t>(v)); }
void Writer::u64(std::uint64_t v) { put_le(out_, v); }

void Writer::f32(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_le(out_, bits);
}

void Writer::f32s(const float* p, std::size_t n) {
  // x86 is little-endian; bulk write, element path kept for clarity elsewhere.
  out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 4));
}

void Writer::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void Writer::close() {
  out_.close();
  if (!out_) throw IoError("failed writing " + path_);
}

Reader::Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw IoError("cannot open for reading: " + path);
}

void Reader::expect_magic(const char tag[8]) {
  char buf[8];
  in_.read(buf, 8);
  if (!in_ || std::memcmp(buf, tag, 8) != 0) {
    throw IoError("bad magic in " + path_);
  }
}

std::uint32_t Reader::u32() { return get_le<std::uint32_t>(in_, path_); }
std::int32_t Reader::i32() { return static_cast<std::int32_t>(get_le<std::uint32_t>(in_, path_)); }
std::uint64_t Reader::u64() { return get_le<std::uint64_t>(in_, path_); }

float Reader::f32() {
  const std::uint32_t bits = get_le<std::uint32_t>(in_, path_);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void Reader::f32s(float* p, std::size_t n) {
  in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 4));
  if (!in_) throw IoError("truncated read in " + path_);
}

std::string Reader::str() {
  const auto len = u32();
  std::string s(len, '\0');
  in_.read(s.data(), len);
  if (!in_) throw IoError("truncated read in " + path_);
  return s;
}

bool Reader::at_end() {
  in_.peek();
  return in_.eof();
}

void save_checkpoint(const std::string& path,
                     const std::vector<const ParamStore<float>*>& stores) {
  std::uint32_t count = 0;
  for (const auto* s : stores) count += static_cast<std::uint32_t>(s->blocks().size());

  Writer w(path);
  w.magic("MMLCKPT1");
  w.u32(1);  // version
  w.u32(count);
  for (const auto* s : stores) {
    for (const auto& b : s->blocks()) {
      w.str(b.name);
      w.u32(static_cast<std::uint32_t>(b.value.ndim()));
      for (int d = 0; d < b.value.ndim(); ++d) w.i32(b.value.dim(d));
      w.f32s(b.value.data(), static_cast<std::size_t>(b.value.size()));
    }
  }
  w.close();
}

void load_checkpoint(const std::string& path,
                     const std::vector<ParamStore<float>*>& stores) {
  std::map<std::string, ParamBlock<float>*> by_name;
  for (auto* s : stores) {
    for (auto& b : s->blocks()) by_name[b.name] = &b;
  }

  Reader r(path);
  r.expect_magic("MMLCKPT1");
  if (r.u32() != 1) throw IoError("unsupported checkpoint version in " + path);
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const auto ndim = r.u32();
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = r.i32();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("unknown block '" + name + "' in " + path);
    if (it->second->value.shape() != shape) {
      throw IoError("shape mismatch for block '" + name + "' in " + path);
    }
    r.f32s(it->second->value.data(), static_cast<std::size_t>(it->second->value.size()));
  }
}

}  // namespace mmlc::io
