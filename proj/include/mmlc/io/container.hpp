#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmlc/core/layers.hpp"
#include "mmlc/core/tensor.hpp"

namespace mmlc::io {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Little-endian primitive framing shared by the dump, dataset and
// checkpoint formats (documented in docs/formats.md).
class Writer {
 public:
  explicit Writer(const std::string& path);
  void magic(const char tag[8]);
  void u32(std::uint32_t v);
  void i32(std::int32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f32s(const float* p, std::size_t n);
  void str(const std::string& s);
  void close();

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path);
  void expect_magic(const char tag[8]);
  std::uint32_t u32();
  std::int32_t i32();
  std::uint64_t u64();
  float f32();
  void f32s(float* p, std::size_t n);
  std::string str();
  bool at_end();

 private:
  std::ifstream in_;
  std::string path_;
};

// Checkpoint: named parameter blocks, enough to reload or cross-check a
// trained pipeline in another implementation.
void save_checkpoint(const std::string& path,
                     const std::vector<const ParamStore<float>*>& stores);

// Loads values into already-constructed stores; shapes must match by name.
void load_checkpoint(const std::string& path,
                     const std::vector<ParamStore<float>*>& stores);

}  // namespace mmlc::io
