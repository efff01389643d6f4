#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmlc/core/train.hpp"
#include "mmlc/sim/arm.hpp"
#include "mmlc/synth/synthetic.hpp"

namespace mmlc::run {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything a sweep needs, parsed from the line-based key = value format
// (sections in brackets, '#' comments). Paper defaults are baked in.
struct RunConfig {
  // [experiment]
  std::string kind = "synthetic_je";  // synthetic_je|synthetic_control|synthetic_cm|robot_je|robot_cm
  std::string option = "default";     // robot kinds: default|aes
  std::uint64_t seed = 1;
  int repetitions = 3;
  std::vector<int> d_z = {1,  2,  3,  4,  5,  6,  7,  8,  9,  10,
                          11, 12, 13, 14, 15, 16, 17, 18, 19, 20,
                          21, 22, 23, 24, 25, 26, 27, 28, 29, 30};
  std::string out = "out";

  // [schedule]
  Schedule train;

  // [readout]
  Schedule readout;       // defaults to [schedule]
  int eval_batches = 100;

  // [synthetic]
  synth::SyntheticSpec synthetic;

  // [robot]
  std::string dataset;    // container path written by gen-data
  int split_index = 100;
  Schedule aes;           // pre-encoder schedule, defaults to [schedule]

  // [arm] (gen-data)
  sim::ArmConfig arm;
  int dataset_n = 100000;

  bool is_robot() const { return kind.rfind("robot", 0) == 0; }
  std::string experiment_name() const {
    return is_robot() ? kind + "_" + option : kind;
  }

  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// The default config, serialized (written by `mmlc run --dump-config`).
std::string default_config_text();

}  // namespace mmlc::run
