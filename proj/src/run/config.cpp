#include "mmlc/run/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mmlc::run {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

const std::set<std::string> kKnownKeys = {
    "experiment.kind",      "experiment.option",   "experiment.seed",
    "experiment.repetitions", "experiment.d_z",    "experiment.out",
    "schedule.batches",     "schedule.batch_size", "schedule.lr",
    "readout.batches",      "readout.batch_size",  "readout.lr",
    "readout.eval_batches",
    "synthetic.d_m",        "synthetic.d_e",       "synthetic.n",
    "synthetic.k",
    "robot.dataset",        "robot.split_index",   "robot.aes_batches",
    "arm.height",           "arm.width",           "arm.joints",
    "arm.steps_per_target", "arm.hide_right_tip",  "arm.dataset_n",
    "arm.links",            "arm.limit_base",      "arm.limit_rest",
};

const std::set<std::string> kKinds = {"synthetic_je", "synthetic_control",
                                      "synthetic_cm", "robot_je", "robot_cm"};

}  // namespace

void RunConfig::validate() const {
  if (kKinds.find(kind) == kKinds.end()) {
    throw ConfigError("unknown experiment kind: " + kind);
  }
  if (option != "default" && option != "aes") {
    throw ConfigError("unknown robot option: " + option);
  }
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (d_z.empty()) throw ConfigError("d_z sweep list is empty");
  for (int z : d_z) {
    if (z < 1) {
      throw ConfigError("swept d_z values must be >= 1 (0 is reported analytically)");
    }
  }
  if (train.batches < 1 || train.batch_size < 1 || train.lr <= 0.f) {
    throw ConfigError("bad training schedule");
  }
  if (eval_batches < 50) {
    throw ConfigError("need at least 50 evaluation batches");
  }
  if (!is_robot()) synthetic.validate();
  if (is_robot() && dataset.empty()) {
    throw ConfigError("robot experiments need robot.dataset");
  }
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = section + "." + trim(line.substr(0, eq));
    if (kKnownKeys.find(key) == kKnownKeys.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key " + key);
    }
    kv[key] = trim(line.substr(eq + 1));
  }

  auto get = [&](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto as_int = [&](const std::string& key, int def) {
    const auto* v = get(key);
    return v ? std::stoi(*v) : def;
  };
  auto as_u64 = [&](const std::string& key, std::uint64_t def) {
    const auto* v = get(key);
    return v ? static_cast<std::uint64_t>(std::stoull(*v)) : def;
  };
  auto as_float = [&](const std::string& key, float def) {
    const auto* v = get(key);
    return v ? std::stof(*v) : def;
  };
  auto as_str = [&](const std::string& key, const std::string& def) {
    const auto* v = get(key);
    return v ? *v : def;
  };

  cfg.kind = as_str("experiment.kind", cfg.kind);
  cfg.option = as_str("experiment.option", cfg.option);
  cfg.seed = as_u64("experiment.seed", cfg.seed);
  cfg.repetitions = as_int("experiment.repetitions", cfg.repetitions);
  cfg.out = as_str("experiment.out", cfg.out);
  if (const auto* v = get("experiment.d_z")) {
    cfg.d_z.clear();
    std::istringstream ls(*v);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) cfg.d_z.push_back(std::stoi(tok));
    }
  }

  cfg.train.batches = as_int("schedule.batches", cfg.train.batches);
  cfg.train.batch_size = as_int("schedule.batch_size", cfg.train.batch_size);
  cfg.train.lr = as_float("schedule.lr", cfg.train.lr);

  cfg.readout = cfg.train;
  cfg.readout.batches = as_int("readout.batches", cfg.readout.batches);
  cfg.readout.batch_size = as_int("readout.batch_size", cfg.readout.batch_size);
  cfg.readout.lr = as_float("readout.lr", cfg.readout.lr);
  cfg.eval_batches = as_int("readout.eval_batches", cfg.eval_batches);

  cfg.synthetic.d_m = as_int("synthetic.d_m", cfg.synthetic.d_m);
  cfg.synthetic.d_e = as_int("synthetic.d_e", cfg.synthetic.d_e);
  cfg.synthetic.n = as_int("synthetic.n", cfg.synthetic.n);
  cfg.synthetic.k = as_int("synthetic.k", cfg.synthetic.k);

  cfg.dataset = as_str("robot.dataset", cfg.dataset);
  cfg.split_index = as_int("robot.split_index", cfg.split_index);
  cfg.aes = cfg.train;
  cfg.aes.batches = as_int("robot.aes_batches", cfg.aes.batches);

  cfg.arm.height = as_int("arm.height", cfg.arm.height);
  cfg.arm.width = as_int("arm.width", cfg.arm.width);
  cfg.arm.joints = as_int("arm.joints", cfg.arm.joints);
  cfg.arm.steps_per_target = as_int("arm.steps_per_target", cfg.arm.steps_per_target);
  cfg.arm.hide_right_tip = as_int("arm.hide_right_tip", 0) != 0;
  cfg.arm.limit_base = as_float("arm.limit_base", cfg.arm.limit_base);
  cfg.arm.limit_rest = as_float("arm.limit_rest", cfg.arm.limit_rest);
  if (const auto* v = get("arm.links")) {
    cfg.arm.links.clear();
    std::istringstream ls(*v);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) cfg.arm.links.push_back(std::stof(tok));
    }
    cfg.arm.joints = static_cast<int>(cfg.arm.links.size());
  }
  cfg.dataset_n = as_int("arm.dataset_n", cfg.dataset_n);

  cfg.validate();
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string default_config_text() {
  RunConfig d;
  std::ostringstream os;
  os << "[experiment]\n"
     << "kind = " << d.kind << "        # synthetic_je | synthetic_control | synthetic_cm | robot_je | robot_cm\n"
     << "option = " << d.option << "          # robot kinds only: default | aes\n"
     << "seed = " << d.seed << "\n"
     << "repetitions = " << d.repetitions << "\n"
     << "d_z = 1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20,21,22,23,24,25,26,27,28,29,30\n"
     << "out = " << d.out << "\n\n"
     << "[schedule]\n"
     << "batches = " << d.train.batches << "\n"
     << "batch_size = " << d.train.batch_size << "\n"
     << "lr = " << d.train.lr << "\n\n"
     << "[readout]\n"
     << "eval_batches = " << d.eval_batches << "\n\n"
     << "[synthetic]\n"
     << "d_m = " << d.synthetic.d_m << "\n"
     << "d_e = " << d.synthetic.d_e << "\n"
     << "n = " << d.synthetic.n << "\n"
     << "k = " << d.synthetic.k << "\n\n"
     << "[robot]\n"
     << "dataset = out/arm_dataset.bin\n"
     << "split_index = " << d.split_index << "\n\n"
     << "[arm]\n"
     << "height = " << d.arm.height << "\n"
     << "width = " << d.arm.width << "\n"
     << "joints = " << d.arm.joints << "\n"
     << "dataset_n = " << d.dataset_n << "\n";
  return os.str();
}

}  // namespace mmlc::run
