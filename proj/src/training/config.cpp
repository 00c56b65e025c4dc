#include "patchsel/training/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "patchsel/error.hpp"
#include "patchsel/mosaic/bayer.hpp"

namespace patchsel::training {

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kUniform: return "uniform";
    case TrainMode::kHnm: return "hnm";
    case TrainMode::kPatchNet: return "patchnet";
  }
  return "?";
}

std::string to_string(Objective o) {
  switch (o) {
    case Objective::kMin: return "min";
    case Objective::kMax: return "max";
    case Objective::kRegress: return "regress";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("config: '" + key + "' expects a number");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("config: '" + key + "' expects an integer");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects an unsigned integer");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + key + "' expects true|false");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_int(key, trim(item))));
  return out;
}

using Setter = std::function<void(TrainRun&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"mode",
       [](TrainRun& r, const std::string&, const std::string& v) {
         if (v == "uniform") r.mode = TrainMode::kUniform;
         else if (v == "hnm") r.mode = TrainMode::kHnm;
         else if (v == "patchnet") r.mode = TrainMode::kPatchNet;
         else throw ConfigError("config: mode must be uniform|hnm|patchnet");
       }},
      {"objective",
       [](TrainRun& r, const std::string&, const std::string& v) {
         if (v == "min") r.objective = Objective::kMin;
         else if (v == "max") r.objective = Objective::kMax;
         else if (v == "regress") r.objective = Objective::kRegress;
         else throw ConfigError("config: objective must be min|max|regress");
       }},
      {"detach_input", [](TrainRun& r, const std::string& k, const std::string& v) { r.detach_input = parse_bool(k, v); }},
      {"epochs", [](TrainRun& r, const std::string& k, const std::string& v) { r.epochs = static_cast<int>(parse_int(k, v)); }},
      {"batch_size",
       [](TrainRun& r, const std::string& k, const std::string& v) { r.batch_size = static_cast<int>(parse_int(k, v)); }},
      {"base_lr", [](TrainRun& r, const std::string& k, const std::string& v) { r.base_lr = parse_double(k, v); }},
      {"patchnet_lr_scale",
       [](TrainRun& r, const std::string& k, const std::string& v) { r.patchnet_lr_scale = parse_double(k, v); }},
      {"sigma_min", [](TrainRun& r, const std::string& k, const std::string& v) { r.sigma_min = parse_double(k, v); }},
      {"sigma_max", [](TrainRun& r, const std::string& k, const std::string& v) { r.sigma_max = parse_double(k, v); }},
      {"bayer", [](TrainRun& r, const std::string&, const std::string& v) { r.bayer = v; }},
      {"seed", [](TrainRun& r, const std::string& k, const std::string& v) { r.seed = parse_u64(k, v); }},
      {"augment", [](TrainRun& r, const std::string& k, const std::string& v) { r.augment = parse_bool(k, v); }},
      {"oversample", [](TrainRun& r, const std::string& k, const std::string& v) { r.oversample = parse_int_list(k, v); }},
      {"patch_size",
       [](TrainRun& r, const std::string& k, const std::string& v) { r.patch_size = static_cast<int>(parse_int(k, v)); }},
      {"temperature", [](TrainRun& r, const std::string& k, const std::string& v) { r.temperature = parse_double(k, v); }},
      {"patchnet_variant", [](TrainRun& r, const std::string&, const std::string& v) { r.patchnet_variant = v; }},
      {"patchnet_width_divisor",
       [](TrainRun& r, const std::string& k, const std::string& v) {
         r.patchnet_width_divisor = static_cast<int>(parse_int(k, v));
       }},
      {"restore_channels",
       [](TrainRun& r, const std::string& k, const std::string& v) { r.restore.channels = static_cast<int>(parse_int(k, v)); }},
      {"restore_depth",
       [](TrainRun& r, const std::string& k, const std::string& v) { r.restore.depth = static_cast<int>(parse_int(k, v)); }},
      {"restore_ratio",
       [](TrainRun& r, const std::string& k, const std::string& v) { r.restore.ratio = static_cast<int>(parse_int(k, v)); }},
      {"sigma_conditioning",
       [](TrainRun& r, const std::string& k, const std::string& v) { r.restore.sigma_conditioning = parse_bool(k, v); }},
      {"hnm_threshold", [](TrainRun& r, const std::string& k, const std::string& v) { r.hnm_threshold = parse_double(k, v); }},
      {"hnm_schedule", [](TrainRun& r, const std::string& k, const std::string& v) { r.hnm_schedule = parse_bool(k, v); }},
      {"hnm_start", [](TrainRun& r, const std::string& k, const std::string& v) { r.hnm_start = parse_double(k, v); }},
      {"hnm_end", [](TrainRun& r, const std::string& k, const std::string& v) { r.hnm_end = parse_double(k, v); }},
      {"val_sigma", [](TrainRun& r, const std::string& k, const std::string& v) { r.val_sigma = parse_double(k, v); }},
      {"eval_seed", [](TrainRun& r, const std::string& k, const std::string& v) { r.eval_seed = parse_u64(k, v); }},
      {"init_checkpoint", [](TrainRun& r, const std::string&, const std::string& v) { r.init_checkpoint = v; }},
      {"keep_all_checkpoints",
       [](TrainRun& r, const std::string& k, const std::string& v) { r.keep_all_checkpoints = parse_bool(k, v); }},
  };
  return table;
}

}  // namespace

void TrainRun::validate() const {
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (!(base_lr > 0.0)) throw ConfigError("config: base_lr must be positive");
  if (!(patchnet_lr_scale > 0.0)) throw ConfigError("config: patchnet_lr_scale must be positive");
  if (sigma_min < 0.0 || sigma_max < sigma_min) throw ConfigError("config: need 0 <= sigma_min <= sigma_max");
  if (val_sigma < 0.0) throw ConfigError("config: val_sigma must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("config: temperature must be positive");
  if (patch_size < 2 || (patch_size & (patch_size - 1)) != 0) {
    throw ConfigError("config: patch_size must be a power of two >= 2");
  }
  if (patchnet_variant != "tiny" && patchnet_variant != "large") {
    throw ConfigError("config: patchnet_variant must be tiny|large");
  }
  mosaic::BayerPattern::parse(bayer);
  if (patchnet_width_divisor < 1) throw ConfigError("config: patchnet_width_divisor must be >= 1");
  for (int f : oversample) {
    if (f < 1) throw ConfigError("config: oversample factors must be >= 1");
  }
  const bool schedule_allowed =
      mode == TrainMode::kHnm || (mode == TrainMode::kPatchNet && objective == Objective::kRegress);
  if (hnm_schedule && !schedule_allowed) {
    throw ConfigError("config: hnm_schedule is only valid in hnm mode (or patchnet regress)");
  }
  restore.validate();
}

std::string TrainRun::to_text() const {
  std::ostringstream os;
  auto kv = [&os](const char* k, const std::string& v) { os << k << " = " << v << "\n"; };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  kv("mode", to_string(mode));
  kv("objective", to_string(objective));
  kv("detach_input", b(detach_input));
  kv("epochs", std::to_string(epochs));
  kv("batch_size", std::to_string(batch_size));
  kv("base_lr", fmt_double(base_lr));
  kv("patchnet_lr_scale", fmt_double(patchnet_lr_scale));
  kv("sigma_min", fmt_double(sigma_min));
  kv("sigma_max", fmt_double(sigma_max));
  kv("bayer", bayer);
  kv("seed", std::to_string(seed));
  kv("augment", b(augment));
  std::string os_list;
  for (std::size_t i = 0; i < oversample.size(); ++i) os_list += (i ? "," : "") + std::to_string(oversample[i]);
  kv("oversample", os_list);
  kv("patch_size", std::to_string(patch_size));
  kv("temperature", fmt_double(temperature));
  kv("patchnet_variant", patchnet_variant);
  kv("patchnet_width_divisor", std::to_string(patchnet_width_divisor));
  kv("restore_channels", std::to_string(restore.channels));
  kv("restore_depth", std::to_string(restore.depth));
  kv("restore_ratio", std::to_string(restore.ratio));
  kv("sigma_conditioning", b(restore.sigma_conditioning));
  kv("hnm_threshold", fmt_double(hnm_threshold));
  kv("hnm_schedule", b(hnm_schedule));
  kv("hnm_start", fmt_double(hnm_start));
  kv("hnm_end", fmt_double(hnm_end));
  kv("val_sigma", fmt_double(val_sigma));
  kv("eval_seed", std::to_string(eval_seed));
  kv("init_checkpoint", init_checkpoint);
  kv("keep_all_checkpoints", b(keep_all_checkpoints));
  return os.str();
}

TrainRun TrainRun::parse(const std::string& text) {
  TrainRun run;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    try {
      it->second(run, key, value);
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      if (msg.rfind("config: ", 0) == 0) msg.erase(0, 8);
      throw ConfigError("config line " + std::to_string(line_no) + " ('" + key + " = " + value + "'): " + msg);
    }
  }
  run.validate();
  return run;
}

TrainRun TrainRun::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace patchsel::training
