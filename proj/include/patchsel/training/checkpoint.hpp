#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "patchsel/autograd/optim.hpp"

namespace patchsel::training {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> values;
};

struct StoredSlot {
  std::string name;  // parameter the moments belong to
  std::uint64_t step = 0;
  std::vector<float> m;
  std::vector<float> v;
};

// Binary layout, little-endian:
//   "PFCK" | u32 version | u64 len, config text
//   | u32 count, { u32 len, name | u32 rank | u64 dims[rank] | f32 values }
//   | u32 count, { u32 len, name | u64 step | u64 n | f32 m[n] | f32 v[n] }
//   | u32 epoch | u64 rng seed | u64 global step
struct Checkpoint {
  std::string config_text;  // TrainRun::to_text(); carries the model topology
  std::vector<StoredTensor> tensors;
  std::vector<StoredSlot> optimizer;
  std::uint32_t epoch = 0;  // completed epochs
  std::uint64_t rng_seed = 0;
  std::uint64_t global_step = 0;

  const StoredTensor* find(const std::string& name) const;
  bool has_prefix(const std::string& prefix) const;
  // Drops tensors and optimizer slots whose name starts with `prefix`.
  void strip(const std::string& prefix);
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// Throws ParseError (with byte offset) on bad magic, unknown version,
// truncation or trailing bytes.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

// Written to `<path>.tmp` and renamed, so a crash never leaves a torn file.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Captures values as float32.
StoredTensor store_tensor(const ag::NamedTensor& t);
void store_optimizer(const ag::Adam& opt, std::vector<StoredSlot>& out);

// Copies stored values into `params` (matched by name, shapes checked).
// Missing names throw ConfigError unless `allow_missing`.
void restore_tensors(const Checkpoint& ckpt, const std::vector<ag::NamedTensor>& params, bool allow_missing = false);
void restore_optimizer(const Checkpoint& ckpt, ag::Adam& opt);

// Stable identifier of checkpoint contents (FNV-1a over the encoded bytes).
std::string checkpoint_id(const std::vector<std::uint8_t>& bytes);

}  // namespace patchsel::training
