#include "patchsel/training/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "patchsel/corpus/pnm.hpp"
#include "patchsel/error.hpp"

namespace patchsel::training {

namespace {

constexpr char kMagic[4] = {'P', 'F', 'C', 'K'};
// Guards against absurd allocations when a length field is corrupted.
constexpr std::uint64_t kMaxRank = 8;

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  void str32(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  void need(std::uint64_t n, const char* what) const {
    if (n > b_.size() - pos_) throw ParseError(std::string("checkpoint truncated reading ") + what, pos_);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<float> f32s(std::uint64_t n, const char* what) {
    if (n > (b_.size() - pos_) / 4) throw ParseError(std::string("checkpoint truncated reading ") + what, pos_);
    std::vector<float> out(n);
    for (auto& f : out) f = std::bit_cast<float>(u32(what));
    return out;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

bool starts_with(const std::string& s, const std::string& prefix) { return s.compare(0, prefix.size(), prefix) == 0; }

}  // namespace

const StoredTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

bool Checkpoint::has_prefix(const std::string& prefix) const {
  for (const auto& t : tensors) {
    if (starts_with(t.name, prefix)) return true;
  }
  return false;
}

void Checkpoint::strip(const std::string& prefix) {
  std::erase_if(tensors, [&](const StoredTensor& t) { return starts_with(t.name, prefix); });
  std::erase_if(optimizer, [&](const StoredSlot& s) { return starts_with(s.name, prefix); });
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(ckpt.config_text.size());
  w.raw(ckpt.config_text.data(), ckpt.config_text.size());
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.str32(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    std::uint64_t n = 1;
    for (auto d : t.shape) {
      w.u64(d);
      n *= d;
    }
    if (n != t.values.size()) throw InternalError("checkpoint tensor '" + t.name + "' shape/value mismatch");
    for (float f : t.values) w.f32(f);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.optimizer.size()));
  for (const auto& s : ckpt.optimizer) {
    if (s.m.size() != s.v.size()) throw InternalError("optimizer slot '" + s.name + "' moment size mismatch");
    w.str32(s.name);
    w.u64(s.step);
    w.u64(s.m.size());
    for (float f : s.m) w.f32(f);
    for (float f : s.v) w.f32(f);
  }
  w.u32(ckpt.epoch);
  w.u64(ckpt.rng_seed);
  w.u64(ckpt.global_step);
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  Checkpoint c;
  if (r.str(4, "magic") != std::string(kMagic, 4)) throw ParseError("not a checkpoint (bad magic)", 0);
  const std::size_t version_at = r.pos();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  c.config_text = r.str(r.u64("config length"), "config");
  const std::uint32_t n_tensors = r.u32("tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    StoredTensor t;
    t.name = r.str(r.u32("name length"), "tensor name");
    const std::size_t rank_at = r.pos();
    const std::uint32_t rank = r.u32("rank");
    if (rank > kMaxRank) throw ParseError("implausible tensor rank " + std::to_string(rank), rank_at);
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.shape.push_back(r.u64("dims"));
      n *= t.shape.back();
    }
    t.values = r.f32s(n, "tensor values");
    c.tensors.push_back(std::move(t));
  }
  const std::uint32_t n_slots = r.u32("optimizer count");
  for (std::uint32_t i = 0; i < n_slots; ++i) {
    StoredSlot s;
    s.name = r.str(r.u32("name length"), "slot name");
    s.step = r.u64("slot step");
    const std::uint64_t n = r.u64("slot size");
    s.m = r.f32s(n, "first moments");
    s.v = r.f32s(n, "second moments");
    c.optimizer.push_back(std::move(s));
  }
  c.epoch = r.u32("epoch");
  c.rng_seed = r.u64("rng seed");
  c.global_step = r.u64("global step");
  if (!r.done()) throw ParseError("trailing bytes after checkpoint", r.pos());
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".tmp";
  corpus::write_file_bytes(tmp, encode_checkpoint(ckpt));
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(corpus::read_file_bytes(path)); }

StoredTensor store_tensor(const ag::NamedTensor& t) {
  StoredTensor s;
  s.name = t.name;
  for (auto d : t.tensor.shape()) s.shape.push_back(d);
  const auto v = t.tensor.data();
  s.values.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) s.values[i] = static_cast<float>(v[i]);
  return s;
}

void store_optimizer(const ag::Adam& opt, std::vector<StoredSlot>& out) {
  const auto& params = opt.params();
  const auto& slots = opt.slots();
  for (std::size_t i = 0; i < params.size(); ++i) {
    StoredSlot s;
    s.name = params[i].name;
    s.step = slots[i].step;
    const std::size_t n = params[i].tensor.numel();
    s.m.assign(n, 0.0f);
    s.v.assign(n, 0.0f);
    for (std::size_t j = 0; j < slots[i].m.size(); ++j) s.m[j] = static_cast<float>(slots[i].m[j]);
    for (std::size_t j = 0; j < slots[i].v.size(); ++j) s.v[j] = static_cast<float>(slots[i].v[j]);
    out.push_back(std::move(s));
  }
}

void restore_tensors(const Checkpoint& ckpt, const std::vector<ag::NamedTensor>& params, bool allow_missing) {
  for (const auto& p : params) {
    const StoredTensor* s = ckpt.find(p.name);
    if (!s) {
      if (allow_missing) continue;
      throw ConfigError("checkpoint has no tensor '" + p.name + "'");
    }
    const auto& shape = p.tensor.shape();
    bool same = s->shape.size() == shape.size();
    for (std::size_t d = 0; same && d < shape.size(); ++d) same = s->shape[d] == shape[d];
    if (!same) throw ConfigError("checkpoint tensor '" + p.name + "' does not match the model shape");
    ag::Tensor t = p.tensor;
    auto dst = t.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(s->values[i]);
  }
}

void restore_optimizer(const Checkpoint& ckpt, ag::Adam& opt) {
  const auto& params = opt.params();
  auto& slots = opt.slots();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const StoredSlot* found = nullptr;
    for (const auto& s : ckpt.optimizer) {
      if (s.name == params[i].name) found = &s;
    }
    if (!found) throw ConfigError("checkpoint has no optimizer state for '" + params[i].name + "'");
    if (found->m.size() != params[i].tensor.numel()) {
      throw ConfigError("optimizer state for '" + params[i].name + "' has the wrong size");
    }
    slots[i].step = found->step;
    slots[i].m.assign(found->m.begin(), found->m.end());
    slots[i].v.assign(found->v.begin(), found->v.end());
  }
}

std::string checkpoint_id(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace patchsel::training
