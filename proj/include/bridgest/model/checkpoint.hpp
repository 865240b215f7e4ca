#pragma once

// Versioned binary checkpoint container (little-endian):
//
//   magic "BRIDGEST" | u32 version
//   u64 len | config JSON
//   param set "params", optional param set "best" (u8 present flag)
//   u64 count | optimizer entries (name, i64 step, m, v)
//   u64 len | state JSON
//   u64 FNV-1a checksum of every preceding byte
//
// A param set is u64 count followed by entries (name, u8 trainable, u32 rank,
// u64 dims..., u8 sizeof(Real), raw values). Serialization is a pure function
// of the contents, so save -> load -> save reproduces the same bytes.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "bridgest/errors.hpp"
#include "bridgest/numerics/parameter_store.hpp"

namespace bridgest::model {

inline constexpr char kCheckpointMagic[8] = {'B', 'R', 'I', 'D', 'G', 'E', 'S', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json config = nlohmann::json::object();
  ParameterStore params;  // values, trainable flags, optimizer state
  std::optional<ParameterStore> best;
  nlohmann::json state = nlohmann::json::object();
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void pod(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.append(b, sizeof(T));
  }
  void str(std::string_view s) {
    pod<std::uint64_t>(s.size());
    out_.append(s);
  }
  void reals(const std::vector<Real>& v) { out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(Real)); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}

  template <class T>
  T pod(const std::string& field) {
    need(sizeof(T), field);
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(const std::string& field) {
    const auto n = pod<std::uint64_t>(field + ".length");
    need(n, field);
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<Real> reals(std::size_t n, const std::string& field) {
    if (n > (b_.size() - pos_) / sizeof(Real)) throw CheckpointError("checkpoint truncated in field '" + field + "'");
    std::vector<Real> v(n);
    std::memcpy(v.data(), b_.data() + pos_, n * sizeof(Real));
    pos_ += n * sizeof(Real);
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const std::string& field) const {
    if (n > b_.size() - pos_) throw CheckpointError("checkpoint truncated in field '" + field + "'");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

inline void write_params(Writer& w, const ParameterStore& s) {
  w.pod<std::uint64_t>(s.size());
  for (const auto& [name, e] : s.entries()) {
    w.str(name);
    w.pod<std::uint8_t>(e.trainable ? 1 : 0);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(e.value.shape.size()));
    for (auto d : e.value.shape) w.pod<std::uint64_t>(d);
    w.pod<std::uint8_t>(sizeof(Real));
    w.reals(e.value.data);
  }
}

inline ParameterStore read_params(Reader& r, const std::string& set) {
  ParameterStore s;
  const auto n = r.pod<std::uint64_t>(set + ".count");
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string f = set + "[" + std::to_string(i) + "]";
    std::string name = r.str(f + ".name");
    const bool trainable = r.pod<std::uint8_t>(f + ".trainable") != 0;
    const auto rank = r.pod<std::uint32_t>(f + ".rank");
    if (rank == 0 || rank > 8) throw CheckpointError("checkpoint field '" + f + ".rank' is invalid");
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.pod<std::uint64_t>(f + ".shape");
      if (d == 0) throw CheckpointError("checkpoint field '" + f + ".shape' has a zero dimension");
    }
    if (r.pod<std::uint8_t>(f + ".real_size") != sizeof(Real)) {
      throw CheckpointError("checkpoint field '" + f + ".real_size' does not match this build's precision");
    }
    auto data = r.reals(shape_numel(shape), f + ".data");
    if (s.contains(name)) throw CheckpointError("checkpoint field '" + f + ".name' is duplicated");
    s.add(name, Tensor(std::move(shape), std::move(data)), trainable);
  }
  return s;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& c) {
  detail::Writer w;
  w.bytes().append(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(c.config.dump());
  detail::write_params(w, c.params);
  w.pod<std::uint8_t>(c.best ? 1 : 0);
  if (c.best) detail::write_params(w, *c.best);
  const auto& opt = c.params.optimizer_state();
  w.pod<std::uint64_t>(opt.size());
  for (const auto& [name, m] : opt) {
    w.str(name);
    w.pod<std::int64_t>(m.step);
    w.reals(m.m.data);
    w.reals(m.v.data);
  }
  w.str(c.state.dump());
  const std::uint64_t sum = detail::fnv1a(w.bytes());
  w.pod<std::uint64_t>(sum);
  return std::move(w.bytes());
}

/// Parses a checkpoint; any inconsistency throws CheckpointError naming the
/// offending field and no partial result escapes.
inline Checkpoint deserialize_checkpoint(std::string_view bytes) {
  detail::Reader r(bytes);
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError("checkpoint field 'magic' is invalid");
  }
  for (std::size_t i = 0; i < sizeof(kCheckpointMagic); ++i) r.pod<char>("magic");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint field 'version' is " + std::to_string(version) + ", expected " +
                         std::to_string(kCheckpointVersion));
  }
  Checkpoint c;
  try {
    c.config = nlohmann::json::parse(r.str("config"));
  } catch (const nlohmann::json::parse_error&) {
    throw CheckpointError("checkpoint field 'config' is not valid JSON");
  }
  c.params = detail::read_params(r, "params");
  if (r.pod<std::uint8_t>("best.present")) c.best = detail::read_params(r, "best");
  const auto n_opt = r.pod<std::uint64_t>("optimizer.count");
  for (std::uint64_t i = 0; i < n_opt; ++i) {
    const std::string f = "optimizer[" + std::to_string(i) + "]";
    std::string name = r.str(f + ".name");
    if (!c.params.contains(name)) throw CheckpointError("checkpoint field '" + f + ".name' names no parameter");
    AdamMoments m;
    m.step = r.pod<std::int64_t>(f + ".step");
    const Shape& shape = c.params.at(name).shape;
    m.m = Tensor(shape, r.reals(shape_numel(shape), f + ".m"));
    m.v = Tensor(shape, r.reals(shape_numel(shape), f + ".v"));
    c.params.optimizer_state().emplace(std::move(name), std::move(m));
  }
  try {
    c.state = nlohmann::json::parse(r.str("state"));
  } catch (const nlohmann::json::parse_error&) {
    throw CheckpointError("checkpoint field 'state' is not valid JSON");
  }
  const std::size_t body = r.pos();
  const auto sum = r.pod<std::uint64_t>("checksum");
  if (sum != detail::fnv1a(bytes.substr(0, body))) throw CheckpointError("checkpoint field 'checksum' does not match");
  if (r.pos() != bytes.size()) throw CheckpointError("checkpoint has trailing bytes after field 'checksum'");
  return c;
}

inline void save_checkpoint_file(const std::string& path, const Checkpoint& c) {
  const std::string bytes = serialize_checkpoint(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("error writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace bridgest::model
