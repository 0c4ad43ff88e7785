#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "mirnav/nnet/rmsprop.hpp"

namespace mirnav::nnet {

// Checkpoint file layout:
//   bytes 0..7   magic "MIRNAVCK"
//   bytes 8..11  header length N, uint32 little-endian
//   next N bytes JSON header:
//     {"schema_version": 1, "scalar": "f32"|"f64", "version": update count,
//      "arrays": [{"name", "rows", "cols", "trainable"}...],
//      "has_optimizer": bool, "rng_state": string, "meta": {...}}
//   payload      parameter values, array by array in header order, row-major,
//                little-endian IEEE-754; then the RMSprop accumulators in the
//                same order when has_optimizer is true.
inline constexpr char kCheckpointMagic[8] = {'M', 'I', 'R', 'N', 'A', 'V', 'C', 'K'};
inline constexpr int kCheckpointSchema = 1;

template <class S>
struct Checkpoint {
  ParamStore<S> params;
  std::optional<RmspropState<S>> optimizer;
  std::string rng_state;
  nlohmann::json meta = nlohmann::json::object();
};

namespace detail {

template <class S>
constexpr const char* scalar_tag() {
  if constexpr (std::is_same_v<S, float>) return "f32";
  else if constexpr (std::is_same_v<S, double>) return "f64";
  else static_assert(sizeof(S) == 0, "checkpoint scalar must be float or double");
}

template <class S>
void put_le(std::string& out, S value) {
  using U = std::conditional_t<sizeof(S) == 4, std::uint32_t, std::uint64_t>;
  U bits;
  std::memcpy(&bits, &value, sizeof(S));
  for (std::size_t i = 0; i < sizeof(S); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <class S>
S get_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(S) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(S); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
  S v;
  std::memcpy(&v, &bits, sizeof(S));
  return v;
}

}  // namespace detail

template <class S>
std::string encode_checkpoint(const Checkpoint<S>& ck) {
  nlohmann::json h;
  h["schema_version"] = kCheckpointSchema;
  h["scalar"] = detail::scalar_tag<S>();
  h["version"] = ck.params.version();
  auto arrays = nlohmann::json::array();
  for (int i = 0; i < ck.params.size(); ++i)
    arrays.push_back({{"name", ck.params[i].name},
                      {"rows", ck.params[i].value.rows()},
                      {"cols", ck.params[i].value.cols()},
                      {"trainable", ck.params[i].trainable}});
  h["arrays"] = arrays;
  h["has_optimizer"] = ck.optimizer.has_value();
  h["rng_state"] = ck.rng_state;
  h["meta"] = ck.meta;
  const std::string header = h.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  const auto n = static_cast<std::uint32_t>(header.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((n >> (8 * i)) & 0xFF));
  out += header;
  for (int i = 0; i < ck.params.size(); ++i) {
    const auto& v = ck.params[i].value;
    for (Eigen::Index k = 0; k < v.size(); ++k) detail::put_le(out, v.data()[k]);
  }
  if (ck.optimizer)
    for (int i = 0; i < ck.optimizer->size(); ++i) {
      const auto& v = (*ck.optimizer)[i];
      for (Eigen::Index k = 0; k < v.size(); ++k) detail::put_le(out, v.data()[k]);
    }
  return out;
}

template <class S>
Checkpoint<S> decode_checkpoint(const std::string& bytes) {
  auto fail = [](const std::string& why) { return ConfigError("bad checkpoint: " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw fail("missing magic");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(raw[8 + i]) << (8 * i);
  if (bytes.size() < 12 + static_cast<std::size_t>(n)) throw fail("truncated header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(12, n));
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  if (h.value("schema_version", 0) != kCheckpointSchema) throw fail("unsupported schema version");
  if (h.value("scalar", "") != std::string(detail::scalar_tag<S>())) throw fail("scalar type mismatch");

  Checkpoint<S> ck;
  for (const auto& a : h.at("arrays"))
    ck.params.add(a.at("name").get<std::string>(), a.at("rows").get<Eigen::Index>(), a.at("cols").get<Eigen::Index>(),
                  a.at("trainable").get<bool>());
  ck.params.set_version(h.at("version").get<std::uint64_t>());
  ck.rng_state = h.value("rng_state", "");
  ck.meta = h.value("meta", nlohmann::json::object());

  std::size_t pos = 12 + n;
  auto read_into = [&](Mat<S>& m) {
    const std::size_t need = static_cast<std::size_t>(m.size()) * sizeof(S);
    if (pos + need > bytes.size()) throw fail("truncated payload");
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = detail::get_le<S>(raw + pos + static_cast<std::size_t>(k) * sizeof(S));
    pos += need;
  };
  for (int i = 0; i < ck.params.size(); ++i) read_into(ck.params[i].value);
  if (h.at("has_optimizer").get<bool>()) {
    ck.optimizer.emplace(ck.params);
    for (int i = 0; i < ck.optimizer->size(); ++i) read_into((*ck.optimizer)[i]);
  }
  if (pos != bytes.size()) throw fail("trailing bytes");
  return ck;
}

template <class S>
void save_checkpoint(const Checkpoint<S>& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path);
  const auto bytes = encode_checkpoint(ck);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <class S>
Checkpoint<S> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint<S>(ss.str());
}

}  // namespace mirnav::nnet
