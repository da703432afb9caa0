#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "voxel2vec/error.hpp"
#include "voxel2vec/volume.hpp"

namespace voxel2vec {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

enum class value_kind { float32, float64, uint8, uint16 };
enum class byte_order { little, big };

inline std::size_t value_size(value_kind kind) {
  switch (kind) {
    case value_kind::float32: return 4;
    case value_kind::float64: return 8;
    case value_kind::uint8: return 1;
    case value_kind::uint16: return 2;
  }
  return 0;
}

inline std::string_view to_string(value_kind kind) {
  switch (kind) {
    case value_kind::float32: return "float32";
    case value_kind::float64: return "float64";
    case value_kind::uint8: return "uint8";
    case value_kind::uint16: return "uint16";
  }
  return "?";
}

inline value_kind parse_value_kind(std::string_view s) {
  if (s == "float32") return value_kind::float32;
  if (s == "float64") return value_kind::float64;
  if (s == "uint8") return value_kind::uint8;
  if (s == "uint16") return value_kind::uint16;
  throw descriptor_error("unknown dtype '" + std::string(s) + "'");
}

/// Describes one volume (a set of co-registered variables stored as headerless raw
/// files) and, optionally, a collection of such volumes over time steps or ensemble
/// parameters. Variable paths are resolved against the directory of the descriptor.
struct volume_descriptor {
  dims3 dims;
  value_kind kind = value_kind::float32;
  byte_order order = byte_order::little;
  std::vector<std::pair<std::string, fs::path>> variables;
  std::optional<double> time_step;
  json ensemble_params;  // null when absent

  std::vector<volume_descriptor> time_steps;
  std::vector<std::pair<std::string, volume_descriptor>> ensemble;

  bool has_variable(std::string_view name) const {
    for (const auto& [n, p] : variables)
      if (n == name) return true;
    return false;
  }

  const fs::path& file_for(std::string_view name) const {
    for (const auto& [n, p] : variables)
      if (n == name) return p;
    throw descriptor_error("descriptor has no variable '" + std::string(name) + "'");
  }

  std::vector<std::string> variable_names() const {
    std::vector<std::string> names;
    for (const auto& [n, p] : variables) names.push_back(n);
    return names;
  }
};

namespace detail {

inline dims3 parse_dims(const json& j) {
  if (!j.is_array() || j.size() != 3) throw descriptor_error("dims must be an array of three integers");
  dims3 d;
  std::size_t* out[3] = {&d.nx, &d.ny, &d.nz};
  for (int a = 0; a < 3; ++a) {
    if (!j[a].is_number_integer() || j[a].get<long long>() <= 0)
      throw descriptor_error("dims entries must be positive integers");
    *out[a] = j[a].get<std::size_t>();
  }
  return d;
}

}  // namespace detail

inline volume_descriptor parse_descriptor(const json& j, const fs::path& base_dir,
                                          const volume_descriptor* parent = nullptr) {
  if (!j.is_object()) throw descriptor_error("descriptor must be a JSON object");
  volume_descriptor d;
  if (parent != nullptr) {
    d.dims = parent->dims;
    d.kind = parent->kind;
    d.order = parent->order;
  }
  try {
    if (j.contains("dims")) d.dims = detail::parse_dims(j.at("dims"));
    if (j.contains("dtype")) d.kind = parse_value_kind(j.at("dtype").get<std::string>());
    if (j.contains("byte_order")) {
      const auto bo = j.at("byte_order").get<std::string>();
      if (bo == "little") d.order = byte_order::little;
      else if (bo == "big") d.order = byte_order::big;
      else throw descriptor_error("byte_order must be 'little' or 'big'");
    }
    if (j.contains("variables")) {
      for (const auto& [name, path] : j.at("variables").items()) {
        fs::path p = path.get<std::string>();
        d.variables.emplace_back(name, p.is_absolute() ? p : base_dir / p);
      }
    }
    if (j.contains("time_step")) d.time_step = j.at("time_step").get<double>();
    if (j.contains("ensemble_params")) d.ensemble_params = j.at("ensemble_params");
    if (j.contains("time_steps"))
      for (const auto& child : j.at("time_steps")) d.time_steps.push_back(parse_descriptor(child, base_dir, &d));
    if (j.contains("ensemble"))
      for (const auto& [label, child] : j.at("ensemble").items())
        d.ensemble.emplace_back(label, parse_descriptor(child, base_dir, &d));
  } catch (const nlohmann::json::exception& e) {
    throw descriptor_error(std::string("malformed descriptor: ") + e.what());
  }
  if (d.dims.count() == 0) throw descriptor_error("descriptor is missing dims");
  return d;
}

inline volume_descriptor load_descriptor(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open descriptor " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw descriptor_error("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_descriptor(j, path.parent_path());
}

// Serializes with variable paths relative to base_dir when they live below it.
inline json to_json(const volume_descriptor& d, const fs::path& base_dir) {
  json j;
  j["dims"] = {d.dims.nx, d.dims.ny, d.dims.nz};
  j["dtype"] = std::string(to_string(d.kind));
  j["byte_order"] = d.order == byte_order::little ? "little" : "big";
  json vars = json::object();
  for (const auto& [name, path] : d.variables) {
    auto rel = path.lexically_relative(base_dir);
    vars[name] = (rel.empty() || *rel.begin() == "..") ? path.generic_string() : rel.generic_string();
  }
  j["variables"] = vars;
  if (d.time_step) j["time_step"] = *d.time_step;
  if (!d.ensemble_params.is_null()) j["ensemble_params"] = d.ensemble_params;
  if (!d.time_steps.empty()) {
    j["time_steps"] = json::array();
    for (const auto& c : d.time_steps) j["time_steps"].push_back(to_json(c, base_dir));
  }
  if (!d.ensemble.empty()) {
    j["ensemble"] = json::object();
    for (const auto& [label, c] : d.ensemble) j["ensemble"][label] = to_json(c, base_dir);
  }
  return j;
}

namespace detail {

template <class T>
T load_scalar(const unsigned char* p, bool swap) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if (swap) std::reverse(buf, buf + sizeof(T));
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

template <class T>
void store_scalar(unsigned char* p, T value, bool swap) {
  std::memcpy(p, &value, sizeof(T));
  if (swap) std::reverse(p, p + sizeof(T));
}

inline bool needs_swap(byte_order order) {
  return (order == byte_order::little) != (std::endian::native == std::endian::little);
}

inline std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw io_error("read failed for " + path.string());
  return bytes;
}

}  // namespace detail

inline std::vector<double> decode_raw(std::span<const unsigned char> bytes, value_kind kind, byte_order order) {
  const std::size_t width = value_size(kind);
  const bool swap = detail::needs_swap(order);
  std::vector<double> out(bytes.size() / width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const unsigned char* p = bytes.data() + i * width;
    switch (kind) {
      case value_kind::float32: out[i] = detail::load_scalar<float>(p, swap); break;
      case value_kind::float64: out[i] = detail::load_scalar<double>(p, swap); break;
      case value_kind::uint8: out[i] = *p; break;
      case value_kind::uint16: out[i] = detail::load_scalar<std::uint16_t>(p, swap); break;
    }
  }
  return out;
}

inline volume load_raw_volume(const volume_descriptor& d, std::string_view variable) {
  const fs::path& path = d.file_for(variable);
  if (!fs::exists(path)) throw io_error("missing volume file " + path.string());
  const auto bytes = detail::read_file(path);
  const std::size_t expected = d.dims.count() * value_size(d.kind);
  if (bytes.size() != expected)
    throw descriptor_error(path.string() + ": " + std::to_string(bytes.size()) + " bytes, expected " +
                           std::to_string(expected) + " for " + to_string(d.dims) + " " +
                           std::string(to_string(d.kind)));
  return volume(d.dims, decode_raw(bytes, d.kind, d.order));
}

inline void write_bytes(const fs::path& path, std::span<const unsigned char> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("write failed for " + path.string());
}

inline void write_raw_volume(const fs::path& path, std::span<const double> values, value_kind kind,
                             byte_order order = byte_order::little) {
  const std::size_t width = value_size(kind);
  const bool swap = detail::needs_swap(order);
  std::vector<unsigned char> bytes(values.size() * width);
  for (std::size_t i = 0; i < values.size(); ++i) {
    unsigned char* p = bytes.data() + i * width;
    switch (kind) {
      case value_kind::float32: detail::store_scalar(p, static_cast<float>(values[i]), swap); break;
      case value_kind::float64: detail::store_scalar(p, values[i], swap); break;
      case value_kind::uint8: *p = static_cast<unsigned char>(values[i]); break;
      case value_kind::uint16: detail::store_scalar(p, static_cast<std::uint16_t>(values[i]), swap); break;
    }
  }
  write_bytes(path, bytes);
}

inline void write_u16_raw(const fs::path& path, std::span<const std::uint16_t> values) {
  std::vector<unsigned char> bytes(values.size() * 2);
  const bool swap = detail::needs_swap(byte_order::little);
  for (std::size_t i = 0; i < values.size(); ++i) detail::store_scalar(bytes.data() + 2 * i, values[i], swap);
  write_bytes(path, bytes);
}

inline std::vector<std::uint16_t> read_u16_raw(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() % 2 != 0) throw io_error(path.string() + ": odd byte count for u16 data");
  const bool swap = detail::needs_swap(byte_order::little);
  std::vector<std::uint16_t> out(bytes.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::load_scalar<std::uint16_t>(bytes.data() + 2 * i, swap);
  return out;
}

// Writes text to path through a temporary sibling and a rename.
inline void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw io_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace voxel2vec
