#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "voxel2vec/error.hpp"
#include "voxel2vec/io.hpp"
#include "voxel2vec/model.hpp"
#include "voxel2vec/symbols.hpp"

namespace voxel2vec {

/// Binary embedding file, all little-endian:
///   "V2V1" | |C| u64 | d u32 | N u32 | |C| x N level tuples (u32) | Z rows f32 | Zhat rows f32
inline constexpr char embedding_magic[4] = {'V', '2', 'V', '1'};

namespace detail {

class byte_writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  template <class T>
  void put(T value) {
    unsigned char buf[sizeof(T)];
    store_scalar(buf, value, needs_swap(byte_order::little));
    raw(buf, sizeof(T));
  }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class byte_reader {
 public:
  explicit byte_reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw io_error("embedding file truncated");
    const T v = load_scalar<T>(bytes_.data() + pos_, needs_swap(byte_order::little));
    pos_ += sizeof(T);
    return v;
  }
  void expect(std::span<const char> magic) {
    if (pos_ + magic.size() > bytes_.size() || std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0)
      throw io_error("not a voxel2vec embedding file (bad magic)");
    pos_ += magic.size();
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode_embedding(const embedding_model& m) {
  detail::require(m.table() != nullptr, "save_embedding: model has no symbol table");
  const symbol_table& table = *m.table();
  detail::require(table.size() == m.symbols(), "save_embedding: table/model size mismatch");
  detail::byte_writer w;
  w.raw(embedding_magic, 4);
  w.put<std::uint64_t>(m.symbols());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.dimension()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(table.arity()));
  for (symbol_id s = 0; s < table.size(); ++s)
    for (auto level : table.combination(s)) w.put<std::uint32_t>(level);
  for (float v : m.centers()) w.put<float>(v);
  for (float v : m.contexts()) w.put<float>(v);
  return w.bytes();
}

inline void save_embedding(const fs::path& path, const embedding_model& m) { write_bytes(path, encode_embedding(m)); }

/// Reads an embedding file. The restored table has zero frequencies and a level count
/// of one past the largest stored level.
inline embedding_model decode_embedding(std::span<const unsigned char> bytes) {
  detail::byte_reader r(bytes);
  r.expect(embedding_magic);
  const auto symbols = r.get<std::uint64_t>();
  const auto dimension = r.get<std::uint32_t>();
  const auto arity = r.get<std::uint32_t>();
  if (symbols == 0 || dimension == 0 || arity == 0) throw io_error("embedding file has an empty shape");
  const std::uint64_t needed = symbols * arity * 4 + 2 * symbols * dimension * 4;
  if (needed > bytes.size()) throw io_error("embedding file truncated");

  std::vector<std::uint32_t> combos(symbols * arity);
  std::uint32_t max_level = 0;
  for (auto& level : combos) max_level = std::max(max_level, level = r.get<std::uint32_t>());
  auto table = std::make_shared<symbol_table>(arity, max_level + 1);
  for (std::uint64_t s = 0; s < symbols; ++s) {
    const auto id = table->insert(std::span<const std::uint32_t>(combos.data() + s * arity, arity));
    if (id != s) throw io_error("embedding file repeats a symbol combination");
  }
  embedding_model m(symbols, dimension);
  for (float& v : m.centers()) v = r.get<float>();
  for (float& v : m.contexts()) v = r.get<float>();
  if (!r.at_end()) throw io_error("embedding file has trailing bytes");
  m.set_table(std::move(table));
  m.set_epochs_trained(1);
  return m;
}

inline embedding_model load_embedding(const fs::path& path) { return decode_embedding(detail::read_file(path)); }

// One row per symbol: id, concatenated word, z components, zhat components.
inline std::string embedding_csv(const embedding_model& m) {
  std::ostringstream out;
  out.precision(9);
  out << "symbol,word";
  for (std::size_t i = 0; i < m.dimension(); ++i) out << ",z" << i;
  for (std::size_t i = 0; i < m.dimension(); ++i) out << ",zhat" << i;
  out << '\n';
  for (symbol_id s = 0; s < m.symbols(); ++s) {
    out << s << ',' << (m.table() ? m.table()->word(s) : std::to_string(s));
    for (float v : m.center(s)) out << ',' << v;
    for (float v : m.context(s)) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace voxel2vec
