#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "voxel2vec/error.hpp"
#include "voxel2vec/volume.hpp"

namespace voxel2vec {

using symbol_id = std::uint32_t;

/// Dense ids for the level combinations observed in one or more quantized volumes.
///
/// A univariate table has arity 1 and maps each observed level to an id; a multivariate
/// table maps N-tuples of levels. Ids are handed out in first-occurrence order. When
/// R^N fits in 64 bits a tuple is packed into a single integer key, otherwise the tuple
/// itself is the key.
class symbol_table {
 public:
  symbol_table() = default;
  symbol_table(std::size_t arity, std::uint32_t level_count) : arity_(arity), level_count_(level_count) {
    detail::require(arity_ >= 1, "symbol_table: arity must be at least 1");
    detail::require(level_count_ >= 1, "symbol_table: level count must be at least 1");
    packed_ = fits_packed(arity_, level_count_);
  }

  std::size_t arity() const { return arity_; }
  std::uint32_t level_count() const { return level_count_; }
  std::size_t size() const { return frequency_.size(); }
  std::uint64_t total() const { return total_; }
  bool packed_keys() const { return packed_; }

  std::span<const std::uint32_t> combination(symbol_id id) const {
    return {combos_.data() + static_cast<std::size_t>(id) * arity_, arity_};
  }
  std::uint64_t frequency(symbol_id id) const { return frequency_[id]; }
  std::span<const std::uint64_t> frequencies() const { return frequency_; }

  std::optional<symbol_id> find(std::span<const std::uint32_t> combo) const {
    detail::require(combo.size() == arity_, "symbol_table: combination arity mismatch");
    for (auto level : combo)
      if (level >= level_count_) return std::nullopt;
    if (packed_) {
      auto it = packed_index_.find(pack(combo));
      if (it == packed_index_.end()) return std::nullopt;
      return it->second;
    }
    auto it = wide_index_.find(std::vector<std::uint32_t>(combo.begin(), combo.end()));
    if (it == wide_index_.end()) return std::nullopt;
    return it->second;
  }

  // Returns the id for combo, adding it if unseen, and counts one occurrence.
  symbol_id intern(std::span<const std::uint32_t> combo) {
    const symbol_id id = insert(combo);
    ++frequency_[id];
    ++total_;
    return id;
  }

  // Adds combo without counting an occurrence; used when rebuilding a table from a file.
  symbol_id insert(std::span<const std::uint32_t> combo) {
    check_combo(combo);
    const auto next = static_cast<symbol_id>(frequency_.size());
    if (packed_) {
      auto [it, added] = packed_index_.try_emplace(pack(combo), next);
      if (!added) return it->second;
    } else {
      auto [it, added] = wide_index_.try_emplace(std::vector<std::uint32_t>(combo.begin(), combo.end()), next);
      if (!added) return it->second;
    }
    combos_.insert(combos_.end(), combo.begin(), combo.end());
    frequency_.push_back(0);
    return next;
  }

  // The concatenated-word form "l0_l1_..._lN-1" used for export.
  std::string word(symbol_id id) const {
    std::string out;
    for (auto level : combination(id)) {
      if (!out.empty()) out += '_';
      out += std::to_string(level);
    }
    return out;
  }

 private:
  static bool fits_packed(std::size_t arity, std::uint32_t level_count) {
    unsigned __int128 span = 1;
    for (std::size_t i = 0; i < arity; ++i) {
      span *= level_count;
      if (span > std::numeric_limits<std::uint64_t>::max()) return false;
    }
    return true;
  }

  std::uint64_t pack(std::span<const std::uint32_t> combo) const {
    std::uint64_t key = 0;
    for (std::size_t i = arity_; i-- > 0;) key = key * level_count_ + combo[i];
    return key;
  }

  void check_combo(std::span<const std::uint32_t> combo) const {
    detail::require(combo.size() == arity_, "symbol_table: combination arity mismatch");
    for (auto level : combo) detail::require(level < level_count_, "symbol_table: level out of range");
  }

  std::size_t arity_ = 1;
  std::uint32_t level_count_ = 1;
  bool packed_ = true;
  std::uint64_t total_ = 0;
  std::vector<std::uint32_t> combos_;
  std::vector<std::uint64_t> frequency_;
  std::unordered_map<std::uint64_t, symbol_id> packed_index_;
  std::map<std::vector<std::uint32_t>, symbol_id> wide_index_;
};

// A grid of symbol ids sharing one table.
class symbol_volume {
 public:
  symbol_volume() = default;
  symbol_volume(dims3 dims, std::vector<symbol_id> ids, std::shared_ptr<const symbol_table> table)
      : dims_(dims), ids_(std::move(ids)), table_(std::move(table)) {
    detail::require(table_ != nullptr, "symbol_volume: null table");
    detail::require(ids_.size() == dims_.count(), "symbol_volume: size mismatch");
    for (auto id : ids_) detail::require(id < table_->size(), "symbol_volume: id out of range");
  }

  const dims3& dims() const { return dims_; }
  std::size_t size() const { return ids_.size(); }
  std::span<const symbol_id> ids() const { return ids_; }
  symbol_id operator[](std::size_t i) const { return ids_[i]; }
  symbol_id at(std::size_t i, std::size_t j, std::size_t k) const { return ids_[dims_.index(i, j, k)]; }
  const symbol_table& table() const { return *table_; }
  const std::shared_ptr<const symbol_table>& table_ptr() const { return table_; }
  std::size_t symbol_count() const { return table_->size(); }

 private:
  dims3 dims_;
  std::vector<symbol_id> ids_;
  std::shared_ptr<const symbol_table> table_;
};

// Per-symbol voxel counts within one symbol volume (the table's counts may span a collection).
inline std::vector<std::uint64_t> symbol_counts(const symbol_volume& sv) {
  std::vector<std::uint64_t> counts(sv.symbol_count(), 0);
  for (auto id : sv.ids()) ++counts[id];
  return counts;
}

struct symbolized {
  std::shared_ptr<const symbol_table> table;
  std::vector<symbol_volume> volumes;
};

/// Symbolizes a collection of members, each member being N co-registered quantized
/// variables. All members share one table so ids are comparable between them.
inline symbolized symbolize_collection(std::span<const std::vector<quantized_volume>> members) {
  detail::require(!members.empty(), "symbolize: no members");
  const std::size_t arity = members.front().size();
  detail::require(arity >= 1, "symbolize: need at least one variable");
  const dims3 dims = members.front().front().dims();
  std::uint32_t level_count = 1;
  for (const auto& member : members) {
    detail::require(member.size() == arity, "symbolize: members differ in variable count");
    for (const auto& q : member) {
      detail::require(q.dims() == dims, "symbolize: dims mismatch " + to_string(q.dims()) + " vs " + to_string(dims));
      level_count = std::max(level_count, q.level_count());
    }
  }

  auto table = std::make_shared<symbol_table>(arity, level_count);
  std::vector<symbol_volume> out;
  out.reserve(members.size());
  std::vector<std::uint32_t> combo(arity);
  for (const auto& member : members) {
    std::vector<symbol_id> ids(dims.count());
    for (std::size_t v = 0; v < ids.size(); ++v) {
      for (std::size_t a = 0; a < arity; ++a) combo[a] = member[a][v];
      ids[v] = table->intern(combo);
    }
    out.emplace_back(dims, std::move(ids), table);
  }
  return {std::move(table), std::move(out)};
}

inline std::pair<std::shared_ptr<const symbol_table>, symbol_volume> symbolize(
    std::span<const quantized_volume> variables) {
  std::vector<std::vector<quantized_volume>> members{{variables.begin(), variables.end()}};
  auto result = symbolize_collection(members);
  return {result.table, std::move(result.volumes.front())};
}

}  // namespace voxel2vec
