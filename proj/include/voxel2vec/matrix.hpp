#pragma once

#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "voxel2vec/error.hpp"

namespace voxel2vec {

// Row-major n x n matrix of doubles.
class square_matrix {
 public:
  square_matrix() = default;
  explicit square_matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }
  std::span<const double> data() const { return data_; }

  bool is_symmetric() const {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        if ((*this)(i, j) != (*this)(j, i)) return false;
    return true;
  }

  friend bool operator==(const square_matrix&, const square_matrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// Quotes a field that contains a comma, quote or newline.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

/// CSV with a header row of labels followed by n rows of values at 6 significant digits.
inline std::string matrix_csv(const square_matrix& m, std::span<const std::string> labels) {
  detail::require(labels.size() == m.size(), "matrix_csv: one label per row required");
  std::ostringstream out;
  out.precision(6);
  for (std::size_t i = 0; i < labels.size(); ++i) out << (i ? "," : "") << csv_field(labels[i]);
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
  return out.str();
}

}  // namespace voxel2vec
