#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "voxel2vec/error.hpp"

namespace voxel2vec {

// How the self-paced threshold is bounded. clamped_growth returns min(4 eta^2 / B^2 + 1/B, 1);
// literal_max returns max(..., 1), which never filters anything and is kept for comparison.
enum class threshold_mode { clamped_growth, literal_max };

// Which side plays the center when scoring a candidate during transfer prediction.
// as_printed scores candidate s against context o with sigma(zhat_s . z_o);
// swapped uses sigma(zhat_o . z_s).
enum class prediction_scoring { as_printed, swapped };

NLOHMANN_JSON_SERIALIZE_ENUM(threshold_mode, {{threshold_mode::clamped_growth, "clamped_growth"},
                                              {threshold_mode::literal_max, "literal_max"}})
NLOHMANN_JSON_SERIALIZE_ENUM(prediction_scoring, {{prediction_scoring::as_printed, "as_printed"},
                                                  {prediction_scoring::swapped, "swapped"}})

struct train_config {
  int context_window = 1;         // n: Chebyshev radius of the context window
  int negatives = 3;              // k
  int dimension = 30;             // d
  double learning_rate = 0.05;    // alpha, constant
  double penalty = 0.005;         // lambda
  int quantization = 256;         // R
  int batch_size = 1000;          // B: training pairs per self-paced step
  int epochs = 1;
  std::uint64_t seed = 1;
  double subsample_threshold = 1e-3;  // rho
  int min_samples_per_symbol = 8;

  bool adaptive_negative_sampling = true;  // exclusion of {c, O} and the norm penalty
  bool self_paced = true;                  // threshold filtering and informativeness weighting
  threshold_mode threshold = threshold_mode::clamped_growth;
  int pool_factor = 8;  // candidate pool m = pool_factor * k
  int threads = 1;      // 1 is the deterministic single-writer mode

  // lambda actually applied; the norm penalty belongs to adaptive negative sampling.
  double effective_penalty() const { return adaptive_negative_sampling ? penalty : 0.0; }

  void validate() const {
    detail::require(context_window >= 1, "context_window must be >= 1");
    detail::require(negatives >= 1, "negatives must be >= 1");
    detail::require(dimension >= 1, "dimension must be >= 1");
    detail::require(learning_rate > 0.0, "learning_rate must be > 0");
    detail::require(penalty >= 0.0, "penalty must be >= 0");
    detail::require(quantization >= 1, "quantization must be >= 1");
    detail::require(batch_size >= 1, "batch_size must be >= 1");
    detail::require(epochs >= 1, "epochs must be >= 1");
    detail::require(subsample_threshold > 0.0 && subsample_threshold <= 1.0, "subsample_threshold must be in (0, 1]");
    detail::require(min_samples_per_symbol >= 0, "min_samples_per_symbol must be >= 0");
    detail::require(pool_factor >= 1, "pool_factor must be >= 1");
    detail::require(threads >= 1, "threads must be >= 1");
  }
};

#define VOXEL2VEC_CONFIG_FIELDS(X)                                                                       \
  X(context_window) X(negatives) X(dimension) X(learning_rate) X(penalty) X(quantization) X(batch_size) \
  X(epochs) X(seed) X(subsample_threshold) X(min_samples_per_symbol) X(adaptive_negative_sampling)      \
  X(self_paced) X(threshold) X(pool_factor) X(threads)

// Keys equal the field names; missing keys keep their defaults.
template <class Json>
void to_json(Json& j, const train_config& c) {
#define VOXEL2VEC_TO(field) j[#field] = c.field;
  VOXEL2VEC_CONFIG_FIELDS(VOXEL2VEC_TO)
#undef VOXEL2VEC_TO
}

template <class Json>
void from_json(const Json& j, train_config& c) {
#define VOXEL2VEC_FROM(field) \
  if (j.contains(#field)) j.at(#field).get_to(c.field);
  VOXEL2VEC_CONFIG_FIELDS(VOXEL2VEC_FROM)
#undef VOXEL2VEC_FROM
}

}  // namespace voxel2vec
