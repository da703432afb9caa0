#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "voxel2vec/config.hpp"
#include "voxel2vec/context.hpp"
#include "voxel2vec/error.hpp"
#include "voxel2vec/symbols.hpp"

namespace voxel2vec {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(sigmoid(x)) without overflow for large |x|.
inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

template <class Real>
Real dot(std::span<const Real> a, std::span<const Real> b) {
  // Eight independent partial sums so the compiler can keep them in vector lanes.
  Real acc[8] = {};
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  Real tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <class Real>
Real norm2(std::span<const Real> a) {
  return std::sqrt(dot(a, a));
}

/// Center vectors z (one row per symbol) and context vectors zhat.
template <class Real>
class basic_embedding_model {
 public:
  using value_type = Real;

  basic_embedding_model() = default;
  basic_embedding_model(std::size_t symbols, std::size_t dimension)
      : symbols_(symbols), dimension_(dimension), center_(symbols * dimension, Real(0)),
        context_(symbols * dimension, Real(0)) {}

  std::size_t symbols() const { return symbols_; }
  std::size_t dimension() const { return dimension_; }

  std::span<Real> center(symbol_id s) { return {center_.data() + row(s), dimension_}; }
  std::span<const Real> center(symbol_id s) const { return {center_.data() + row(s), dimension_}; }
  std::span<Real> context(symbol_id s) { return {context_.data() + row(s), dimension_}; }
  std::span<const Real> context(symbol_id s) const { return {context_.data() + row(s), dimension_}; }

  std::span<Real> centers() { return center_; }
  std::span<const Real> centers() const { return center_; }
  std::span<Real> contexts() { return context_; }
  std::span<const Real> contexts() const { return context_; }

  const std::shared_ptr<const symbol_table>& table() const { return table_; }
  void set_table(std::shared_ptr<const symbol_table> table) { table_ = std::move(table); }

  std::uint64_t epochs_trained() const { return epochs_trained_; }
  void set_epochs_trained(std::uint64_t e) { epochs_trained_ = e; }

  bool all_finite() const {
    for (Real v : center_)
      if (!std::isfinite(v)) return false;
    for (Real v : context_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const basic_embedding_model& a, const basic_embedding_model& b) {
    return a.symbols_ == b.symbols_ && a.dimension_ == b.dimension_ && a.center_ == b.center_ &&
           a.context_ == b.context_;
  }

 private:
  std::size_t row(symbol_id s) const { return static_cast<std::size_t>(s) * dimension_; }

  std::size_t symbols_ = 0;
  std::size_t dimension_ = 0;
  std::vector<Real> center_;
  std::vector<Real> context_;
  std::shared_ptr<const symbol_table> table_;
  std::uint64_t epochs_trained_ = 0;
};

using embedding_model = basic_embedding_model<float>;

// Center rows uniform in [-0.5/d, 0.5/d], context rows zero.
template <class Real = float, class Rng>
basic_embedding_model<Real> init_model(std::size_t symbols, std::size_t dimension, Rng& rng) {
  detail::require(symbols >= 1, "init_model: need at least one symbol");
  detail::require(dimension >= 1, "init_model: dimension must be >= 1");
  basic_embedding_model<Real> m(symbols, dimension);
  const double half = 0.5 / static_cast<double>(dimension);
  std::uniform_real_distribution<double> uniform(-half, half);
  for (Real& v : m.centers()) v = static_cast<Real>(uniform(rng));
  return m;
}

struct step_params {
  double learning_rate = 0.05;
  double penalty = 0.0;  // lambda
  int negatives = 3;     // k, fixes the lambda / (k + 1) weight on negative norms
};

inline step_params step_params_from(const train_config& cfg) {
  return {cfg.learning_rate, cfg.effective_penalty(), cfg.negatives};
}

// Norms below this skip the penalty term; the norm is not differentiable at zero.
inline constexpr double min_penalty_norm = 1e-12;

/// One positive block of the update: the context o of center c together with the negatives
/// drawn for it. Gradient ascent on
///   log s(zhat_o.z_c) - lambda |z_c| + sum_w [log s(-zhat_w.z_c) - lambda/(k+1) |zhat_w|].
/// zhat_o and each zhat_w move immediately; z_c moves once at the end by the accumulated
/// step, which is computed from the vectors as they were when each term was reached.
/// Returns the objective evaluated before the update. `scratch` must hold d values.
template <class Real>
double update_positive(basic_embedding_model<Real>& m, symbol_id c, symbol_id o,
                       std::span<const symbol_id> negatives, const step_params& p, std::span<Real> scratch) {
  const auto zc = m.center(c);
  const auto zo = m.context(o);
  const std::size_t d = m.dimension();
  const double alpha = p.learning_rate;
  const double lambda = p.penalty;

  const double zc_norm = norm2<Real>(zc);
  const double score = dot<Real>(zo, zc);
  const double g = 1.0 - sigmoid(score);
  double objective = log_sigmoid(score) - lambda * zc_norm;

  const Real step_o = static_cast<Real>(alpha * g);
  const Real shrink_c = static_cast<Real>(lambda > 0.0 && zc_norm >= min_penalty_norm ? alpha * lambda / zc_norm : 0.0);
  for (std::size_t i = 0; i < d; ++i) scratch[i] = step_o * zo[i] - shrink_c * zc[i];
  for (std::size_t i = 0; i < d; ++i) zo[i] += step_o * zc[i];

  const double neg_lambda = lambda / static_cast<double>(p.negatives + 1);
  for (symbol_id w : negatives) {
    const auto zw = m.context(w);
    const double s = dot<Real>(zw, zc);
    const double gw = -sigmoid(s);
    const double zw_norm = norm2<Real>(zw);
    objective += log_sigmoid(-s) - neg_lambda * zw_norm;
    const Real step_w = static_cast<Real>(alpha * gw);
    const Real shrink_w =
        static_cast<Real>(neg_lambda > 0.0 && zw_norm >= min_penalty_norm ? alpha * neg_lambda / zw_norm : 0.0);
    for (std::size_t i = 0; i < d; ++i) scratch[i] += step_w * zw[i];
    for (std::size_t i = 0; i < d; ++i) zw[i] += step_w * zc[i] - shrink_w * zw[i];
  }
  for (std::size_t i = 0; i < d; ++i) zc[i] += scratch[i];
  return objective;
}

/// Applies the full per-voxel update: one positive block per context symbol, in order,
/// with negatives[i] the negatives drawn for pair.context[i]. Returns the summed objective.
template <class Real>
double train_step(basic_embedding_model<Real>& m, const training_pair& pair,
                  std::span<const std::vector<symbol_id>> negatives, const step_params& p) {
  detail::require(negatives.size() == pair.context.size(), "train_step: one negative list per context symbol");
  std::vector<Real> scratch(m.dimension());
  double total = 0.0;
  for (std::size_t i = 0; i < pair.context.size(); ++i)
    total += update_positive<Real>(m, pair.center, pair.context[i], negatives[i], p, scratch);
  return total;
}

/// The penalized negative-sampling objective for one (center, positive, negatives) instance.
template <class Real>
double objective(const basic_embedding_model<Real>& m, symbol_id c, symbol_id o,
                 std::span<const symbol_id> negatives, double lambda, int k) {
  const auto zc = m.center(c);
  double value = log_sigmoid(dot<Real>(m.context(o), zc)) - lambda * norm2<Real>(zc);
  const double neg_lambda = lambda / static_cast<double>(k + 1);
  for (symbol_id w : negatives) {
    const auto zw = m.context(w);
    value += log_sigmoid(-static_cast<double>(dot<Real>(zw, zc))) - neg_lambda * norm2<Real>(zw);
  }
  return value;
}

/// Mean over the context symbols o of sigma(Zhat z_o): a score in (0, 1) per candidate
/// center symbol. Not normalized; consumers take the argmax.
template <class Real>
std::vector<double> predict_distribution(const basic_embedding_model<Real>& m, std::span<const symbol_id> context,
                                         prediction_scoring scoring = prediction_scoring::as_printed) {
  detail::require(!context.empty(), "predict_distribution: empty context");
  std::vector<double> p(m.symbols(), 0.0);
  for (symbol_id o : context) {
    for (symbol_id s = 0; s < m.symbols(); ++s) {
      const double score = scoring == prediction_scoring::as_printed ? dot<Real>(m.context(s), m.center(o))
                                                                     : dot<Real>(m.context(o), m.center(s));
      p[s] += sigmoid(score);
    }
  }
  for (double& v : p) v /= static_cast<double>(context.size());
  return p;
}

// Index of the largest entry; ties go to the lowest index.
inline symbol_id argmax_lowest(std::span<const double> values) {
  symbol_id best = 0;
  for (symbol_id s = 1; s < values.size(); ++s)
    if (values[s] > values[best]) best = s;
  return best;
}

}  // namespace voxel2vec
