#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "fsmdp/mdp.hpp"

namespace fsmdp {

/// Gaussian radial basis features on the min-max normalized state lattice.
/// Anchor states are the discrete states nearest each center, deduplicated
/// by advancing to the next-nearest unused state.
struct RbfSpec {
  double count_fraction = 0.3;
  double width = 0.02;
  std::optional<int> count;  // overrides count_fraction when set
};

/// Hard state aggregation: phi is the 0/1 membership matrix and the anchor
/// of each group is its first member, giving kappa = 1 exactly.
struct AggregationSpec {
  std::vector<Index> partition;  // state -> group in [0, M)
};

struct FeatureSpec {
  std::variant<RbfSpec, AggregationSpec> kind = RbfSpec{};
  double declared_kappa = 1.0;
};

/// Sparse feature rows with the Tsitsiklis-Van Roy anchor construction:
/// L is the anchor block of Phi, and projection is w = L^{-1} values[anchors]
/// (the [L^{-1} 0] left inverse applied after zeroing non-anchor entries).
class FeatureModel {
 public:
  struct Entry {
    Index feature;
    double value;
  };

  static FeatureModel build(const std::vector<std::vector<double>>& coords,
                            const FeatureSpec& spec, std::uint64_t seed);

  Index num_states() const { return n_; }
  Index num_features() const { return m_; }
  const std::vector<Index>& anchors() const { return anchors_; }

  const std::vector<Entry>& row(Index s) const { return rows_[s]; }
  double phi(Index s, Index feature) const;

  /// Phi^dagger applied to a full table (only anchor entries matter).
  std::vector<double> project(const std::vector<double>& values) const;
  /// Phi w evaluated at every state.
  std::vector<double> expand(const std::vector<double>& weights) const;
  double value_at(Index s, const std::vector<double>& weights) const;

  double kappa() const { return kappa_; }
  double condition_estimate() const { return condition_estimate_; }
  bool dense_inverse_available() const { return !l_inv_.empty(); }
  /// L^{-1} row-major; only materialized for moderate feature counts.
  const std::vector<double>& l_inverse() const { return l_inv_; }

  /// w = L^{-T} rhs, used by the kappa diagnostic.
  std::vector<double> solve_transposed(const std::vector<double>& rhs) const;

  // Construction inputs, kept for serialization.
  const std::vector<std::vector<double>>& centers() const { return centers_; }
  double width() const { return width_; }
  bool is_aggregation() const { return aggregation_; }
  const std::vector<Index>& partition() const { return partition_; }

 private:
  struct SparseSolver;  // LU factorization of L for large feature counts

  Index n_ = 0, m_ = 0;
  std::vector<std::vector<Entry>> rows_;
  std::vector<Index> anchors_;
  std::vector<double> l_inv_;       // dense M x M when small enough
  std::vector<double> l_inv_t_;     // transpose solve support
  std::vector<double> l_dense_;     // anchor block, kept for diagnostics
  std::shared_ptr<SparseSolver> solver_;
  double kappa_ = 1.0;
  double condition_estimate_ = 1.0;
  std::vector<std::vector<double>> centers_;
  double width_ = 0.0;
  bool aggregation_ = false;
  std::vector<Index> partition_;
};

FeatureModel build_state_features(const FastSlowMdp& mdp, const FeatureSpec& spec,
                                  std::uint64_t seed);
FeatureModel build_fast_features(const FastSlowMdp& mdp, const FeatureSpec& spec,
                                 std::uint64_t seed);

/// Identity features (every state its own anchor).
FeatureSpec identity_feature_spec(Index n_states);

/// Smallest kappa consistent with the anchored features on a state sample:
/// max_s ||L^{-T} phi(s)||_1. With an invertible anchor block the coefficient
/// vector is unique, so no search is needed.
double kappa_diagnostic(const FeatureModel& fm, int sample_count, std::uint64_t seed);

}  // namespace fsmdp
