#include "fsmdp/features.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "fsmdp/rng.hpp"

namespace fsmdp {
namespace {

constexpr double kConditionLimit = 1e12;
constexpr Index kDenseInverseLimit = 2048;
// Feature values this small are numerically invisible next to the unit
// diagonal of L and are dropped from the sparse rows.
constexpr double kFeatureCutoff = 1e-300;

std::vector<std::vector<double>> normalize_coords(const std::vector<std::vector<double>>& coords) {
  const std::size_t n = coords.size();
  const std::size_t d = coords.front().size();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& c : coords)
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], c[i]);
      hi[i] = std::max(hi[i], c[i]);
    }
  std::vector<std::vector<double>> out(n, std::vector<double>(d, 0.0));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < d; ++i) {
      const double span = hi[i] - lo[i];
      out[s][i] = span > 0.0 ? (coords[s][i] - lo[i]) / span : 0.0;
    }
  return out;
}

// M centers strided through an evenly spaced lattice of the normalized cube.
std::vector<std::vector<double>> lattice_centers(std::size_t m, std::size_t dims) {
  std::size_t per_dim = 1;
  while (true) {
    double total = std::pow(static_cast<double>(per_dim), static_cast<double>(dims));
    if (total >= static_cast<double>(m) || per_dim > m) break;
    ++per_dim;
  }
  std::vector<double> ticks(per_dim);
  for (std::size_t i = 0; i < per_dim; ++i)
    ticks[i] = per_dim == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(per_dim - 1);

  std::size_t lattice_size = 1;
  for (std::size_t i = 0; i < dims; ++i) lattice_size *= per_dim;

  std::vector<std::vector<double>> centers;
  centers.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    // Even stride through the lexicographic lattice enumeration.
    std::size_t idx = m == 1 ? 0 : (j * (lattice_size - 1)) / (m - 1);
    std::vector<double> c(dims);
    for (std::size_t d = dims; d-- > 0;) {
      c[d] = ticks[idx % per_dim];
      idx /= per_dim;
    }
    centers.push_back(std::move(c));
  }
  return centers;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return d2;
}

}  // namespace

struct FeatureModel::SparseSolver {
  Eigen::SparseMatrix<double> l;
  Eigen::SparseMatrix<double> lt;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_t;

  void init(FeatureModel& fm);
  std::vector<double> solve(const std::vector<double>& rhs, bool transposed) const;
};

double FeatureModel::phi(Index s, Index feature) const {
  for (const auto& e : rows_[s])
    if (e.feature == feature) return e.value;
  return 0.0;
}

std::vector<double> FeatureModel::project(const std::vector<double>& values) const {
  if (values.size() < n_) throw std::invalid_argument("project: value table too small");
  std::vector<double> anchor_vals(m_);
  for (Index j = 0; j < m_; ++j) anchor_vals[j] = values[anchors_[j]];
  if (aggregation_) return anchor_vals;  // L is the identity
  if (!l_inv_.empty()) {
    std::vector<double> w(m_, 0.0);
    for (Index i = 0; i < m_; ++i) {
      const double* row = l_inv_.data() + static_cast<std::size_t>(i) * m_;
      double acc = 0.0;
      for (Index j = 0; j < m_; ++j) acc += row[j] * anchor_vals[j];
      w[i] = acc;
    }
    return w;
  }
  return solver_->solve(anchor_vals, false);
}

std::vector<double> FeatureModel::expand(const std::vector<double>& weights) const {
  std::vector<double> out(n_, 0.0);
  for (Index s = 0; s < n_; ++s) out[s] = value_at(s, weights);
  return out;
}

double FeatureModel::value_at(Index s, const std::vector<double>& weights) const {
  double acc = 0.0;
  for (const auto& e : rows_[s]) acc += e.value * weights[e.feature];
  return acc;
}

std::vector<double> FeatureModel::solve_transposed(const std::vector<double>& rhs) const {
  if (aggregation_) return rhs;
  if (!l_inv_t_.empty()) {
    std::vector<double> w(m_, 0.0);
    for (Index i = 0; i < m_; ++i) {
      const double* row = l_inv_t_.data() + static_cast<std::size_t>(i) * m_;
      double acc = 0.0;
      for (Index j = 0; j < m_; ++j) acc += row[j] * rhs[j];
      w[i] = acc;
    }
    return w;
  }
  return solver_->solve(rhs, true);
}

FeatureModel FeatureModel::build(const std::vector<std::vector<double>>& coords,
                                 const FeatureSpec& spec, std::uint64_t seed) {
  (void)seed;
  const Index n = static_cast<Index>(coords.size());
  if (n == 0) throw std::invalid_argument("feature build: empty state space");

  FeatureModel fm;
  fm.n_ = n;
  fm.rows_.resize(n);

  if (const auto* agg = std::get_if<AggregationSpec>(&spec.kind)) {
    if (agg->partition.size() != n)
      throw std::invalid_argument("aggregation partition has wrong size");
    Index m = 0;
    for (Index g : agg->partition) m = std::max(m, g + 1);
    fm.m_ = m;
    fm.aggregation_ = true;
    fm.partition_ = agg->partition;
    fm.anchors_.assign(m, n);
    for (Index s = 0; s < n; ++s) {
      const Index g = agg->partition[s];
      fm.rows_[s].push_back({g, 1.0});
      if (fm.anchors_[g] == n) fm.anchors_[g] = s;  // first member anchors the group
    }
    for (Index g = 0; g < m; ++g)
      if (fm.anchors_[g] == n)
        throw std::invalid_argument("aggregation group " + std::to_string(g) + " is empty");
    // L is the identity; projection shortcuts on aggregation_, and the
    // explicit inverse is only materialized at sizes worth the memory.
    if (m <= kDenseInverseLimit) {
      fm.l_inv_.assign(static_cast<std::size_t>(m) * m, 0.0);
      for (Index i = 0; i < m; ++i) fm.l_inv_[static_cast<std::size_t>(i) * m + i] = 1.0;
      fm.l_inv_t_ = fm.l_inv_;
      fm.l_dense_ = fm.l_inv_;
    }
    fm.kappa_ = 1.0;
    fm.condition_estimate_ = 1.0;
    return fm;
  }

  const auto& rbf = std::get<RbfSpec>(spec.kind);
  Index m = rbf.count ? static_cast<Index>(*rbf.count)
                      : static_cast<Index>(std::lround(rbf.count_fraction * n));
  m = std::max<Index>(1, std::min(m, n));
  fm.m_ = m;
  fm.width_ = rbf.width;
  fm.kappa_ = spec.declared_kappa;

  const auto norm = normalize_coords(coords);
  const auto probes = lattice_centers(m, norm.front().size());

  // Anchors: nearest state to each lattice probe, advancing past states that
  // are already taken. Centers sit on the anchors themselves so that the
  // anchor block has a unit diagonal; with narrow widths a center off the
  // state lattice would make every anchor feature vanish.
  std::vector<char> used(n, 0);
  fm.anchors_.resize(m);
  fm.centers_.resize(m);
  for (Index j = 0; j < m; ++j) {
    Index best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index s = 0; s < n; ++s) {
      if (used[s]) continue;
      const double d2 = sq_dist(norm[s], probes[j]);
      if (d2 < best_d) {
        best_d = d2;
        best = s;
      }
    }
    if (best == n) throw std::invalid_argument("anchor deduplication ran out of states");
    used[best] = 1;
    fm.anchors_[j] = best;
    fm.centers_[j] = norm[best];
  }

  const double denom = 2.0 * rbf.width * rbf.width;
  for (Index s = 0; s < n; ++s) {
    for (Index j = 0; j < m; ++j) {
      const double v = std::exp(-sq_dist(norm[s], fm.centers_[j]) / denom);
      if (v > kFeatureCutoff) fm.rows_[s].push_back({j, v});
    }
    if (fm.rows_[s].empty()) {
      // Keep the row nonzero so projection stays meaningful far from centers.
      Index bj = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < m; ++j) {
        const double d2 = sq_dist(norm[s], fm.centers_[j]);
        if (d2 < bd) {
          bd = d2;
          bj = j;
        }
      }
      fm.rows_[s].push_back({bj, std::numeric_limits<double>::min()});
    }
  }

  if (m <= kDenseInverseLimit) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
    for (Index j = 0; j < m; ++j)
      for (const auto& e : fm.rows_[fm.anchors_[j]]) l(j, e.feature) = e.value;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(l);
    if (!lu.isInvertible()) throw std::invalid_argument("anchor feature block is singular");
    Eigen::MatrixXd inv = lu.inverse();
    const double cond = l.cwiseAbs().rowwise().sum().maxCoeff() *
                        inv.cwiseAbs().rowwise().sum().maxCoeff();
    if (cond > kConditionLimit)
      throw std::invalid_argument("anchor feature block condition estimate " +
                                  std::to_string(cond) + " exceeds limit");
    fm.condition_estimate_ = cond;
    fm.l_dense_.resize(static_cast<std::size_t>(m) * m);
    fm.l_inv_.resize(static_cast<std::size_t>(m) * m);
    fm.l_inv_t_.resize(static_cast<std::size_t>(m) * m);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j) {
        fm.l_dense_[static_cast<std::size_t>(i) * m + j] = l(i, j);
        fm.l_inv_[static_cast<std::size_t>(i) * m + j] = inv(i, j);
        fm.l_inv_t_[static_cast<std::size_t>(i) * m + j] = inv(j, i);
      }
  } else {
    fm.solver_ = std::make_shared<SparseSolver>();
    fm.solver_->init(fm);
  }
  return fm;
}

void FeatureModel::SparseSolver::init(FeatureModel& fm) {
  const Index m = fm.m_;
  std::vector<Eigen::Triplet<double>> trip;
  double l_norm1 = 0.0;
  for (Index j = 0; j < m; ++j) {
    double row_abs = 0.0;
    for (const auto& e : fm.rows_[fm.anchors_[j]]) {
      trip.emplace_back(j, e.feature, e.value);
      row_abs += std::abs(e.value);
    }
    l_norm1 = std::max(l_norm1, row_abs);
  }
  l.resize(m, m);
  l.setFromTriplets(trip.begin(), trip.end());
  lu.analyzePattern(l);
  lu.factorize(l);
  if (lu.info() != Eigen::Success)
    throw std::invalid_argument("anchor feature block is singular (sparse factorization)");
  lt = l.transpose();
  lu_t.analyzePattern(lt);
  lu_t.factorize(lt);
  if (lu_t.info() != Eigen::Success)
    throw std::invalid_argument("anchor feature block is singular (transpose factorization)");

  // Probe estimate of ||L^{-1}|| for the reported condition number.
  const RandomStream probe = RandomStream::from(0x51CA, m, 3);
  double inv_norm = 0.0;
  for (int p = 0; p < 4; ++p) {
    std::vector<double> v(m);
    for (Index i = 0; i < m; ++i) v[i] = probe.bits(p, i) & 1 ? 1.0 : -1.0;
    const std::vector<double> x = solve(v, false);
    double num = 0.0;
    for (double xv : x) num = std::max(num, std::abs(xv));
    inv_norm = std::max(inv_norm, num);
  }
  fm.condition_estimate_ = l_norm1 * inv_norm;
  if (fm.condition_estimate_ > kConditionLimit)
    throw std::invalid_argument("anchor feature block condition estimate " +
                                std::to_string(fm.condition_estimate_) + " exceeds limit");
}

namespace {

// b - a x accumulated in extended precision; with narrow RBF widths on fine
// grids the anchor block can be ill-conditioned enough that double-precision
// residuals stall iterative refinement above the required accuracy.
Eigen::VectorXd residual_extended(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& b) {
  std::vector<long double> acc(static_cast<std::size_t>(b.size()));
  for (Eigen::Index i = 0; i < b.size(); ++i) acc[static_cast<std::size_t>(i)] = b(i);
  for (int k = 0; k < a.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it)
      acc[static_cast<std::size_t>(it.row())] -=
          static_cast<long double>(it.value()) * static_cast<long double>(x(it.col()));
  Eigen::VectorXd r(b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i) r(i) = static_cast<double>(acc[static_cast<std::size_t>(i)]);
  return r;
}

}  // namespace

std::vector<double> FeatureModel::SparseSolver::solve(const std::vector<double>& rhs,
                                                      bool transposed) const {
  Eigen::VectorXd b(rhs.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) b(static_cast<Eigen::Index>(i)) = rhs[i];
  const Eigen::SparseMatrix<double>& a = transposed ? lt : l;
  const auto& fac = transposed ? lu_t : lu;
  Eigen::VectorXd x = fac.solve(b);
  for (int step = 0; step < 2; ++step) x += fac.solve(residual_extended(a, x, b));
  std::vector<double> out(rhs.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) out[i] = x(static_cast<Eigen::Index>(i));
  return out;
}

FeatureModel build_state_features(const FastSlowMdp& mdp, const FeatureSpec& spec,
                                  std::uint64_t seed) {
  std::vector<std::vector<double>> coords;
  coords.reserve(mdp.n_states());
  for (Index s = 0; s < mdp.n_states(); ++s) coords.push_back(mdp.state_coords(s));
  return FeatureModel::build(coords, spec, seed);
}

FeatureModel build_fast_features(const FastSlowMdp& mdp, const FeatureSpec& spec,
                                 std::uint64_t seed) {
  return FeatureModel::build(mdp.fast_coords(), spec, seed);
}

FeatureSpec identity_feature_spec(Index n_states) {
  AggregationSpec agg;
  agg.partition.resize(n_states);
  std::iota(agg.partition.begin(), agg.partition.end(), Index{0});
  return FeatureSpec{agg, 1.0};
}

double kappa_diagnostic(const FeatureModel& fm, int sample_count, std::uint64_t seed) {
  const Index n = fm.num_states();
  const RandomStream stream = RandomStream::from(seed, 0xCA9A, 2);
  double worst = 0.0;
  const int count = sample_count <= 0 ? static_cast<int>(n) : sample_count;
  for (int i = 0; i < count; ++i) {
    const Index s = sample_count <= 0
                        ? static_cast<Index>(i)
                        : std::min<Index>(n - 1, static_cast<Index>(stream.uniform(i) * n));
    std::vector<double> phi_s(fm.num_features(), 0.0);
    for (const auto& e : fm.row(s)) phi_s[e.feature] = e.value;
    const std::vector<double> theta = fm.solve_transposed(phi_s);
    double l1 = 0.0;
    for (double t : theta) l1 += std::abs(t);
    worst = std::max(worst, l1);
  }
  return worst;
}

}  // namespace fsmdp
