#include "fsmdp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

namespace fsmdp {
namespace {

std::string row_label(Index x, Index y, Index a) {
  return "(x=" + std::to_string(x) + ",y=" + std::to_string(y) + ",a=" + std::to_string(a) + ")";
}

void check_coord_dims(const std::vector<std::vector<double>>& coords, const char* what) {
  if (coords.empty()) throw std::invalid_argument(std::string(what) + " space is empty");
  const std::size_t dim = coords.front().size();
  for (const auto& c : coords) {
    if (c.size() != dim)
      throw std::invalid_argument(std::string(what) +
                                  " coordinate vectors have inconsistent dimensions");
  }
}

// Hash of a kernel row's exact byte content, for sharing identical rows.
struct RowHash {
  std::size_t operator()(const KernelRow& r) const {
    std::size_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ULL;
    };
    for (const auto& e : r) {
      mix(e.succ);
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(e.prob));
      std::memcpy(&bits, &e.prob, sizeof(bits));
      mix(bits);
    }
    return h;
  }
};

struct RowEq {
  bool operator()(const KernelRow& a, const KernelRow& b) const {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].succ != b[i].succ || a[i].prob != b[i].prob) return false;
    return true;
  }
};

}  // namespace

FastSlowMdp FastSlowMdp::build(MdpTables t) {
  check_coord_dims(t.slow_states, "slow");
  check_coord_dims(t.fast_states, "fast");
  check_coord_dims(t.actions, "action");

  FastSlowMdp m;
  m.slow_states_ = std::move(t.slow_states);
  m.fast_states_ = std::move(t.fast_states);
  m.actions_ = std::move(t.actions);
  m.gamma_ = t.gamma;
  m.meta_ = t.meta;

  if (!(m.gamma_ >= 0.0 && m.gamma_ < 1.0))
    throw std::invalid_argument("gamma must lie in [0,1), got " + std::to_string(m.gamma_));

  const std::size_t n_rows = static_cast<std::size_t>(m.n_states()) * m.n_actions();
  if (t.reward.size() != n_rows)
    throw std::invalid_argument("reward table has " + std::to_string(t.reward.size()) +
                                " entries, expected " + std::to_string(n_rows));
  m.reward_ = std::move(t.reward);
  m.r_max_ = 0.0;
  for (double r : m.reward_) {
    if (!std::isfinite(r)) throw std::invalid_argument("reward table contains a non-finite entry");
    m.r_max_ = std::max(m.r_max_, std::abs(r));
  }

  if (t.kernel_row_of.empty()) {
    if (t.kernel_rows.size() != n_rows)
      throw std::invalid_argument("kernel has " + std::to_string(t.kernel_rows.size()) +
                                  " rows, expected " + std::to_string(n_rows));
    t.kernel_row_of.resize(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) t.kernel_row_of[i] = static_cast<Index>(i);
  } else if (t.kernel_row_of.size() != n_rows) {
    throw std::invalid_argument("kernel row map has " + std::to_string(t.kernel_row_of.size()) +
                                " entries, expected " + std::to_string(n_rows));
  }
  m.kernel_rows_ = std::move(t.kernel_rows);
  m.kernel_row_of_ = std::move(t.kernel_row_of);

  const Index n_states = m.n_states();
  // Validate each stored row once; references are checked via the map.
  for (std::size_t ri = 0; ri < m.kernel_rows_.size(); ++ri) {
    double sum = 0.0;
    for (const auto& e : m.kernel_rows_[ri]) {
      if (e.succ >= n_states)
        throw std::invalid_argument("kernel row " + std::to_string(ri) +
                                    " references successor index " + std::to_string(e.succ) +
                                    " out of range");
      if (!(e.prob >= 0.0))
        throw std::invalid_argument("kernel row " + std::to_string(ri) +
                                    " has a negative probability");
      sum += e.prob;
    }
    if (std::abs(sum - 1.0) > kRowSumTol) {
      // Name one (x,y,a) that uses this row, for a actionable message.
      for (std::size_t i = 0; i < m.kernel_row_of_.size(); ++i) {
        if (m.kernel_row_of_[i] == ri) {
          const Index a = static_cast<Index>(i % m.n_actions());
          const Index s = static_cast<Index>(i / m.n_actions());
          throw std::invalid_argument("kernel row " + row_label(m.slow_of(s), m.fast_of(s), a) +
                                      " sums to " + std::to_string(sum));
        }
      }
      throw std::invalid_argument("unused kernel row " + std::to_string(ri) + " sums to " +
                                  std::to_string(sum));
    }
  }
  for (Index idx : m.kernel_row_of_) {
    if (idx >= m.kernel_rows_.size())
      throw std::invalid_argument("kernel row map references row " + std::to_string(idx) +
                                  " out of range");
  }

  std::size_t total_entries = 0;
  for (std::size_t i = 0; i < n_rows; ++i) total_entries += m.kernel_rows_[m.kernel_row_of_[i]].size();
  m.mean_joint_support_ = static_cast<double>(total_entries) / static_cast<double>(n_rows);

  m.kernel_cum_.resize(m.kernel_rows_.size());
  for (std::size_t ri = 0; ri < m.kernel_rows_.size(); ++ri) {
    auto& cum = m.kernel_cum_[ri];
    cum.resize(m.kernel_rows_[ri].size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cum.size(); ++i) {
      acc += m.kernel_rows_[ri][i].prob;
      cum[i] = acc;
    }
  }

  m.frozen_ = frozen_marginal(m);
  std::size_t frozen_entries = 0;
  for (std::size_t i = 0; i < n_rows; ++i) frozen_entries += m.frozen_.row(i).size();
  m.mean_frozen_support_ = static_cast<double>(frozen_entries) / static_cast<double>(n_rows);
  return m;
}

Index FastSlowMdp::sample_joint(Index s, Index a, double u) const {
  const Index row_id = kernel_row_of_[static_cast<std::size_t>(s) * n_actions() + a];
  const std::vector<double>& cum = kernel_cum_[row_id];
  const KernelRow& row = kernel_rows_[row_id];
  const std::size_t idx =
      static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
  return row[std::min(idx, row.size() - 1)].succ;
}

std::vector<double> FastSlowMdp::state_coords(Index s) const {
  const auto& xs = slow_states_[slow_of(s)];
  const auto& ys = fast_states_[fast_of(s)];
  std::vector<double> c;
  c.reserve(xs.size() + ys.size());
  c.insert(c.end(), xs.begin(), xs.end());
  c.insert(c.end(), ys.begin(), ys.end());
  return c;
}

FrozenKernel frozen_marginal(const FastSlowMdp& mdp) {
  const Index n_fast = mdp.n_fast();
  const Index n_actions = mdp.n_actions();
  const std::size_t n_rows = static_cast<std::size_t>(mdp.n_states()) * n_actions;

  // Each distinct joint row is marginalized once; identical marginals are
  // shared the same way joint rows are.
  std::vector<KernelRow> rows;
  std::vector<Index> marginal_of(mdp.kernel_rows().size());
  std::unordered_map<KernelRow, Index, RowHash, RowEq> seen;
  std::vector<double> mass(n_fast, 0.0);
  for (std::size_t ri = 0; ri < mdp.kernel_rows().size(); ++ri) {
    for (const auto& e : mdp.kernel_rows()[ri]) mass[mdp.fast_of(e.succ)] += e.prob;
    KernelRow marginal;
    double sum = 0.0;
    for (Index yp = 0; yp < n_fast; ++yp) {
      if (mass[yp] > 0.0) {
        marginal.push_back({yp, mass[yp]});
        sum += mass[yp];
      }
      mass[yp] = 0.0;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw std::invalid_argument("frozen marginal of kernel row " + std::to_string(ri) +
                                  " sums to " + std::to_string(sum));
    auto [it, inserted] = seen.try_emplace(std::move(marginal), static_cast<Index>(rows.size()));
    if (inserted) rows.push_back(it->first);
    marginal_of[ri] = it->second;
  }
  std::vector<Index> row_of(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) row_of[i] = marginal_of[mdp.kernel_row_of()[i]];
  return FrozenKernel(std::move(rows), std::move(row_of));
}

}  // namespace fsmdp
