#include "fsmdp/envs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "fsmdp/math.hpp"
#include "fsmdp/rng.hpp"

namespace fsmdp {
namespace {

std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out[static_cast<std::size_t>(i)] =
        count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (count - 1);
  return out;
}

// Accumulates (successor, probability) pairs and emits a sorted sparse row.
class RowBuilder {
 public:
  void add(Index succ, double p) {
    if (p > 0.0) mass_[succ] += p;
  }
  KernelRow take() {
    KernelRow row;
    row.reserve(mass_.size());
    for (const auto& [succ, p] : mass_) row.push_back({succ, p});
    mass_.clear();
    return row;
  }

 private:
  std::map<Index, double> mass_;
};

std::vector<Index> nearest_slow_indices(const FastSlowMdp& mdp, const std::vector<double>& targets,
                                        int dim) {
  std::vector<Index> out;
  for (double target : targets) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index x = 0; x < mdp.n_slow(); ++x) {
      const double d = std::abs(mdp.slow_coords()[x][static_cast<std::size_t>(dim)] - target);
      if (d < best_d) {
        best_d = d;
        best = x;
      }
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace

//===========================================================================
// Queue
//===========================================================================

void QueueParams::validate() const {
  if (cost_levels < 2) throw std::invalid_argument("queue: need at least two cost levels");
  if (!(cost_low < cost_high)) throw std::invalid_argument("queue: cost_low must be < cost_high");
  const double event_mass_1 = service_rate_1 + arrival_rate_1 + arrival_rate_2;
  const double event_mass_2 = service_rate_2 + arrival_rate_1 + arrival_rate_2;
  if (event_mass_1 > 1.0 + 1e-12 || event_mass_2 > 1.0 + 1e-12)
    throw std::invalid_argument("queue: event probabilities exceed 1");
  if (std::abs(cost_stay + cost_up + cost_down - 1.0) > 1e-12)
    throw std::invalid_argument("queue: cost ladder move probabilities must sum to 1");
  if (capacity_1 < 1 || capacity_2 < 1) throw std::invalid_argument("queue: capacities must be >= 1");
}

std::vector<double> QueueParams::cost_ladder() const {
  return linspace(cost_low, cost_high, cost_levels);
}

FastSlowMdp make_queue_env(const QueueParams& p) {
  p.validate();
  const std::vector<double> ladder = p.cost_ladder();
  const int l = p.cost_levels;
  const int ny1 = p.capacity_1 + 1, ny2 = p.capacity_2 + 1;
  const int nz = 3;

  MdpTables t;
  t.gamma = p.gamma;
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j)
      t.slow_states.push_back({ladder[static_cast<std::size_t>(i)],
                               ladder[static_cast<std::size_t>(j)]});
  for (int y1 = 0; y1 < ny1; ++y1)
    for (int y2 = 0; y2 < ny2; ++y2)
      for (int z = 0; z < nz; ++z)
        t.fast_states.push_back({static_cast<double>(y1), static_cast<double>(y2),
                                 static_cast<double>(z)});
  for (int a = 0; a < 3; ++a) t.actions.push_back({static_cast<double>(a)});

  const Index n_fast = static_cast<Index>(t.fast_states.size());
  const Index n_slow = static_cast<Index>(t.slow_states.size());
  const Index n_actions = 3;
  auto fast_idx = [&](int y1, int y2, int z) {
    return static_cast<Index>((y1 * ny2 + y2) * nz + z);
  };
  auto slow_idx = [&](int i, int j) { return static_cast<Index>(i * l + j); };

  // Ladder move distribution per level; blocked boundary mass stays put.
  std::vector<std::vector<std::pair<int, double>>> ladder_moves(static_cast<std::size_t>(l));
  for (int i = 0; i < l; ++i) {
    auto& moves = ladder_moves[static_cast<std::size_t>(i)];
    double stay = p.cost_stay;
    if (i - 1 >= 0)
      moves.push_back({i - 1, p.cost_down});
    else
      stay += p.cost_down;
    if (i + 1 < l)
      moves.push_back({i + 1, p.cost_up});
    else
      stay += p.cost_up;
    moves.push_back({i, stay});
  }

  t.reward.resize(static_cast<std::size_t>(n_slow) * n_fast * n_actions);
  t.kernel_row_of.resize(t.reward.size());

  const double service[3] = {0.0, p.service_rate_1, p.service_rate_2};
  const double mu[2] = {p.arrival_rate_1, p.arrival_rate_2};
  const int cap[2] = {p.capacity_1, p.capacity_2};

  std::map<std::vector<std::pair<Index, double>>, Index> row_cache;
  RowBuilder builder;
  for (Index xi = 0; xi < n_slow; ++xi) {
    const int c1 = static_cast<int>(xi) / l;
    const int c2 = static_cast<int>(xi) % l;
    for (int y1 = 0; y1 < ny1; ++y1)
      for (int y2 = 0; y2 < ny2; ++y2)
        for (int z = 0; z < nz; ++z) {
          const Index yi = fast_idx(y1, y2, z);
          for (Index a = 0; a < n_actions; ++a) {
            const std::size_t flat =
                (static_cast<std::size_t>(xi) * n_fast + yi) * n_actions + a;
            t.reward[flat] = -(ladder[static_cast<std::size_t>(c1)] * y1 +
                               ladder[static_cast<std::size_t>(c2)] * y2);

            // Queue-event outcomes: (prob, y1', y2', completion flag).
            const int ylen[2] = {y1, y2};
            const bool serving = z != 0 && ylen[z - 1] >= 1;
            const double lam = serving ? service[z] : 0.0;
            struct Event {
              double prob;
              int y1, y2;
              bool completed;
            };
            std::vector<Event> events;
            events.push_back({mu[0], std::min(y1 + 1, cap[0]), y2, false});
            events.push_back({mu[1], y1, std::min(y2 + 1, cap[1]), false});
            if (lam > 0.0)
              events.push_back({lam, z == 1 ? y1 - 1 : y1, z == 2 ? y2 - 1 : y2, true});
            events.push_back({1.0 - lam - mu[0] - mu[1], y1, y2, false});

            builder = RowBuilder{};
            for (const auto& ev : events) {
              if (ev.prob <= 0.0) continue;
              // Server state after the event: re-decide at completions and
              // whenever the server is idle; otherwise keep serving.
              int zp;
              if (ev.completed || !serving) {
                const int want = static_cast<int>(a);
                const int post_len[2] = {ev.y1, ev.y2};
                zp = (want >= 1 && post_len[want - 1] >= 1) ? want : 0;
              } else {
                zp = z;
              }
              const Index ypi = fast_idx(ev.y1, ev.y2, zp);
              for (const auto& [m1, p1] : ladder_moves[static_cast<std::size_t>(c1)])
                for (const auto& [m2, p2] : ladder_moves[static_cast<std::size_t>(c2)]) {
                  const Index xpi = slow_idx(m1, m2);
                  builder.add(static_cast<Index>(xpi) * n_fast + ypi, ev.prob * p1 * p2);
                }
            }
            KernelRow row = builder.take();
            std::vector<std::pair<Index, double>> key;
            key.reserve(row.size());
            for (const auto& e : row) key.emplace_back(e.succ, e.prob);
            auto [it, inserted] = row_cache.try_emplace(std::move(key),
                                                        static_cast<Index>(t.kernel_rows.size()));
            if (inserted) t.kernel_rows.push_back(std::move(row));
            t.kernel_row_of[flat] = it->second;
          }
        }
  }
  return FastSlowMdp::build(std::move(t));
}

std::vector<Index> queue_nominal_states(const FastSlowMdp& mdp, int per_dimension) {
  // Distinct ladder values along one dimension.
  std::vector<double> levels;
  for (const auto& c : mdp.slow_coords())
    if (std::find(levels.begin(), levels.end(), c[0]) == levels.end()) levels.push_back(c[0]);
  std::sort(levels.begin(), levels.end());
  const std::vector<double> targets = linspace(levels.front(), levels.back(), per_dimension);
  auto nearest_level = [&](double t) {
    double best = levels.front();
    for (double v : levels)
      if (std::abs(v - t) < std::abs(best - t)) best = v;
    return best;
  };
  std::vector<Index> out;
  for (double t1 : targets)
    for (double t2 : targets) {
      const double v1 = nearest_level(t1), v2 = nearest_level(t2);
      for (Index x = 0; x < mdp.n_slow(); ++x)
        if (mdp.slow_coords()[x][0] == v1 && mdp.slow_coords()[x][1] == v2) {
          out.push_back(x);
          break;
        }
    }
  return out;
}

NominalDecomposition queue_nominal_decomposition(const FastSlowMdp& mdp,
                                                 const std::vector<Index>& nominal_xs) {
  std::vector<double> g(mdp.n_slow());
  for (Index x = 0; x < mdp.n_slow(); ++x)
    g[x] = mdp.slow_coords()[x][0] + mdp.slow_coords()[x][1];
  return make_multiplicative_decomposition(mdp, nominal_xs, std::move(g));
}

//===========================================================================
// Restless bandit
//===========================================================================

void BanditParams::validate() const {
  if (env_levels < 2) throw std::invalid_argument("bandit: need at least two environment levels");
  double sum = 0.0;
  for (double w : walk_probs) {
    if (w < 0.0) throw std::invalid_argument("bandit: negative walk probability");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("bandit: walk probabilities must sum to 1");
  const double probs[8] = {stay_bad_no_int_at_0,  stay_bad_no_int_at_max, stay_bad_int_at_0,
                           stay_bad_int_at_max,   break_no_int_at_0,      break_no_int_at_max,
                           break_int_at_0,        break_int_at_max};
  for (double q : probs)
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("bandit: arm probability outside [0,1]");
}

FastSlowMdp make_bandit_env(const BanditParams& p) {
  p.validate();
  const int nx = p.env_levels;

  MdpTables t;
  t.gamma = p.gamma;
  for (int x = 0; x < nx; ++x) t.slow_states.push_back({static_cast<double>(x)});
  for (int y1 = 0; y1 <= 1; ++y1)
    for (int y2 = 0; y2 <= 1; ++y2)
      t.fast_states.push_back({static_cast<double>(y1), static_cast<double>(y2)});
  for (int a1 = 0; a1 <= 1; ++a1)
    for (int a2 = 0; a2 <= 1; ++a2)
      t.actions.push_back({static_cast<double>(a1), static_cast<double>(a2)});

  const Index n_fast = 4, n_actions = 4;
  auto fast_idx = [](int y1, int y2) { return static_cast<Index>(y1 * 2 + y2); };

  // P(y' = 0) for one arm given (y, a, x), linear in x between the extremes.
  auto bad_prob = [&](int y, int a, int x) {
    const double frac = static_cast<double>(x) / (nx - 1);
    double at0, atmax;
    if (y == 0 && a == 0) {
      at0 = p.stay_bad_no_int_at_0;
      atmax = p.stay_bad_no_int_at_max;
    } else if (y == 0 && a == 1) {
      at0 = p.stay_bad_int_at_0;
      atmax = p.stay_bad_int_at_max;
    } else if (y == 1 && a == 0) {
      at0 = p.break_no_int_at_0;
      atmax = p.break_no_int_at_max;
    } else {
      at0 = p.break_int_at_0;
      atmax = p.break_int_at_max;
    }
    return at0 + (atmax - at0) * frac;
  };

  t.reward.resize(static_cast<std::size_t>(nx) * n_fast * n_actions);
  t.kernel_row_of.resize(t.reward.size());
  RowBuilder builder;
  for (int x = 0; x < nx; ++x) {
    // Environment random walk with boundary mass folded onto the edge states.
    std::vector<std::pair<int, double>> xmoves;
    for (int d = -2; d <= 2; ++d) {
      const int xp = std::clamp(x + d, 0, nx - 1);
      xmoves.emplace_back(xp, p.walk_probs[d + 2]);
    }
    for (int y1 = 0; y1 <= 1; ++y1)
      for (int y2 = 0; y2 <= 1; ++y2) {
        const Index yi = fast_idx(y1, y2);
        for (int a1 = 0; a1 <= 1; ++a1)
          for (int a2 = 0; a2 <= 1; ++a2) {
            const Index ai = static_cast<Index>(a1 * 2 + a2);
            const std::size_t flat =
                (static_cast<std::size_t>(x) * n_fast + yi) * n_actions + ai;
            t.reward[flat] = p.operational_reward * (y1 + y2) -
                             p.intervention_cost * (a1 + a2);
            const double bad1 = bad_prob(y1, a1, x);
            const double bad2 = bad_prob(y2, a2, x);
            builder = RowBuilder{};
            for (const auto& [xp, pxp] : xmoves)
              for (int n1 = 0; n1 <= 1; ++n1)
                for (int n2 = 0; n2 <= 1; ++n2) {
                  const double pa = n1 == 0 ? bad1 : 1.0 - bad1;
                  const double pb = n2 == 0 ? bad2 : 1.0 - bad2;
                  builder.add(static_cast<Index>(xp) * n_fast + fast_idx(n1, n2),
                              pxp * pa * pb);
                }
            KernelRow row = builder.take();
            t.kernel_row_of[flat] = static_cast<Index>(t.kernel_rows.size());
            t.kernel_rows.push_back(std::move(row));
          }
      }
  }
  return FastSlowMdp::build(std::move(t));
}

std::vector<Index> bandit_nominal_states(const FastSlowMdp& mdp, int count) {
  const double lo = mdp.slow_coords().front()[0];
  const double hi = mdp.slow_coords().back()[0];
  return nearest_slow_indices(mdp, linspace(lo, hi, count), 0);
}

NominalDecomposition bandit_nominal_decomposition(const FastSlowMdp& mdp) {
  std::vector<double> g(mdp.n_slow(), 0.0);
  std::vector<double> h(static_cast<std::size_t>(mdp.n_fast()) * mdp.n_actions());
  for (Index y = 0; y < mdp.n_fast(); ++y)
    for (Index a = 0; a < mdp.n_actions(); ++a)
      h[static_cast<std::size_t>(y) * mdp.n_actions() + a] = mdp.reward(0, y, a);
  return make_additive_decomposition(mdp, std::move(g), std::move(h));
}

//===========================================================================
// Demand response
//===========================================================================

void DemandResponseParams::validate() const {
  if (!(price_low < price_high) || price_step <= 0.0)
    throw std::invalid_argument("demand response: bad price grid");
  if (rt_levels < 1) throw std::invalid_argument("demand response: rt_levels must be >= 1");
  if (bids.empty() || alphas.empty())
    throw std::invalid_argument("demand response: empty action component");
  if (da_noise_std <= 0.0)
    throw std::invalid_argument("demand response: da_noise_std must be positive");
  if (demand_noise_std < 0.0 || demand_noise_cells < 1)
    throw std::invalid_argument("demand response: bad demand noise discretization");
}

int DemandResponseParams::price_levels() const {
  return static_cast<int>(std::lround((price_high - price_low) / price_step)) + 1;
}

std::vector<double> DemandResponseParams::price_grid() const {
  const int n = price_levels();
  std::vector<double> grid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = price_low + price_step * i;
  return grid;
}

std::vector<double> DemandResponseParams::rt_under_grid() const {
  return linspace(rt_under_low, rt_under_high, rt_levels);
}

std::vector<double> DemandResponseParams::rt_over_grid() const {
  return linspace(rt_over_low, rt_over_high, rt_levels);
}

namespace {

// E[(D - bid)+] and E[(bid - D)+] with D = mean + e1 + e2 summed exactly over
// the discretized noise product grid.
std::pair<double, double> expected_imbalance(double mean, double bid,
                                             const std::vector<double>& cells) {
  double over = 0.0, under = 0.0;
  const double w = 1.0 / (static_cast<double>(cells.size()) * cells.size());
  for (double e1 : cells)
    for (double e2 : cells) {
      const double d = mean + e1 + e2;
      if (d > bid)
        over += (d - bid) * w;
      else
        under += (bid - d) * w;
    }
  return {over, under};
}

}  // namespace

FastSlowMdp make_demand_response_env(const DemandResponseParams& p) {
  p.validate();
  const std::vector<double> prices = p.price_grid();
  const std::vector<double> under = p.rt_under_grid();
  const std::vector<double> over = p.rt_over_grid();
  const int nx = static_cast<int>(prices.size());
  const int nrt = p.rt_levels;
  const Index n_fast = static_cast<Index>(nrt) * nrt;

  MdpTables t;
  t.gamma = p.gamma;
  for (double x : prices) t.slow_states.push_back({x});
  for (int iu = 0; iu < nrt; ++iu)
    for (int io = 0; io < nrt; ++io)
      t.fast_states.push_back({under[static_cast<std::size_t>(iu)],
                               over[static_cast<std::size_t>(io)]});
  for (double bid : p.bids)
    for (double a1 : p.alphas)
      for (double a2 : p.alphas) t.actions.push_back({bid, a1, a2});
  const Index n_actions = static_cast<Index>(t.actions.size());

  // Joint rows depend on x only: x' from the clipped OU step, (y-, y+)
  // redrawn uniformly.
  const double rt_prob = 1.0 / static_cast<double>(n_fast);
  t.kernel_rows.reserve(static_cast<std::size_t>(nx));
  for (int xi = 0; xi < nx; ++xi) {
    const double x = prices[static_cast<std::size_t>(xi)];
    const double mean = x + p.ou_c1 * (p.ou_c2 - x);
    KernelRow row;
    for (int xp = 0; xp < nx; ++xp) {
      const double g = prices[static_cast<std::size_t>(xp)];
      double lo_z = (g - p.price_step / 2.0 - mean) / p.da_noise_std;
      double hi_z = (g + p.price_step / 2.0 - mean) / p.da_noise_std;
      double mass;
      if (xp == 0)
        mass = normal_cdf(hi_z);
      else if (xp == nx - 1)
        mass = 1.0 - normal_cdf(lo_z);
      else
        mass = normal_cdf(hi_z) - normal_cdf(lo_z);
      if (mass <= 0.0) continue;
      for (Index yf = 0; yf < n_fast; ++yf)
        row.push_back({static_cast<Index>(xp) * n_fast + yf, mass * rt_prob});
    }
    t.kernel_rows.push_back(std::move(row));
  }
  t.kernel_row_of.resize(static_cast<std::size_t>(nx) * n_fast * n_actions);
  for (int xi = 0; xi < nx; ++xi)
    for (Index yf = 0; yf < n_fast; ++yf)
      for (Index a = 0; a < n_actions; ++a)
        t.kernel_row_of[(static_cast<std::size_t>(xi) * n_fast + yf) * n_actions + a] =
            static_cast<Index>(xi);

  // Reward; the imbalance expectations depend on (x, action) only.
  const std::vector<double> cells = normal_cell_means(p.demand_noise_cells, p.demand_noise_std);
  t.reward.resize(static_cast<std::size_t>(nx) * n_fast * n_actions);
  for (int xi = 0; xi < nx; ++xi) {
    const double x = prices[static_cast<std::size_t>(xi)];
    std::vector<std::array<double, 4>> per_action(n_actions);
    for (Index a = 0; a < n_actions; ++a) {
      const double bid = t.actions[a][0];
      const double a1 = t.actions[a][1];
      const double a2 = t.actions[a][2];
      const double d1 = p.b11 + p.b12 * a1 * x;
      const double d2 = p.b21 + p.b22 * a2 * x;
      const auto [eo, eu] = expected_imbalance(d1 + d2, bid, cells);
      per_action[a] = {d1, d2, eo, eu};
    }
    for (int iu = 0; iu < nrt; ++iu)
      for (int io = 0; io < nrt; ++io) {
        const Index yf = static_cast<Index>(iu * nrt + io);
        const double ym = under[static_cast<std::size_t>(iu)];
        const double yp = over[static_cast<std::size_t>(io)];
        for (Index a = 0; a < n_actions; ++a) {
          const double bid = t.actions[a][0];
          const double a1 = t.actions[a][1];
          const double a2 = t.actions[a][2];
          const auto& [d1, d2, eo, eu] = per_action[a];
          t.reward[(static_cast<std::size_t>(xi) * n_fast + yf) * n_actions + a] =
              x * bid - (a1 * x * d1 + a2 * x * d2) + x * yp * eo - x * ym * eu;
        }
      }
  }
  return FastSlowMdp::build(std::move(t));
}

std::vector<Index> demand_response_nominal_states(const FastSlowMdp& mdp, int count) {
  const double lo = mdp.slow_coords().front()[0];
  const double hi = mdp.slow_coords().back()[0];
  return nearest_slow_indices(mdp, linspace(lo, hi, count), 0);
}

NominalDecomposition demand_response_nominal_decomposition(const FastSlowMdp& mdp,
                                                           const std::vector<Index>& nominal_xs) {
  std::vector<double> g(mdp.n_slow());
  for (Index x = 0; x < mdp.n_slow(); ++x) g[x] = mdp.slow_coords()[x][0];
  return make_multiplicative_decomposition(mdp, nominal_xs, std::move(g));
}

std::pair<double, double> demand_response_reward_mc(const DemandResponseParams& p, double price,
                                                    double rt_under, double rt_over, double bid,
                                                    double alpha1, double alpha2, int draws,
                                                    std::uint64_t seed) {
  const double d1 = p.b11 + p.b12 * alpha1 * price;
  const double d2 = p.b21 + p.b22 * alpha2 * price;
  const RandomStream stream = RandomStream::from(seed, 0xD6, 4);
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double e1 = normal_quantile(stream.uniform(i, 0)) * p.demand_noise_std;
    const double e2 = normal_quantile(stream.uniform(i, 1)) * p.demand_noise_std;
    const double d = d1 + e1 + d2 + e2;
    const double surplus = d > bid ? d - bid : 0.0;
    const double shortfall = bid > d ? bid - d : 0.0;
    const double r = price * bid - (alpha1 * price * d1 + alpha2 * price * d2) +
                     price * rt_over * surplus - price * rt_under * shortfall;
    sum += r;
    sum_sq += r * r;
  }
  const double mean = sum / draws;
  const double var = std::max(0.0, sum_sq / draws - mean * mean);
  return {mean, std::sqrt(var / draws)};
}

//===========================================================================
// Random fast-slow fixtures
//===========================================================================

FastSlowMdp make_random_fastslow(std::uint64_t seed, const RandomFastSlowSpec& spec) {
  if (spec.n_slow < 1 || spec.n_fast < 1 || spec.n_actions < 1)
    throw std::invalid_argument("random fast-slow: sizes must be >= 1");
  if (spec.d_y < 1.0)
    throw std::invalid_argument("random fast-slow: d_y below grid spacing, no fast movement");
  const int slow_reach = static_cast<int>(std::floor(spec.alpha * spec.d_y));
  if (spec.alpha > 0.0 && slow_reach < 1)
    throw std::invalid_argument(
        "random fast-slow: alpha * d_y below grid spacing, slow state cannot move");
  const int fast_reach = static_cast<int>(std::floor(spec.d_y));

  MdpTables t;
  t.gamma = spec.gamma;
  t.meta.alpha = spec.alpha;
  t.meta.d_y = spec.d_y;
  if (spec.reward_mode == RandomFastSlowSpec::RewardMode::Factored) t.meta.zeta = spec.zeta;
  for (int x = 0; x < spec.n_slow; ++x) t.slow_states.push_back({static_cast<double>(x)});
  for (int y = 0; y < spec.n_fast; ++y) t.fast_states.push_back({static_cast<double>(y)});
  for (int a = 0; a < spec.n_actions; ++a) t.actions.push_back({static_cast<double>(a)});

  const Index n_fast = static_cast<Index>(spec.n_fast);
  const Index n_actions = static_cast<Index>(spec.n_actions);
  const RandomStream stream = RandomStream::from(seed, 0xFA57, 5);

  // Rewards in [0,1]; factored mode adds g(x) + h(y,a) halves plus noise.
  t.reward.resize(static_cast<std::size_t>(spec.n_slow) * n_fast * n_actions);
  std::vector<double> g(static_cast<std::size_t>(spec.n_slow));
  std::vector<double> h(static_cast<std::size_t>(n_fast) * n_actions);
  for (int x = 0; x < spec.n_slow; ++x) g[static_cast<std::size_t>(x)] = 0.5 * stream.uniform(1, x);
  for (Index y = 0; y < n_fast; ++y)
    for (Index a = 0; a < n_actions; ++a)
      h[static_cast<std::size_t>(y) * n_actions + a] = 0.5 * stream.uniform(2, y, a);
  for (int x = 0; x < spec.n_slow; ++x)
    for (Index y = 0; y < n_fast; ++y)
      for (Index a = 0; a < n_actions; ++a) {
        const std::size_t flat = (static_cast<std::size_t>(x) * n_fast + y) * n_actions + a;
        if (spec.reward_mode == RandomFastSlowSpec::RewardMode::Factored) {
          const double noise = spec.zeta * (2.0 * stream.uniform(3, flat) - 1.0);
          const double gx = spec.x_free ? 0.0 : g[static_cast<std::size_t>(x)];
          t.reward[flat] = gx + h[static_cast<std::size_t>(y) * n_actions + a] + noise;
        } else {
          t.reward[flat] = spec.x_free ? stream.uniform(4, y, a) : stream.uniform(4, flat);
        }
      }

  // Kernel: support on the grid box around (x, y) allowed by the jump
  // bounds, with seed-derived weights. x_free mode makes the fast successor
  // distribution depend on (y, a) only, with an exogenous slow walk.
  t.kernel_row_of.resize(t.reward.size());
  for (int x = 0; x < spec.n_slow; ++x) {
    const int x_lo = std::max(0, x - slow_reach);
    const int x_hi = std::min(spec.n_slow - 1, x + slow_reach);
    std::vector<std::pair<int, double>> x_walk;
    if (spec.x_free) {
      double total = 0.0;
      for (int xp = x_lo; xp <= x_hi; ++xp) {
        const double w = 0.05 + stream.uniform(8, x, static_cast<std::uint64_t>(xp));
        x_walk.emplace_back(xp, w);
        total += w;
      }
      for (auto& [xp, w] : x_walk) w /= total;
    }
    for (Index y = 0; y < n_fast; ++y)
      for (Index a = 0; a < n_actions; ++a) {
        const std::size_t flat = (static_cast<std::size_t>(x) * n_fast + y) * n_actions + a;
        const int y_lo = std::max(0, static_cast<int>(y) - fast_reach);
        const int y_hi = std::min(spec.n_fast - 1, static_cast<int>(y) + fast_reach);
        KernelRow row;
        double total = 0.0;
        if (spec.x_free) {
          std::vector<std::pair<int, double>> y_dist;
          for (int yp = y_lo; yp <= y_hi; ++yp) {
            const double w = 0.05 + stream.uniform(7, counter_hash(9, y, a), yp);
            y_dist.emplace_back(yp, w);
            total += w;
          }
          for (const auto& [xp, pw] : x_walk)
            for (const auto& [yp, w] : y_dist)
              row.push_back({static_cast<Index>(xp) * n_fast + static_cast<Index>(yp),
                             pw * w / total});
        } else {
          for (int xp = x_lo; xp <= x_hi; ++xp)
            for (int yp = y_lo; yp <= y_hi; ++yp) {
              const double w = 0.05 + stream.uniform(7, counter_hash(9, flat, xp), yp);
              row.push_back({static_cast<Index>(xp) * n_fast + static_cast<Index>(yp), w});
              total += w;
            }
          for (auto& e : row) e.prob /= total;
        }
        t.kernel_row_of[flat] = static_cast<Index>(t.kernel_rows.size());
        t.kernel_rows.push_back(std::move(row));
      }
  }
  return FastSlowMdp::build(std::move(t));
}

}  // namespace fsmdp
