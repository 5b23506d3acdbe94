#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "fsmdp/backup.hpp"
#include "fsmdp/envs.hpp"
#include "fsmdp/serialize.hpp"
#include "test_support.hpp"

using namespace fsmdp;
using namespace fsmdp::test;

namespace {

Index find_fast(const FastSlowMdp& mdp, std::initializer_list<double> coords) {
  for (Index y = 0; y < mdp.n_fast(); ++y) {
    const auto& c = mdp.fast_coords()[y];
    bool match = c.size() == coords.size();
    std::size_t i = 0;
    for (double v : coords) match = match && c[i++] == v;
    if (match) return y;
  }
  REQUIRE(false);
  return 0;
}

Index find_slow(const FastSlowMdp& mdp, std::initializer_list<double> coords) {
  for (Index x = 0; x < mdp.n_slow(); ++x) {
    const auto& c = mdp.slow_coords()[x];
    bool match = c.size() == coords.size();
    std::size_t i = 0;
    for (double v : coords) match = match && c[i++] == v;
    if (match) return x;
  }
  REQUIRE(false);
  return 0;
}

void check_all_rows_stochastic(const FastSlowMdp& mdp) {
  for (Index s = 0; s < mdp.n_states(); ++s)
    for (Index a = 0; a < mdp.n_actions(); ++a) {
      double sum = 0.0;
      for (const auto& e : mdp.joint_row(s, a)) sum += e.prob;
      REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    }
}

}  // namespace

//===========================================================================
// Queue
//===========================================================================

TEST_CASE("queue env has the documented sizes") {
  const FastSlowMdp mdp = make_queue_env();
  CHECK(mdp.n_slow() == 36);
  CHECK(mdp.n_fast() == 48);
  CHECK(mdp.n_actions() == 3);
}

TEST_CASE("queue reward at the spot-check state") {
  const FastSlowMdp mdp = make_queue_env();
  const Index x = find_slow(mdp, {0.01, 0.2});
  const Index y = find_fast(mdp, {3, 3, 0});
  for (Index a = 0; a < 3; ++a) CHECK(mdp.reward(x, y, a) == doctest::Approx(-0.63));
}

TEST_CASE("queue no-event probability while serving") {
  const FastSlowMdp mdp = make_queue_env();
  const Index x = find_slow(mdp, {0.01, 0.01});
  const Index y = find_fast(mdp, {2, 2, 1});
  // P(no event) = 1 - 0.3 - 0.2 - 0.2 = 0.3: successors keeping both queue
  // lengths and the server state unchanged, marginalized over the ladder.
  double stay = 0.0;
  for (const auto& e : mdp.joint_row(mdp.state_index(x, y), 1)) {
    const auto& c = mdp.fast_coords()[mdp.fast_of(e.succ)];
    if (c[0] == 2 && c[1] == 2 && c[2] == 1) stay += e.prob;
  }
  CHECK(stay == doctest::Approx(0.3));
}

TEST_CASE("queue cost ladder reflects at its edges") {
  const FastSlowMdp mdp = make_queue_env();
  const Index x = find_slow(mdp, {0.01, 0.2});  // lowest and highest levels
  const Index y = find_fast(mdp, {0, 0, 0});
  double stay_low = 0.0, up_low = 0.0;
  for (const auto& e : mdp.joint_row(mdp.state_index(x, y), 0)) {
    const auto& c = mdp.slow_coords()[mdp.slow_of(e.succ)];
    if (c[0] == 0.01) stay_low += e.prob;
    if (std::abs(c[0] - 0.048) < 1e-9) up_low += e.prob;
  }
  CHECK(stay_low == doctest::Approx(0.95));  // 0.9 + blocked 0.05
  CHECK(up_low == doctest::Approx(0.05));
}

TEST_CASE("queue lengths never exceed capacity and idle servers never complete") {
  const FastSlowMdp mdp = make_queue_env();
  check_all_rows_stochastic(mdp);
  for (Index s = 0; s < mdp.n_states(); ++s) {
    const auto& c = mdp.fast_coords()[mdp.fast_of(s)];
    for (Index a = 0; a < 3; ++a)
      for (const auto& e : mdp.joint_row(s, a)) {
        const auto& cp = mdp.fast_coords()[mdp.fast_of(e.succ)];
        CHECK(cp[0] <= 3);
        CHECK(cp[1] <= 3);
        if (c[2] == 0) {
          // z = 0 has service rate zero: queue lengths cannot shrink.
          CHECK(cp[0] >= c[0] - 0.0);
          CHECK(cp[1] >= c[1] - 0.0);
        }
      }
  }
}

TEST_CASE("queue mean holding cost drives the slow-agnostic myopic value") {
  const FastSlowMdp mdp = make_queue_env();
  const FastBackupResult out = backup_slow_agnostic(std::vector<double>(48, 0.0), mdp);
  for (Index y = 0; y < mdp.n_fast(); ++y) {
    const auto& c = mdp.fast_coords()[y];
    CHECK(out.values[y] == doctest::Approx(-0.105 * (c[0] + c[1])).epsilon(1e-12));
  }
}

//===========================================================================
// Bandit
//===========================================================================

TEST_CASE("bandit env shape and reward") {
  const FastSlowMdp mdp = make_bandit_env();
  CHECK(mdp.n_slow() == 25);
  CHECK(mdp.n_fast() == 4);
  CHECK(mdp.n_actions() == 4);
  const Index y = find_fast(mdp, {1, 1});
  CHECK(mdp.reward(0, y, 0) == doctest::Approx(4.0));
  check_all_rows_stochastic(mdp);
}

TEST_CASE("bandit frozen repair probability at the worst environment") {
  const FastSlowMdp mdp = make_bandit_env();
  const Index y = find_fast(mdp, {0, 0});  // arm 1 non-operational
  Index a_int_first = 0;
  for (Index a = 0; a < 4; ++a)
    if (mdp.action_coords()[a][0] == 1 && mdp.action_coords()[a][1] == 0) a_int_first = a;
  double bad1 = 0.0;
  for (const auto& e : mdp.frozen_row(0, y, a_int_first))
    if (mdp.fast_coords()[e.succ][0] == 0) bad1 += e.prob;
  CHECK(bad1 == doctest::Approx(0.5));
}

TEST_CASE("bandit interpolated stay probability at the midpoint") {
  const FastSlowMdp mdp = make_bandit_env();
  const Index y = find_fast(mdp, {0, 1});
  Index a_none = 0;
  for (Index a = 0; a < 4; ++a)
    if (mdp.action_coords()[a][0] == 0 && mdp.action_coords()[a][1] == 0) a_none = a;
  double bad1 = 0.0;
  for (const auto& e : mdp.frozen_row(12, y, a_none))
    if (mdp.fast_coords()[e.succ][0] == 0) bad1 += e.prob;
  CHECK(bad1 == doctest::Approx(0.97));
}

TEST_CASE("bandit interpolated probabilities stay between their endpoints") {
  const BanditParams p;
  const FastSlowMdp mdp = make_bandit_env(p);
  auto between = [](double v, double a, double b) {
    return v >= std::min(a, b) - 1e-12 && v <= std::max(a, b) + 1e-12;
  };
  for (Index x = 0; x < mdp.n_slow(); ++x) {
    const Index y = find_fast(mdp, {0, 0});
    Index a_none = 0, a_both = 0;
    for (Index a = 0; a < 4; ++a) {
      if (mdp.action_coords()[a][0] == 0 && mdp.action_coords()[a][1] == 0) a_none = a;
      if (mdp.action_coords()[a][0] == 1 && mdp.action_coords()[a][1] == 1) a_both = a;
    }
    double stay_none = 0.0, stay_both = 0.0;
    for (const auto& e : mdp.frozen_row(x, y, a_none))
      if (mdp.fast_coords()[e.succ][0] == 0) stay_none += e.prob;
    for (const auto& e : mdp.frozen_row(x, y, a_both))
      if (mdp.fast_coords()[e.succ][0] == 0) stay_both += e.prob;
    CHECK(between(stay_none, p.stay_bad_no_int_at_0, p.stay_bad_no_int_at_max));
    CHECK(between(stay_both, p.stay_bad_int_at_0, p.stay_bad_int_at_max));
  }
}

TEST_CASE("bandit boundary folds the exiting walk mass") {
  const FastSlowMdp mdp = make_bandit_env();
  const Index y = find_fast(mdp, {1, 1});
  double at_zero = 0.0;
  for (const auto& e : mdp.joint_row(mdp.state_index(0, y), 0))
    if (mdp.slow_of(e.succ) == 0) at_zero += e.prob;
  CHECK(at_zero == doctest::Approx(0.05 + 0.15 + 0.6));
}

//===========================================================================
// Demand response
//===========================================================================

TEST_CASE("demand response dimensions on a reduced grid") {
  DemandResponseParams p;
  p.price_step = 0.5;  // 41 price levels keeps the test light
  const FastSlowMdp mdp = make_demand_response_env(p);
  CHECK(mdp.n_slow() == 41);
  CHECK(mdp.n_fast() == 100);
  CHECK(mdp.n_actions() == 150);
  check_all_rows_stochastic(mdp);
}

TEST_CASE("demand response mean reversion keeps the long-run price in place") {
  DemandResponseParams p;
  const FastSlowMdp mdp = make_demand_response_env(p);
  const Index x = find_slow(mdp, {21.4});
  double best_mass = 0.0;
  Index best_xp = 0;
  std::vector<double> slow_mass(mdp.n_slow(), 0.0);
  for (const auto& e : mdp.joint_row(mdp.state_index(x, 0), 0))
    slow_mass[mdp.slow_of(e.succ)] += e.prob;
  for (Index xp = 0; xp < mdp.n_slow(); ++xp)
    if (slow_mass[xp] > best_mass) {
      best_mass = slow_mass[xp];
      best_xp = xp;
    }
  CHECK(mdp.slow_coords()[best_xp][0] == doctest::Approx(21.4));
}

TEST_CASE("demand response price support stays within the grid and rt draws are uniform") {
  DemandResponseParams p;
  p.price_step = 0.5;
  const FastSlowMdp mdp = make_demand_response_env(p);
  std::vector<double> fast_mass(mdp.n_fast(), 0.0);
  for (const auto& e : mdp.joint_row(0, 0)) {
    const double price = mdp.slow_coords()[mdp.slow_of(e.succ)][0];
    CHECK(price >= 10.0);
    CHECK(price <= 30.0);
    fast_mass[mdp.fast_of(e.succ)] += e.prob;
  }
  for (double m : fast_mass) CHECK(m == doctest::Approx(0.01));
  // y- endpoints each carry probability 0.1 marginally.
  double lo = 0.0, hi = 0.0;
  for (Index y = 0; y < mdp.n_fast(); ++y) {
    if (mdp.fast_coords()[y][0] == 0.5) lo += fast_mass[y];
    if (mdp.fast_coords()[y][0] == 0.8) hi += fast_mass[y];
  }
  CHECK(lo == doctest::Approx(0.1));
  CHECK(hi == doctest::Approx(0.1));
}

TEST_CASE("demand response reward in the deterministic-demand limit") {
  DemandResponseParams p;
  p.price_step = 0.5;
  p.demand_noise_std = 0.0;
  const FastSlowMdp mdp = make_demand_response_env(p);
  const Index x = find_slow(mdp, {20.0});
  Index action = 0;
  for (Index a = 0; a < mdp.n_actions(); ++a) {
    const auto& c = mdp.action_coords()[a];
    if (c[0] == 10.0 && c[1] == 0.1 && c[2] == 0.1) action = a;
  }
  // Mean demands 2.82 and 6.39; total 9.21 < bid 10: pure shortfall.
  const Index y = find_fast(mdp, {0.5, 1.05});
  const double expected = 20.0 * 10.0 - (0.1 * 20.0 * 2.82 + 0.1 * 20.0 * 6.39) -
                          20.0 * 0.5 * (10.0 - 9.21);
  CHECK(mdp.reward(x, y, action) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("demand response tabulated reward matches the Monte Carlo oracle") {
  DemandResponseParams p;
  p.price_step = 0.5;
  const FastSlowMdp mdp = make_demand_response_env(p);
  const RandomStream stream = RandomStream::from(2024, 0, 0);
  for (int probe = 0; probe < 3; ++probe) {
    const Index s = std::min<Index>(mdp.n_states() - 1,
                                    static_cast<Index>(stream.uniform(probe, 0) * mdp.n_states()));
    const Index a = std::min<Index>(mdp.n_actions() - 1,
                                    static_cast<Index>(stream.uniform(probe, 1) * mdp.n_actions()));
    const double price = mdp.slow_coords()[mdp.slow_of(s)][0];
    const auto& rt = mdp.fast_coords()[mdp.fast_of(s)];
    const auto& act = mdp.action_coords()[a];
    const auto [mc, se] = demand_response_reward_mc(p, price, rt[0], rt[1], act[0], act[1], act[2],
                                                    200000, 55 + probe);
    CHECK(std::abs(mdp.reward_sa(s, a) - mc) <= 3.0 * se);
  }
}

//===========================================================================
// Random fast-slow fixtures
//===========================================================================

TEST_CASE("random fixture with alpha zero never moves the slow state") {
  RandomFastSlowSpec spec;
  spec.n_slow = 4;
  spec.n_fast = 4;
  spec.n_actions = 2;
  spec.alpha = 0.0;
  const FastSlowMdp mdp = make_random_fastslow(3, spec);
  for (Index s = 0; s < mdp.n_states(); ++s)
    for (Index a = 0; a < mdp.n_actions(); ++a)
      for (const auto& e : mdp.joint_row(s, a)) CHECK(mdp.slow_of(e.succ) == mdp.slow_of(s));
}

TEST_CASE("random factored fixture with zero zeta validates as exactly additive") {
  RandomFastSlowSpec spec;
  spec.n_slow = 3;
  spec.n_fast = 3;
  spec.n_actions = 2;
  spec.reward_mode = RandomFastSlowSpec::RewardMode::Factored;
  spec.zeta = 0.0;
  const FastSlowMdp mdp = make_random_fastslow(5, spec);
  std::vector<double> h(static_cast<std::size_t>(mdp.n_fast()) * mdp.n_actions());
  for (Index y = 0; y < mdp.n_fast(); ++y)
    for (Index a = 0; a < mdp.n_actions(); ++a)
      h[static_cast<std::size_t>(y) * mdp.n_actions() + a] = mdp.reward(0, y, a);
  std::vector<double> g(mdp.n_slow());
  for (Index x = 0; x < mdp.n_slow(); ++x) g[x] = mdp.reward(x, 0, 0) - mdp.reward(0, 0, 0);
  const NominalDecomposition decomp = make_additive_decomposition(mdp, g, h);
  CHECK(decomp.zeta <= 1e-12);
  CHECK_NOTHROW(decomp.validate(mdp, {0}));
}

TEST_CASE("random fixture jump bounds hold for the declared constants") {
  RandomFastSlowSpec spec;
  spec.n_slow = 6;
  spec.n_fast = 12;
  spec.n_actions = 2;
  spec.alpha = 0.25;
  spec.d_y = 4.0;
  const FastSlowMdp mdp = make_random_fastslow(7, spec);
  double max_slow = 0.0, max_fast = 0.0;
  for (Index s = 0; s < mdp.n_states(); ++s)
    for (Index a = 0; a < mdp.n_actions(); ++a)
      for (const auto& e : mdp.joint_row(s, a)) {
        max_slow = std::max(max_slow, std::abs(mdp.slow_coords()[mdp.slow_of(e.succ)][0] -
                                               mdp.slow_coords()[mdp.slow_of(s)][0]));
        max_fast = std::max(max_fast, std::abs(mdp.fast_coords()[mdp.fast_of(e.succ)][0] -
                                               mdp.fast_coords()[mdp.fast_of(s)][0]));
      }
  CHECK(max_slow <= spec.alpha * spec.d_y + 1e-12);
  CHECK(max_fast <= spec.d_y + 1e-12);
}

TEST_CASE("random fixture rejects jump bounds below the grid spacing") {
  RandomFastSlowSpec spec;
  spec.d_y = 0.5;
  CHECK_THROWS_AS(make_random_fastslow(1, spec), std::invalid_argument);
  spec.d_y = 4.0;
  spec.alpha = 0.1;  // alpha * d_y < 1
  CHECK_THROWS_AS(make_random_fastslow(1, spec), std::invalid_argument);
}

TEST_CASE("random fixture serialization is byte-stable across rebuilds") {
  RandomFastSlowSpec spec;
  spec.n_slow = 3;
  spec.n_fast = 5;
  spec.n_actions = 3;
  const std::string a = mdp_to_json(make_random_fastslow(9, spec));
  const std::string b = mdp_to_json(make_random_fastslow(9, spec));
  CHECK(a == b);
}
