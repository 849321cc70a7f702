#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pilot/replay.hpp"
#include "test_support.hpp"

using namespace pilot;

namespace {

// Test-side clairvoyant policy: knows the score table and walks it in lockstep
// with the replay loop, so its regret must be identically zero.
class OraclePolicy : public Policy {
 public:
  explicit OraclePolicy(const Dataset& data) : data_(&data) {}

  int select(const Eigen::VectorXd&) override {
    const Eigen::VectorXd& s = data_->records[static_cast<std::size_t>(step_++)].scores;
    int best = 0;
    for (int a = 1; a < s.size(); ++a)
      if (s[a] > s[best]) best = a;
    return best;
  }
  void update(int, const Eigen::VectorXd&, double) override {}
  Eigen::VectorXd reward_estimates(const Eigen::VectorXd&) override {
    return Eigen::VectorXd::Zero(num_arms());
  }
  double ucb_width(int, const Eigen::VectorXd&) const override { return 0.0; }
  double posterior_trace(int) const override { return 0.0; }
  int num_arms() const override { return data_->num_arms(); }
  int dim() const override { return data_->d_e; }
  std::string name() const override { return "oracle"; }

 private:
  const Dataset* data_;
  long step_ = 0;
};

testsup::ClusterSpec small_spec() {
  testsup::ClusterSpec spec;
  spec.n = 400;
  spec.d_e = 8;
  return spec;
}

CostPolicyConfig slack_cfg(const Dataset& d, double budget_scale = 10.0) {
  CostPolicyConfig cfg;
  cfg.horizon = static_cast<long>(d.records.size());
  cfg.bin_size = 50;
  cfg.ub = 10000.0;
  cfg.lb = 1e-6;
  double total = 0.0;
  for (const auto& r : d.records) total += r.costs.maxCoeff();
  cfg.budget = total * budget_scale;
  return cfg;
}

}  // namespace

TEST_CASE("learning replay: oracle policy earns zero regret") {
  Dataset d = testsup::make_clustered_dataset(small_spec(), 21);
  Projection proj = testsup::identity_projection(8);
  OraclePolicy oracle(d);
  ReplayReport rep = run_learning(oracle, proj, d, 0);
  CHECK(rep.cumulative_regret == 0.0);
  CHECK(rep.steps == 400);
  CHECK(rep.policy_name == "oracle");
  REQUIRE(rep.regret_curve.size() == 400);
  CHECK(rep.regret_curve.back() == 0.0);
  double max_sum = 0.0;
  long count_sum = 0;
  for (const auto& r : d.records) max_sum += r.scores.maxCoeff();
  for (long c : rep.arm_counts) count_sum += c;
  CHECK(rep.cumulative_reward == doctest::Approx(max_sum));
  CHECK(count_sum == 400);
}

TEST_CASE("learning replay: reward plus regret equals the clairvoyant total") {
  Dataset d = testsup::make_clustered_dataset(small_spec(), 22);
  Projection proj = testsup::identity_projection(8);
  PolicySpec spec;
  spec.kind = PolicyKind::linucb;
  spec.alpha = 1.0;
  auto policy = make_policy(spec, 8, d.num_arms(), nullptr);
  ReplayReport rep = run_learning(*policy, proj, d, 3);

  double max_sum = 0.0;
  for (const auto& r : d.records) max_sum += r.scores.maxCoeff();
  CHECK(rep.cumulative_reward + rep.cumulative_regret == doctest::Approx(max_sum).epsilon(1e-12));
  // the curve is the running regret and never decreases
  for (std::size_t t = 1; t < rep.regret_curve.size(); ++t)
    CHECK(rep.regret_curve[t] >= rep.regret_curve[t - 1] - 1e-15);
  CHECK(rep.regret_curve.back() == doctest::Approx(rep.cumulative_regret));
}

TEST_CASE("learning replay: uniform random reward on a 1/0 score table") {
  // arm 0 always scores 1, arm 1 always 0: random selection earns ~T/2
  Dataset d;
  d.d_e = 4;
  d.arms = testsup::arm_pool(2);
  pilot::Rng rng(31);
  for (int t = 0; t < 2000; ++t) {
    RoutingRecord rec;
    rec.query_id = "q" + std::to_string(t);
    rec.embedding = testsup::unit(4, rng);
    rec.scores = Eigen::VectorXd::Zero(2);
    rec.scores[0] = 1.0;
    rec.costs = Eigen::VectorXd::Constant(2, 0.01);
    d.records.push_back(std::move(rec));
  }
  Projection proj = testsup::identity_projection(4);
  PolicySpec spec;
  spec.kind = PolicyKind::random_arm;
  spec.seed = 5;
  auto policy = make_policy(spec, 4, 2, nullptr);
  ReplayReport rep = run_learning(*policy, proj, d, 5);
  double sigma = std::sqrt(2000.0 * 0.25);
  CHECK(std::abs(rep.cumulative_reward - 1000.0) <= 3.0 * sigma);
  CHECK(rep.cumulative_regret == doctest::Approx(2000.0 - rep.cumulative_reward));
}

TEST_CASE("learning replay: bit-identical across repeated runs") {
  Dataset d = testsup::make_clustered_dataset(small_spec(), 23);
  Projection proj = testsup::identity_projection(8);
  PolicySpec spec;
  spec.kind = PolicyKind::epoch_greedy;
  spec.window = 5;
  spec.seed = 9;
  auto p1 = make_policy(spec, 8, d.num_arms(), nullptr);
  auto p2 = make_policy(spec, 8, d.num_arms(), nullptr);
  ReplayReport a = run_learning(*p1, proj, d, 9);
  ReplayReport b = run_learning(*p2, proj, d, 9);
  CHECK(a.cumulative_reward == b.cumulative_reward);
  CHECK(a.regret_curve == b.regret_curve);
  CHECK(a.reward_by_step == b.reward_by_step);
  CHECK(a.arm_counts == b.arm_counts);
}

TEST_CASE("learning replay: binarized feedback reaches the policy, metrics stay raw") {
  Dataset d = testsup::make_clustered_dataset(small_spec(), 24);
  Projection proj = testsup::identity_projection(8);
  PolicySpec spec;
  spec.kind = PolicyKind::linucb;
  auto policy = make_policy(spec, 8, d.num_arms(), nullptr);

  ReplayOptions opts;
  opts.binarize_threshold = 2.0;  // nothing reaches it: every update carries 0
  ReplayReport rep = run_learning(*policy, proj, d, 1, opts);
  CHECK(rep.cumulative_reward > 0.0);  // metrics keep the raw scores
  for (int a = 0; a < d.num_arms(); ++a)
    CHECK(policy->router()->arm_state(a).b.norm() == 0.0);  // policy saw only zeros

  // sanity check on the compat guards
  Dataset empty;
  empty.arms = d.arms;
  empty.d_e = 8;
  CHECK_THROWS_WITH_AS(run_learning(*policy, proj, empty, 1), "empty dataset", Error);
  Projection narrow = testsup::identity_projection(4);
  CHECK_THROWS_WITH_AS(run_learning(*policy, narrow, d, 1),
                       "dataset d_e does not match projection", Error);
}

TEST_CASE("deployment: fixed policy with slack budget scores its own arm") {
  Dataset d = testsup::make_clustered_dataset(small_spec(), 25);
  Projection proj = testsup::identity_projection(8);
  PolicySpec spec;
  spec.kind = PolicyKind::fixed_arm;
  spec.arm = 1;
  auto policy = make_policy(spec, 8, d.num_arms(), nullptr);
  CostPolicyConfig cfg = slack_cfg(d);

  ReplayReport rep = run_deployment(*policy, proj, d, cfg);
  CHECK(!rep.terminated);
  CHECK(rep.steps == static_cast<long>(d.records.size()));
  CHECK(rep.seed == d.split_seed);

  double want_reward = 0.0, want_spend = 0.0;
  for (const auto& r : d.records) {
    want_reward += r.scores[1];
    want_spend += r.costs[1];
  }
  CHECK(rep.cumulative_reward == doctest::Approx(want_reward));
  CHECK(rep.budget_used == doctest::Approx(want_spend));
  CHECK(rep.deployment_performance ==
        doctest::Approx(want_reward / static_cast<double>(d.records.size())));
  CHECK(rep.arm_counts[1] == rep.steps);
  REQUIRE(rep.spend_trace.size() == d.records.size());
  for (std::size_t t = 0; t < rep.spend_trace.size(); ++t) {
    CHECK(rep.spend_trace[t].arm == 1);
    CHECK(rep.spend_trace[t].cost == d.records[t].costs[1]);
    CHECK(rep.spend_trace[t].t == static_cast<long>(t));
  }
}

TEST_CASE("deployment: frozen greedy choices, no state mutation") {
  Dataset d = testsup::make_clustered_dataset(small_spec(), 26);
  Projection proj = testsup::identity_projection(8);
  PolicySpec spec;
  spec.kind = PolicyKind::linucb;
  spec.alpha = 1.0;
  auto policy = make_policy(spec, 8, d.num_arms(), nullptr);
  run_learning(*policy, proj, d, 7);  // give the estimator something to rank with

  std::vector<Eigen::MatrixXd> a_before;
  for (int a = 0; a < d.num_arms(); ++a) a_before.push_back(policy->router()->arm_state(a).A);

  CostPolicyConfig cfg = slack_cfg(d);
  ReplayReport rep = run_deployment(*policy, proj, d, cfg);
  REQUIRE(!rep.terminated);

  for (int a = 0; a < d.num_arms(); ++a)
    CHECK((policy->router()->arm_state(a).A - a_before[a]).norm() == 0.0);

  // with slack budget every arm stays eligible, so the trace is pure greedy
  for (std::size_t t = 0; t < d.records.size(); ++t) {
    Eigen::VectorXd psi = project(proj, d.records[t].embedding);
    Eigen::VectorXd ests = policy->reward_estimates(psi);
    int greedy = 0;
    for (int a = 1; a < ests.size(); ++a)
      if (ests[a] > ests[greedy]) greedy = a;
    CHECK(rep.spend_trace[t].arm == greedy);
  }
  CHECK(rep.budget_used <= cfg.budget * (1.0 + 1e-9));

  CostPolicyConfig off = cfg;
  off.horizon = cfg.horizon - 1;
  CHECK_THROWS_WITH_AS(run_deployment(*policy, proj, d, off),
                       "cost config horizon must equal the deployment bucket size", ConfigError);
}

TEST_CASE("deployment: starves gracefully on a tiny budget") {
  Dataset d = testsup::make_clustered_dataset(small_spec(), 27);
  Projection proj = testsup::identity_projection(8);
  PolicySpec spec;
  spec.kind = PolicyKind::fixed_arm;
  spec.arm = d.num_arms() - 1;  // the expensive arm
  auto policy = make_policy(spec, 8, d.num_arms(), nullptr);

  CostPolicyConfig cfg = slack_cfg(d);
  cfg.budget = d.records[0].costs.minCoeff() * 3.0;  // a few cheap queries at most
  ReplayReport rep = run_deployment(*policy, proj, d, cfg);
  CHECK(rep.terminated);
  CHECK(rep.terminated_at >= 0);
  CHECK(rep.terminated_at == rep.steps);
  CHECK(rep.steps < static_cast<long>(d.records.size()));
  CHECK(rep.budget_used <= cfg.budget * (1.0 + 1e-9));
  // performance is divided by the full bucket, penalizing the early stop
  CHECK(rep.deployment_performance ==
        doctest::Approx(rep.cumulative_reward / static_cast<double>(d.records.size())));
}

TEST_CASE("hyperparameter tuning on the tuning bucket") {
  Dataset d = testsup::make_clustered_dataset(small_spec(), 28);
  Projection proj = testsup::identity_projection(8);

  SUBCASE("single-point grid is returned untouched") {
    PolicySpec base;
    base.kind = PolicyKind::linucb;
    TuneResult res = tune_hyperparams(base, {0.7}, {}, proj, d, nullptr, 1, 1);
    CHECK(res.best.alpha == doctest::Approx(0.7));
    REQUIRE(res.alpha_rewards.size() == 1);
    CHECK(res.alpha_rewards[0].first == doctest::Approx(0.7));
    CHECK(res.alpha_rewards[0].second == doctest::Approx(res.best_reward));
  }

  SUBCASE("cold start needs exploration: alpha 10 beats alpha 0") {
    // one arm always pays 1, the other 0; a greedy zero-init policy never
    // leaves arm 0, so the exploring grid point collects far more reward
    Dataset flat;
    flat.d_e = 4;
    flat.arms = testsup::arm_pool(2);
    pilot::Rng rng(41);
    for (int t = 0; t < 500; ++t) {
      RoutingRecord rec;
      rec.query_id = "q" + std::to_string(t);
      rec.embedding = testsup::unit(4, rng);
      rec.scores = Eigen::VectorXd::Zero(2);
      rec.scores[1] = 1.0;
      rec.costs = Eigen::VectorXd::Constant(2, 0.01);
      flat.records.push_back(std::move(rec));
    }
    Projection id4 = testsup::identity_projection(4);
    PolicySpec base;
    base.kind = PolicyKind::linucb;
    TuneResult res = tune_hyperparams(base, {0.0, 10.0}, {}, id4, flat, nullptr, 1, 2);
    CHECK(res.best.alpha == doctest::Approx(10.0));
    REQUIRE(res.alpha_rewards.size() == 2);
    CHECK(res.alpha_rewards[0].first < res.alpha_rewards[1].first);  // ascending
    CHECK(res.alpha_rewards[1].second > res.alpha_rewards[0].second);
  }

  SUBCASE("exact ties keep the smallest parameter") {
    // every arm scores identically, so all alphas tie
    Dataset tie;
    tie.d_e = 4;
    tie.arms = testsup::arm_pool(2);
    pilot::Rng rng(42);
    for (int t = 0; t < 50; ++t) {
      RoutingRecord rec;
      rec.query_id = "q" + std::to_string(t);
      rec.embedding = testsup::unit(4, rng);
      rec.scores = Eigen::VectorXd::Constant(2, 0.5);
      rec.costs = Eigen::VectorXd::Constant(2, 0.01);
      tie.records.push_back(std::move(rec));
    }
    Projection id4 = testsup::identity_projection(4);
    PolicySpec base;
    base.kind = PolicyKind::linucb;
    TuneResult res = tune_hyperparams(base, {2.0, 0.5, 1.0}, {}, id4, tie, nullptr, 1, 1);
    CHECK(res.best.alpha == doctest::Approx(0.5));  // grid sorted, first of the tie
  }

  SUBCASE("epoch greedy sweeps the window instead") {
    PolicySpec base;
    base.kind = PolicyKind::epoch_greedy;
    base.seed = 4;
    TuneResult res = tune_hyperparams(base, {}, {50, 5}, proj, d, nullptr, 4, 2);
    CHECK(res.alpha_rewards.empty());
    REQUIRE(res.window_rewards.size() == 2);
    CHECK(res.window_rewards[0].first == 5);  // sorted ascending
    CHECK((res.best.window == 5 || res.best.window == 50));
    double top = std::max(res.window_rewards[0].second, res.window_rewards[1].second);
    CHECK(res.best_reward == doctest::Approx(top));
  }

  SUBCASE("non-swept policies run once") {
    PolicySpec base;
    base.kind = PolicyKind::random_arm;
    base.seed = 11;
    TuneResult res = tune_hyperparams(base, {}, {}, proj, d, nullptr, 11, 1);
    CHECK(res.alpha_rewards.empty());
    CHECK(res.window_rewards.empty());
    CHECK(res.best_reward > 0.0);
  }

  SUBCASE("empty grids reject for swept kinds") {
    PolicySpec base;
    base.kind = PolicyKind::linucb;
    CHECK_THROWS_WITH_AS(tune_hyperparams(base, {}, {}, proj, d, nullptr, 1, 1),
                         "alpha grid must be non-empty", ConfigError);
    base.kind = PolicyKind::epoch_greedy;
    CHECK_THROWS_WITH_AS(tune_hyperparams(base, {}, {}, proj, d, nullptr, 1, 1),
                         "window grid must be non-empty", ConfigError);
  }
}

TEST_CASE("learning-size curve grows one point per fraction") {
  Dataset learn = testsup::make_clustered_dataset(small_spec(), 29);
  Dataset deploy = testsup::make_clustered_dataset(small_spec(), 30);
  Projection proj = testsup::identity_projection(8);
  CostPolicyConfig cfg = slack_cfg(deploy);
  PolicySpec spec;
  spec.kind = PolicyKind::linucb;

  auto curve = learning_size_curve(spec, proj, nullptr, learn, deploy, {0.25, 1.0}, cfg, 3);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].fraction == doctest::Approx(0.25));
  CHECK(curve[1].fraction == doctest::Approx(1.0));
  for (const auto& p : curve) {
    CHECK(p.performance >= 0.0);
    CHECK(p.performance <= 1.0);
    CHECK(!p.terminated);
  }
  auto again = learning_size_curve(spec, proj, nullptr, learn, deploy, {0.25, 1.0}, cfg, 3);
  CHECK(again[0].performance == curve[0].performance);
  CHECK(again[1].performance == curve[1].performance);

  CHECK_THROWS_WITH_AS(
      learning_size_curve(spec, proj, nullptr, learn, deploy, {0.0}, cfg, 3),
      "learning fraction must lie in (0, 1]", ConfigError);
  CHECK_THROWS_AS(learning_size_curve(spec, proj, nullptr, learn, deploy, {1.5}, cfg, 3),
                  ConfigError);
  CHECK_THROWS_WITH_AS(
      learning_size_curve(spec, proj, nullptr, learn, deploy, {1e-9}, cfg, 3),
      "learning fraction yields an empty training prefix", ConfigError);
}

TEST_CASE("distribution shift replay") {
  Projection proj = testsup::identity_projection(8);

  SUBCASE("identical streams keep Before and After aligned") {
    testsup::ClusterSpec spec = small_spec();
    Dataset a = testsup::make_clustered_dataset(spec, 33);
    Dataset b = testsup::make_clustered_dataset(spec, 33);
    PolicySpec pol;
    pol.kind = PolicyKind::linucb;
    auto policy = make_policy(pol, 8, a.num_arms(), nullptr);
    ShiftReport rep = distribution_shift_replay(*policy, proj, a, b, 100);
    CHECK(rep.boundary == 400);
    CHECK(rep.steps == 800);
    REQUIRE(rep.reward_series.size() == 800);
    REQUIRE(rep.width_series.size() == 800);
    REQUIRE(rep.trace_series.size() == 800);
    // same distribution on both sides: the late window can't be much worse
    CHECK(rep.after.mean_reward >= rep.before.mean_reward - 0.1);
    // no exploration spike when nothing shifts (the flip fixture spikes ~10x;
    // selection-mix noise between windows stays within a few percent)
    CHECK(rep.during.mean_ucb_width <= rep.before.mean_ucb_width * 1.25);
    CHECK(rep.after.mean_ucb_width <= rep.before.mean_ucb_width * 1.25);

    // window stats are plain means over the documented index ranges
    double s = 0.0;
    for (long t = 300; t < 400; ++t) s += rep.reward_series[static_cast<std::size_t>(t)];
    CHECK(rep.before.mean_reward == doctest::Approx(s / 100.0));
    s = 0.0;
    for (long t = 400; t < 500; ++t) s += rep.width_series[static_cast<std::size_t>(t)];
    CHECK(rep.during.mean_ucb_width == doctest::Approx(s / 100.0));
    s = 0.0;
    for (long t = 700; t < 800; ++t) s += rep.trace_series[static_cast<std::size_t>(t)];
    CHECK(rep.after.mean_posterior_trace == doctest::Approx(s / 100.0));
  }

  SUBCASE("a best-arm flip spikes the exploration width, then reward recovers") {
    auto [a, b] = testsup::make_flip_streams(1500, 1500, 8, 12);
    PolicySpec pol;
    pol.kind = PolicyKind::linucb;
    pol.alpha = 1.0;
    auto policy = make_policy(pol, 8, 2, nullptr);
    ShiftReport rep = distribution_shift_replay(*policy, proj, a, b, 200);
    CHECK(rep.during.mean_ucb_width > rep.before.mean_ucb_width);
    CHECK(rep.during.mean_ucb_width > rep.after.mean_ucb_width);
    CHECK(rep.after.mean_reward >= 0.9 * rep.before.mean_reward);
  }

  SUBCASE("probe window validation") {
    auto [a, b] = testsup::make_flip_streams(50, 300, 8, 13);
    PolicySpec pol;
    pol.kind = PolicyKind::linucb;
    auto policy = make_policy(pol, 8, 2, nullptr);
    CHECK_THROWS_WITH_AS(distribution_shift_replay(*policy, proj, a, b, 51),
                         "probe window larger than a stream", Error);
    CHECK_THROWS_AS(distribution_shift_replay(*policy, proj, a, b, 0), ConfigError);
  }
}

TEST_CASE("budget sweep emits one aggregated point per budget") {
  testsup::ClusterSpec spec = small_spec();
  spec.n = 200;
  Dataset learn = testsup::make_clustered_dataset(spec, 35);
  Dataset deploy = testsup::make_clustered_dataset(spec, 36);
  Projection proj = testsup::identity_projection(8);

  CostPolicyConfig base = slack_cfg(deploy);
  double ample = base.budget;
  std::vector<double> budgets{ample * 1e-4, ample};
  std::vector<std::uint64_t> seeds{1, 2, 3};

  PolicySpec pol;
  pol.kind = PolicyKind::linucb;
  auto table = sweep_budget(pol, proj, nullptr, learn, deploy, budgets, base, seeds, 2);
  REQUIRE(table.size() == 2);
  CHECK(table[0].budget == doctest::Approx(budgets[0]));
  CHECK(table[1].budget == doctest::Approx(budgets[1]));
  // the starved budget terminates every seed; the ample one never does
  CHECK(table[0].terminated_runs == 3);
  CHECK(table[1].terminated_runs == 0);
  CHECK(table[1].mean_performance > table[0].mean_performance);
  for (const auto& p : table) {
    CHECK(p.stderr_performance >= 0.0);
    CHECK(p.mean_budget_used <= p.budget * (1.0 + 1e-9));
  }

  // deterministic given (budgets, seeds), and threading plays no role
  auto again = sweep_budget(pol, proj, nullptr, learn, deploy, budgets, base, seeds, 1);
  CHECK(again[0].mean_performance == table[0].mean_performance);
  CHECK(again[1].mean_performance == table[1].mean_performance);

  CHECK_THROWS_AS(sweep_budget(pol, proj, nullptr, learn, deploy, {}, base, seeds, 1),
                  ConfigError);
  CHECK_THROWS_AS(sweep_budget(pol, proj, nullptr, learn, deploy, budgets, base, {}, 1),
                  ConfigError);
}
