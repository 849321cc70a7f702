#include "pilot/replay.hpp"

#include <algorithm>
#include <cmath>

#include "pilot/parallel.hpp"
#include "pilot/pretrain.hpp"

namespace pilot {

namespace {

void check_compat(const Policy& policy, const Projection& proj, const Dataset& data) {
  if (data.records.empty()) throw Error("empty dataset");
  if (data.d_e != proj.d_e()) throw Error("dataset d_e does not match projection");
  if (policy.dim() != proj.d_m) throw Error("policy d_m does not match projection");
  if (policy.num_arms() != data.num_arms()) throw Error("policy arm count does not match dataset");
}

double feedback_for(double score, const ReplayOptions& opts) {
  if (opts.binarize_threshold < 0.0) return score;
  return score >= opts.binarize_threshold ? 1.0 : 0.0;
}

Dataset head_of(const Dataset& d, std::size_t n) {
  Dataset out;
  out.arms = d.arms;
  out.d_e = d.d_e;
  out.split_seed = d.split_seed;
  out.records.assign(d.records.begin(), d.records.begin() + static_cast<long>(n));
  return out;
}

std::unique_ptr<Policy> fresh_policy(const PolicySpec& spec, std::uint64_t seed,
                                     const Projection& proj, const Dataset& data,
                                     const ArmEmbeddings* emb) {
  PolicySpec run = spec;
  run.seed = seed;
  return make_policy(run, proj.d_m, data.num_arms(), emb);
}

}  // namespace

ReplayReport run_learning(Policy& policy, const Projection& proj, const Dataset& data,
                          std::uint64_t seed, const ReplayOptions& opts) {
  check_compat(policy, proj, data);
  ReplayReport rep;
  rep.policy_name = policy.name();
  rep.seed = seed;
  rep.arm_counts.assign(data.num_arms(), 0);
  rep.regret_curve.reserve(data.records.size());
  rep.reward_by_step.reserve(data.records.size());

  for (const RoutingRecord& rec : data.records) {
    Eigen::VectorXd psi = project(proj, rec.embedding);
    int arm = policy.select(psi);
    if (arm < 0 || arm >= data.num_arms()) throw Error("policy selected an invalid arm");
    double score = rec.scores[arm];
    policy.update(arm, psi, feedback_for(score, opts));

    rep.cumulative_reward += score;
    rep.cumulative_regret += rec.scores.maxCoeff() - score;
    rep.regret_curve.push_back(rep.cumulative_regret);
    rep.reward_by_step.push_back(score);
    rep.arm_counts[arm] += 1;
    rep.steps += 1;
  }
  return rep;
}

ReplayReport run_deployment(Policy& policy, const Projection& proj, const Dataset& data,
                            const CostPolicyConfig& cost_cfg, const ReplayOptions&) {
  check_compat(policy, proj, data);
  cost_cfg.validate();
  if (cost_cfg.horizon != static_cast<long>(data.records.size()))
    throw ConfigError("cost config horizon must equal the deployment bucket size");

  ReplayReport rep;
  rep.policy_name = policy.name();
  rep.seed = data.split_seed;
  rep.arm_counts.assign(data.num_arms(), 0);
  CostPolicyState state = make_cost_state(cost_cfg);

  long t = 0;
  for (const RoutingRecord& rec : data.records) {
    if (state.queries_left_in_bin == 0) advance_bin(state, cost_cfg);
    Eigen::VectorXd psi = project(proj, rec.embedding);
    Eigen::VectorXd ests = policy.reward_estimates(psi);
    int arm;
    try {
      arm = choose(ests, rec.costs, state, cost_cfg);
    } catch (const InsufficientBudgetError& e) {
      rep.terminated = true;
      rep.terminated_at = e.query_index;
      break;
    }
    double score = rec.scores[arm];
    rep.cumulative_reward += score;
    rep.cumulative_regret += rec.scores.maxCoeff() - score;
    rep.regret_curve.push_back(rep.cumulative_regret);
    rep.reward_by_step.push_back(score);
    rep.arm_counts[arm] += 1;
    rep.spend_trace.push_back(SpendStep{t, state.bin_index, arm, rec.costs[arm],
                                        state.budget_left, state.z});
    rep.steps += 1;
    ++t;
  }
  rep.budget_used = state.spend_total;
  rep.deployment_performance =
      rep.cumulative_reward / static_cast<double>(data.records.size());
  return rep;
}

TuneResult tune_hyperparams(const PolicySpec& base, std::vector<double> alpha_grid,
                            std::vector<int> window_grid, const Projection& proj,
                            const Dataset& tuning, const ArmEmbeddings* emb,
                            std::uint64_t seed, int num_threads,
                            const ReplayOptions& opts) {
  TuneResult result;
  result.best = base;

  const bool sweep_alpha = base.kind == PolicyKind::pilot || base.kind == PolicyKind::linucb;
  const bool sweep_window = base.kind == PolicyKind::epoch_greedy;

  if (sweep_alpha) {
    if (alpha_grid.empty()) throw ConfigError("alpha grid must be non-empty");
    std::sort(alpha_grid.begin(), alpha_grid.end());
    std::vector<double> rewards(alpha_grid.size());
    parallel_for(alpha_grid.size(), num_threads, [&](std::size_t i) {
      PolicySpec spec = base;
      spec.alpha = alpha_grid[i];
      auto policy = fresh_policy(spec, seed, proj, tuning, emb);
      rewards[i] = run_learning(*policy, proj, tuning, seed, opts).cumulative_reward;
    });
    std::size_t best = 0;
    for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
      result.alpha_rewards.emplace_back(alpha_grid[i], rewards[i]);
      if (rewards[i] > rewards[best]) best = i;  // ascending grid: ties stay small
    }
    result.best.alpha = alpha_grid[best];
    result.best_reward = rewards[best];
  } else if (sweep_window) {
    if (window_grid.empty()) throw ConfigError("window grid must be non-empty");
    std::sort(window_grid.begin(), window_grid.end());
    std::vector<double> rewards(window_grid.size());
    parallel_for(window_grid.size(), num_threads, [&](std::size_t i) {
      PolicySpec spec = base;
      spec.window = window_grid[i];
      auto policy = fresh_policy(spec, seed, proj, tuning, emb);
      rewards[i] = run_learning(*policy, proj, tuning, seed, opts).cumulative_reward;
    });
    std::size_t best = 0;
    for (std::size_t i = 0; i < window_grid.size(); ++i) {
      result.window_rewards.emplace_back(window_grid[i], rewards[i]);
      if (rewards[i] > rewards[best]) best = i;
    }
    result.best.window = window_grid[best];
    result.best_reward = rewards[best];
  } else {
    auto policy = fresh_policy(base, seed, proj, tuning, emb);
    result.best_reward = run_learning(*policy, proj, tuning, seed, opts).cumulative_reward;
  }
  return result;
}

std::vector<FractionPoint> learning_size_curve(
    const PolicySpec& spec, const Projection& proj, const ArmEmbeddings* emb,
    const Dataset& learning, const Dataset& deployment,
    const std::vector<double>& fractions, const CostPolicyConfig& cost_cfg,
    std::uint64_t seed, const ReplayOptions& opts) {
  std::vector<FractionPoint> curve;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("learning fraction must lie in (0, 1]");
    auto n = static_cast<std::size_t>(std::floor(f * static_cast<double>(learning.records.size())));
    if (n == 0) throw ConfigError("learning fraction yields an empty training prefix");
    Dataset prefix = head_of(learning, n);
    auto policy = fresh_policy(spec, seed, proj, learning, emb);
    run_learning(*policy, proj, prefix, seed, opts);
    ReplayReport dep = run_deployment(*policy, proj, deployment, cost_cfg, opts);
    curve.push_back(FractionPoint{f, dep.deployment_performance, dep.terminated});
  }
  return curve;
}

ShiftReport distribution_shift_replay(Policy& policy, const Projection& proj,
                                      const Dataset& stream_a, const Dataset& stream_b,
                                      long probe_window, const ReplayOptions& opts) {
  check_compat(policy, proj, stream_a);
  check_compat(policy, proj, stream_b);
  if (stream_a.d_e != stream_b.d_e || stream_a.num_arms() != stream_b.num_arms())
    throw Error("shift streams disagree on arm pool or d_e");
  if (probe_window < 1) throw ConfigError("probe window must be >= 1");
  const long na = static_cast<long>(stream_a.records.size());
  const long nb = static_cast<long>(stream_b.records.size());
  if (probe_window > na || probe_window > nb)
    throw Error("probe window larger than a stream");

  ShiftReport rep;
  rep.boundary = na;
  rep.steps = na + nb;

  auto run_stream = [&](const Dataset& d) {
    for (const RoutingRecord& rec : d.records) {
      Eigen::VectorXd psi = project(proj, rec.embedding);
      int arm = policy.select(psi);
      if (arm < 0 || arm >= d.num_arms()) throw Error("policy selected an invalid arm");
      // Selection-time uncertainty, captured before the update.
      rep.width_series.push_back(policy.ucb_width(arm, psi));
      rep.trace_series.push_back(policy.posterior_trace(arm));
      double score = rec.scores[arm];
      policy.update(arm, psi, feedback_for(score, opts));
      rep.reward_series.push_back(score);
    }
  };
  run_stream(stream_a);
  run_stream(stream_b);

  auto window_stats = [&](long begin, long end) {
    WindowStats w;
    std::vector<double> r(rep.reward_series.begin() + begin, rep.reward_series.begin() + end);
    std::vector<double> u(rep.width_series.begin() + begin, rep.width_series.begin() + end);
    std::vector<double> c(rep.trace_series.begin() + begin, rep.trace_series.begin() + end);
    w.mean_reward = mean_of(r);
    w.mean_ucb_width = mean_of(u);
    w.mean_posterior_trace = mean_of(c);
    return w;
  };
  rep.before = window_stats(na - probe_window, na);
  rep.during = window_stats(na, na + probe_window);
  rep.after = window_stats(rep.steps - probe_window, rep.steps);
  return rep;
}

std::vector<BudgetPoint> sweep_budget(const PolicySpec& spec, const Projection& proj,
                                      const ArmEmbeddings* emb, const Dataset& learning,
                                      const Dataset& deployment,
                                      const std::vector<double>& budgets,
                                      const CostPolicyConfig& base_cfg,
                                      const std::vector<std::uint64_t>& seeds,
                                      int num_threads, const ReplayOptions& opts) {
  if (budgets.empty()) throw ConfigError("budget grid must be non-empty");
  if (seeds.empty()) throw ConfigError("seed list must be non-empty");

  struct Cell {
    double performance = 0.0;
    double used = 0.0;
    bool terminated = false;
  };
  std::vector<Cell> cells(budgets.size() * seeds.size());
  parallel_for(cells.size(), num_threads, [&](std::size_t idx) {
    std::size_t bi = idx / seeds.size();
    std::size_t si = idx % seeds.size();
    CostPolicyConfig cfg = base_cfg;
    cfg.budget = budgets[bi];
    cfg.horizon = static_cast<long>(deployment.records.size());
    auto policy = fresh_policy(spec, seeds[si], proj, learning, emb);
    run_learning(*policy, proj, learning, seeds[si], opts);
    ReplayReport dep = run_deployment(*policy, proj, deployment, cfg, opts);
    cells[idx] = Cell{dep.deployment_performance, dep.budget_used, dep.terminated};
  });

  std::vector<BudgetPoint> table;
  for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
    std::vector<double> perf, used;
    long terminated = 0;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const Cell& c = cells[bi * seeds.size() + si];
      perf.push_back(c.performance);
      used.push_back(c.used);
      if (c.terminated) ++terminated;
    }
    BudgetPoint p;
    p.budget = budgets[bi];
    p.mean_performance = mean_of(perf);
    p.stderr_performance = stderr_of(perf);
    p.mean_budget_used = mean_of(used);
    p.terminated_runs = terminated;
    table.push_back(p);
  }
  return table;
}

}  // namespace pilot
