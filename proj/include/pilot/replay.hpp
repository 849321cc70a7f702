#pragma once

#include <cstdint>
#include <vector>

#include "pilot/baselines.hpp"
#include "pilot/cost_policy.hpp"

namespace pilot {

struct ReplayOptions {
  // When >= 0, the policy is fed binarized feedback (1 iff score >= threshold)
  // instead of the raw score. Metrics always use raw scores.
  double binarize_threshold = -1.0;
};

struct SpendStep {
  long t = 0;
  long bin = 0;
  int arm = 0;
  double cost = 0.0;
  double budget_left = 0.0;
  double z = 0.0;
};

// Per-run replay metrics. deployment_performance divides by the full bucket
// size, so a terminated run is penalized for the queries it never served.
struct ReplayReport {
  std::string policy_name;
  std::uint64_t seed = 0;
  long steps = 0;
  double cumulative_reward = 0.0;
  double cumulative_regret = 0.0;
  std::vector<double> regret_curve;    // cumulative regret after each step
  std::vector<double> reward_by_step;  // chosen arm's true score per step
  std::vector<long> arm_counts;
  std::vector<SpendStep> spend_trace;
  double deployment_performance = 0.0;
  double budget_used = 0.0;
  bool terminated = false;
  long terminated_at = -1;
};

// Learning bucket: select / reveal chosen arm's reward / update, no budget.
// Regret accumulates max_a scores[a] - scores[chosen] from the dataset's full
// score vector, which the policy itself never sees.
ReplayReport run_learning(Policy& policy, const Projection& proj, const Dataset& data,
                          std::uint64_t seed, const ReplayOptions& opts = {});

// Deployment bucket: frozen policy, greedy estimates (no exploration bonus)
// filtered through the knapsack policy. cost_cfg.horizon must equal the bucket
// size. No policy updates happen here.
ReplayReport run_deployment(Policy& policy, const Projection& proj, const Dataset& data,
                            const CostPolicyConfig& cost_cfg,
                            const ReplayOptions& opts = {});

struct TuneResult {
  PolicySpec best;
  double best_reward = 0.0;
  // (parameter value, cumulative tuning reward) per grid point, ascending.
  std::vector<std::pair<double, double>> alpha_rewards;
  std::vector<std::pair<int, double>> window_rewards;
};

// Grid search on the tuning bucket: alpha for pilot/linucb, window for
// epoch_greedy, a single run otherwise. Ties go to the smaller parameter.
TuneResult tune_hyperparams(const PolicySpec& base, std::vector<double> alpha_grid,
                            std::vector<int> window_grid, const Projection& proj,
                            const Dataset& tuning, const ArmEmbeddings* emb,
                            std::uint64_t seed, int num_threads,
                            const ReplayOptions& opts = {});

struct FractionPoint {
  double fraction = 0.0;
  double performance = 0.0;
  bool terminated = false;
};

// Trains on the first f*|learning| records per fraction, then deploys.
std::vector<FractionPoint> learning_size_curve(
    const PolicySpec& spec, const Projection& proj, const ArmEmbeddings* emb,
    const Dataset& learning, const Dataset& deployment,
    const std::vector<double>& fractions, const CostPolicyConfig& cost_cfg,
    std::uint64_t seed, const ReplayOptions& opts = {});

struct WindowStats {
  double mean_reward = 0.0;
  double mean_ucb_width = 0.0;
  double mean_posterior_trace = 0.0;
};

// Learning replay over stream_a followed by stream_b, with reward and
// exploration metrics summarized in probe windows before / during / after the
// boundary. The width metric is the chosen arm's UCB width at selection time;
// the trace metric is its posterior covariance trace (both reported since the
// "std of the chosen arm's estimate" can be read either way).
struct ShiftReport {
  WindowStats before;
  WindowStats during;
  WindowStats after;
  std::vector<double> reward_series;
  std::vector<double> width_series;
  std::vector<double> trace_series;
  long boundary = 0;
  long steps = 0;
};

ShiftReport distribution_shift_replay(Policy& policy, const Projection& proj,
                                      const Dataset& stream_a, const Dataset& stream_b,
                                      long probe_window, const ReplayOptions& opts = {});

struct BudgetPoint {
  double budget = 0.0;
  double mean_performance = 0.0;
  double stderr_performance = 0.0;
  double mean_budget_used = 0.0;
  long terminated_runs = 0;
};

// For each (budget, seed): fresh policy, unconstrained learning pass, then a
// deployment pass at that budget. One aggregated point per budget.
std::vector<BudgetPoint> sweep_budget(const PolicySpec& spec, const Projection& proj,
                                      const ArmEmbeddings* emb, const Dataset& learning,
                                      const Dataset& deployment,
                                      const std::vector<double>& budgets,
                                      const CostPolicyConfig& base_cfg,
                                      const std::vector<std::uint64_t>& seeds,
                                      int num_threads, const ReplayOptions& opts = {});

}  // namespace pilot
