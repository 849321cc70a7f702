#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <vector>

#include "pilot/dataset.hpp"

namespace pilot {

// Online multi-choice knapsack configuration: total budget B over a horizon of
// Q queries, partitioned into N = ceil(Q / S_bin) bins each funded with B/N,
// plus the reward-to-cost ratio bounds (UB, LB) behind the eligibility
// threshold.
struct CostPolicyConfig {
  double budget = 0.0;
  long horizon = 0;
  long bin_size = 100;
  double ub = 0.0;
  double lb = 0.0;

  long num_bins() const { return (horizon + bin_size - 1) / bin_size; }
  double bin_budget() const { return budget / static_cast<double>(num_bins()); }
  void validate() const;
};

// Sequential knapsack state for one replay stream. z is the current bin's
// utilization clamped to [0,1] for threshold evaluation; z_raw keeps the exact
// accounting (spillover can push a bin's spend past its own allocation).
struct CostPolicyState {
  double z = 0.0;
  double z_raw = 0.0;
  double budget_left = 0.0;
  long bin_index = 0;  // 0 until the first advance_bin
  long queries_left_in_bin = 0;
  long queries_done = 0;
  double spend_total = 0.0;
};

CostPolicyState make_cost_state(const CostPolicyConfig& cfg);

class InsufficientBudgetError : public Error {
 public:
  explicit InsufficientBudgetError(long query_index)
      : Error("insufficient budget at query " + std::to_string(query_index)),
        query_index(query_index) {}
  long query_index;
};

// Cost cap admitting an arm at utilization z:
//   reward_est / ((UB*e/LB)^z * (LB/e)).
// Decreasing in z, increasing in reward_est.
double eligibility_threshold(double reward_est, double z, double ub, double lb);

// Primary filter: cost within the eligibility threshold (and within the
// remaining allocation). Fallback when empty: cost within the per-query slice
// B_left / queries_left_in_bin. Both empty: insufficient budget.
std::vector<int> filter_eligible(const Eigen::VectorXd& reward_ests,
                                 const Eigen::VectorXd& costs,
                                 const CostPolicyState& state,
                                 const CostPolicyConfig& cfg);

// argmax of reward_ests over the eligible set (ties to the lowest index),
// then spends the chosen arm's cost and advances the utilization.
int choose(const Eigen::VectorXd& reward_ests, const Eigen::VectorXd& costs,
           CostPolicyState& state, const CostPolicyConfig& cfg);

// Opens the next bin: allocates B_bin on top of whatever is left (spillover),
// resets z, refills the query counter. Requires the current bin exhausted.
void advance_bin(CostPolicyState& state, const CostPolicyConfig& cfg);

struct RatioBounds {
  double ub = 0.0;
  double lb = 0.0;
};

// Supplies the "known bounds" assumption from tuning data: 99th / 1st
// percentile of reward/cost over all (record, arm) pairs with positive cost,
// widened by 1.5x each way.
RatioBounds estimate_bounds(const Dataset& tuning,
                            const std::function<double(const RoutingRecord&, int)>& reward_fn);

// cost = input_price * query_tokens + output_price * mean_output_tokens, with
// per-arm stats taken from the dataset manifest.
double estimate_query_cost(long query_tokens, int arm,
                           const std::map<int, ArmTokenStats>& stats);

}  // namespace pilot
