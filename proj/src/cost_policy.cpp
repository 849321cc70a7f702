#include "pilot/cost_policy.hpp"

#include <cmath>
#include <numbers>

namespace pilot {

void CostPolicyConfig::validate() const {
  if (!(budget > 0.0)) throw ConfigError("budget must be positive");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (bin_size < 1) throw ConfigError("bin_size must be >= 1");
  if (!(lb > 0.0)) throw ConfigError("LB must be positive");
  if (!(ub > lb)) throw ConfigError("UB must exceed LB");
}

CostPolicyState make_cost_state(const CostPolicyConfig& cfg) {
  cfg.validate();
  return CostPolicyState{};
}

double eligibility_threshold(double reward_est, double z, double ub, double lb) {
  if (!(lb > 0.0)) throw ConfigError("LB must be positive");
  if (!(ub > lb)) throw ConfigError("UB must exceed LB");
  if (z < 0.0 || z > 1.0) throw ConfigError("z must lie in [0,1]");
  constexpr double e = std::numbers::e;
  return reward_est / (std::pow(ub * e / lb, z) * (lb / e));
}

std::vector<int> filter_eligible(const Eigen::VectorXd& reward_ests,
                                 const Eigen::VectorXd& costs,
                                 const CostPolicyState& state,
                                 const CostPolicyConfig& cfg) {
  if (reward_ests.size() != costs.size()) throw Error("reward/cost length mismatch");
  std::vector<int> eligible;
  for (int l = 0; l < costs.size(); ++l) {
    double th = eligibility_threshold(reward_ests[l], state.z, cfg.ub, cfg.lb);
    // The allocation cap keeps spend_total <= B even when the threshold alone
    // would admit an arm the remaining budget cannot cover.
    if (costs[l] <= th && costs[l] <= state.budget_left) eligible.push_back(l);
  }
  if (!eligible.empty()) return eligible;

  if (state.queries_left_in_bin > 0) {
    double slice = state.budget_left / static_cast<double>(state.queries_left_in_bin);
    for (int l = 0; l < costs.size(); ++l)
      if (costs[l] <= slice) eligible.push_back(l);
  }
  if (eligible.empty()) throw InsufficientBudgetError(state.queries_done);
  return eligible;
}

int choose(const Eigen::VectorXd& reward_ests, const Eigen::VectorXd& costs,
           CostPolicyState& state, const CostPolicyConfig& cfg) {
  cfg.validate();
  if (state.queries_left_in_bin < 1)
    throw Error("current bin exhausted; advance_bin required before choose");
  std::vector<int> eligible = filter_eligible(reward_ests, costs, state, cfg);
  int best = eligible[0];
  for (int l : eligible)
    if (reward_ests[l] > reward_ests[best]) best = l;

  double cost = costs[best];
  state.budget_left -= cost;
  state.spend_total += cost;
  state.z_raw += cost / cfg.bin_budget();
  state.z = std::min(1.0, state.z_raw);
  state.queries_left_in_bin -= 1;
  state.queries_done += 1;
  return best;
}

void advance_bin(CostPolicyState& state, const CostPolicyConfig& cfg) {
  cfg.validate();
  if (state.queries_left_in_bin != 0)
    throw Error("cannot advance: current bin not exhausted");
  long remaining = cfg.horizon - state.queries_done;
  if (remaining <= 0) throw Error("cannot advance past the last bin");
  state.bin_index += 1;
  state.budget_left += cfg.bin_budget();
  state.z = 0.0;
  state.z_raw = 0.0;
  state.queries_left_in_bin = std::min(cfg.bin_size, remaining);
}

RatioBounds estimate_bounds(const Dataset& tuning,
                            const std::function<double(const RoutingRecord&, int)>& reward_fn) {
  if (tuning.records.empty()) throw Error("empty dataset");
  std::vector<double> ratios;
  for (const RoutingRecord& r : tuning.records) {
    for (int a = 0; a < tuning.num_arms(); ++a) {
      double c = r.costs[a];
      if (c <= 0.0) continue;  // ratio undefined; zero-cost arms stay routable
      ratios.push_back(reward_fn(r, a) / c);
    }
  }
  if (ratios.empty()) throw Error("no positive-cost entries in tuning data");
  RatioBounds b;
  b.ub = percentile(ratios, 99.0) * 1.5;
  b.lb = percentile(ratios, 1.0) / 1.5;
  // Keep the bounds usable when low-percentile ratios collapse to zero.
  if (b.lb < 1e-12) b.lb = 1e-12;
  if (!(b.ub > b.lb)) throw Error("degenerate reward-to-cost ratios in tuning data");
  return b;
}

double estimate_query_cost(long query_tokens, int arm,
                           const std::map<int, ArmTokenStats>& stats) {
  if (query_tokens < 0) throw ConfigError("query_tokens must be >= 0");
  auto it = stats.find(arm);
  if (it == stats.end())
    throw Error("missing arm stats for arm " + std::to_string(arm));
  const ArmTokenStats& s = it->second;
  return s.input_price * static_cast<double>(query_tokens) +
         s.output_price * s.mean_output_tokens;
}

}  // namespace pilot
