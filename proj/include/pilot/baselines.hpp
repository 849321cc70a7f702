#pragma once

#include <json.hpp>

#include <memory>
#include <string>

#include "pilot/bandit.hpp"

namespace pilot {

enum class PolicyKind { pilot, linucb, epoch_greedy, explore_only, random_arm, fixed_arm };

PolicyKind policy_kind_from_string(const std::string& s);
std::string to_string(PolicyKind kind);

struct PolicySpec {
  PolicyKind kind = PolicyKind::linucb;
  double alpha = 1.0;
  int window = 100;  // epoch_greedy only
  int arm = 0;       // fixed_arm only
  std::uint64_t seed = 0;
  LambdaRule lambda_rule = LambdaRule::inverse_accuracy();
};

PolicySpec policy_spec_from_json(const nlohmann::json& j);
nlohmann::json policy_spec_to_json(const PolicySpec& spec);

// Common select/update surface shared by PILOT and every baseline. The replay
// harness talks to this interface only, so a policy can never see the score
// vector, just the chosen arm's reward.
class Policy {
 public:
  virtual ~Policy() = default;

  // Picks an arm for this context. May advance internal schedule/rng state.
  virtual int select(const Eigen::VectorXd& psi) = 0;
  virtual void update(int arm, const Eigen::VectorXd& psi, double reward) = 0;

  // Per-arm reward estimates used by greedy deployment; non-const because the
  // random baseline draws its ranking from a seeded stream.
  virtual Eigen::VectorXd reward_estimates(const Eigen::VectorXd& psi) = 0;

  // Exploration diagnostics; 0 for policies without a ridge estimator.
  virtual double ucb_width(int arm, const Eigen::VectorXd& psi) const = 0;
  virtual double posterior_trace(int arm) const = 0;

  virtual int num_arms() const = 0;
  virtual int dim() const = 0;
  virtual std::string name() const = 0;

  // The ridge router behind the policy, or nullptr (random/fixed kinds).
  virtual PilotRouter* router() { return nullptr; }
};

// emb is required for kind == pilot and ignored otherwise.
std::unique_ptr<Policy> make_policy(const PolicySpec& spec, int d_m, int num_arms,
                                    const ArmEmbeddings* emb);

}  // namespace pilot
