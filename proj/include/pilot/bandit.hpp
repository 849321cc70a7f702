#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "pilot/pretrain.hpp"

namespace pilot {

// Per-arm ridge prior strength: inverse of pretraining accuracy (clamped so
// lambda stays in [1, 20]) or a fixed value.
struct LambdaRule {
  enum class Kind { inverse_accuracy, fixed };
  Kind kind = Kind::inverse_accuracy;
  double value = 1.0;

  static LambdaRule inverse_accuracy() { return {Kind::inverse_accuracy, 1.0}; }
  static LambdaRule fixed(double v) { return {Kind::fixed, v}; }
};

// accuracy clamped to [0.05, 1.0] before the reciprocal.
double lambda_from_accuracy(double accuracy);

// Ridge-regression state of one arm: A = lambda*I + sum psi psi^T,
// b = lambda*theta_prior + sum r psi, with the inverse cached.
struct ArmState {
  Eigen::MatrixXd A;
  Eigen::MatrixXd A_inv;
  Eigen::VectorXd b;
  Eigen::VectorXd theta_prior;  // unit-normalized prior (zero for no prior)
  double lambda = 1.0;
  long t_updates = 0;
};

// PILOT: LinUCB with a preference prior. Selection scores each arm with
// cos(psi, theta_tilde) + alpha * sqrt(psi^T A_inv psi) and breaks ties toward
// the lowest arm index. select_arm and the estimate accessors are read-only;
// update requires exclusive access to the touched arm.
class PilotRouter {
 public:
  PilotRouter(const ArmEmbeddings& emb, double alpha, LambdaRule rule);

  // Unit ridge with zero prior: plain LinUCB.
  static PilotRouter zero_prior(int d_m, int num_arms, double alpha);

  int num_arms() const { return static_cast<int>(arms_.size()); }
  int dim() const { return d_m_; }
  double alpha() const { return alpha_; }
  void set_alpha(double alpha);

  // theta_tilde = A_inv * b.
  Eigen::VectorXd point_estimate(int arm) const;

  // cos(psi, normalize(theta_tilde)); throws "degenerate arm estimate" when
  // the estimate norm is below 1e-9.
  double expected_reward(int arm, const Eigen::VectorXd& psi) const;

  // Zero-safe variant used by selection and deployment: a degenerate estimate
  // contributes a 0 mean term instead of throwing.
  Eigen::VectorXd reward_estimates(const Eigen::VectorXd& psi) const;

  // sqrt(psi^T A_inv psi), the width behind the exploration bonus.
  double ucb_width(int arm, const Eigen::VectorXd& psi) const;

  struct Selection {
    int arm = 0;
    Eigen::VectorXd ucb_scores;
  };
  Selection select_arm(const Eigen::VectorXd& psi) const;

  // Rank-1 update: A += psi psi^T (Sherman-Morrison on the cached inverse,
  // exact recompute every 512 updates per arm), b += reward * psi.
  void update(int arm, const Eigen::VectorXd& psi, double reward);

  struct Posterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
  };
  // N(theta_tilde, A_inv).
  Posterior posterior(int arm) const;

  const ArmState& arm_state(int arm) const;

  void save_checkpoint(const std::string& path) const;
  static PilotRouter load_checkpoint(const std::string& path);

 private:
  PilotRouter() = default;
  void check_arm(int arm) const;
  void check_context(const Eigen::VectorXd& psi) const;

  std::vector<ArmState> arms_;
  double alpha_ = 1.0;
  int d_m_ = 0;

  static constexpr long kExactRecomputeEvery = 512;
};

}  // namespace pilot
