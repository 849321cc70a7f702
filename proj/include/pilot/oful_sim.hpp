#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "pilot/common.hpp"

namespace pilot {

// Synthetic linear bandit: rewards theta_star . x + Gaussian noise of scale R,
// action sets of num_actions contexts drawn uniformly on the unit sphere each
// round (so ||x|| <= 1 holds by construction).
struct LinearBanditInstance {
  Eigen::VectorXd theta_star;
  int num_actions = 10;
  double noise_scale = 0.1;  // R, the sub-Gaussian parameter
  long horizon = 2000;
  double delta = 0.05;
  double lambda_reg = 1.0;

  int dim() const { return static_cast<int>(theta_star.size()); }
  void validate() const;
};

// Ellipsoidal confidence set around the regularized least-squares center.
struct ConfidenceSet {
  Eigen::VectorXd center;
  Eigen::MatrixXd A;
  double radius = 0.0;
  double s_param = 0.0;
};

// sqrt(lambda)*S + R*sqrt(2*log(1/delta) + logdet(A) - d*log(lambda)).
double confidence_radius(double lambda_reg, double s_param, double noise_scale,
                         double delta, double log_det_A, int dim);

// Optimistic linear bandit with ridge state A = lambda*I + sum x x^T,
// b = lambda*theta_pref + sum r_s x_s, selecting by the closed form
// center . x + radius * ||x||_{A^-1}. theta_pref = 0 and s_param = ||theta*||
// is OFUL; a prior center with s_param = ||theta* - theta_pref|| is PI-OFUL.
// Returns the cumulative-regret curve (length horizon). The context and noise
// streams depend only on (instance, seed), so runs with different priors are
// paired draw-for-draw.
std::vector<double> run_linear_ucb(const LinearBanditInstance& inst,
                                   const Eigen::VectorXd& theta_pref,
                                   double s_param, std::uint64_t seed);

std::vector<double> run_oful(const LinearBanditInstance& inst, std::uint64_t seed);
std::vector<double> run_pi_oful(const LinearBanditInstance& inst,
                                const Eigen::VectorXd& theta_pref, std::uint64_t seed);

// Closed-form regret bound
//   U_T(S) = 4*sqrt(T*d*log(lambda + T/d))
//          * (sqrt(lambda)*S + R*sqrt(2*log(1/delta) + d*log(1 + T/(lambda*d))));
// strictly increasing in S, so a closer prior gives a smaller bound.
double bound_value(double s_param, const LinearBanditInstance& inst);

// Seed-averaged OFUL vs PI-OFUL comparison on one instance.
struct RegretSummary {
  std::vector<double> mean_oful;
  std::vector<double> stderr_oful;
  std::vector<double> mean_pi;
  std::vector<double> stderr_pi;
  double bound_oful = 0.0;
  double bound_pi = 0.0;
  int seeds = 0;

  double final_mean_oful() const { return mean_oful.back(); }
  double final_mean_pi() const { return mean_pi.back(); }
};

RegretSummary run_regret_suite(const LinearBanditInstance& inst,
                               const Eigen::VectorXd& theta_pref, int num_seeds,
                               std::uint64_t seed0, int num_threads);

}  // namespace pilot
