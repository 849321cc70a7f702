#include "pilot/oful_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pilot/parallel.hpp"

namespace pilot {

void LinearBanditInstance::validate() const {
  if (theta_star.size() < 1) throw ConfigError("theta_star must be non-empty");
  if (num_actions < 1) throw ConfigError("num_actions must be >= 1");
  if (noise_scale < 0.0) throw ConfigError("noise_scale must be >= 0");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (!(lambda_reg > 0.0)) throw ConfigError("lambda_reg must be positive");
}

double confidence_radius(double lambda_reg, double s_param, double noise_scale,
                         double delta, double log_det_A, int dim) {
  if (!(lambda_reg > 0.0)) throw ConfigError("lambda_reg must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (s_param < 0.0) throw ConfigError("s_param must be >= 0");
  double log_term = 2.0 * std::log(1.0 / delta) + log_det_A -
                    static_cast<double>(dim) * std::log(lambda_reg);
  return std::sqrt(lambda_reg) * s_param + noise_scale * std::sqrt(std::max(0.0, log_term));
}

std::vector<double> run_linear_ucb(const LinearBanditInstance& inst,
                                   const Eigen::VectorXd& theta_pref,
                                   double s_param, std::uint64_t seed) {
  inst.validate();
  const int d = inst.dim();
  if (theta_pref.size() != d) throw ConfigError("theta_pref dimension mismatch");

  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::MatrixXd A = inst.lambda_reg * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd A_inv = (1.0 / inst.lambda_reg) * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd b = inst.lambda_reg * theta_pref;
  double log_det = static_cast<double>(d) * std::log(inst.lambda_reg);

  std::vector<double> curve(inst.horizon);
  double cum_regret = 0.0;

  std::vector<Eigen::VectorXd> xs(inst.num_actions);
  for (long t = 0; t < inst.horizon; ++t) {
    for (int j = 0; j < inst.num_actions; ++j) xs[j] = unit_sphere_sample(d, rng);
    // One noise draw per round regardless of the chosen action, so the stream
    // is identical across priors.
    double noise = inst.noise_scale * gauss(rng);

    Eigen::VectorXd center = A_inv * b;
    double radius = confidence_radius(inst.lambda_reg, s_param, inst.noise_scale,
                                      inst.delta, log_det, d);
    int chosen = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < inst.num_actions; ++j) {
      double width = std::sqrt(std::max(0.0, xs[j].dot(A_inv * xs[j])));
      double score = center.dot(xs[j]) + radius * width;
      if (score > best_score) {
        best_score = score;
        chosen = j;
      }
    }

    double best_mean = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < inst.num_actions; ++j)
      best_mean = std::max(best_mean, inst.theta_star.dot(xs[j]));
    cum_regret += best_mean - inst.theta_star.dot(xs[chosen]);
    curve[t] = cum_regret;

    double reward = inst.theta_star.dot(xs[chosen]) + noise;
    const Eigen::VectorXd& x = xs[chosen];
    // Matrix determinant lemma keeps logdet(A) current in O(d^2).
    Eigen::VectorXd Ax = A_inv * x;
    double quad = x.dot(Ax);
    log_det += std::log1p(quad);
    A += x * x.transpose();
    A_inv -= (Ax * Ax.transpose()) / (1.0 + quad);
    b += reward * x;

    if ((t + 1) % 512 == 0) {
      auto llt = A.llt();
      A_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
      log_det = 0.0;
      for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
    }
  }
  return curve;
}

std::vector<double> run_oful(const LinearBanditInstance& inst, std::uint64_t seed) {
  return run_linear_ucb(inst, Eigen::VectorXd::Zero(inst.dim()), inst.theta_star.norm(),
                        seed);
}

std::vector<double> run_pi_oful(const LinearBanditInstance& inst,
                                const Eigen::VectorXd& theta_pref, std::uint64_t seed) {
  return run_linear_ucb(inst, theta_pref, (inst.theta_star - theta_pref).norm(), seed);
}

double bound_value(double s_param, const LinearBanditInstance& inst) {
  inst.validate();
  if (s_param < 0.0) throw ConfigError("s_param must be >= 0");
  double T = static_cast<double>(inst.horizon);
  double d = static_cast<double>(inst.dim());
  double lead = 4.0 * std::sqrt(T * d * std::log(inst.lambda_reg + T / d));
  double noise_term = inst.noise_scale *
                      std::sqrt(2.0 * std::log(1.0 / inst.delta) +
                                d * std::log(1.0 + T / (inst.lambda_reg * d)));
  return lead * (std::sqrt(inst.lambda_reg) * s_param + noise_term);
}

RegretSummary run_regret_suite(const LinearBanditInstance& inst,
                               const Eigen::VectorXd& theta_pref, int num_seeds,
                               std::uint64_t seed0, int num_threads) {
  inst.validate();
  if (num_seeds < 2) throw ConfigError("need at least 2 seeds");

  std::vector<std::vector<double>> oful(num_seeds), pi(num_seeds);
  parallel_for(static_cast<std::size_t>(num_seeds), num_threads, [&](std::size_t i) {
    std::uint64_t seed = seed0 + i;
    oful[i] = run_oful(inst, seed);
    pi[i] = run_pi_oful(inst, theta_pref, seed);
  });

  RegretSummary out;
  out.seeds = num_seeds;
  const std::size_t T = oful[0].size();
  out.mean_oful.resize(T);
  out.stderr_oful.resize(T);
  out.mean_pi.resize(T);
  out.stderr_pi.resize(T);
  std::vector<double> col(num_seeds);
  for (std::size_t t = 0; t < T; ++t) {
    for (int i = 0; i < num_seeds; ++i) col[i] = oful[i][t];
    out.mean_oful[t] = mean_of(col);
    out.stderr_oful[t] = stderr_of(col);
    for (int i = 0; i < num_seeds; ++i) col[i] = pi[i][t];
    out.mean_pi[t] = mean_of(col);
    out.stderr_pi[t] = stderr_of(col);
  }
  out.bound_oful = bound_value(inst.theta_star.norm(), inst);
  out.bound_pi = bound_value((inst.theta_star - theta_pref).norm(), inst);
  return out;
}

}  // namespace pilot
