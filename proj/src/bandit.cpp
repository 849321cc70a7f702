#include "pilot/bandit.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace pilot {

using nlohmann::json;

double lambda_from_accuracy(double accuracy) {
  if (!std::isfinite(accuracy)) throw ConfigError("accuracy must be finite");
  double clamped = std::min(1.0, std::max(0.05, accuracy));
  return 1.0 / clamped;
}

namespace {

ArmState make_arm_state(int d_m, double lambda, const Eigen::VectorXd& theta_pref) {
  if (lambda <= 0.0) throw ConfigError("lambda must be positive");
  ArmState s;
  s.lambda = lambda;
  s.A = lambda * Eigen::MatrixXd::Identity(d_m, d_m);
  s.A_inv = (1.0 / lambda) * Eigen::MatrixXd::Identity(d_m, d_m);
  double n = theta_pref.norm();
  s.theta_prior = n < kNormEpsilon ? Eigen::VectorXd::Zero(d_m) : Eigen::VectorXd(theta_pref / n);
  s.b = lambda * s.theta_prior;
  s.t_updates = 0;
  return s;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw Error("checkpoint matrix malformed");
  const auto nr = rows.size();
  const auto nc = rows.at(0).size();
  Eigen::MatrixXd m(nr, nc);
  for (std::size_t r = 0; r < nr; ++r) {
    if (rows[r].size() != nc) throw Error("checkpoint matrix is ragged");
    for (std::size_t c = 0; c < nc; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

PilotRouter::PilotRouter(const ArmEmbeddings& emb, double alpha, LambdaRule rule) {
  if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  if (emb.num_arms() == 0) throw ConfigError("empty arm pool");
  if (emb.d_m < 1) throw ConfigError("invalid d_m");
  if (emb.accuracy.size() != emb.theta_pref.size())
    throw ConfigError("accuracy/theta_pref size mismatch");
  alpha_ = alpha;
  d_m_ = emb.d_m;
  arms_.reserve(emb.theta_pref.size());
  for (int a = 0; a < emb.num_arms(); ++a) {
    if (emb.theta_pref[a].size() != d_m_) throw ConfigError("theta_pref dimension mismatch");
    double lambda = rule.kind == LambdaRule::Kind::inverse_accuracy
                        ? lambda_from_accuracy(emb.accuracy[a])
                        : rule.value;
    arms_.push_back(make_arm_state(d_m_, lambda, emb.theta_pref[a]));
  }
}

PilotRouter PilotRouter::zero_prior(int d_m, int num_arms, double alpha) {
  if (d_m < 1) throw ConfigError("d_m must be >= 1");
  if (num_arms < 1) throw ConfigError("need at least one arm");
  ArmEmbeddings emb;
  emb.d_m = d_m;
  emb.theta_pref.assign(num_arms, Eigen::VectorXd::Zero(d_m));
  emb.accuracy.assign(num_arms, 1.0);
  return PilotRouter(emb, alpha, LambdaRule::fixed(1.0));
}

void PilotRouter::set_alpha(double alpha) {
  if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  alpha_ = alpha;
}

void PilotRouter::check_arm(int arm) const {
  if (arm < 0 || arm >= num_arms()) throw Error("arm index out of range");
}

void PilotRouter::check_context(const Eigen::VectorXd& psi) const {
  if (psi.size() != d_m_) throw Error("context dimension mismatch");
  if (std::abs(psi.norm() - 1.0) > 1e-6) throw Error("context must be unit-normalized");
}

Eigen::VectorXd PilotRouter::point_estimate(int arm) const {
  check_arm(arm);
  return arms_[arm].A_inv * arms_[arm].b;
}

double PilotRouter::expected_reward(int arm, const Eigen::VectorXd& psi) const {
  check_arm(arm);
  check_context(psi);
  Eigen::VectorXd est = point_estimate(arm);
  double n = est.norm();
  if (n < kNormEpsilon) throw Error("degenerate arm estimate");
  return psi.dot(est) / n;
}

Eigen::VectorXd PilotRouter::reward_estimates(const Eigen::VectorXd& psi) const {
  check_context(psi);
  Eigen::VectorXd out(num_arms());
  for (int a = 0; a < num_arms(); ++a) out[a] = safe_cosine(psi, point_estimate(a));
  return out;
}

double PilotRouter::ucb_width(int arm, const Eigen::VectorXd& psi) const {
  check_arm(arm);
  check_context(psi);
  double q = psi.dot(arms_[arm].A_inv * psi);
  return std::sqrt(std::max(0.0, q));
}

PilotRouter::Selection PilotRouter::select_arm(const Eigen::VectorXd& psi) const {
  check_context(psi);
  Selection sel;
  sel.ucb_scores.resize(num_arms());
  for (int a = 0; a < num_arms(); ++a) {
    double mean = safe_cosine(psi, point_estimate(a));
    sel.ucb_scores[a] = mean + alpha_ * ucb_width(a, psi);
  }
  sel.arm = 0;
  for (int a = 1; a < num_arms(); ++a)
    if (sel.ucb_scores[a] > sel.ucb_scores[sel.arm]) sel.arm = a;
  return sel;
}

void PilotRouter::update(int arm, const Eigen::VectorXd& psi, double reward) {
  check_arm(arm);
  check_context(psi);
  if (!std::isfinite(reward) || reward < 0.0 || reward > 1.0)
    throw Error("reward out of range [0,1]");
  ArmState& s = arms_[arm];
  s.A += psi * psi.transpose();
  // Sherman-Morrison: (A + pp^T)^-1 = A^-1 - (A^-1 p p^T A^-1) / (1 + p^T A^-1 p)
  Eigen::VectorXd Ap = s.A_inv * psi;
  double denom = 1.0 + psi.dot(Ap);
  s.A_inv -= (Ap * Ap.transpose()) / denom;
  s.b += reward * psi;
  ++s.t_updates;
  if (s.t_updates % kExactRecomputeEvery == 0) {
    s.A_inv = s.A.llt().solve(Eigen::MatrixXd::Identity(d_m_, d_m_));
  }
}

PilotRouter::Posterior PilotRouter::posterior(int arm) const {
  check_arm(arm);
  return {point_estimate(arm), arms_[arm].A_inv};
}

const ArmState& PilotRouter::arm_state(int arm) const {
  check_arm(arm);
  return arms_[arm];
}

void PilotRouter::save_checkpoint(const std::string& path) const {
  json arms = json::array();
  for (const ArmState& s : arms_) {
    arms.push_back(json{{"A", matrix_to_json(s.A)},
                        {"b", vector_to_json(s.b)},
                        {"lambda", s.lambda},
                        {"theta_prior", vector_to_json(s.theta_prior)},
                        {"t_updates", s.t_updates}});
  }
  json j{{"alpha", alpha_}, {"arms", std::move(arms)}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

PilotRouter PilotRouter::load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("invalid checkpoint JSON in " + path + ": " + e.what());
  }
  PilotRouter r;
  r.alpha_ = j.at("alpha").get<double>();
  if (r.alpha_ < 0.0) throw Error("checkpoint alpha must be >= 0");
  for (const json& aj : j.at("arms")) {
    ArmState s;
    s.A = matrix_from_json(aj.at("A"));
    if (s.A.rows() != s.A.cols()) throw Error("checkpoint A must be square");
    s.b = vector_from_json(aj.at("b"));
    s.lambda = aj.at("lambda").get<double>();
    s.theta_prior = vector_from_json(aj.at("theta_prior"));
    s.t_updates = aj.at("t_updates").get<long>();
    if (s.lambda <= 0.0) throw Error("checkpoint lambda must be positive");
    if (s.b.size() != s.A.rows() || s.theta_prior.size() != s.A.rows())
      throw Error("checkpoint dimension mismatch");
    auto llt = s.A.llt();
    if (llt.info() != Eigen::Success) throw Error("checkpoint A not positive definite");
    s.A_inv = llt.solve(Eigen::MatrixXd::Identity(s.A.rows(), s.A.rows()));
    r.arms_.push_back(std::move(s));
  }
  if (r.arms_.empty()) throw Error("checkpoint has no arms");
  r.d_m_ = static_cast<int>(r.arms_[0].A.rows());
  for (const ArmState& s : r.arms_)
    if (s.A.rows() != r.d_m_) throw Error("checkpoint arms disagree on d_m");
  return r;
}

}  // namespace pilot
