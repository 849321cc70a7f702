#include "pilot/baselines.hpp"

namespace pilot {

using nlohmann::json;

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "pilot") return PolicyKind::pilot;
  if (s == "linucb") return PolicyKind::linucb;
  if (s == "epoch_greedy") return PolicyKind::epoch_greedy;
  if (s == "explore_only") return PolicyKind::explore_only;
  if (s == "random") return PolicyKind::random_arm;
  if (s == "fixed") return PolicyKind::fixed_arm;
  throw ConfigError("unknown policy kind: " + s);
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::pilot: return "pilot";
    case PolicyKind::linucb: return "linucb";
    case PolicyKind::epoch_greedy: return "epoch_greedy";
    case PolicyKind::explore_only: return "explore_only";
    case PolicyKind::random_arm: return "random";
    case PolicyKind::fixed_arm: return "fixed";
  }
  throw ConfigError("unknown policy kind");
}

PolicySpec policy_spec_from_json(const json& j) {
  PolicySpec spec;
  if (!j.contains("kind")) throw ConfigError("policy spec missing 'kind'");
  spec.kind = policy_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("alpha")) spec.alpha = j.at("alpha").get<double>();
  if (j.contains("window")) spec.window = j.at("window").get<int>();
  if (j.contains("arm")) spec.arm = j.at("arm").get<int>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("lambda")) {
    const json& l = j.at("lambda");
    if (l.is_string() && l.get<std::string>() == "inverse_accuracy")
      spec.lambda_rule = LambdaRule::inverse_accuracy();
    else if (l.is_number())
      spec.lambda_rule = LambdaRule::fixed(l.get<double>());
    else
      throw ConfigError("policy 'lambda' must be \"inverse_accuracy\" or a number");
  }
  if (spec.alpha < 0.0) throw ConfigError("policy alpha must be >= 0");
  if (spec.window < 1) throw ConfigError("policy window must be >= 1");
  return spec;
}

json policy_spec_to_json(const PolicySpec& spec) {
  json j{{"kind", to_string(spec.kind)},
         {"alpha", spec.alpha},
         {"window", spec.window},
         {"arm", spec.arm},
         {"seed", spec.seed}};
  if (spec.lambda_rule.kind == LambdaRule::Kind::inverse_accuracy)
    j["lambda"] = "inverse_accuracy";
  else
    j["lambda"] = spec.lambda_rule.value;
  return j;
}

namespace {

int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

class RidgePolicy : public Policy {
 public:
  RidgePolicy(PilotRouter router, std::string name)
      : router_(std::move(router)), name_(std::move(name)) {}

  int select(const Eigen::VectorXd& psi) override { return router_.select_arm(psi).arm; }
  void update(int arm, const Eigen::VectorXd& psi, double reward) override {
    router_.update(arm, psi, reward);
  }
  Eigen::VectorXd reward_estimates(const Eigen::VectorXd& psi) override {
    return router_.reward_estimates(psi);
  }
  double ucb_width(int arm, const Eigen::VectorXd& psi) const override {
    return router_.ucb_width(arm, psi);
  }
  double posterior_trace(int arm) const override {
    return router_.arm_state(arm).A_inv.trace();
  }
  int num_arms() const override { return router_.num_arms(); }
  int dim() const override { return router_.dim(); }
  std::string name() const override { return name_; }
  PilotRouter* router() override { return &router_; }

 private:
  PilotRouter router_;
  std::string name_;
};

// One uniform-random exploration step at the start of each window, greedy
// (alpha = 0 ridge) for the remaining window - 1 steps.
class EpochGreedyPolicy : public Policy {
 public:
  EpochGreedyPolicy(int d_m, int num_arms, int window, std::uint64_t seed)
      : router_(PilotRouter::zero_prior(d_m, num_arms, 0.0)), window_(window), rng_(seed) {
    if (window < 1) throw ConfigError("window must be >= 1");
  }

  int select(const Eigen::VectorXd& psi) override {
    bool explore = step_ % window_ == 0;
    ++step_;
    if (explore) {
      std::uniform_int_distribution<int> pick(0, router_.num_arms() - 1);
      return pick(rng_);
    }
    return argmax_lowest(router_.reward_estimates(psi));
  }
  void update(int arm, const Eigen::VectorXd& psi, double reward) override {
    router_.update(arm, psi, reward);
  }
  Eigen::VectorXd reward_estimates(const Eigen::VectorXd& psi) override {
    return router_.reward_estimates(psi);
  }
  double ucb_width(int arm, const Eigen::VectorXd& psi) const override {
    return router_.ucb_width(arm, psi);
  }
  double posterior_trace(int arm) const override {
    return router_.arm_state(arm).A_inv.trace();
  }
  int num_arms() const override { return router_.num_arms(); }
  int dim() const override { return router_.dim(); }
  std::string name() const override { return "epoch_greedy"; }
  PilotRouter* router() override { return &router_; }

 private:
  PilotRouter router_;
  int window_;
  long step_ = 0;
  Rng rng_;
};

// Uniform selection forever; keeps updating its ridge estimator so its regret
// reflects what pure exploration learns.
class ExploreOnlyPolicy : public Policy {
 public:
  ExploreOnlyPolicy(int d_m, int num_arms, std::uint64_t seed)
      : router_(PilotRouter::zero_prior(d_m, num_arms, 0.0)), rng_(seed) {}

  int select(const Eigen::VectorXd&) override {
    std::uniform_int_distribution<int> pick(0, router_.num_arms() - 1);
    return pick(rng_);
  }
  void update(int arm, const Eigen::VectorXd& psi, double reward) override {
    router_.update(arm, psi, reward);
  }
  Eigen::VectorXd reward_estimates(const Eigen::VectorXd& psi) override {
    return router_.reward_estimates(psi);
  }
  double ucb_width(int arm, const Eigen::VectorXd& psi) const override {
    return router_.ucb_width(arm, psi);
  }
  double posterior_trace(int arm) const override {
    return router_.arm_state(arm).A_inv.trace();
  }
  int num_arms() const override { return router_.num_arms(); }
  int dim() const override { return router_.dim(); }
  std::string name() const override { return "explore_only"; }
  PilotRouter* router() override { return &router_; }

 private:
  PilotRouter router_;
  Rng rng_;
};

// Uniform selection, no learning. Deployment estimates are seeded uniform
// draws so budget-constrained serving still gets a (random) ranking.
class RandomPolicy : public Policy {
 public:
  RandomPolicy(int d_m, int num_arms, std::uint64_t seed)
      : d_m_(d_m), k_(num_arms), rng_(seed), est_rng_(seed + 1) {}

  int select(const Eigen::VectorXd&) override {
    std::uniform_int_distribution<int> pick(0, k_ - 1);
    return pick(rng_);
  }
  void update(int, const Eigen::VectorXd&, double) override {}
  Eigen::VectorXd reward_estimates(const Eigen::VectorXd&) override {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Eigen::VectorXd est(k_);
    for (int a = 0; a < k_; ++a) est[a] = uni(est_rng_);
    return est;
  }
  double ucb_width(int, const Eigen::VectorXd&) const override { return 0.0; }
  double posterior_trace(int) const override { return 0.0; }
  int num_arms() const override { return k_; }
  int dim() const override { return d_m_; }
  std::string name() const override { return "random"; }

 private:
  int d_m_;
  int k_;
  Rng rng_;
  Rng est_rng_;
};

class FixedPolicy : public Policy {
 public:
  FixedPolicy(int d_m, int num_arms, int arm) : d_m_(d_m), k_(num_arms), arm_(arm) {
    if (arm < 0 || arm >= num_arms) throw ConfigError("fixed policy arm out of range");
  }

  int select(const Eigen::VectorXd&) override { return arm_; }
  void update(int, const Eigen::VectorXd&, double) override {}
  Eigen::VectorXd reward_estimates(const Eigen::VectorXd&) override {
    Eigen::VectorXd est = Eigen::VectorXd::Zero(k_);
    est[arm_] = 1.0;
    return est;
  }
  double ucb_width(int, const Eigen::VectorXd&) const override { return 0.0; }
  double posterior_trace(int) const override { return 0.0; }
  int num_arms() const override { return k_; }
  int dim() const override { return d_m_; }
  std::string name() const override { return "fixed"; }

 private:
  int d_m_;
  int k_;
  int arm_;
};

}  // namespace

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, int d_m, int num_arms,
                                    const ArmEmbeddings* emb) {
  switch (spec.kind) {
    case PolicyKind::pilot: {
      if (emb == nullptr) throw ConfigError("pilot policy requires arm embeddings");
      if (emb->d_m != d_m) throw ConfigError("arm embeddings d_m mismatch");
      if (emb->num_arms() != num_arms) throw ConfigError("arm embeddings arm-count mismatch");
      return std::make_unique<RidgePolicy>(PilotRouter(*emb, spec.alpha, spec.lambda_rule),
                                           "pilot");
    }
    case PolicyKind::linucb:
      return std::make_unique<RidgePolicy>(PilotRouter::zero_prior(d_m, num_arms, spec.alpha),
                                           "linucb");
    case PolicyKind::epoch_greedy:
      return std::make_unique<EpochGreedyPolicy>(d_m, num_arms, spec.window, spec.seed);
    case PolicyKind::explore_only:
      return std::make_unique<ExploreOnlyPolicy>(d_m, num_arms, spec.seed);
    case PolicyKind::random_arm:
      return std::make_unique<RandomPolicy>(d_m, num_arms, spec.seed);
    case PolicyKind::fixed_arm:
      return std::make_unique<FixedPolicy>(d_m, num_arms, spec.arm);
  }
  throw ConfigError("unknown policy kind");
}

}  // namespace pilot
