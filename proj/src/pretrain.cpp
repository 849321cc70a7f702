#include "pilot/pretrain.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace pilot {

using nlohmann::json;

namespace {

// d cos(u, v) / d u, assuming both norms are above the degeneracy floor.
Eigen::VectorXd dcos_du(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  double nu = u.norm();
  double nv = v.norm();
  double c = u.dot(v) / (nu * nv);
  return v / (nu * nv) - (c / (nu * nu)) * u;
}

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

void check_pref_dims(const std::vector<PreferenceRecord>& prefs) {
  for (std::size_t i = 1; i < prefs.size(); ++i) {
    if (prefs[i].embedding.size() != prefs[0].embedding.size())
      throw Error("preference embeddings have mixed lengths");
  }
}

std::vector<Pools> all_pools(const std::vector<PreferenceRecord>& prefs) {
  std::vector<Pools> pools(prefs.size());
  for (std::size_t i = 0; i < prefs.size(); ++i) pools[i] = build_pools(i, prefs);
  return pools;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr, const char* what) {
  if (!arr.is_array()) throw Error(std::string("model artifact field '") + what + "' is not an array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

Pools build_pools(std::size_t anchor, const std::vector<PreferenceRecord>& all) {
  if (anchor >= all.size()) throw Error("anchor index out of range");
  const ArmId& aw = all[anchor].winner;
  Pools pools;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const PreferenceRecord& r = all[i];
    if (i != anchor && r.winner.index == aw.index) pools.positives.push_back(i);
    // Hard negative: the anchor's winner took part and lost to a strictly
    // smaller model.
    const bool participated = r.arm_i.index == aw.index || r.arm_j.index == aw.index;
    if (participated && r.winner.index != aw.index && r.winner.size_rank < aw.size_rank)
      pools.negatives.push_back(i);
  }
  return pools;
}

TripletBatch make_triplet_batch(std::size_t anchor,
                                const std::vector<PreferenceRecord>& all,
                                double margin) {
  Pools pools = build_pools(anchor, all);
  TripletBatch batch;
  batch.anchor = all[anchor].embedding;
  batch.margin = margin;
  for (std::size_t i : pools.positives) batch.positives.push_back(all[i].embedding);
  for (std::size_t i : pools.negatives) batch.negatives.push_back(all[i].embedding);
  return batch;
}

TripletGradients triplet_loss_gradients(const Eigen::MatrixXd& W,
                                        const Eigen::VectorXd& bias,
                                        const Eigen::VectorXd& xa,
                                        const Eigen::VectorXd& xp,
                                        const Eigen::VectorXd& xn, double margin) {
  TripletGradients g;
  g.grad_W = Eigen::MatrixXd::Zero(W.rows(), W.cols());
  g.grad_bias = Eigen::VectorXd::Zero(W.rows());

  Eigen::VectorXd u = W * xa + bias;
  Eigen::VectorXd v = W * xp + bias;
  Eigen::VectorXd w = W * xn + bias;
  if (u.norm() < kNormEpsilon || v.norm() < kNormEpsilon || w.norm() < kNormEpsilon) {
    // Cosine is undefined at the origin; contribute nothing.
    return g;
  }

  double s = safe_cosine(u, w) - safe_cosine(u, v) + margin;
  if (s <= 0.0) return g;
  g.loss = s;

  Eigen::VectorXd du = dcos_du(u, w) - dcos_du(u, v);
  Eigen::VectorXd dv = -dcos_du(v, u);
  Eigen::VectorXd dw = dcos_du(w, u);
  g.grad_W = du * xa.transpose() + dv * xp.transpose() + dw * xn.transpose();
  g.grad_bias = du + dv + dw;
  return g;
}

BcePairGradients bce_pair_gradients(const Eigen::VectorXd& theta_i,
                                    const Eigen::VectorXd& theta_j,
                                    const Eigen::VectorXd& psi, bool winner_is_i) {
  if (theta_i.size() != psi.size() || theta_j.size() != psi.size())
    throw Error("arm embedding / context dimension mismatch");
  BcePairGradients g;
  g.grad_theta_i = Eigen::VectorXd::Zero(theta_i.size());
  g.grad_theta_j = Eigen::VectorXd::Zero(theta_j.size());
  if (theta_i.norm() < kNormEpsilon || theta_j.norm() < kNormEpsilon ||
      psi.norm() < kNormEpsilon) {
    g.p_i = 0.5;
    g.loss = softplus(0.0);
    return g;
  }

  double z = safe_cosine(theta_i, psi) - safe_cosine(theta_j, psi);
  g.p_i = 1.0 / (1.0 + std::exp(-z));
  double y = winner_is_i ? 1.0 : 0.0;
  g.loss = softplus(winner_is_i ? -z : z);

  double dz = g.p_i - y;
  g.grad_theta_i = dz * dcos_du(theta_i, psi);
  g.grad_theta_j = -dz * dcos_du(theta_j, psi);
  return g;
}

Projection init_projection(int d_m, int d_e, std::uint64_t seed) {
  if (d_m < 2) throw ConfigError("d_m must be >= 2");
  if (d_e < 1) throw ConfigError("d_e must be >= 1");
  Rng rng(seed);
  double bound = 1.0 / std::sqrt(static_cast<double>(d_e));
  std::uniform_real_distribution<double> uni(-bound, bound);
  Projection p;
  p.d_m = d_m;
  p.W.resize(d_m, d_e);
  for (int r = 0; r < d_m; ++r)
    for (int c = 0; c < d_e; ++c) p.W(r, c) = uni(rng);
  p.bias = Eigen::VectorXd::Zero(d_m);
  return p;
}

Projection train_projection(const std::vector<PreferenceRecord>& prefs, int d_m,
                            const PretrainHyperparams& hp) {
  if (prefs.size() < 2) throw Error("need at least 2 preference records");
  if (hp.learning_rate < 0.0 || hp.epochs < 0 || hp.margin <= 0.0)
    throw ConfigError("invalid pretraining hyperparameters");
  check_pref_dims(prefs);

  std::vector<Pools> pools = all_pools(prefs);
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < prefs.size(); ++i)
    if (!pools[i].positives.empty() && !pools[i].negatives.empty()) usable.push_back(i);
  if (usable.empty()) throw Error("no usable triplets");

  const int d_e = static_cast<int>(prefs[0].embedding.size());
  Projection p = init_projection(d_m, d_e, hp.seed);

  Rng rng(hp.seed + 1);  // separate stream from the init draws
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::vector<std::size_t> order = shuffled_indices(usable.size(), rng);
    for (std::size_t oi : order) {
      std::size_t a = usable[oi];
      const Pools& pl = pools[a];
      std::uniform_int_distribution<std::size_t> pick_p(0, pl.positives.size() - 1);
      std::uniform_int_distribution<std::size_t> pick_n(0, pl.negatives.size() - 1);
      std::size_t ip = pl.positives[pick_p(rng)];
      std::size_t in = pl.negatives[pick_n(rng)];
      TripletGradients g = triplet_loss_gradients(p.W, p.bias, prefs[a].embedding,
                                                  prefs[ip].embedding,
                                                  prefs[in].embedding, hp.margin);
      if (g.loss > 0.0) {
        p.W -= hp.learning_rate * g.grad_W;
        p.bias -= hp.learning_rate * g.grad_bias;
      }
    }
  }
  return p;
}

ArmEmbeddings train_arm_embeddings(const std::vector<PreferenceRecord>& prefs,
                                   const std::vector<ArmId>& arms,
                                   const Projection& proj,
                                   const PretrainHyperparams& hp) {
  if (prefs.empty()) throw Error("empty preference set");
  if (arms.empty()) throw ConfigError("empty arm pool");
  const int k = static_cast<int>(arms.size());
  for (const PreferenceRecord& r : prefs) {
    if (r.arm_i.index < 0 || r.arm_i.index >= k || r.arm_j.index < 0 || r.arm_j.index >= k)
      throw Error("preference references an arm outside the pool");
  }

  std::vector<Eigen::VectorXd> psi(prefs.size());
  for (std::size_t i = 0; i < prefs.size(); ++i) psi[i] = project(proj, prefs[i].embedding);

  Rng rng(hp.seed);
  std::vector<Eigen::VectorXd> theta(k);
  for (int a = 0; a < k; ++a) theta[a] = unit_sphere_sample(proj.d_m, rng);

  std::vector<bool> seen(k, false);
  for (const PreferenceRecord& r : prefs) {
    seen[r.arm_i.index] = true;
    seen[r.arm_j.index] = true;
  }

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::vector<std::size_t> order = shuffled_indices(prefs.size(), rng);
    for (std::size_t idx : order) {
      const PreferenceRecord& r = prefs[idx];
      BcePairGradients g = bce_pair_gradients(theta[r.arm_i.index], theta[r.arm_j.index],
                                              psi[idx], r.winner.index == r.arm_i.index);
      theta[r.arm_i.index] -= hp.learning_rate * g.grad_theta_i;
      theta[r.arm_j.index] -= hp.learning_rate * g.grad_theta_j;
    }
  }

  ArmEmbeddings emb;
  emb.d_m = proj.d_m;
  emb.theta_pref = std::move(theta);
  emb.accuracy.assign(k, 0.0);

  // Per-arm accuracy over all pairs containing the arm: correct when the
  // cosine ordering matches the recorded winner.
  std::vector<int> total(k, 0), correct(k, 0);
  for (std::size_t idx = 0; idx < prefs.size(); ++idx) {
    const PreferenceRecord& r = prefs[idx];
    double ci = safe_cosine(emb.theta_pref[r.arm_i.index], psi[idx]);
    double cj = safe_cosine(emb.theta_pref[r.arm_j.index], psi[idx]);
    bool predicted_i = ci > cj;
    bool label_i = r.winner.index == r.arm_i.index;
    bool ok = predicted_i == label_i;
    for (int a : {r.arm_i.index, r.arm_j.index}) {
      ++total[a];
      if (ok) ++correct[a];
    }
  }
  for (int a = 0; a < k; ++a)
    if (seen[a]) emb.accuracy[a] = static_cast<double>(correct[a]) / static_cast<double>(total[a]);

  // Fallback for arms never observed in the preference set: a neutral prior
  // near the data manifold, with accuracy pinned to the clamp floor.
  Eigen::VectorXd mean_psi = Eigen::VectorXd::Zero(proj.d_m);
  for (const Eigen::VectorXd& u : psi) mean_psi += u;
  mean_psi /= static_cast<double>(psi.size());
  for (int a = 0; a < k; ++a) {
    if (seen[a]) continue;
    if (mean_psi.norm() >= kNormEpsilon)
      emb.theta_pref[a] = mean_psi / mean_psi.norm();
    else
      emb.theta_pref[a] = Eigen::VectorXd::Unit(proj.d_m, 0);
    emb.accuracy[a] = 0.05;
  }
  return emb;
}

Eigen::VectorXd project(const Projection& proj, const Eigen::VectorXd& x) {
  if (x.size() != proj.W.cols()) throw Error("embedding length mismatch in project");
  Eigen::VectorXd y = proj.W * x + proj.bias;
  double n = y.norm();
  if (n < kNormEpsilon) throw Error("degenerate projection");
  return y / n;
}

double mean_triplet_loss(const Projection& proj,
                         const std::vector<PreferenceRecord>& prefs, double margin,
                         std::uint64_t seed, int samples_per_anchor) {
  std::vector<Pools> pools = all_pools(prefs);
  Rng rng(seed);
  double sum = 0.0;
  long count = 0;
  for (std::size_t a = 0; a < prefs.size(); ++a) {
    const Pools& pl = pools[a];
    if (pl.positives.empty() || pl.negatives.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick_p(0, pl.positives.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_n(0, pl.negatives.size() - 1);
    for (int s = 0; s < samples_per_anchor; ++s) {
      std::size_t ip = pl.positives[pick_p(rng)];
      std::size_t in = pl.negatives[pick_n(rng)];
      Eigen::VectorXd u = proj.W * prefs[a].embedding + proj.bias;
      Eigen::VectorXd v = proj.W * prefs[ip].embedding + proj.bias;
      Eigen::VectorXd w = proj.W * prefs[in].embedding + proj.bias;
      double val = safe_cosine(u, w) - safe_cosine(u, v) + margin;
      sum += std::max(0.0, val);
      ++count;
    }
  }
  if (count == 0) throw Error("no usable triplets");
  return sum / static_cast<double>(count);
}

void save_model_artifact(const ModelArtifact& m, const std::string& path) {
  json wj = json::array();
  for (int r = 0; r < m.proj.W.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.proj.W.cols(); ++c) row.push_back(m.proj.W(r, c));
    wj.push_back(std::move(row));
  }
  json thetas = json::array();
  for (const Eigen::VectorXd& t : m.emb.theta_pref) thetas.push_back(vector_to_json(t));
  json arms = json::array();
  for (const ArmId& a : m.arms) arms.push_back(json{{"name", a.name}, {"size_rank", a.size_rank}});
  json j{{"d_m", m.proj.d_m},
         {"W", std::move(wj)},
         {"bias", vector_to_json(m.proj.bias)},
         {"theta_pref", std::move(thetas)},
         {"accuracy", m.emb.accuracy},
         {"arms", std::move(arms)}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

ModelArtifact load_model_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("invalid model artifact JSON in " + path + ": " + e.what());
  }
  ModelArtifact m;
  m.proj.d_m = j.at("d_m").get<int>();
  if (m.proj.d_m < 2) throw Error("model artifact d_m must be >= 2");
  const json& wj = j.at("W");
  if (!wj.is_array() || wj.size() != static_cast<std::size_t>(m.proj.d_m))
    throw Error("model artifact W has wrong row count");
  const std::size_t d_e = wj.at(0).size();
  m.proj.W.resize(m.proj.d_m, static_cast<Eigen::Index>(d_e));
  for (int r = 0; r < m.proj.d_m; ++r) {
    const json& row = wj.at(r);
    if (row.size() != d_e) throw Error("model artifact W is ragged");
    for (std::size_t c = 0; c < d_e; ++c) m.proj.W(r, static_cast<Eigen::Index>(c)) = row[c].get<double>();
  }
  m.proj.bias = vector_from_json(j.at("bias"), "bias");
  if (m.proj.bias.size() != m.proj.d_m) throw Error("model artifact bias has wrong length");

  m.emb.d_m = m.proj.d_m;
  for (const json& t : j.at("theta_pref")) {
    Eigen::VectorXd v = vector_from_json(t, "theta_pref");
    if (v.size() != m.proj.d_m) throw Error("model artifact theta_pref has wrong length");
    m.emb.theta_pref.push_back(std::move(v));
  }
  m.emb.accuracy = j.at("accuracy").get<std::vector<double>>();
  if (m.emb.accuracy.size() != m.emb.theta_pref.size())
    throw Error("model artifact accuracy/theta_pref size mismatch");
  for (double a : m.emb.accuracy)
    if (!(a >= 0.0 && a <= 1.0)) throw Error("model artifact accuracy out of [0,1]");

  int index = 0;
  for (const json& aj : j.at("arms")) {
    ArmId a;
    a.index = index++;
    a.name = aj.at("name").get<std::string>();
    a.size_rank = aj.at("size_rank").get<int>();
    m.arms.push_back(std::move(a));
  }
  if (m.arms.size() != m.emb.theta_pref.size())
    throw Error("model artifact arms/theta_pref size mismatch");
  return m;
}

}  // namespace pilot
