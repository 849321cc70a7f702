#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "pilot/dataset.hpp"

namespace pilot {

struct PretrainHyperparams {
  double learning_rate = 0.05;
  int epochs = 30;
  double margin = 0.2;
  std::uint64_t seed = 0;
};

// Linear query projection psi(q) = W * phi(q) + bias, learned in Phase 1 and
// frozen afterwards.
struct Projection {
  Eigen::MatrixXd W;     // d_m x d_e
  Eigen::VectorXd bias;  // d_m
  int d_m = 0;

  int d_e() const { return static_cast<int>(W.cols()); }
};

// Per-arm preference embeddings theta_a^pref plus the pretraining-phase
// preference-prediction accuracy used to set the prior strength lambda_a.
struct ArmEmbeddings {
  std::vector<Eigen::VectorXd> theta_pref;
  std::vector<double> accuracy;
  int d_m = 0;

  int num_arms() const { return static_cast<int>(theta_pref.size()); }
};

// Index pools for one anchor. positives share the anchor's winner; negatives
// are records where the anchor's winner participated and lost to a strictly
// smaller model (hard negatives by size_rank).
struct Pools {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

Pools build_pools(std::size_t anchor, const std::vector<PreferenceRecord>& all);

// Materialized triplet pools for one anchor.
struct TripletBatch {
  Eigen::VectorXd anchor;
  std::vector<Eigen::VectorXd> positives;
  std::vector<Eigen::VectorXd> negatives;
  double margin = 0.2;
};

TripletBatch make_triplet_batch(std::size_t anchor,
                                const std::vector<PreferenceRecord>& all,
                                double margin);

// Value and analytic gradients of the single-triplet loss
//   max(0, cosdist(psi(xa), psi(xp)) - cosdist(psi(xa), psi(xn)) + margin)
// with cosdist(u, v) = 1 - cos(u, v) and psi(x) = W x + bias (unnormalized;
// the cosine is scale-invariant). Gradients are zero on the flat branch.
struct TripletGradients {
  double loss = 0.0;
  Eigen::MatrixXd grad_W;
  Eigen::VectorXd grad_bias;
};

TripletGradients triplet_loss_gradients(const Eigen::MatrixXd& W,
                                        const Eigen::VectorXd& bias,
                                        const Eigen::VectorXd& xa,
                                        const Eigen::VectorXd& xp,
                                        const Eigen::VectorXd& xn, double margin);

// Value and analytic gradients of the pairwise BCE loss with
//   p_i = sigmoid(cos(theta_i, psi) - cos(theta_j, psi)),
// the two-way softmax over exp(cos(theta, psi)).
struct BcePairGradients {
  double loss = 0.0;
  double p_i = 0.0;
  Eigen::VectorXd grad_theta_i;
  Eigen::VectorXd grad_theta_j;
};

BcePairGradients bce_pair_gradients(const Eigen::VectorXd& theta_i,
                                    const Eigen::VectorXd& theta_j,
                                    const Eigen::VectorXd& psi, bool winner_is_i);

// Seeded initialization used by train_projection: W entries uniform in
// [-1/sqrt(d_e), 1/sqrt(d_e)], bias zero.
Projection init_projection(int d_m, int d_e, std::uint64_t seed);

// Phase 1: SGD on the triplet loss, one sampled (positive, negative) pair per
// usable anchor per epoch. Throws "no usable triplets" when no anchor has both
// pools non-empty.
Projection train_projection(const std::vector<PreferenceRecord>& prefs, int d_m,
                            const PretrainHyperparams& hp);

// Phase 2: SGD on the pairwise BCE with the projection frozen. Arms never seen
// in prefs get the fallback embedding (normalized mean of projected queries)
// and accuracy pinned to the 0.05 clamp floor.
ArmEmbeddings train_arm_embeddings(const std::vector<PreferenceRecord>& prefs,
                                   const std::vector<ArmId>& arms,
                                   const Projection& proj,
                                   const PretrainHyperparams& hp);

// psi_hat(q): unit-normalized projection. Throws "degenerate projection" when
// the projected norm falls below 1e-9.
Eigen::VectorXd project(const Projection& proj, const Eigen::VectorXd& x);

// Sampled mean triplet loss over usable anchors; monitoring / test aid.
double mean_triplet_loss(const Projection& proj,
                         const std::vector<PreferenceRecord>& prefs,
                         double margin, std::uint64_t seed,
                         int samples_per_anchor = 4);

// Trained-model artifact: projection + arm embeddings + the arm pool they
// index, round-tripped through a single JSON file.
struct ModelArtifact {
  Projection proj;
  ArmEmbeddings emb;
  std::vector<ArmId> arms;
};

void save_model_artifact(const ModelArtifact& m, const std::string& path);
ModelArtifact load_model_artifact(const std::string& path);

}  // namespace pilot
