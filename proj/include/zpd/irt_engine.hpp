#pragma once
// Logistic latent-trait models over (model, query, setting) correctness rows:
//
//   1PL       p = sigmoid(theta - d)
//   2PL       p = sigmoid(theta * alpha - d)            (scalars)
//   MIRT      p = sigmoid(theta . alpha - d)            (H-dim)
//   MIRT_ICL  p = sigmoid(theta . alpha - d + g * theta_icl . alpha_icl)
//
// with g = 1 exactly on ICL rows. Item traits are either free per-item
// parameters (classic 1PL/2PL, optional for MIRT) or rectified affine maps of
// a precomputed query embedding, which is what lets the fitted model score
// unseen queries. Training is mini-batch Adam on mean cross-entropy with
// analytic gradients; the best epoch is picked by validation overall AUC.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zpd/core_data.hpp"
#include "zpd/embeddings.hpp"

namespace zpd {

enum class IrtVariant { OnePL, TwoPL, Mirt, MirtIcl };

std::string irt_variant_name(IrtVariant v);
IrtVariant irt_variant_from_name(const std::string& s);

struct IrtConfig {
  IrtVariant variant = IrtVariant::MirtIcl;
  int latent_dim = 32;  // H
  int embedding_dim = 768;
  double lr = 2e-4;
  int batch_size = 16;
  int epochs = 10;
  uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // MIRT only: free per-item traits instead of the embedding networks.
  // MIRT_ICL always uses the networks.
  bool content_aware = true;
};

// All parameters live in one flat vector so the optimizer and the
// finite-difference checks can treat them uniformly.
struct IrtParams {
  IrtConfig cfg;
  int n_models = 0;
  int n_items = 0;  // classic per-item slots; 0 under content-aware traits
  std::vector<double> flat;

  int ability_dim() const;
  bool has_alpha() const { return cfg.variant != IrtVariant::OnePL; }
  bool has_icl() const { return cfg.variant == IrtVariant::MirtIcl; }
  bool content_aware() const {
    return cfg.variant == IrtVariant::MirtIcl ||
           (cfg.variant == IrtVariant::Mirt && cfg.content_aware);
  }

  // Flat-vector offsets (valid per variant; see layout() in the source).
  size_t off_theta = 0, off_theta_icl = 0;
  size_t off_d = 0, off_alpha = 0;                      // classic
  size_t off_wd = 0, off_bd = 0, off_walpha = 0, off_balpha = 0;  // content-aware
  size_t off_walpha_icl = 0, off_balpha_icl = 0;

  std::span<const double> theta(int model_idx) const;
  std::span<const double> theta_icl(int model_idx) const;
};

// Abilities ~ N(0, 0.01) and classic item traits likewise; network weights
// ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)) with zero biases. Deterministic in
// cfg.seed.
IrtParams init_params(const IrtConfig& cfg, int n_models, int n_items);

// Item traits under the current parameters; embedding is required exactly
// when the params are content-aware, item_idx otherwise.
struct ItemTraits {
  double d = 0.0;
  std::vector<double> alpha;      // empty for 1PL
  std::vector<double> alpha_icl;  // MIRT_ICL only
};
ItemTraits item_traits(const IrtParams& params, int item_idx, std::span<const double> embedding);

double sigmoid(double z);

// Correct-response probability. gate is forced to 0 for variants without the
// ICL term and must be 0 on non-ICL rows.
double forward(const IrtParams& params, int model_idx, int item_idx,
               std::span<const double> embedding, int gate);

struct IrtRow {
  int model_idx = 0;
  int item_idx = 0;
  int gate = 0;
  int label = 0;
  Setting setting = Setting::DP;
  SplitPart split = SplitPart::Train;
};

struct IrtDataset {
  std::vector<std::string> model_ids;  // sorted
  std::vector<std::string> item_ids;   // sorted
  std::vector<std::vector<double>> item_embeddings;  // [item][emb]; may be empty for classic
  std::vector<IrtRow> rows;

  std::span<const double> embedding(int item_idx) const;
  std::vector<size_t> row_indices(SplitPart split) const;
};

// One row per ResponseRecord; gate = 1 iff setting = ICL. Embeddings come
// from the store when given (required for content-aware configs).
IrtDataset build_irt_dataset(const ResponseSet& rs, const SplitAssignment& split,
                             const EmbeddingStore* embeddings);

// Mean cross-entropy over the batch with probabilities clipped to
// [1e-7, 1 - 1e-7] inside the log; gradients flow through sigmoid, the
// bilinear terms, the affine maps, and the rectifier (subgradient 0 at 0).
std::pair<double, std::vector<double>> loss_and_grads(const IrtParams& params,
                                                      const IrtDataset& data,
                                                      std::span<const size_t> batch);

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
};

// Bias-corrected Adam: params -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(IrtParams& params, AdamState& state, const std::vector<double>& grads,
               double lr, double beta1, double beta2, double eps);

struct EvalMetrics {
  std::optional<double> auc_dp, auc_icl, auc_overall;  // empty when degenerate
  std::optional<double> acc_dp, acc_icl, acc_overall;
  long n_dp = 0, n_icl = 0;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_auc_dp, val_auc_icl, val_auc_overall;
};

struct TrainingHistory {
  std::vector<EpochStats> epochs;
  int selected_epoch = 0;  // argmax val overall AUC, 1-based
};

// MIRT_ICL trains on both settings jointly; the baselines train on DP rows
// only and are merely evaluated on ICL rows. Returns the best-epoch params.
std::pair<IrtParams, TrainingHistory> train(const IrtDataset& data, const IrtConfig& cfg);

// AUC per setting and pooled, plus accuracy at threshold 0.5, over the rows
// of one split. Single-class AUC is reported as undefined, never 0.5.
EvalMetrics evaluate(const IrtParams& params, const IrtDataset& data, SplitPart split);

// Mann-Whitney AUC via rank sums with average ranks for ties. Throws when
// either class is absent.
double auc(const std::vector<int>& labels, const std::vector<double>& scores);
std::optional<double> auc_or_undefined(const std::vector<int>& labels,
                                       const std::vector<double>& scores);

double mean_loss(const IrtParams& params, const IrtDataset& data,
                 std::span<const size_t> rows);

// Pearson r between u_j = theta . alpha_j - d_j and v_j = theta_icl .
// alpha_icl_j over the given items (MIRT_ICL only; needs >= 3 items).
struct CorrelationResult {
  double r = 0.0;
  long n = 0;
};
CorrelationResult difficulty_learnability_correlation(
    const IrtParams& params, const std::vector<std::vector<double>>& item_embeddings,
    int model_idx);

double pearson(const std::vector<double>& u, const std::vector<double>& v);

void save_irt_params(const std::string& path, const IrtParams& params,
                     const std::vector<std::string>& model_ids,
                     const std::vector<std::string>& item_ids);
struct LoadedIrtParams {
  IrtParams params;
  std::vector<std::string> model_ids;
  std::vector<std::string> item_ids;
};
LoadedIrtParams load_irt_params(const std::string& path);

}  // namespace zpd
