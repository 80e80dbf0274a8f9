#include "zpd/irt_engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "zpd/error.hpp"
#include "zpd/rng.hpp"

namespace zpd {

using nlohmann::json;

namespace {
constexpr double kProbClip = 1e-7;
}

std::string irt_variant_name(IrtVariant v) {
  switch (v) {
    case IrtVariant::OnePL: return "1pl";
    case IrtVariant::TwoPL: return "2pl";
    case IrtVariant::Mirt: return "mirt";
    default: return "mirt_icl";
  }
}

IrtVariant irt_variant_from_name(const std::string& s) {
  if (s == "1pl") return IrtVariant::OnePL;
  if (s == "2pl") return IrtVariant::TwoPL;
  if (s == "mirt") return IrtVariant::Mirt;
  if (s == "mirt_icl") return IrtVariant::MirtIcl;
  throw Error("unknown IRT variant: " + s);
}

int IrtParams::ability_dim() const {
  return (cfg.variant == IrtVariant::OnePL || cfg.variant == IrtVariant::TwoPL)
             ? 1
             : cfg.latent_dim;
}

std::span<const double> IrtParams::theta(int model_idx) const {
  const int a = ability_dim();
  return std::span<const double>(flat.data() + off_theta + static_cast<size_t>(model_idx) * a, a);
}

std::span<const double> IrtParams::theta_icl(int model_idx) const {
  const int h = cfg.latent_dim;
  return std::span<const double>(
      flat.data() + off_theta_icl + static_cast<size_t>(model_idx) * h, h);
}

namespace {

// Computes offsets and total size for a params object whose cfg / dims are set.
size_t layout(IrtParams& p) {
  const size_t m = static_cast<size_t>(p.n_models);
  const size_t j = static_cast<size_t>(p.n_items);
  const size_t a = static_cast<size_t>(p.ability_dim());
  const size_t h = static_cast<size_t>(p.cfg.latent_dim);
  const size_t e = static_cast<size_t>(p.cfg.embedding_dim);
  size_t off = 0;
  p.off_theta = off;
  off += m * a;
  if (p.has_icl()) {
    p.off_theta_icl = off;
    off += m * h;
  }
  if (p.content_aware()) {
    p.off_wd = off;
    off += e;
    p.off_bd = off;
    off += 1;
    p.off_walpha = off;
    off += h * e;
    p.off_balpha = off;
    off += h;
    if (p.has_icl()) {
      p.off_walpha_icl = off;
      off += h * e;
      p.off_balpha_icl = off;
      off += h;
    }
  } else {
    p.off_d = off;
    off += j;
    if (p.has_alpha()) {
      p.off_alpha = off;
      off += j * a;
    }
  }
  return off;
}

}  // namespace

IrtParams init_params(const IrtConfig& cfg, int n_models, int n_items) {
  if (cfg.latent_dim < 1) throw Error("irt: latent_dim must be >= 1");
  if (cfg.lr <= 0.0) throw Error("irt: lr must be > 0");
  if (cfg.embedding_dim < 1) throw Error("irt: embedding_dim must be >= 1");

  IrtParams p;
  p.cfg = cfg;
  p.n_models = n_models;
  p.n_items = p.content_aware() ? 0 : n_items;
  p.flat.assign(layout(p), 0.0);

  SplitMix64 rng(cfg.seed);
  const double ability_sd = 0.1;  // N(0, 0.01)
  const size_t m = static_cast<size_t>(n_models);
  const size_t a = static_cast<size_t>(p.ability_dim());
  for (size_t i = 0; i < m * a; ++i) p.flat[p.off_theta + i] = ability_sd * rng.next_normal();
  if (p.has_icl()) {
    const size_t h = static_cast<size_t>(cfg.latent_dim);
    for (size_t i = 0; i < m * h; ++i) {
      p.flat[p.off_theta_icl + i] = ability_sd * rng.next_normal();
    }
  }
  if (p.content_aware()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.embedding_dim));
    const size_t e = static_cast<size_t>(cfg.embedding_dim);
    const size_t h = static_cast<size_t>(cfg.latent_dim);
    for (size_t i = 0; i < e; ++i) {
      p.flat[p.off_wd + i] = bound * (2.0 * rng.next_double() - 1.0);
    }
    for (size_t i = 0; i < h * e; ++i) {
      p.flat[p.off_walpha + i] = bound * (2.0 * rng.next_double() - 1.0);
    }
    if (p.has_icl()) {
      for (size_t i = 0; i < h * e; ++i) {
        p.flat[p.off_walpha_icl + i] = bound * (2.0 * rng.next_double() - 1.0);
      }
    }
    // biases stay 0
  } else {
    const size_t j = static_cast<size_t>(p.n_items);
    for (size_t i = 0; i < j; ++i) p.flat[p.off_d + i] = ability_sd * rng.next_normal();
    if (p.has_alpha()) {
      for (size_t i = 0; i < j * a; ++i) {
        p.flat[p.off_alpha + i] = ability_sd * rng.next_normal();
      }
    }
  }
  return p;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

ItemTraits item_traits(const IrtParams& params, int item_idx, std::span<const double> embedding) {
  ItemTraits t;
  const int h = params.cfg.latent_dim;
  if (params.content_aware()) {
    if (embedding.size() != static_cast<size_t>(params.cfg.embedding_dim)) {
      throw Error("irt: embedding of dim " + std::to_string(embedding.size()) +
                  " does not match configured dim " + std::to_string(params.cfg.embedding_dim));
    }
    const double* wd = params.flat.data() + params.off_wd;
    double d_pre = params.flat[params.off_bd];
    for (size_t i = 0; i < embedding.size(); ++i) d_pre += wd[i] * embedding[i];
    t.d = std::max(0.0, d_pre);

    t.alpha.resize(h);
    const double* wa = params.flat.data() + params.off_walpha;
    for (int r = 0; r < h; ++r) {
      double pre = params.flat[params.off_balpha + r];
      const double* row = wa + static_cast<size_t>(r) * embedding.size();
      for (size_t i = 0; i < embedding.size(); ++i) pre += row[i] * embedding[i];
      t.alpha[r] = std::max(0.0, pre);
    }
    if (params.has_icl()) {
      t.alpha_icl.resize(h);
      const double* wc = params.flat.data() + params.off_walpha_icl;
      for (int r = 0; r < h; ++r) {
        double pre = params.flat[params.off_balpha_icl + r];
        const double* row = wc + static_cast<size_t>(r) * embedding.size();
        for (size_t i = 0; i < embedding.size(); ++i) pre += row[i] * embedding[i];
        t.alpha_icl[r] = std::max(0.0, pre);
      }
    }
  } else {
    if (item_idx < 0 || item_idx >= params.n_items) {
      throw Error("irt: item index " + std::to_string(item_idx) + " out of range");
    }
    t.d = params.flat[params.off_d + item_idx];
    if (params.has_alpha()) {
      const int a = params.ability_dim();
      t.alpha.assign(params.flat.begin() + params.off_alpha + static_cast<size_t>(item_idx) * a,
                     params.flat.begin() + params.off_alpha + static_cast<size_t>(item_idx + 1) * a);
    }
  }
  return t;
}

double forward(const IrtParams& params, int model_idx, int item_idx,
               std::span<const double> embedding, int gate) {
  if (model_idx < 0 || model_idx >= params.n_models) {
    throw Error("irt: model index out of range");
  }
  if (params.content_aware() && embedding.empty()) {
    throw Error("irt: content-aware forward needs an item embedding");
  }
  const ItemTraits t = item_traits(params, item_idx, embedding);
  const auto theta = params.theta(model_idx);
  double z;
  switch (params.cfg.variant) {
    case IrtVariant::OnePL:
      z = theta[0] - t.d;
      break;
    case IrtVariant::TwoPL:
      z = theta[0] * t.alpha[0] - t.d;
      break;
    default: {
      z = -t.d;
      for (int h = 0; h < params.cfg.latent_dim; ++h) z += theta[h] * t.alpha[h];
      if (params.has_icl() && gate != 0) {
        const auto theta_icl = params.theta_icl(model_idx);
        for (int h = 0; h < params.cfg.latent_dim; ++h) z += theta_icl[h] * t.alpha_icl[h];
      }
      break;
    }
  }
  return sigmoid(z);
}

std::span<const double> IrtDataset::embedding(int item_idx) const {
  if (item_embeddings.empty()) return {};
  return item_embeddings[static_cast<size_t>(item_idx)];
}

std::vector<size_t> IrtDataset::row_indices(SplitPart split) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].split == split) out.push_back(i);
  }
  return out;
}

IrtDataset build_irt_dataset(const ResponseSet& rs, const SplitAssignment& split,
                             const EmbeddingStore* embeddings) {
  IrtDataset data;
  data.model_ids = rs.models;
  data.item_ids = rs.example_ids();
  std::map<std::string, int> model_idx, item_idx;
  for (size_t i = 0; i < data.model_ids.size(); ++i) model_idx[data.model_ids[i]] = static_cast<int>(i);
  for (size_t i = 0; i < data.item_ids.size(); ++i) item_idx[data.item_ids[i]] = static_cast<int>(i);

  if (embeddings != nullptr) {
    data.item_embeddings.reserve(data.item_ids.size());
    for (const auto& id : data.item_ids) {
      const auto vec = embeddings->get(id);
      data.item_embeddings.emplace_back(vec.begin(), vec.end());
    }
  }

  for (const auto& r : rs.records) {
    IrtRow row;
    row.model_idx = model_idx.at(r.model_id);
    row.item_idx = item_idx.at(r.example_id);
    row.setting = r.setting;
    row.gate = r.setting == Setting::ICL ? 1 : 0;
    row.label = r.label;
    auto it = split.assignment.find(r.example_id);
    if (it == split.assignment.end()) {
      throw Error("irt: example " + r.example_id + " has no split assignment");
    }
    row.split = it->second;
    data.rows.push_back(row);
  }
  return data;
}

std::pair<double, std::vector<double>> loss_and_grads(const IrtParams& params,
                                                      const IrtDataset& data,
                                                      std::span<const size_t> batch) {
  if (batch.empty()) throw Error("irt: empty batch");
  std::vector<double> grads(params.flat.size(), 0.0);
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const int hdim = params.cfg.latent_dim;

  for (size_t idx : batch) {
    const IrtRow& row = data.rows[idx];
    const auto emb = data.embedding(row.item_idx);
    if (params.content_aware() && emb.empty()) {
      throw Error("irt: content-aware training needs item embeddings");
    }
    const int gate = params.has_icl() ? row.gate : 0;
    const ItemTraits t = item_traits(params, row.item_idx, emb);
    const auto theta = params.theta(row.model_idx);

    double z;
    switch (params.cfg.variant) {
      case IrtVariant::OnePL: z = theta[0] - t.d; break;
      case IrtVariant::TwoPL: z = theta[0] * t.alpha[0] - t.d; break;
      default: {
        z = -t.d;
        for (int h = 0; h < hdim; ++h) z += theta[h] * t.alpha[h];
        if (params.has_icl() && gate != 0) {
          const auto theta_icl = params.theta_icl(row.model_idx);
          for (int h = 0; h < hdim; ++h) z += theta_icl[h] * t.alpha_icl[h];
        }
        break;
      }
    }
    const double p = sigmoid(z);
    const double p_clipped = std::min(1.0 - kProbClip, std::max(kProbClip, p));
    const double y = static_cast<double>(row.label);
    loss += -(y * std::log(p_clipped) + (1.0 - y) * std::log(1.0 - p_clipped)) * inv_b;

    const double dz = (p - y) * inv_b;

    // theta
    const size_t theta_base = params.off_theta +
                              static_cast<size_t>(row.model_idx) * params.ability_dim();
    switch (params.cfg.variant) {
      case IrtVariant::OnePL: grads[theta_base] += dz; break;
      case IrtVariant::TwoPL: grads[theta_base] += dz * t.alpha[0]; break;
      default:
        for (int h = 0; h < hdim; ++h) grads[theta_base + h] += dz * t.alpha[h];
        break;
    }
    if (params.has_icl() && gate != 0) {
      const size_t tc_base = params.off_theta_icl + static_cast<size_t>(row.model_idx) * hdim;
      for (int h = 0; h < hdim; ++h) grads[tc_base + h] += dz * t.alpha_icl[h];
    }

    if (params.content_aware()) {
      // d = relu(wd . e + bd): dz/dd = -1
      const double d_pre = t.d;  // relu output; gradient passes iff output > 0
      if (d_pre > 0.0) {
        const double gd = -dz;
        for (size_t i = 0; i < emb.size(); ++i) grads[params.off_wd + i] += gd * emb[i];
        grads[params.off_bd] += gd;
      }
      // alpha rows
      for (int h = 0; h < hdim; ++h) {
        if (t.alpha[h] <= 0.0) continue;  // rectifier closed (subgradient 0 at 0)
        const double ga = dz * theta[h];
        const size_t row_base = params.off_walpha + static_cast<size_t>(h) * emb.size();
        for (size_t i = 0; i < emb.size(); ++i) grads[row_base + i] += ga * emb[i];
        grads[params.off_balpha + h] += ga;
      }
      if (params.has_icl() && gate != 0) {
        const auto theta_icl = params.theta_icl(row.model_idx);
        for (int h = 0; h < hdim; ++h) {
          if (t.alpha_icl[h] <= 0.0) continue;
          const double ga = dz * theta_icl[h];
          const size_t row_base = params.off_walpha_icl + static_cast<size_t>(h) * emb.size();
          for (size_t i = 0; i < emb.size(); ++i) grads[row_base + i] += ga * emb[i];
          grads[params.off_balpha_icl + h] += ga;
        }
      }
    } else {
      grads[params.off_d + row.item_idx] += -dz;
      if (params.has_alpha()) {
        const int a = params.ability_dim();
        const size_t alpha_base = params.off_alpha + static_cast<size_t>(row.item_idx) * a;
        for (int h = 0; h < a; ++h) grads[alpha_base + h] += dz * theta[h];
      }
    }
  }
  return {loss, std::move(grads)};
}

void adam_step(IrtParams& params, AdamState& state, const std::vector<double>& grads,
               double lr, double beta1, double beta2, double eps) {
  if (state.m.empty()) {
    state.m.assign(params.flat.size(), 0.0);
    state.v.assign(params.flat.size(), 0.0);
  }
  if (grads.size() != params.flat.size()) throw Error("adam: gradient size mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < grads.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params.flat[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

double mean_loss(const IrtParams& params, const IrtDataset& data, std::span<const size_t> rows) {
  return loss_and_grads(params, data, rows).first;
}

double auc(const std::vector<int>& labels, const std::vector<double>& scores) {
  if (labels.size() != scores.size()) throw Error("auc: size mismatch");
  long positives = 0;
  for (int y : labels) positives += y;
  const long negatives = static_cast<long>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) throw Error("auc: needs both classes");

  std::vector<size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // average ranks over tied runs, 1-based
  std::vector<double> rank(labels.size(), 0.0);
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg_rank;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  for (size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == 1) rank_sum_pos += rank[k];
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

std::optional<double> auc_or_undefined(const std::vector<int>& labels,
                                       const std::vector<double>& scores) {
  long positives = 0;
  for (int y : labels) positives += y;
  if (positives == 0 || positives == static_cast<long>(labels.size()) || labels.empty()) {
    return std::nullopt;
  }
  return auc(labels, scores);
}

EvalMetrics evaluate(const IrtParams& params, const IrtDataset& data, SplitPart split) {
  std::vector<int> labels_dp, labels_icl, labels_all;
  std::vector<double> scores_dp, scores_icl, scores_all;
  for (const auto& row : data.rows) {
    if (row.split != split) continue;
    const int gate = params.has_icl() ? row.gate : 0;
    const double p = forward(params, row.model_idx, row.item_idx, data.embedding(row.item_idx),
                             gate);
    labels_all.push_back(row.label);
    scores_all.push_back(p);
    if (row.setting == Setting::DP) {
      labels_dp.push_back(row.label);
      scores_dp.push_back(p);
    } else {
      labels_icl.push_back(row.label);
      scores_icl.push_back(p);
    }
  }
  const auto accuracy = [](const std::vector<int>& labels,
                           const std::vector<double>& scores) -> std::optional<double> {
    if (labels.empty()) return std::nullopt;
    long correct = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
      const int pred = scores[i] > 0.5 ? 1 : 0;
      correct += pred == labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
  };
  EvalMetrics m;
  m.n_dp = static_cast<long>(labels_dp.size());
  m.n_icl = static_cast<long>(labels_icl.size());
  m.auc_dp = auc_or_undefined(labels_dp, scores_dp);
  m.auc_icl = auc_or_undefined(labels_icl, scores_icl);
  m.auc_overall = auc_or_undefined(labels_all, scores_all);
  m.acc_dp = accuracy(labels_dp, scores_dp);
  m.acc_icl = accuracy(labels_icl, scores_icl);
  m.acc_overall = accuracy(labels_all, scores_all);
  return m;
}

std::pair<IrtParams, TrainingHistory> train(const IrtDataset& data, const IrtConfig& cfg) {
  IrtParams params = init_params(cfg, static_cast<int>(data.model_ids.size()),
                                 static_cast<int>(data.item_ids.size()));
  if (params.content_aware() && data.item_embeddings.empty()) {
    throw Error("irt: content-aware training needs item embeddings");
  }

  std::vector<size_t> train_rows;
  for (size_t i = 0; i < data.rows.size(); ++i) {
    const auto& row = data.rows[i];
    if (row.split != SplitPart::Train) continue;
    if (cfg.variant != IrtVariant::MirtIcl && row.setting != Setting::DP) continue;
    train_rows.push_back(i);
  }
  if (train_rows.empty()) throw Error("irt: empty training split");

  AdamState adam;
  TrainingHistory history;
  IrtParams best = params;
  double best_auc = -std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<size_t> order = train_rows;
    SplitMix64 shuffle_rng(derive_seed(cfg.seed, 1000 + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    long row_count = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::span<const size_t> batch(order.data() + start, end - start);
      auto [loss, grads] = loss_and_grads(params, data, batch);
      adam_step(params, adam, grads, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      loss_sum += loss * static_cast<double>(batch.size());
      row_count += static_cast<long>(batch.size());
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(row_count);
    const EvalMetrics val = evaluate(params, data, SplitPart::Val);
    stats.val_auc_dp = val.auc_dp;
    stats.val_auc_icl = val.auc_icl;
    stats.val_auc_overall = val.auc_overall;
    history.epochs.push_back(stats);

    const double overall = val.auc_overall.value_or(-std::numeric_limits<double>::infinity());
    if (overall > best_auc) {
      best_auc = overall;
      best = params;
      history.selected_epoch = epoch;
    }
  }
  if (history.selected_epoch == 0) {
    // no epoch had a defined validation AUC; keep the final parameters
    best = params;
    history.selected_epoch = cfg.epochs;
  }
  return {std::move(best), std::move(history)};
}

CorrelationResult difficulty_learnability_correlation(
    const IrtParams& params, const std::vector<std::vector<double>>& item_embeddings,
    int model_idx) {
  if (!params.has_icl()) throw Error("correlation analysis needs mirt_icl parameters");
  if (item_embeddings.size() < 3) throw Error("correlation analysis needs >= 3 items");
  const auto theta = params.theta(model_idx);
  const auto theta_icl = params.theta_icl(model_idx);
  std::vector<double> u, v;
  u.reserve(item_embeddings.size());
  v.reserve(item_embeddings.size());
  for (const auto& emb : item_embeddings) {
    const ItemTraits t = item_traits(params, -1, emb);
    double du = -t.d, dv = 0.0;
    for (int h = 0; h < params.cfg.latent_dim; ++h) {
      du += theta[h] * t.alpha[h];
      dv += theta_icl[h] * t.alpha_icl[h];
    }
    u.push_back(du);
    v.push_back(dv);
  }
  return {pearson(u, v), static_cast<long>(u.size())};
}

double pearson(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size() || u.empty()) throw Error("pearson: size mismatch");
  const double n = static_cast<double>(u.size());
  double mu = 0.0, mv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= n;
  mv /= n;
  double cov = 0.0, var_u = 0.0, var_v = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    cov += (u[i] - mu) * (v[i] - mv);
    var_u += (u[i] - mu) * (u[i] - mu);
    var_v += (v[i] - mv) * (v[i] - mv);
  }
  if (var_u == 0.0 || var_v == 0.0) throw Error("pearson: zero-variance input");
  return cov / std::sqrt(var_u * var_v);
}

namespace {
constexpr char kIrtMagic[8] = {'Z', 'P', 'D', 'I', 'R', 'T', '1', '\n'};
}

void save_irt_params(const std::string& path, const IrtParams& params,
                     const std::vector<std::string>& model_ids,
                     const std::vector<std::string>& item_ids) {
  json header{{"variant", irt_variant_name(params.cfg.variant)},
              {"latent_dim", params.cfg.latent_dim},
              {"embedding_dim", params.cfg.embedding_dim},
              {"lr", params.cfg.lr},
              {"batch_size", params.cfg.batch_size},
              {"epochs", params.cfg.epochs},
              {"seed", params.cfg.seed},
              {"content_aware", params.cfg.content_aware},
              {"n_models", params.n_models},
              {"n_items", params.n_items},
              {"model_ids", model_ids},
              {"item_ids", item_ids}};
  const std::string header_text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  out.write(kIrtMagic, sizeof(kIrtMagic));
  const uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  const uint64_t n = params.flat.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(params.flat.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  if (!out) throw Error("write failed: " + path);
}

LoadedIrtParams load_irt_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kIrtMagic, sizeof(magic)) != 0) {
    throw Error(path + ": not an IRT parameter dump (bad magic)");
  }
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw Error(path + ": truncated header");
  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw Error(path + ": bad header: " + std::string(e.what()));
  }

  LoadedIrtParams loaded;
  IrtConfig cfg;
  cfg.variant = irt_variant_from_name(header.at("variant").get<std::string>());
  cfg.latent_dim = header.at("latent_dim").get<int>();
  cfg.embedding_dim = header.at("embedding_dim").get<int>();
  cfg.lr = header.at("lr").get<double>();
  cfg.batch_size = header.at("batch_size").get<int>();
  cfg.epochs = header.at("epochs").get<int>();
  cfg.seed = header.at("seed").get<uint64_t>();
  cfg.content_aware = header.at("content_aware").get<bool>();
  loaded.params.cfg = cfg;
  loaded.params.n_models = header.at("n_models").get<int>();
  loaded.params.n_items = header.at("n_items").get<int>();
  loaded.model_ids = header.at("model_ids").get<std::vector<std::string>>();
  loaded.item_ids = header.at("item_ids").get<std::vector<std::string>>();

  const size_t expected = layout(loaded.params);
  uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || n != expected) {
    throw Error(path + ": parameter count mismatch (file " + std::to_string(n) + ", layout " +
                std::to_string(expected) + ")");
  }
  loaded.params.flat.resize(n);
  in.read(reinterpret_cast<char*>(loaded.params.flat.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw Error(path + ": truncated parameter data");
  return loaded;
}

}  // namespace zpd
