#include "zpd/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "zpd/core_data.hpp"
#include "zpd/curriculum.hpp"
#include "zpd/demo_retrieval.hpp"
#include "zpd/embeddings.hpp"
#include "zpd/error.hpp"
#include "zpd/irt_engine.hpp"
#include "zpd/jsonl.hpp"
#include "zpd/oracle_selection.hpp"
#include "zpd/prompt_gateway.hpp"
#include "zpd/rng.hpp"
#include "zpd/selective_icl.hpp"
#include "zpd/util.hpp"
#include "zpd/zone_measurement.hpp"

namespace zpd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PipelineConfig {
  Task task = Task::Mathqa;

  // paths (resolved against the config file's directory)
  std::string queries_path;
  std::string responses_path;
  std::string strategy_responses_path;  // ICL-strategy outcomes for select-icl
  std::string embeddings_path, embeddings_index_path;
  std::string answer_embeddings_path, answer_embeddings_index_path;
  std::string loss_log_path;
  std::string out_dir = "out";

  GatewayConfig gateway;
  DecodeConfig decode;

  int retrieval_k = 16;  // candidates per retriever config
  int oracle_k = 8;      // demonstrations to select

  IrtConfig irt;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};

  double grid_step = 0.01;
  long token_budget = -1;
  std::string selicl_model_id;
  std::string selicl_eval_split = "val";

  int curriculum_buckets = 3;
  int curriculum_epochs = 2;
  std::string curriculum_mode = "zpd";
  double finetune_lr = 1e-5;
  int finetune_batch_size = 4;
  std::string dynamics_model_id;

  uint64_t seed_split = 17, seed_pool = 23, seed_train = 31, seed_curriculum = 41;
};

std::string resolve_path(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute()) return path.string();
  return (base / path).lexically_normal().string();
}

PipelineConfig load_config(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw Error("config", "cannot open config file: " + config_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config", config_path + ": parse error: " + std::string(e.what()));
  }
  const fs::path base = fs::path(config_path).parent_path();

  PipelineConfig cfg;
  if (j.contains("task")) cfg.task = task_from_name(j["task"].get<std::string>());

  const json paths = j.value("paths", json::object());
  cfg.queries_path = resolve_path(base, paths.value("queries", "queries.jsonl"));
  cfg.responses_path = resolve_path(base, paths.value("responses", "responses.jsonl"));
  cfg.strategy_responses_path = resolve_path(base, paths.value("strategy_responses", ""));
  cfg.embeddings_path = resolve_path(base, paths.value("embeddings", ""));
  cfg.embeddings_index_path = resolve_path(base, paths.value("embeddings_index", ""));
  cfg.answer_embeddings_path = resolve_path(base, paths.value("answer_embeddings", ""));
  cfg.answer_embeddings_index_path =
      resolve_path(base, paths.value("answer_embeddings_index", ""));
  cfg.loss_log_path = resolve_path(base, paths.value("loss_log", ""));
  cfg.out_dir = resolve_path(base, paths.value("out_dir", "out"));

  // index sidecars default to <embeddings>.idx.json next to the data file
  const auto default_index = [](const std::string& f32_path) {
    return fs::path(f32_path).replace_extension(".idx.json").string();
  };
  if (!cfg.embeddings_path.empty() && cfg.embeddings_index_path.empty()) {
    cfg.embeddings_index_path = default_index(cfg.embeddings_path);
  }
  if (!cfg.answer_embeddings_path.empty() && cfg.answer_embeddings_index_path.empty()) {
    cfg.answer_embeddings_index_path = default_index(cfg.answer_embeddings_path);
  }

  const json gw = j.value("gateway", json::object());
  cfg.gateway.mode = gw.value("mode", std::string("replay")) == "live" ? GatewayMode::Live
                                                                       : GatewayMode::Replay;
  cfg.gateway.base_url = gw.value("base_url", std::string());
  cfg.gateway.model = gw.value("model", std::string("model"));
  cfg.gateway.api_key_env = gw.value("api_key_env", std::string("ZPD_API_KEY"));
  cfg.gateway.timeout_s = gw.value("timeout_s", 30);
  cfg.gateway.retries = gw.value("retries", 2);
  cfg.gateway.max_in_flight = gw.value("max_in_flight", 4);
  cfg.gateway.loglik_mean = gw.value("loglik_mean", false);
  cfg.gateway.cache_path = resolve_path(base, gw.value("cache", std::string("gateway_cache.jsonl")));
  cfg.decode.max_new_tokens = gw.value("max_new_tokens", 256);
  cfg.decode.temperature = gw.value("temperature", 0.0);
  cfg.decode.stop_sequences = gw.value("stop_sequences", std::vector<std::string>{});

  const json retrieval = j.value("retrieval", json::object());
  cfg.retrieval_k = retrieval.value("k_candidates", 16);
  const json oracle = j.value("oracle", json::object());
  cfg.oracle_k = oracle.value("k_demos", 8);

  const json irt = j.value("irt", json::object());
  cfg.irt.variant = irt_variant_from_name(irt.value("variant", std::string("mirt_icl")));
  cfg.irt.latent_dim = irt.value("latent_dim", 32);
  cfg.irt.embedding_dim = irt.value("embedding_dim", 768);
  cfg.irt.lr = irt.value("lr", 2e-4);
  cfg.irt.batch_size = irt.value("batch_size", 16);
  cfg.irt.epochs = irt.value("epochs", 10);
  cfg.irt.content_aware = irt.value("content_aware", true);

  const json split = j.value("split", json::object());
  if (split.contains("ratios")) {
    const auto& r = split["ratios"];
    cfg.split_ratios = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()};
  }

  const json sel = j.value("selective_icl", json::object());
  cfg.grid_step = sel.value("grid_step", 0.01);
  cfg.token_budget = sel.value("token_budget", -1L);
  cfg.selicl_model_id = sel.value("model_id", std::string());
  cfg.selicl_eval_split = sel.value("eval_split", std::string("val"));

  const json cur = j.value("curriculum", json::object());
  cfg.curriculum_buckets = cur.value("n_buckets", 3);
  cfg.curriculum_epochs = cur.value("epochs_per_stage", 2);
  cfg.curriculum_mode = cur.value("mode", std::string("zpd"));
  cfg.finetune_lr = cur.value("lr", 1e-5);
  cfg.finetune_batch_size = cur.value("batch_size", 4);
  cfg.dynamics_model_id = cur.value("model_id", std::string());

  const json seeds = j.value("seeds", json::object());
  cfg.seed_split = seeds.value("split", 17ULL);
  cfg.seed_pool = seeds.value("pool", 23ULL);
  cfg.seed_train = seeds.value("train", 31ULL);
  cfg.seed_curriculum = seeds.value("curriculum", 41ULL);
  cfg.irt.seed = cfg.seed_train;
  return cfg;
}

fs::path out_file(const PipelineConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return fs::path(cfg.out_dir) / name;
}

ResponseSet load_inputs(const PipelineConfig& cfg) {
  return load_response_set(cfg.responses_path, load_queries(cfg.queries_path));
}

std::optional<EmbeddingStore> load_embeddings_if_configured(const PipelineConfig& cfg) {
  if (cfg.embeddings_path.empty()) return std::nullopt;
  return EmbeddingStore::load(cfg.embeddings_path, cfg.embeddings_index_path);
}

json metrics_json(const EvalMetrics& m) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  return json{{"auc_dp", opt(m.auc_dp)},       {"auc_icl", opt(m.auc_icl)},
              {"auc_overall", opt(m.auc_overall)}, {"acc_dp", opt(m.acc_dp)},
              {"acc_icl", opt(m.acc_icl)},     {"acc_overall", opt(m.acc_overall)},
              {"n_dp", m.n_dp},                {"n_icl", m.n_icl}};
}

// ----------------------------------------------------------------------------
// measure-zones
// ----------------------------------------------------------------------------

void cmd_measure_zones(const PipelineConfig& cfg) {
  ResponseSet rs = load_inputs(cfg);
  if (const auto store = load_embeddings_if_configured(cfg)) {
    for (auto& [id, query] : rs.queries) {
      if (auto vec = store->find(id)) query.embedding = std::vector<float>(vec->begin(), vec->end());
    }
  }

  const ValidationReport report = validate_response_set(rs);
  json validation{{"missing", json::array()},
                  {"label_stats", json::array()},
                  {"missing_embeddings", report.missing_embeddings}};
  for (const auto& m : report.missing) {
    validation["missing"].push_back(json{
        {"model_id", m.model_id}, {"example_id", m.example_id}, {"setting", setting_name(m.missing)}});
  }
  for (const auto& [key, stats] : report.label_stats) {
    validation["label_stats"].push_back(json{{"model_id", key.first},
                                             {"setting", setting_name(key.second)},
                                             {"n", stats.n},
                                             {"accuracy", stats.accuracy()}});
  }
  write_file(out_file(cfg, "validation.json"), validation.dump(2) + "\n");

  std::string zones_csv = "model_id,example_id,r_dp,r_icl,zone,merged_zone\n";
  json dist_json{{"models", json::array()}};
  for (const auto& model_id : rs.models) {
    for (const auto& [example_id, labels] : paired_labels(rs, model_id)) {
      const ZoneLabel z = assign_zone(labels.first, labels.second);
      zones_csv += csv_field(model_id) + "," + csv_field(example_id) + "," +
                   std::to_string(labels.first) + "," + std::to_string(labels.second) + "," +
                   zone_name(z) + "," + merged_zone_name(merge_zone(z)) + "\n";
    }
    const ZoneDistribution dist = zone_distribution(rs, model_id);
    json counts = json::object(), merged = json::object();
    for (const auto& [zone, n] : dist.counts) counts[zone_name(zone)] = n;
    for (const auto& [zone, n] : dist.merged_counts) merged[merged_zone_name(zone)] = n;
    dist_json["models"].push_back(json{{"model_id", model_id},
                                       {"counts", counts},
                                       {"merged_counts", merged},
                                       {"total", dist.total}});
  }
  write_file(out_file(cfg, "zones.csv"), zones_csv);
  write_file(out_file(cfg, "zone_dist.json"), dist_json.dump(2) + "\n");

  json overlap{{"zones", json::object()}};
  if (rs.models.size() >= 2) {
    for (MergedZone zone : {MergedZone::Z_OK, MergedZone::Z_ZPD, MergedZone::Z_FAIL}) {
      const OverlapStats stats = pairwise_overlap_stats(rs, zone);
      json pairs = json::array();
      for (const auto& p : stats.matrix) {
        pairs.push_back(json{{"a", p.model_a}, {"b", p.model_b}, {"value", p.value}});
      }
      overlap["zones"][merged_zone_name(zone)] =
          json{{"max", stats.max}, {"min", stats.min}, {"avg", stats.avg}, {"pairs", pairs}};
    }
  } else {
    overlap["note"] = "pairwise overlap needs at least 2 models";
  }
  write_file(out_file(cfg, "overlap.json"), overlap.dump(2) + "\n");

  // gain/harm decomposition of a concrete ICL strategy against DP, when a
  // strategy response file is configured
  if (!cfg.strategy_responses_path.empty()) {
    const ResponseSet strategy =
        load_response_set(cfg.strategy_responses_path, load_queries(cfg.queries_path));
    json effects = json::array();
    for (const auto& model_id : rs.models) {
      std::map<std::string, int> dp_labels, strategy_labels;
      for (const auto& r : rs.records) {
        if (r.model_id == model_id && r.setting == Setting::DP) dp_labels[r.example_id] = r.label;
      }
      for (const auto& r : strategy.records) {
        if (r.model_id == model_id && r.setting == Setting::ICL && dp_labels.count(r.example_id)) {
          strategy_labels[r.example_id] = r.label;
        }
      }
      for (auto it = dp_labels.begin(); it != dp_labels.end();) {
        it = strategy_labels.count(it->first) ? std::next(it) : dp_labels.erase(it);
      }
      if (dp_labels.empty()) continue;
      const IclEffect effect = icl_effect_decomposition(dp_labels, strategy_labels);
      effects.push_back(json{{"model_id", model_id},
                             {"n", dp_labels.size()},
                             {"gain", effect.gain},
                             {"harm", effect.harm},
                             {"net", effect.net}});
    }
    write_file(out_file(cfg, "icl_effect.json"), json{{"per_model", effects}}.dump(2) + "\n");
  }
}

// ----------------------------------------------------------------------------
// build-oracle
// ----------------------------------------------------------------------------

std::set<std::string> jsonl_id_set(const fs::path& path, const std::string& field) {
  std::set<std::string> ids;
  std::ifstream probe(path);
  if (!probe.good()) return ids;
  for_each_jsonl(path.string(), [&](const json& j, size_t) {
    if (j.contains(field)) ids.insert(j[field].get<std::string>());
  });
  return ids;
}

void cmd_build_oracle(const PipelineConfig& cfg) {
  const auto queries = load_queries(cfg.queries_path);
  const PromptTemplate tmpl = default_template(cfg.task);

  if (cfg.embeddings_path.empty()) {
    throw Error("build-oracle", "dense retrieval configs need paths.embeddings");
  }
  const EmbeddingStore pair_store =
      EmbeddingStore::load(cfg.embeddings_path, cfg.embeddings_index_path);
  // Answer-view vectors fall back to the pair-view store when no separate
  // sidecar is configured.
  std::optional<EmbeddingStore> answer_store;
  if (!cfg.answer_embeddings_path.empty()) {
    answer_store =
        EmbeddingStore::load(cfg.answer_embeddings_path, cfg.answer_embeddings_index_path);
  }

  DemoBank bank;
  for (const auto& [id, q] : queries) {
    bank.ids.push_back(id);
    bank.pair_texts.push_back(render_demo(q, q.gold_answer, tmpl));
    bank.answer_texts.push_back(q.gold_answer);
  }
  bank.pair_embeddings = &pair_store;
  bank.answer_embeddings = answer_store ? &*answer_store : &pair_store;

  Gateway gateway(cfg.gateway);

  const fs::path pool_path = out_file(cfg, "pool.jsonl");
  const fs::path oracle_path = out_file(cfg, "oracle.jsonl");
  const fs::path icl_path = out_file(cfg, "oracle_icl_responses.jsonl");
  const std::set<std::string> done_pool = jsonl_id_set(pool_path, "query_id");
  const std::set<std::string> done_oracle = jsonl_id_set(oracle_path, "query_id");
  const std::set<std::string> done_icl = jsonl_id_set(icl_path, "example_id");

  size_t query_index = 0;
  for (const auto& [id, q] : queries) {
    const uint64_t pool_seed = derive_seed(cfg.seed_pool, query_index++);
    if (done_oracle.count(id) && done_icl.count(id) && done_pool.count(id)) continue;

    CandidatePool pool;
    OracleSelection selection;
    ResponseRecord icl_record;
    try {
      pool = build_candidate_pool(q, render_demo(q, q.gold_answer, tmpl), bank, cfg.retrieval_k,
                                  pool_seed);
      selection = select_oracle_demos(q, pool.deduplicated(), cfg.oracle_k, gateway, tmpl, queries);
      icl_record = materialize_icl_record(selection, gateway, cfg.decode, tmpl, queries);
    } catch (const Error& e) {
      throw Error("build-oracle", std::string("query ") + id + ": " + e.what());
    }

    if (!done_pool.count(id)) {
      json entries = json::array();
      for (const auto& e : pool.entries) {
        entries.push_back(json{{"example_id", e.example_id},
                               {"config", retrieval_config_name(e.config)},
                               {"rank", e.rank},
                               {"score", e.score},
                               {"provenance", e.random ? "random" : "retrieved"}});
      }
      json line{{"query_id", pool.query_id}, {"k", pool.k}, {"entries", entries}};
      if (!pool.warnings.empty()) line["warnings"] = pool.warnings;
      std::ofstream out(pool_path, std::ios::app);
      out << line.dump() << "\n";
    }
    if (!done_icl.count(id)) append_response_record(icl_path.string(), icl_record);
    if (!done_oracle.count(id)) {
      json steps = json::array();
      for (const auto& s : selection.step_scores) {
        json scores = json::array();
        for (const auto& [cand, ll] : s.scores) {
          scores.push_back(json{{"example_id", cand}, {"loglik", ll}});
        }
        steps.push_back(json{{"step", s.step},
                             {"scores", scores},
                             {"chosen", s.chosen},
                             {"chosen_loglik", s.chosen_loglik}});
      }
      json line{{"query_id", selection.query_id},
                {"demos", selection.demos},
                {"final_loglik", selection.final_loglik},
                {"step_scores", steps}};
      std::ofstream out(oracle_path, std::ios::app);
      out << line.dump() << "\n";
    }
  }
}

// ----------------------------------------------------------------------------
// fit-irt
// ----------------------------------------------------------------------------

SplitAssignment load_or_make_split(const PipelineConfig& cfg, const ResponseSet& rs) {
  const fs::path split_path = out_file(cfg, "split.json");
  if (fs::exists(split_path)) return load_split(split_path.string());
  const SplitAssignment split = split_dataset(rs, cfg.split_ratios, cfg.seed_split);
  save_split(split_path.string(), split);
  return split;
}

void cmd_fit_irt(const PipelineConfig& cfg) {
  ResponseSet rs = load_inputs(cfg);
  const SplitAssignment split = load_or_make_split(cfg, rs);

  std::optional<EmbeddingStore> store = load_embeddings_if_configured(cfg);
  IrtConfig irt_cfg = cfg.irt;
  if (store && static_cast<int>(store->dim()) != irt_cfg.embedding_dim) {
    throw Error("fit-irt", "embedding sidecar dim " + std::to_string(store->dim()) +
                               " does not match irt.embedding_dim " +
                               std::to_string(irt_cfg.embedding_dim));
  }
  const IrtDataset data = build_irt_dataset(rs, split, store ? &*store : nullptr);

  auto [params, history] = train(data, irt_cfg);
  save_irt_params(out_file(cfg, "irt_model.bin").string(), params, data.model_ids, data.item_ids);

  json epochs = json::array();
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const auto& e : history.epochs) {
    epochs.push_back(json{{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"val_auc_dp", opt(e.val_auc_dp)},
                          {"val_auc_icl", opt(e.val_auc_icl)},
                          {"val_auc_overall", opt(e.val_auc_overall)}});
  }
  json eval{{"variant", irt_variant_name(irt_cfg.variant)},
            {"selected_epoch", history.selected_epoch},
            {"history", epochs},
            {"val", metrics_json(evaluate(params, data, SplitPart::Val))},
            {"test", metrics_json(evaluate(params, data, SplitPart::Test))}};
  write_file(out_file(cfg, "irt_eval.json"), eval.dump(2) + "\n");

  if (params.has_icl()) {
    json per_model = json::array();
    for (size_t m = 0; m < data.model_ids.size(); ++m) {
      json row{{"model_id", data.model_ids[m]}};
      try {
        const CorrelationResult c = difficulty_learnability_correlation(
            params, data.item_embeddings, static_cast<int>(m));
        row["r"] = c.r;
        row["n"] = c.n;
      } catch (const Error& e) {
        row["r"] = nullptr;
        row["error"] = e.what();
      }
      per_model.push_back(row);
    }
    write_file(out_file(cfg, "irt_pearson.json"),
               json{{"per_model", per_model}}.dump(2) + "\n");
  }
}

// ----------------------------------------------------------------------------
// predict-zones / select-icl / make-curriculum / analyze-dynamics / report
// ----------------------------------------------------------------------------

std::vector<std::pair<std::string, std::vector<double>>> embedded_items(
    const std::map<std::string, Query>& queries, const EmbeddingStore& store) {
  std::vector<std::pair<std::string, std::vector<double>>> items;
  items.reserve(queries.size());
  for (const auto& [id, q] : queries) {
    const auto vec = store.get(id);
    items.emplace_back(id, std::vector<double>(vec.begin(), vec.end()));
  }
  return items;
}

LoadedIrtParams load_fitted_mirt_icl(const PipelineConfig& cfg, const std::string& stage) {
  const fs::path model_path = fs::path(cfg.out_dir) / "irt_model.bin";
  if (!fs::exists(model_path)) {
    throw Error(stage, "no fitted model at " + model_path.string() + "; run fit-irt first");
  }
  LoadedIrtParams loaded = load_irt_params(model_path.string());
  if (!loaded.params.has_icl()) {
    throw Error(stage, "fitted model is " + irt_variant_name(loaded.params.cfg.variant) +
                           "; this command needs mirt_icl");
  }
  return loaded;
}

void cmd_predict_zones(const PipelineConfig& cfg) {
  const LoadedIrtParams loaded = load_fitted_mirt_icl(cfg, "predict-zones");
  const auto queries = load_queries(cfg.queries_path);
  const auto store = load_embeddings_if_configured(cfg);
  if (!store) throw Error("predict-zones", "paths.embeddings is required");
  const auto items = embedded_items(queries, *store);

  std::string csv = "model_id,example_id,p_dp,p_icl,predicted_zone\n";
  for (size_t m = 0; m < loaded.model_ids.size(); ++m) {
    for (const auto& p : predict_probs(loaded.params, static_cast<int>(m), items)) {
      csv += csv_field(loaded.model_ids[m]) + "," + csv_field(p.example_id) + "," +
             format_double(p.p_dp) + "," + format_double(p.p_icl) + "," +
             merged_zone_name(predict_zone(p.p_dp, p.p_icl)) + "\n";
    }
  }
  write_file(out_file(cfg, "predicted_zones.csv"), csv);
}

int model_index_of(const std::vector<std::string>& model_ids, const std::string& model_id,
                   const std::string& stage) {
  auto it = std::find(model_ids.begin(), model_ids.end(), model_id);
  if (it == model_ids.end()) {
    throw Error(stage, "model " + model_id + " was not part of the fitted IRT dataset");
  }
  return static_cast<int>(it - model_ids.begin());
}

std::vector<double> threshold_grid(double step) {
  if (step <= 0.0 || step >= 1.0) throw Error("select-icl", "grid step must lie in (0, 1)");
  // a reciprocal-integer step yields exact decimal thresholds (0.01 -> 0.99)
  const double denom = std::round(1.0 / step);
  const bool exact = std::fabs(1.0 / step - denom) < 1e-9;
  std::vector<double> grid;
  for (int i = 1; static_cast<double>(i) * step < 1.0 - 1e-12; ++i) {
    grid.push_back(exact ? static_cast<double>(i) / denom : static_cast<double>(i) * step);
  }
  return grid;
}

std::string policy_csv(const std::vector<PolicyPoint>& points) {
  std::string csv = "tau1,tau2,accuracy,total_tokens,n_icl_routed\n";
  for (const auto& p : points) {
    csv += format_double(p.tau1) + "," + format_double(p.tau2) + "," +
           format_double(p.accuracy) + "," + std::to_string(p.total_tokens) + "," +
           std::to_string(p.routed_icl.size()) + "\n";
  }
  return csv;
}

void cmd_select_icl(const PipelineConfig& cfg, bool deploy, double tau1, double tau2) {
  const LoadedIrtParams loaded = load_fitted_mirt_icl(cfg, "select-icl");
  ResponseSet rs = load_inputs(cfg);
  const auto store = load_embeddings_if_configured(cfg);
  if (!store) throw Error("select-icl", "paths.embeddings is required");

  const std::string model_id = !cfg.selicl_model_id.empty() ? cfg.selicl_model_id
                               : !cfg.gateway.model.empty() ? cfg.gateway.model
                                                            : rs.models.at(0);
  const int model_idx = model_index_of(loaded.model_ids, model_id, "select-icl");

  // Evaluation queries: the configured split when a split file exists.
  std::set<std::string> keep;
  const fs::path split_path = fs::path(cfg.out_dir) / "split.json";
  if (cfg.selicl_eval_split != "all" && fs::exists(split_path)) {
    const SplitAssignment split = load_split(split_path.string());
    const SplitPart want = split_part_from_name(cfg.selicl_eval_split);
    for (const auto& [id, part] : split.assignment) {
      if (part == want) keep.insert(id);
    }
  } else {
    for (const auto& [id, q] : rs.queries) keep.insert(id);
  }

  // Recorded outcomes: DP from the paired response file, strategy ICL from
  // the configured strategy file (default: the same response file's ICL side).
  PolicyRecords records;
  for (const auto& r : rs.records) {
    if (r.model_id != model_id || r.setting != Setting::DP) continue;
    records.dp[r.example_id] = {r.label, r.prompt_token_count};
  }
  const std::string strategy_path =
      cfg.strategy_responses_path.empty() ? cfg.responses_path : cfg.strategy_responses_path;
  const ResponseSet strategy = load_response_set(strategy_path, load_queries(cfg.queries_path));
  for (const auto& r : strategy.records) {
    if (r.model_id != model_id || r.setting != Setting::ICL) continue;
    records.icl[r.example_id] = {r.label, r.prompt_token_count};
  }

  // Deployment routes every eval query; grid evaluation needs both recorded
  // outcomes per query.
  std::vector<std::pair<std::string, std::vector<double>>> items;
  for (const auto& [id, q] : rs.queries) {
    if (!keep.count(id)) continue;
    if (!deploy && (!records.dp.count(id) || !records.icl.count(id))) continue;
    const auto vec = store->get(id);
    items.emplace_back(id, std::vector<double>(vec.begin(), vec.end()));
  }
  if (items.empty()) {
    throw Error("select-icl", deploy ? "no queries to route"
                                     : "no queries with recorded DP and ICL outcomes");
  }
  const std::vector<QueryProbs> probs = predict_probs(loaded.params, model_idx, items);

  if (deploy) {
    Gateway gateway(cfg.gateway);
    const PromptTemplate tmpl = default_template(cfg.task);
    const int n_demos = cfg.oracle_k;
    const auto queries = rs.queries;
    DemoProvider provider = [&](const Query& q) {
      auto ranking = dense_scores(*store, store->get(q.example_id));
      std::vector<Demo> demos;
      for (const auto& cand : ranking) {
        if (cand.example_id == q.example_id) continue;
        const Query& d = queries.at(cand.example_id);
        demos.emplace_back(d, d.gold_answer);
        if (static_cast<int>(demos.size()) == n_demos) break;
      }
      return demos;
    };
    std::vector<Query> routed_queries;
    for (const auto& [id, emb] : items) routed_queries.push_back(queries.at(id));
    const auto results =
        route_live(routed_queries, probs, tau1, tau2, gateway, cfg.decode, tmpl, provider);
    std::string csv = "example_id,mode,label,prompt_tokens\n";
    long correct = 0, tokens = 0;
    for (const auto& r : results) {
      csv += csv_field(r.example_id) + "," + (r.mode == PromptMode::ICL ? "ICL" : "DP") + "," +
             std::to_string(r.label) + "," + std::to_string(r.prompt_tokens) + "\n";
      correct += r.label;
      tokens += r.prompt_tokens;
    }
    write_file(out_file(cfg, "routed_results.csv"), csv);
    std::cout << "routed " << results.size() << " queries: accuracy "
              << format_double(static_cast<double>(correct) / results.size()) << ", input tokens "
              << tokens << "\n";
    return;
  }

  const std::vector<double> grid = threshold_grid(cfg.grid_step);
  const std::vector<PolicyPoint> points = grid_search(records, probs, grid);
  const std::vector<PolicyPoint> frontier = pareto_frontier(points);
  write_file(out_file(cfg, "policy_points.csv"), policy_csv(points));
  write_file(out_file(cfg, "pareto.csv"), policy_csv(frontier));

  if (cfg.token_budget >= 0) {
    json chosen;
    if (const auto best = pick_policy(frontier, cfg.token_budget)) {
      chosen = json{{"tau1", best->tau1},
                    {"tau2", best->tau2},
                    {"accuracy", best->accuracy},
                    {"total_tokens", best->total_tokens},
                    {"n_icl_routed", best->routed_icl.size()}};
    } else {
      chosen = json{{"error", "no frontier point fits the token budget"},
                    {"token_budget", cfg.token_budget}};
    }
    write_file(out_file(cfg, "chosen_policy.json"), chosen.dump(2) + "\n");
  }
}

void cmd_make_curriculum(const PipelineConfig& cfg, bool random_baseline) {
  const LoadedIrtParams loaded = load_fitted_mirt_icl(cfg, "make-curriculum");
  const auto queries = load_queries(cfg.queries_path);
  const auto store = load_embeddings_if_configured(cfg);
  if (!store) throw Error("make-curriculum", "paths.embeddings is required");

  // Training examples: the train split when available, otherwise everything.
  std::vector<std::string> examples;
  const fs::path split_path = fs::path(cfg.out_dir) / "split.json";
  if (fs::exists(split_path)) {
    const SplitAssignment split = load_split(split_path.string());
    for (const auto& [id, part] : split.assignment) {
      if (part == SplitPart::Train && queries.count(id)) examples.push_back(id);
    }
  } else {
    for (const auto& [id, q] : queries) examples.push_back(id);
  }
  std::sort(examples.begin(), examples.end());

  Schedule schedule;
  const bool random_mode = random_baseline || cfg.curriculum_mode == "random";
  if (random_mode) {
    schedule = random_schedule(examples, cfg.curriculum_buckets, cfg.curriculum_epochs,
                               cfg.seed_curriculum);
  } else {
    const std::string model_id =
        !cfg.dynamics_model_id.empty() ? cfg.dynamics_model_id : cfg.gateway.model;
    const int model_idx = model_index_of(loaded.model_ids, model_id, "make-curriculum");
    std::vector<std::pair<std::string, std::vector<double>>> items;
    for (const auto& id : examples) {
      const auto vec = store->get(id);
      items.emplace_back(id, std::vector<double>(vec.begin(), vec.end()));
    }
    const auto probs = predict_probs(loaded.params, model_idx, items);
    schedule = make_schedule(rank_by_learning_gain(examples, probs), cfg.curriculum_buckets,
                             cfg.curriculum_epochs, cfg.seed_curriculum);
  }

  json stages = json::array();
  for (const auto& s : schedule.stages) {
    stages.push_back(json{{"stage_index", s.stage_index},
                          {"training_pool", s.training_pool},
                          {"epoch_seeds", s.epoch_seeds}});
  }
  json manifest{{"ranking", schedule.ranking},
                {"seed", schedule.seed},
                {"buckets", schedule.buckets},
                {"epochs_per_stage", schedule.epochs_per_stage},
                {"stages", stages},
                {"hyperparameters",
                 json{{"lr", cfg.finetune_lr}, {"batch_size", cfg.finetune_batch_size}}},
                {"optimizer_state", "continuous"}};
  write_file(out_file(cfg, "schedule.json"), manifest.dump(2) + "\n");
}

void cmd_analyze_dynamics(const PipelineConfig& cfg) {
  if (cfg.loss_log_path.empty()) throw Error("analyze-dynamics", "paths.loss_log is required");

  // epoch-ordered losses per example
  std::map<std::string, std::map<long, double>> by_epoch;
  for_each_jsonl(cfg.loss_log_path, [&](const json& j, size_t lineno) {
    try {
      by_epoch[j.at("example_id").get<std::string>()][j.at("epoch").get<long>()] =
          j.at("loss").get<double>();
    } catch (const json::exception& e) {
      throw Error(cfg.loss_log_path + ":" + std::to_string(lineno) + ": bad loss record: " +
                  e.what());
    }
  });
  std::map<std::string, std::vector<double>> losses;
  for (const auto& [id, epochs] : by_epoch) {
    for (const auto& [epoch, loss] : epochs) losses[id].push_back(loss);
  }

  // merged zones from zones.csv for the configured model
  const fs::path zones_path = fs::path(cfg.out_dir) / "zones.csv";
  if (!fs::exists(zones_path)) {
    throw Error("analyze-dynamics", "no zones.csv in out_dir; run measure-zones first");
  }
  const std::string model_id =
      !cfg.dynamics_model_id.empty() ? cfg.dynamics_model_id : cfg.gateway.model;
  std::map<std::string, MergedZone> zones;
  std::ifstream zin(zones_path);
  std::string line;
  std::getline(zin, line);  // header
  while (std::getline(zin, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        cols.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (cols.size() != 6) throw Error("analyze-dynamics", "malformed zones.csv row: " + line);
    if (cols[0] == model_id) zones[cols[1]] = merged_zone_from_name(cols[5]);
  }
  if (zones.empty()) {
    throw Error("analyze-dynamics", "zones.csv has no rows for model " + model_id);
  }

  const auto dynamics = loss_dynamics(losses);
  const auto summary = zone_loss_summary(dynamics, zones);
  std::string csv = "zone,n,mean_loss,mean_variance\n";
  for (const auto& row : summary) {
    csv += merged_zone_name(row.zone) + "," + std::to_string(row.n) + "," +
           format_double(row.mean_of_means) + "," + format_double(row.mean_of_variances) + "\n";
  }
  write_file(out_file(cfg, "zone_loss.csv"), csv);
}

void cmd_report(const PipelineConfig& cfg) {
  json report = json::object();
  const fs::path out(cfg.out_dir);
  const auto add_json = [&](const std::string& name, const std::string& key) {
    const fs::path p = out / name;
    if (!fs::exists(p)) return;
    std::ifstream in(p);
    json j;
    in >> j;
    report[key] = j;
  };
  add_json("zone_dist.json", "zone_distribution");
  add_json("overlap.json", "overlap");
  add_json("irt_eval.json", "irt_eval");
  add_json("irt_pearson.json", "irt_pearson");
  add_json("chosen_policy.json", "chosen_policy");
  for (const std::string name : {"zones.csv", "predicted_zones.csv", "policy_points.csv",
                                 "pareto.csv", "zone_loss.csv", "schedule.json"}) {
    if (fs::exists(out / name)) report["artifacts"].push_back(name);
  }
  write_file(out_file(cfg, "report.json"), report.dump(2) + "\n");
  std::cout << "report written: " << (out / "report.json").string() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"measure, predict, and apply LLM zones of proximal development for ICL"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand name

  std::string config_path;
  std::string out_dir_override;
  bool replay_override = false, live_override = false;
  std::optional<uint64_t> seed_override;
  app.add_option("--config", config_path, "pipeline config file")->required();
  app.add_option("--out-dir", out_dir_override, "override paths.out_dir");
  app.add_flag("--replay", replay_override, "force gateway replay mode");
  app.add_flag("--live", live_override, "force gateway live mode");
  uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "master seed overriding seeds.*");

  auto* measure = app.add_subcommand("measure-zones", "paired DP/ICL zone analytics");
  auto* oracle = app.add_subcommand("build-oracle", "candidate pools + greedy oracle demos");
  auto* fit = app.add_subcommand("fit-irt", "train an IRT variant and evaluate it");
  auto* predict = app.add_subcommand("predict-zones", "predicted zones for every query");
  auto* select = app.add_subcommand("select-icl", "threshold grid, policy points, Pareto frontier");
  bool deploy = false;
  double tau1 = 0.5, tau2 = 0.5;
  double grid_step_flag = 0.0;
  long token_budget_flag = 0;
  std::string strategy_records_flag;
  select->add_flag("--deploy", deploy, "issue only the routed request per query");
  select->add_option("--tau1", tau1, "deploy threshold on p_dp");
  select->add_option("--tau2", tau2, "deploy threshold on p_icl");
  auto* grid_step_opt = select->add_option("--grid-step", grid_step_flag,
                                           "threshold grid step (overrides config)");
  auto* budget_opt = select->add_option("--token-budget", token_budget_flag,
                                        "pick the best frontier point within this budget");
  auto* strategy_opt = select->add_option("--strategy-records", strategy_records_flag,
                                          "response file with the ICL strategy's outcomes");
  auto* curriculum = app.add_subcommand("make-curriculum", "baby-step schedule manifest");
  bool random_baseline = false;
  curriculum->add_flag("--random", random_baseline, "seeded-random ranking baseline");
  auto* dynamics = app.add_subcommand("analyze-dynamics", "per-zone loss dynamics");
  auto* report = app.add_subcommand("report", "aggregate available outputs");

  std::vector<std::string> argv_storage = args;
  std::vector<const char*> argv;
  argv.push_back("zpdlab");
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  std::string stage = "cli";
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    PipelineConfig cfg = load_config(config_path);
    if (!out_dir_override.empty()) {
      cfg.out_dir = fs::absolute(out_dir_override).lexically_normal().string();
    }
    if (replay_override) cfg.gateway.mode = GatewayMode::Replay;
    if (live_override) cfg.gateway.mode = GatewayMode::Live;
    if (seed_opt->count() > 0) seed_override = seed_value;
    if (seed_override) {
      cfg.seed_split = derive_seed(*seed_override, 1);
      cfg.seed_pool = derive_seed(*seed_override, 2);
      cfg.seed_train = derive_seed(*seed_override, 3);
      cfg.seed_curriculum = derive_seed(*seed_override, 4);
      cfg.irt.seed = cfg.seed_train;
    }

    if (measure->parsed()) {
      stage = "measure-zones";
      cmd_measure_zones(cfg);
    } else if (oracle->parsed()) {
      stage = "build-oracle";
      cmd_build_oracle(cfg);
    } else if (fit->parsed()) {
      stage = "fit-irt";
      cmd_fit_irt(cfg);
    } else if (predict->parsed()) {
      stage = "predict-zones";
      cmd_predict_zones(cfg);
    } else if (select->parsed()) {
      stage = "select-icl";
      if (grid_step_opt->count() > 0) cfg.grid_step = grid_step_flag;
      if (budget_opt->count() > 0) cfg.token_budget = token_budget_flag;
      if (strategy_opt->count() > 0) {
        cfg.strategy_responses_path = fs::absolute(strategy_records_flag).lexically_normal().string();
      }
      cmd_select_icl(cfg, deploy, tau1, tau2);
    } else if (curriculum->parsed()) {
      stage = "make-curriculum";
      cmd_make_curriculum(cfg, random_baseline);
    } else if (dynamics->parsed()) {
      stage = "analyze-dynamics";
      cmd_analyze_dynamics(cfg);
    } else if (report->parsed()) {
      stage = "report";
      cmd_report(cfg);
    }
  } catch (const Error& e) {
    const std::string where = e.stage().empty() ? stage : e.stage();
    std::cerr << json{{"stage", where}, {"error", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"stage", stage}, {"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace zpd::cli
