#pragma once
// Baby-step curriculum over predicted ICL learning gain, plus per-example
// fine-tuning loss dynamics grouped by zone. The schedule is a manifest for
// an external trainer; no fine-tuning happens here.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "zpd/selective_icl.hpp"
#include "zpd/zone_measurement.hpp"

namespace zpd {

struct ScheduleStage {
  int stage_index = 0;  // 1-based
  std::vector<std::string> training_pool;  // union of buckets 1..stage_index
  std::vector<uint64_t> epoch_seeds;       // per-epoch shuffle seeds
};

struct Schedule {
  std::vector<std::vector<std::string>> buckets;  // partition of the ranked list
  int epochs_per_stage = 0;
  std::vector<ScheduleStage> stages;
  uint64_t seed = 0;
  std::string ranking;  // "learning_gain" or "random"
};

// Descending p_icl - p_dp, ties by ascending example_id. Every example needs
// a predicted probability pair.
std::vector<std::string> rank_by_learning_gain(const std::vector<std::string>& examples,
                                               const std::vector<QueryProbs>& probs);

// Contiguous split of the ranked list into n_buckets near-equal buckets (the
// first buckets take the remainder); stage i trains epochs_per_stage epochs
// on buckets 1..i with seeds derived from `seed`.
Schedule make_schedule(const std::vector<std::string>& ranked, int n_buckets,
                       int epochs_per_stage, uint64_t seed);

// The same scheduler over a seeded-random permutation of the examples.
Schedule random_schedule(const std::vector<std::string>& examples, int n_buckets,
                         int epochs_per_stage, uint64_t seed);

struct ExampleDynamics {
  double mean = 0.0;
  double variance = 0.0;  // population variance across epochs
  int epochs = 0;
  bool low_confidence = false;  // single-epoch input
};

// Requires the same epoch count for every example; losses must be finite and
// nonnegative.
std::map<std::string, ExampleDynamics> loss_dynamics(
    const std::map<std::string, std::vector<double>>& per_epoch_losses);

struct ZoneLossRow {
  MergedZone zone = MergedZone::Z_OK;
  long n = 0;
  double mean_of_means = 0.0;
  double mean_of_variances = 0.0;
};

// Aggregates per merged zone; zones with no examples report count 0.
std::vector<ZoneLossRow> zone_loss_summary(const std::map<std::string, ExampleDynamics>& dynamics,
                                           const std::map<std::string, MergedZone>& zones);

}  // namespace zpd
