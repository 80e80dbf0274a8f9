#include "zpd/curriculum.hpp"

#include <algorithm>
#include <cmath>

#include "zpd/error.hpp"
#include "zpd/rng.hpp"

namespace zpd {

std::vector<std::string> rank_by_learning_gain(const std::vector<std::string>& examples,
                                               const std::vector<QueryProbs>& probs) {
  std::map<std::string, double> gain;
  for (const auto& p : probs) gain[p.example_id] = p.p_icl - p.p_dp;
  std::vector<std::string> ranked = examples;
  for (const auto& id : ranked) {
    if (!gain.count(id)) throw Error("curriculum: no predicted probs for example " + id);
  }
  std::sort(ranked.begin(), ranked.end(), [&](const std::string& a, const std::string& b) {
    const double ga = gain[a], gb = gain[b];
    if (ga != gb) return ga > gb;
    return a < b;
  });
  return ranked;
}

Schedule make_schedule(const std::vector<std::string>& ranked, int n_buckets,
                       int epochs_per_stage, uint64_t seed) {
  if (ranked.empty()) throw Error("curriculum: empty example list");
  if (n_buckets < 1) throw Error("curriculum: n_buckets must be >= 1");
  if (static_cast<size_t>(n_buckets) > ranked.size()) {
    throw Error("curriculum: n_buckets " + std::to_string(n_buckets) + " exceeds example count " +
                std::to_string(ranked.size()));
  }
  if (epochs_per_stage < 1) throw Error("curriculum: epochs_per_stage must be >= 1");

  Schedule schedule;
  schedule.seed = seed;
  schedule.epochs_per_stage = epochs_per_stage;
  schedule.ranking = "learning_gain";

  const size_t n = ranked.size();
  const size_t base = n / static_cast<size_t>(n_buckets);
  const size_t remainder = n % static_cast<size_t>(n_buckets);
  size_t pos = 0;
  for (int b = 0; b < n_buckets; ++b) {
    const size_t size = base + (static_cast<size_t>(b) < remainder ? 1 : 0);
    schedule.buckets.emplace_back(ranked.begin() + static_cast<std::ptrdiff_t>(pos),
                                  ranked.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }

  std::vector<std::string> pool;
  for (int s = 0; s < n_buckets; ++s) {
    pool.insert(pool.end(), schedule.buckets[s].begin(), schedule.buckets[s].end());
    ScheduleStage stage;
    stage.stage_index = s + 1;
    stage.training_pool = pool;
    for (int e = 0; e < epochs_per_stage; ++e) {
      stage.epoch_seeds.push_back(
          derive_seed(seed, static_cast<uint64_t>(s + 1) * 1000003ULL + static_cast<uint64_t>(e)));
    }
    schedule.stages.push_back(std::move(stage));
  }
  return schedule;
}

Schedule random_schedule(const std::vector<std::string>& examples, int n_buckets,
                         int epochs_per_stage, uint64_t seed) {
  std::vector<std::string> shuffled = examples;
  std::sort(shuffled.begin(), shuffled.end());
  SplitMix64 rng(derive_seed(seed, 0xC0FFEE));
  rng.shuffle(shuffled);
  Schedule schedule = make_schedule(shuffled, n_buckets, epochs_per_stage, seed);
  schedule.ranking = "random";
  return schedule;
}

std::map<std::string, ExampleDynamics> loss_dynamics(
    const std::map<std::string, std::vector<double>>& per_epoch_losses) {
  std::map<std::string, ExampleDynamics> out;
  int expected_epochs = -1;
  for (const auto& [id, losses] : per_epoch_losses) {
    if (losses.empty()) throw Error("loss dynamics: no epochs for example " + id);
    if (expected_epochs < 0) expected_epochs = static_cast<int>(losses.size());
    if (static_cast<int>(losses.size()) != expected_epochs) {
      throw Error("loss dynamics: example " + id + " has " + std::to_string(losses.size()) +
                  " epochs, expected " + std::to_string(expected_epochs));
    }
    double mean = 0.0;
    for (double l : losses) {
      if (!std::isfinite(l) || l < 0.0) {
        throw Error("loss dynamics: bad loss value for example " + id);
      }
      mean += l;
    }
    mean /= static_cast<double>(losses.size());
    double variance = 0.0;
    for (double l : losses) variance += (l - mean) * (l - mean);
    variance /= static_cast<double>(losses.size());

    ExampleDynamics d;
    d.mean = mean;
    d.variance = variance;
    d.epochs = static_cast<int>(losses.size());
    d.low_confidence = losses.size() == 1;
    out.emplace(id, d);
  }
  return out;
}

std::vector<ZoneLossRow> zone_loss_summary(const std::map<std::string, ExampleDynamics>& dynamics,
                                           const std::map<std::string, MergedZone>& zones) {
  std::map<MergedZone, ZoneLossRow> acc;
  for (MergedZone z : {MergedZone::Z_OK, MergedZone::Z_ZPD, MergedZone::Z_FAIL}) {
    acc[z].zone = z;
  }
  for (const auto& [id, d] : dynamics) {
    auto it = zones.find(id);
    if (it == zones.end()) throw Error("zone loss summary: example " + id + " has no zone");
    auto& row = acc[it->second];
    row.n += 1;
    row.mean_of_means += d.mean;
    row.mean_of_variances += d.variance;
  }
  std::vector<ZoneLossRow> out;
  for (auto& [zone, row] : acc) {
    if (row.n > 0) {
      row.mean_of_means /= static_cast<double>(row.n);
      row.mean_of_variances /= static_cast<double>(row.n);
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace zpd
