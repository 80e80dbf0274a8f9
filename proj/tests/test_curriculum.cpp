#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "test_support.hpp"
#include "zpd/curriculum.hpp"
#include "zpd/error.hpp"
#include "zpd/rng.hpp"

using namespace zpd;

namespace {

std::vector<QueryProbs> probs_of(const std::map<std::string, std::pair<double, double>>& m) {
  std::vector<QueryProbs> probs;
  for (const auto& [id, p] : m) probs.push_back({id, p.first, p.second});
  return probs;
}

std::vector<std::string> ids_of(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("q" + std::to_string(i));
  return ids;
}

void check_schedule_invariants(const Schedule& s, const std::vector<std::string>& ranked,
                               int n_buckets, int epochs_per_stage) {
  REQUIRE(s.buckets.size() == static_cast<size_t>(n_buckets));
  // partition: concatenated buckets reproduce the ranked list
  std::vector<std::string> concat;
  for (const auto& b : s.buckets) concat.insert(concat.end(), b.begin(), b.end());
  CHECK(concat == ranked);
  // near-equal sizing
  size_t lo = ranked.size(), hi = 0;
  for (const auto& b : s.buckets) {
    lo = std::min(lo, b.size());
    hi = std::max(hi, b.size());
  }
  CHECK(hi - lo <= 1);
  // accumulation
  REQUIRE(s.stages.size() == static_cast<size_t>(n_buckets));
  std::vector<std::string> pool;
  for (int i = 0; i < n_buckets; ++i) {
    pool.insert(pool.end(), s.buckets[i].begin(), s.buckets[i].end());
    CHECK(s.stages[i].training_pool == pool);
    CHECK(s.stages[i].stage_index == i + 1);
    CHECK(s.stages[i].epoch_seeds.size() == static_cast<size_t>(epochs_per_stage));
  }
  CHECK(s.stages.back().training_pool.size() == ranked.size());
  // total scheduled epochs
  size_t total_epochs = 0;
  for (const auto& st : s.stages) total_epochs += st.epoch_seeds.size();
  CHECK(total_epochs == static_cast<size_t>(n_buckets) * epochs_per_stage);
}

}  // namespace

TEST_CASE("ranking by learning gain") {
  const auto probs = probs_of({{"q1", {0.3, 0.7}}, {"q2", {0.5, 0.6}}, {"q3", {0.1, 0.8}}});
  // gains: q1 0.4, q2 0.1, q3 0.7
  CHECK(rank_by_learning_gain({"q1", "q2", "q3"}, probs) ==
        std::vector<std::string>{"q3", "q1", "q2"});
}

TEST_CASE("equal gains fall back to ascending example_id") {
  // gains are all exactly 0.5 (dyadic endpoints)
  const auto probs = probs_of({{"b", {0.25, 0.75}}, {"a", {0.125, 0.625}}, {"c", {0.375, 0.875}}});
  CHECK(rank_by_learning_gain({"b", "a", "c"}, probs) == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("negative gains sort last") {
  const auto probs = probs_of({{"up", {0.2, 0.9}}, {"down", {0.8, 0.3}}, {"flat", {0.5, 0.5}}});
  CHECK(rank_by_learning_gain({"up", "down", "flat"}, probs) ==
        std::vector<std::string>{"up", "flat", "down"});
}

TEST_CASE("missing probabilities are an error") {
  const auto probs = probs_of({{"q1", {0.3, 0.7}}});
  CHECK_THROWS_WITH_AS(rank_by_learning_gain({"q1", "q2"}, probs), doctest::Contains("q2"), Error);
}

TEST_CASE("six examples in three buckets of two epochs reproduce the stage pools") {
  const auto ranked = ids_of(6);
  const Schedule s = make_schedule(ranked, 3, 2, 7);
  REQUIRE(s.stages.size() == 3);
  CHECK(s.stages[0].training_pool.size() == 2);
  CHECK(s.stages[1].training_pool.size() == 4);
  CHECK(s.stages[2].training_pool.size() == 6);
  check_schedule_invariants(s, ranked, 3, 2);
}

TEST_CASE("remainder goes to the front buckets") {
  const auto ranked = ids_of(7);
  const Schedule s = make_schedule(ranked, 3, 1, 7);
  CHECK(s.buckets[0].size() == 3);
  CHECK(s.buckets[1].size() == 2);
  CHECK(s.buckets[2].size() == 2);
}

TEST_CASE("one bucket degenerates to plain training") {
  const auto ranked = ids_of(5);
  const Schedule s = make_schedule(ranked, 1, 4, 7);
  REQUIRE(s.stages.size() == 1);
  CHECK(s.stages[0].training_pool == ranked);
  CHECK(s.stages[0].epoch_seeds.size() == 4);
}

TEST_CASE("more buckets than examples is an error") {
  CHECK_THROWS_AS(make_schedule(ids_of(2), 3, 1, 7), Error);
  CHECK_THROWS_AS(make_schedule({}, 1, 1, 7), Error);
}

TEST_CASE("schedule invariants hold over random shapes") {
  SplitMix64 rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_below(80));
    const int buckets = 1 + static_cast<int>(rng.next_below(std::min(n, 8)));
    const int epochs = 1 + static_cast<int>(rng.next_below(4));
    const auto ranked = ids_of(n);
    check_schedule_invariants(make_schedule(ranked, buckets, epochs, rng.next()), ranked, buckets,
                              epochs);
  }
}

TEST_CASE("random schedule permutes the input deterministically") {
  const auto examples = ids_of(9);
  const Schedule a = random_schedule(examples, 3, 2, 42);
  const Schedule b = random_schedule(examples, 3, 2, 42);
  CHECK(a.buckets == b.buckets);
  CHECK(a.ranking == "random");

  std::vector<std::string> concat;
  for (const auto& bucket : a.buckets) concat.insert(concat.end(), bucket.begin(), bucket.end());
  auto sorted = concat;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == examples);  // a permutation
  CHECK(concat != examples);  // and almost surely not the identity for seed 42

  // bucket sizes match the zpd scheduler's for equal inputs
  const Schedule zpd_one = make_schedule(examples, 3, 2, 42);
  for (size_t i = 0; i < a.buckets.size(); ++i) {
    CHECK(a.buckets[i].size() == zpd_one.buckets[i].size());
  }
}

TEST_CASE("loss dynamics mean and population variance") {
  const auto dyn = loss_dynamics({{"q1", {1.0, 0.5, 0.0}}});
  CHECK(dyn.at("q1").mean == doctest::Approx(0.5));
  CHECK(dyn.at("q1").variance == doctest::Approx(1.0 / 6.0));
  CHECK(dyn.at("q1").epochs == 3);
  CHECK(!dyn.at("q1").low_confidence);

  const auto constant = loss_dynamics({{"q1", {0.7, 0.7, 0.7}}});
  CHECK(constant.at("q1").variance == doctest::Approx(0.0));

  const auto single = loss_dynamics({{"q1", {0.9}}});
  CHECK(single.at("q1").variance == 0.0);
  CHECK(single.at("q1").low_confidence);
}

TEST_CASE("ragged or invalid loss logs are rejected") {
  CHECK_THROWS_WITH_AS(loss_dynamics({{"a", {1.0, 2.0}}, {"b", {1.0}}}),
                       doctest::Contains("expected"), Error);
  CHECK_THROWS_AS(loss_dynamics({{"a", {-1.0}}}), Error);
  CHECK_THROWS_AS(loss_dynamics({{"a", {std::nan("")}}}), Error);
}

TEST_CASE("variance agrees with the moment formula") {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> losses;
    const uint64_t n = 1 + rng.next_below(12);
    for (uint64_t i = 0; i < n; ++i) losses.push_back(2.0 * rng.next_double());
    const auto dyn = loss_dynamics({{"q", losses}});
    double m1 = 0.0, m2 = 0.0;
    for (double l : losses) {
      m1 += l;
      m2 += l * l;
    }
    m1 /= static_cast<double>(n);
    m2 /= static_cast<double>(n);
    CHECK(std::fabs(dyn.at("q").variance - (m2 - m1 * m1)) < 1e-10);
  }
}

TEST_CASE("zone loss summary aggregates per merged zone") {
  const auto dyn = loss_dynamics({{"a", {0.1, 0.1}}, {"b", {0.3, 0.3}}, {"c", {0.9, 0.9}}});
  const std::map<std::string, MergedZone> zones{{"a", MergedZone::Z_OK},
                                                {"b", MergedZone::Z_OK},
                                                {"c", MergedZone::Z_FAIL}};
  const auto summary = zone_loss_summary(dyn, zones);
  REQUIRE(summary.size() == 3);
  for (const auto& row : summary) {
    if (row.zone == MergedZone::Z_OK) {
      CHECK(row.n == 2);
      CHECK(row.mean_of_means == doctest::Approx(0.2));
    } else if (row.zone == MergedZone::Z_FAIL) {
      CHECK(row.n == 1);
      CHECK(row.mean_of_means == doctest::Approx(0.9));
    } else {
      CHECK(row.n == 0);  // empty zone still reported
    }
  }

  CHECK_THROWS_WITH_AS(zone_loss_summary(dyn, {{"a", MergedZone::Z_OK}}),
                       doctest::Contains("has no zone"), Error);
}

TEST_CASE("equal losses give equal zone summaries") {
  const auto dyn = loss_dynamics({{"a", {0.4, 0.6}}, {"b", {0.4, 0.6}}});
  const auto summary = zone_loss_summary(
      dyn, {{"a", MergedZone::Z_ZPD}, {"b", MergedZone::Z_FAIL}});
  double zpd_mean = -1, fail_mean = -2;
  for (const auto& row : summary) {
    if (row.zone == MergedZone::Z_ZPD) zpd_mean = row.mean_of_means;
    if (row.zone == MergedZone::Z_FAIL) fail_mean = row.mean_of_means;
  }
  CHECK(zpd_mean == doctest::Approx(fail_mean));
}
