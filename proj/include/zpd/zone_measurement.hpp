#pragma once
// Zone assignment from paired DP/ICL correctness, zone distributions,
// cross-model overlap statistics, and the ICL gain/harm decomposition.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "zpd/core_data.hpp"

namespace zpd {

// Four-way outcome of a (DP, ICL) correctness pair. The merged three-zone
// view folds Z_DEGRADE into Z_OK.
enum class ZoneLabel { Z_OK, Z_ZPD, Z_FAIL, Z_DEGRADE };
enum class MergedZone { Z_OK, Z_ZPD, Z_FAIL };

std::string zone_name(ZoneLabel z);
std::string merged_zone_name(MergedZone z);
MergedZone merged_zone_from_name(const std::string& s);

// (1,1)->Z_OK  (0,1)->Z_ZPD  (0,0)->Z_FAIL  (1,0)->Z_DEGRADE
ZoneLabel assign_zone(int r_dp, int r_icl);
MergedZone merge_zone(ZoneLabel z);

// example_id -> (dp label, icl label) for one model; throws on any query of
// the set that lacks either record, naming the query.
std::map<std::string, std::pair<int, int>> paired_labels(const ResponseSet& rs,
                                                         const std::string& model_id);

struct ZoneDistribution {
  std::string model_id;
  std::map<ZoneLabel, long> counts;
  std::map<MergedZone, long> merged_counts;
  long total = 0;
};

// Requires a DP and an ICL record for every query of the model.
ZoneDistribution zone_distribution(const ResponseSet& rs, const std::string& model_id);

// |a intersect b| / min(|a|, |b|); both sets must be nonempty.
double overlap_coefficient(const std::set<std::string>& a, const std::set<std::string>& b);

// Example ids the model places in the given merged zone.
std::set<std::string> zone_members(const ResponseSet& rs, const std::string& model_id,
                                   MergedZone zone);

struct OverlapPair {
  std::string model_a;
  std::string model_b;
  double value = 0.0;
};

struct OverlapStats {
  double max = 0.0;
  double min = 0.0;
  double avg = 0.0;
  std::vector<OverlapPair> matrix;  // every unordered model pair
};

// Overlap coefficient over every unordered model pair on one merged zone.
OverlapStats pairwise_overlap_stats(const ResponseSet& rs, MergedZone zone);

struct IclEffect {
  double gain = 0.0;  // fraction of queries flipped 0 -> 1
  double harm = 0.0;  // fraction flipped 1 -> 0
  double net = 0.0;   // gain - harm
};

// Both maps must cover the same query set.
IclEffect icl_effect_decomposition(const std::map<std::string, int>& dp_labels,
                                   const std::map<std::string, int>& strategy_labels);

}  // namespace zpd
