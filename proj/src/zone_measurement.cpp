#include "zpd/zone_measurement.hpp"

#include <algorithm>

#include "zpd/error.hpp"

namespace zpd {

std::string zone_name(ZoneLabel z) {
  switch (z) {
    case ZoneLabel::Z_OK: return "Z_OK";
    case ZoneLabel::Z_ZPD: return "Z_ZPD";
    case ZoneLabel::Z_FAIL: return "Z_FAIL";
    default: return "Z_DEGRADE";
  }
}

std::string merged_zone_name(MergedZone z) {
  switch (z) {
    case MergedZone::Z_OK: return "Z_OK";
    case MergedZone::Z_ZPD: return "Z_ZPD";
    default: return "Z_FAIL";
  }
}

MergedZone merged_zone_from_name(const std::string& s) {
  if (s == "Z_OK") return MergedZone::Z_OK;
  if (s == "Z_ZPD") return MergedZone::Z_ZPD;
  if (s == "Z_FAIL") return MergedZone::Z_FAIL;
  throw Error("unknown merged zone: " + s);
}

ZoneLabel assign_zone(int r_dp, int r_icl) {
  if (r_dp == 1) return r_icl == 1 ? ZoneLabel::Z_OK : ZoneLabel::Z_DEGRADE;
  return r_icl == 1 ? ZoneLabel::Z_ZPD : ZoneLabel::Z_FAIL;
}

MergedZone merge_zone(ZoneLabel z) {
  switch (z) {
    case ZoneLabel::Z_OK:
    case ZoneLabel::Z_DEGRADE: return MergedZone::Z_OK;
    case ZoneLabel::Z_ZPD: return MergedZone::Z_ZPD;
    default: return MergedZone::Z_FAIL;
  }
}

std::map<std::string, std::pair<int, int>> paired_labels(const ResponseSet& rs,
                                                         const std::string& model_id) {
  std::map<std::string, std::pair<bool, bool>> present;
  std::map<std::string, std::pair<int, int>> out;
  for (const auto& r : rs.records) {
    if (r.model_id != model_id) continue;
    auto& flags = present[r.example_id];
    auto& labels = out[r.example_id];
    if (r.setting == Setting::DP) {
      flags.first = true;
      labels.first = r.label;
    } else {
      flags.second = true;
      labels.second = r.label;
    }
  }
  for (const auto& [id, q] : rs.queries) {
    auto it = present.find(id);
    if (it == present.end() || !it->second.first) {
      throw Error("model " + model_id + " has no DP record for query " + id);
    }
    if (!it->second.second) {
      throw Error("model " + model_id + " has no ICL record for query " + id);
    }
  }
  return out;
}

ZoneDistribution zone_distribution(const ResponseSet& rs, const std::string& model_id) {
  ZoneDistribution dist;
  dist.model_id = model_id;
  for (ZoneLabel z : {ZoneLabel::Z_OK, ZoneLabel::Z_ZPD, ZoneLabel::Z_FAIL, ZoneLabel::Z_DEGRADE}) {
    dist.counts[z] = 0;
  }
  for (MergedZone z : {MergedZone::Z_OK, MergedZone::Z_ZPD, MergedZone::Z_FAIL}) {
    dist.merged_counts[z] = 0;
  }
  for (const auto& [id, labels] : paired_labels(rs, model_id)) {
    const ZoneLabel z = assign_zone(labels.first, labels.second);
    dist.counts[z] += 1;
    dist.merged_counts[merge_zone(z)] += 1;
    dist.total += 1;
  }
  return dist;
}

double overlap_coefficient(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() || b.empty()) throw Error("overlap coefficient requires nonempty sets");
  size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(std::min(a.size(), b.size()));
}

std::set<std::string> zone_members(const ResponseSet& rs, const std::string& model_id,
                                   MergedZone zone) {
  std::set<std::string> members;
  for (const auto& [id, labels] : paired_labels(rs, model_id)) {
    if (merge_zone(assign_zone(labels.first, labels.second)) == zone) members.insert(id);
  }
  return members;
}

OverlapStats pairwise_overlap_stats(const ResponseSet& rs, MergedZone zone) {
  if (rs.models.size() < 2) throw Error("pairwise overlap requires at least 2 models");
  std::map<std::string, std::set<std::string>> sets;
  for (const auto& model_id : rs.models) {
    auto members = zone_members(rs, model_id, zone);
    if (members.empty()) {
      throw Error("model " + model_id + " has an empty " + merged_zone_name(zone) + " zone");
    }
    sets.emplace(model_id, std::move(members));
  }
  OverlapStats stats;
  double sum = 0.0;
  for (size_t i = 0; i < rs.models.size(); ++i) {
    for (size_t j = i + 1; j < rs.models.size(); ++j) {
      const double v = overlap_coefficient(sets[rs.models[i]], sets[rs.models[j]]);
      stats.matrix.push_back({rs.models[i], rs.models[j], v});
      sum += v;
    }
  }
  auto [lo, hi] = std::minmax_element(stats.matrix.begin(), stats.matrix.end(),
                                      [](const auto& a, const auto& b) { return a.value < b.value; });
  stats.min = lo->value;
  stats.max = hi->value;
  stats.avg = sum / static_cast<double>(stats.matrix.size());
  return stats;
}

IclEffect icl_effect_decomposition(const std::map<std::string, int>& dp_labels,
                                   const std::map<std::string, int>& strategy_labels) {
  if (dp_labels.size() != strategy_labels.size()) {
    throw Error("icl effect: query sets differ in size");
  }
  if (dp_labels.empty()) return {};
  long gained = 0, harmed = 0;
  for (const auto& [id, dp] : dp_labels) {
    auto it = strategy_labels.find(id);
    if (it == strategy_labels.end()) throw Error("icl effect: query " + id + " missing from strategy labels");
    if (dp == 0 && it->second == 1) ++gained;
    if (dp == 1 && it->second == 0) ++harmed;
  }
  const double n = static_cast<double>(dp_labels.size());
  IclEffect e;
  e.gain = gained / n;
  e.harm = harmed / n;
  e.net = e.gain - e.harm;
  return e;
}

}  // namespace zpd
