#pragma once

#include <json.hpp>

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

#include "ueq/core/trajectory.hpp"

namespace ueq::cli {

/// One JSON object per (site, age): {site, age, atoms:[{point, weight}], regret, kappa}.
/// κ is null when the lab does not track it.
inline void write_jsonl(std::ostream& os, const TrajectoryStats& stats, const std::string& site,
                        const std::string& as) {
  for (const auto& r : stats.per_age()) {
    nlohmann::json j;
    j["site"] = as;
    j["age"] = r.age;
    j["atoms"] = nlohmann::json::array();
    for (const auto& [p, w] : r.induced.at(site).atoms()) j["atoms"].push_back({{"point", p}, {"weight", w}});
    j["regret"] = r.regret;
    j["kappa"] = std::isnan(r.kappa) ? nlohmann::json(nullptr) : nlohmann::json(r.kappa);
    os << j.dump() << '\n';
  }
}

/// Trajectories keyed by site; each record's distribution is stored under
/// its own site name.
[[nodiscard]] inline std::map<std::string, TrajectoryStats> read_jsonl(std::istream& is) {
  std::map<std::string, TrajectoryStats> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      AgeRecord r;
      const auto site = j.at("site").get<std::string>();
      r.age = j.at("age").get<int>();
      FiniteMeasure<double> m;
      for (const auto& a : j.at("atoms")) m.add(a.at("point").get<double>(), a.at("weight").get<double>());
      r.induced[site] = std::move(m);
      r.regret = j.at("regret").get<double>();
      if (j.contains("kappa") && !j.at("kappa").is_null()) r.kappa = j.at("kappa").get<double>();
      out[site].push(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error("malformed trace at line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ueq::cli
