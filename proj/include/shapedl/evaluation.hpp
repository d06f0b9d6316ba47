#pragma once

// Retrieval evaluation: judge-ranking merge, normalized recall over image
// pairs, and an experiment runner producing JSON and text reports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "shapedl/approx.hpp"
#include "shapedl/config.hpp"
#include "shapedl/io.hpp"
#include "shapedl/model.hpp"

namespace shapedl {

/// Ordered tiers of equally relevant images, best first. Images in no tier
/// are unranked.
struct Ranking {
  std::vector<std::vector<std::string>> tiers;

  std::map<std::string, std::size_t> positions() const {
    std::map<std::string, std::size_t> pos;
    for (std::size_t t = 0; t < tiers.size(); ++t)
      for (const auto& id : tiers[t])
        if (!pos.emplace(id, t).second) throw Error("ranking lists image '" + id + "' twice");
    return pos;
  }

  bool operator==(const Ranking&) const = default;
};

/// Each image lands in its worst tier across judges; an image some judge left
/// unranked is dropped. Empty tiers are removed, ids sorted within a tier.
inline Ranking merge_user_rankings(const std::vector<Ranking>& judges) {
  if (judges.empty()) throw Error("merge needs at least one ranking");
  std::vector<std::map<std::string, std::size_t>> pos;
  for (const auto& r : judges) pos.push_back(r.positions());
  std::map<std::size_t, std::vector<std::string>> by_tier;
  for (const auto& [id, first] : pos.front()) {
    std::size_t worst = first;
    bool everywhere = true;
    for (const auto& p : pos) {
      const auto it = p.find(id);
      if (it == p.end()) {
        everywhere = false;
        break;
      }
      worst = std::max(worst, it->second);
    }
    if (everywhere) by_tier[worst].push_back(id);
  }
  Ranking out;
  for (auto& [tier, ids] : by_tier) out.tiers.push_back(std::move(ids));
  return out;
}

struct PairCounts {
  std::size_t agree = 0;     // S+
  std::size_t disagree = 0;  // S-
  std::size_t possible = 0;  // S+max
};

/// Pairs the user strictly orders, split by how the system orders them.
/// Images the system did not rank share a tier below all ranked ones; system
/// ties count in neither direction.
inline PairCounts count_pairs(const Ranking& sys, const Ranking& usr) {
  const auto u = usr.positions();
  const auto s = sys.positions();
  const std::size_t bottom = sys.tiers.size();
  auto sys_tier = [&](const std::string& id) {
    const auto it = s.find(id);
    return it == s.end() ? bottom : it->second;
  };
  std::vector<std::pair<std::size_t, std::size_t>> items;  // (user tier, system tier)
  items.reserve(u.size());
  for (const auto& [id, t] : u) items.emplace_back(t, sys_tier(id));
  std::sort(items.begin(), items.end());
  PairCounts c;
  for (std::size_t a = 0; a < items.size(); ++a)
    for (std::size_t b = a + 1; b < items.size(); ++b) {
      if (items[a].first == items[b].first) continue;
      ++c.possible;
      if (items[a].second < items[b].second) ++c.agree;
      else if (items[a].second > items[b].second) ++c.disagree;
    }
  return c;
}

inline double rnorm(const Ranking& sys, const Ranking& usr) {
  const PairCounts c = count_pairs(sys, usr);
  if (c.possible == 0) throw Error("user ranking has no strictly ordered pair");
  return 0.5 * (1.0 + (static_cast<double>(c.agree) - static_cast<double>(c.disagree)) /
                          static_cast<double>(c.possible));
}

inline constexpr double kScoreTieTolerance = 1e-6;

/// Groups a ranked result list into tiers; an image joins the current tier
/// when its score is within tolerance of the tier's best score.
inline Ranking system_ranking(const std::vector<RankedImage>& ranked, double tol = kScoreTieTolerance) {
  Ranking out;
  double top = 0.0;
  for (const auto& r : ranked) {
    if (out.tiers.empty() || top - r.match.score >= tol) {
      out.tiers.emplace_back();
      top = r.match.score;
    }
    out.tiers.back().push_back(r.image_id);
  }
  return out;
}

using GoldRankings = std::map<std::string, Ranking>;

inline GoldRankings gold_from_json(const Json& v) {
  if (!v.is_object()) throw ParseError("gold rankings: expected an object keyed by query id");
  GoldRankings out;
  for (const auto& [query, tiers] : v.items()) {
    if (!tiers.is_array()) throw ParseError("gold '" + query + "': expected a list of tiers");
    Ranking r;
    for (const Json& tier : tiers) {
      if (!tier.is_array()) throw ParseError("gold '" + query + "': each tier must be a list of ids");
      std::vector<std::string> ids;
      for (const Json& id : tier) ids.push_back(detail::text(id, "gold '" + query + "'"));
      r.tiers.push_back(std::move(ids));
    }
    try {
      r.positions();
    } catch (const Error& e) {
      throw ParseError("gold '" + query + "': " + e.what());
    }
    out.emplace(query, std::move(r));
  }
  return out;
}

inline Json to_json(const Ranking& r) { return r.tiers; }

inline Json to_json(const GoldRankings& g) {
  Json out = Json::object();
  for (const auto& [q, r] : g) out[q] = to_json(r);
  return out;
}

struct QueryOutcome {
  std::string query_id;
  std::string top_image;  // empty when nothing was retrieved
  std::size_t retrieved = 0;
  double rnorm = 0.0;
};

struct ExperimentReport {
  std::vector<QueryOutcome> queries;
  std::vector<std::string> skipped;  // queries without usable gold
  double mean_rnorm = 0.0;
};

template <class Images>
ExperimentReport run_experiment(const std::vector<CompositeDescription>& queries, const Images& database,
                                const GoldRankings& gold, const MatchConfig& cfg = {}) {
  ExperimentReport rep;
  double sum = 0.0;
  for (const auto& q : queries) {
    const auto g = gold.find(q.id);
    if (g == gold.end()) {
      rep.skipped.push_back(q.id);
      continue;
    }
    const auto ranked = retrieve(q, database, cfg);
    QueryOutcome o;
    o.query_id = q.id;
    o.retrieved = ranked.size();
    if (!ranked.empty()) o.top_image = ranked.front().image_id;
    try {
      o.rnorm = rnorm(system_ranking(ranked), g->second);
    } catch (const Error&) {
      rep.skipped.push_back(q.id);
      continue;
    }
    sum += o.rnorm;
    rep.queries.push_back(std::move(o));
  }
  if (!rep.queries.empty()) rep.mean_rnorm = sum / static_cast<double>(rep.queries.size());
  return rep;
}

inline Json to_json(const ExperimentReport& rep) {
  Json qs = Json::array();
  for (const auto& o : rep.queries)
    qs.push_back({{"query", o.query_id}, {"top_image", o.top_image}, {"retrieved", o.retrieved}, {"rnorm", o.rnorm}});
  return {{"queries", qs}, {"mean_rnorm", rep.mean_rnorm}, {"skipped", rep.skipped}};
}

/// Fixed-width table: one row per query and a closing average row.
inline std::string format_report_table(const ExperimentReport& rep) {
  std::size_t wq = 5, wi = 9;
  for (const auto& o : rep.queries) {
    wq = std::max(wq, o.query_id.size());
    wi = std::max(wi, o.top_image.size());
  }
  std::ostringstream out;
  char buf[64];
  auto row = [&](const std::string& q, const std::string& img, const std::string& n, const std::string& r) {
    out << q << std::string(wq - q.size() + 2, ' ') << img << std::string(wi - img.size() + 2, ' ');
    out << std::string(n.size() < 9 ? 9 - n.size() : 0, ' ') << n << "  " << r << "\n";
  };
  row("query", "top image", "retrieved", "R_norm");
  for (const auto& o : rep.queries) {
    std::snprintf(buf, sizeof buf, "%.4f", o.rnorm);
    row(o.query_id, o.top_image.empty() ? "-" : o.top_image, std::to_string(o.retrieved), buf);
  }
  std::snprintf(buf, sizeof buf, "%.4f", rep.mean_rnorm);
  row("average", "", "", buf);
  for (const auto& s : rep.skipped) out << "skipped: " << s << "\n";
  return out.str();
}

}  // namespace shapedl
