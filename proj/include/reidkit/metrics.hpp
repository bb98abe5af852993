// Copyright 2026 The reidkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Ranking measures: CMC@k, AP/mAP and the cross-camera generalization
// measure CGM/mCGM.
//
// CGM scores each camera that owns at least one target separately. For
// camera c, the ranking list is reduced to a sub-gallery by removing the
// targets of every other camera (errors are kept). With N_c targets left and
// E(k) errors preceding the k-th of them,
//
//   CGM(q, c) = 1/N_c * sum_k 1 / (E(k) + 1)
//   CGM(q)    = mean of CGM(q, c) over cameras with targets
//   mCGM      = mean of CGM(q) over queries with targets
//
// Queries without any target are excluded from every mean and listed in
// EvalReport::invalid_queries.

#pragma once

#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reidkit/dataset.hpp"
#include "reidkit/error.hpp"
#include "reidkit/parallel.hpp"
#include "reidkit/ranking.hpp"

namespace reidkit {

// flags[i] is true when the i-th ranked item shares the query's identity;
// cameras[i] is that item's camera.
struct RelevanceList {
  std::vector<bool> flags;
  std::vector<CameraId> cameras;

  RelevanceList() = default;
  RelevanceList(std::vector<bool> f, std::vector<CameraId> c)
      : flags(std::move(f)), cameras(std::move(c)) {
    if (flags.size() != cameras.size()) {
      throw Error(ErrorCode::ShapeMismatch, std::to_string(flags.size()) + " flags vs " +
                                                std::to_string(cameras.size()) + " cameras");
    }
  }

  std::size_t size() const noexcept { return flags.size(); }

  std::size_t num_targets() const noexcept {
    std::size_t n = 0;
    for (bool f : flags) n += f;
    return n;
  }

  friend bool operator==(const RelevanceList&, const RelevanceList&) = default;
};

inline RelevanceList relevance_from_ranking(const RankedList& list, const ImageRecord& query,
                                            std::span<const ImageRecord> gallery) {
  RelevanceList rel;
  rel.flags.reserve(list.ordered_gallery.size());
  rel.cameras.reserve(list.ordered_gallery.size());
  for (std::size_t j : list.ordered_gallery) {
    rel.flags.push_back(gallery[j].identity == query.identity);
    rel.cameras.push_back(gallery[j].camera);
  }
  return rel;
}

namespace detail {

inline void require_targets(const RelevanceList& rel) {
  if (rel.num_targets() == 0) {
    throw Error(ErrorCode::NoTargets, "ranking list holds no target image");
  }
}

}  // namespace detail

// 1 if a target appears among the first min(k, |rel|) items, else 0.
inline int cmc_at_k(const RelevanceList& rel, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "CMC cutoff k must be >= 1");
  detail::require_targets(rel);
  const std::size_t cutoff = std::min(k, rel.size());
  for (std::size_t i = 0; i < cutoff; ++i) {
    if (rel.flags[i]) return 1;
  }
  return 0;
}

// Mean over targets of the precision at that target's rank.
inline double average_precision(const RelevanceList& rel) {
  detail::require_targets(rel);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (!rel.flags[i]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(hits);
}

struct CameraSubGallery {
  CameraId camera{};
  std::vector<bool> flags;

  friend bool operator==(const CameraSubGallery&, const CameraSubGallery&) = default;
};

// One sub-gallery per camera owning a target, in ascending camera order.
inline std::vector<CameraSubGallery> build_camera_subgalleries(const RelevanceList& rel) {
  std::map<CameraId, std::size_t> slot;
  std::vector<CameraSubGallery> subs;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (rel.flags[i]) slot.emplace(rel.cameras[i], 0);
  }
  for (auto& [camera, index] : slot) {
    index = subs.size();
    subs.push_back({camera, {}});
  }
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (rel.flags[i]) {
      subs[slot[rel.cameras[i]]].flags.push_back(true);
    } else {
      for (auto& sub : subs) sub.flags.push_back(false);
    }
  }
  return subs;
}

// E(k) for each target of a sub-gallery, in order.
inline std::vector<std::size_t> errors_before_targets(const CameraSubGallery& sub) {
  std::vector<std::size_t> out;
  std::size_t errors = 0;
  for (bool f : sub.flags) {
    if (f) {
      out.push_back(errors);
    } else {
      ++errors;
    }
  }
  return out;
}

// E(k) for each target of `camera`, counted on the full list. Equal to the
// sub-gallery count because removed items are always targets.
inline std::vector<std::size_t> errors_before_targets(const RelevanceList& rel,
                                                      CameraId camera) {
  std::vector<std::size_t> out;
  std::size_t errors = 0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (!rel.flags[i]) {
      ++errors;
    } else if (rel.cameras[i] == camera) {
      out.push_back(errors);
    }
  }
  return out;
}

inline double discounted_mean(std::span<const std::size_t> errors_before) {
  if (errors_before.empty()) {
    throw Error(ErrorCode::EmptySubGallery, "camera has no target image");
  }
  double sum = 0.0;
  for (std::size_t e : errors_before) sum += 1.0 / static_cast<double>(e + 1);
  return sum / static_cast<double>(errors_before.size());
}

inline double cgm_per_camera(const CameraSubGallery& sub) {
  return discounted_mean(errors_before_targets(sub));
}

// Same value computed on the full list without building a sub-gallery.
inline double cgm_per_camera(const RelevanceList& rel, CameraId camera) {
  return discounted_mean(errors_before_targets(rel, camera));
}

struct CgmResult {
  double value = 0.0;
  std::map<CameraId, double> per_camera;
};

inline CgmResult cgm_query(const RelevanceList& rel) {
  detail::require_targets(rel);
  CgmResult result;
  double sum = 0.0;
  for (const auto& sub : build_camera_subgalleries(rel)) {
    const double score = cgm_per_camera(sub);
    result.per_camera.emplace(sub.camera, score);
    sum += score;
  }
  result.value = sum / static_cast<double>(result.per_camera.size());
  return result;
}

struct MeanResult {
  double mean = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
};

// Arithmetic mean over present values, summed in index order. Absent entries
// are queries without targets. Throws AllQueriesInvalid if none is present.
inline MeanResult mean_of_valid(std::span<const std::optional<double>> values) {
  MeanResult r;
  double sum = 0.0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++r.used;
    } else {
      ++r.excluded;
    }
  }
  if (r.used == 0) {
    throw Error(ErrorCode::AllQueriesInvalid,
                std::to_string(values.size()) + " queries, none with a target");
  }
  r.mean = sum / static_cast<double>(r.used);
  return r;
}

inline MeanResult mean_cgm(std::span<const std::optional<double>> per_query) {
  return mean_of_valid(per_query);
}

inline MeanResult mean_average_precision(std::span<const std::optional<double>> per_query) {
  return mean_of_valid(per_query);
}

enum class Measure { Cmc, Map, Mcgm };

struct EvalOptions {
  std::vector<std::size_t> cmc_ks{1, 5};
  std::vector<Measure> measures{Measure::Cmc, Measure::Map, Measure::Mcgm};
  bool per_query = false;
  std::size_t threads = 1;
};

struct QueryResult {
  std::string query_id;
  bool valid = false;
  double ap = 0.0;
  double cgm = 0.0;
  std::map<CameraId, double> per_camera;
  // 1-based rank of the first target; 0 when invalid.
  std::size_t first_hit = 0;
};

struct EvalReport {
  std::vector<std::pair<std::string, double>> measures;
  std::vector<QueryResult> per_query;
  std::size_t num_queries = 0;
  std::size_t num_valid = 0;
  std::vector<std::string> invalid_queries;

  std::optional<double> value(std::string_view name) const {
    for (const auto& [n, v] : measures) {
      if (n == name) return v;
    }
    return std::nullopt;
  }
};

inline std::string cmc_measure_name(std::size_t k) { return "cmc@" + std::to_string(k); }

namespace detail {

inline QueryResult evaluate_query(const RelevanceList& rel, std::string query_id) {
  QueryResult r;
  r.query_id = std::move(query_id);
  if (rel.num_targets() == 0) return r;
  r.valid = true;
  r.ap = average_precision(rel);
  auto cgm = cgm_query(rel);
  r.cgm = cgm.value;
  r.per_camera = std::move(cgm.per_camera);
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (rel.flags[i]) {
      r.first_hit = i + 1;
      break;
    }
  }
  return r;
}

}  // namespace detail

// Evaluates `rankings[i]` against query i of `d`. Rankings are used as given;
// apply filter_ranking first if the protocol filter has not been applied.
inline EvalReport evaluate_all(std::span<const RankedList> rankings, const Dataset& d,
                               const EvalOptions& options = {}) {
  if (rankings.size() != d.queries.size()) {
    throw Error(ErrorCode::CountMismatch, std::to_string(rankings.size()) +
                                              " rankings for " +
                                              std::to_string(d.queries.size()) + " queries");
  }
  for (std::size_t k : options.cmc_ks) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "CMC cutoff k must be >= 1");
  }
  std::vector<QueryResult> results(rankings.size());
  parallel_for(rankings.size(), options.threads, [&](std::size_t i) {
    const auto rel = relevance_from_ranking(rankings[i], d.queries[i], d.gallery);
    results[i] = detail::evaluate_query(rel, d.queries[i].image_id);
  });

  EvalReport report;
  report.num_queries = results.size();
  std::vector<std::optional<double>> aps(results.size());
  std::vector<std::optional<double>> cgms(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].valid) {
      aps[i] = results[i].ap;
      cgms[i] = results[i].cgm;
      ++report.num_valid;
    } else {
      report.invalid_queries.push_back(results[i].query_id);
    }
  }
  const double map = mean_average_precision(aps).mean;
  const double mcgm = mean_cgm(cgms).mean;

  for (Measure m : options.measures) {
    switch (m) {
      case Measure::Cmc:
        for (std::size_t k : options.cmc_ks) {
          std::size_t hits = 0;
          for (const auto& r : results) hits += r.valid && r.first_hit <= k;
          report.measures.emplace_back(
              cmc_measure_name(k),
              static_cast<double>(hits) / static_cast<double>(report.num_valid));
        }
        break;
      case Measure::Map:
        report.measures.emplace_back("map", map);
        break;
      case Measure::Mcgm:
        report.measures.emplace_back("mcgm", mcgm);
        break;
    }
  }
  if (options.per_query) report.per_query = std::move(results);
  return report;
}

inline std::string format_fixed(double value, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", decimals, value);
  return buffer;
}

// `measure,value` rows with 4 decimal places.
inline std::string format_report_csv(const EvalReport& report) {
  std::string out = "measure,value\n";
  for (const auto& [name, value] : report.measures) {
    out += name + "," + format_fixed(value, 4) + "\n";
  }
  return out;
}

inline std::string display_name(std::string_view measure) {
  if (measure.starts_with("cmc@")) return "CMC@" + std::string(measure.substr(4));
  if (measure == "map") return "mAP";
  if (measure == "mcgm") return "mCGM";
  return std::string(measure);
}

// Single-row markdown table laid out like a method comparison table.
inline std::string format_report_markdown(const EvalReport& report,
                                          std::string_view method = "Method") {
  std::string header = "| Method |";
  std::string rule = "|---|";
  std::string row = "| " + std::string(method) + " |";
  for (const auto& [name, value] : report.measures) {
    header += " " + display_name(name) + " |";
    rule += "---:|";
    row += " " + format_fixed(value, 4) + " |";
  }
  return header + "\n" + rule + "\n" + row + "\n";
}

// query_id,ap,cgm,num_cameras,per_camera where per_camera is
// `camera:score` pairs joined by ';'. Queries without targets leave the
// scores empty.
inline std::string format_per_query_csv(const EvalReport& report) {
  std::string out = "query_id,ap,cgm,num_cameras,per_camera\n";
  for (const auto& r : report.per_query) {
    out += r.query_id + ",";
    if (!r.valid) {
      out += ",,0,\n";
      continue;
    }
    out += format_fixed(r.ap, 4) + "," + format_fixed(r.cgm, 4) + "," +
           std::to_string(r.per_camera.size()) + ",";
    bool first = true;
    for (const auto& [camera, score] : r.per_camera) {
      if (!first) out += ';';
      first = false;
      out += std::to_string(to_int(camera)) + ":" + format_fixed(score, 4);
    }
    out += "\n";
  }
  return out;
}

}  // namespace reidkit
