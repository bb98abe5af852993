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

// Query-to-gallery distances, the evaluation protocol filter and ranked
// lists, plus the text ranking file
//
//   <query_image_id>:<g_id1>,<g_id2>,...
//
// with one line per query in rank order.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "reidkit/dataset.hpp"
#include "reidkit/error.hpp"
#include "reidkit/parallel.hpp"

namespace reidkit {

enum class DistanceMetric { Cosine, Euclidean };

// Standard drops gallery entries sharing both identity and camera with the
// query; None keeps the whole gallery.
enum class ProtocolFilter { Standard, None };

inline DistanceMetric parse_distance_metric(std::string_view name) {
  if (name == "cosine") return DistanceMetric::Cosine;
  if (name == "euclidean") return DistanceMetric::Euclidean;
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

inline ProtocolFilter parse_protocol_filter(std::string_view name) {
  if (name == "standard") return ProtocolFilter::Standard;
  if (name == "none") return ProtocolFilter::None;
  throw Error(ErrorCode::InvalidArgument, "unknown protocol '" + std::string(name) + "'");
}

class DistanceMatrix {
 public:
  DistanceMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols_, cols_);
  }
  std::span<double> row(std::size_t r) {
    return std::span<double>(values_).subspan(r * cols_, cols_);
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

namespace detail {

// f32 products, f64 accumulation.
inline double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i] * b[i]);
  return acc;
}

inline double squared_l2(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const float d = a[i] - b[i];
    acc += static_cast<double>(d * d);
  }
  return acc;
}

inline std::vector<double> row_norms(const EmbeddingMatrix& m, std::string_view side) {
  std::vector<double> norms(m.count());
  for (std::size_t i = 0; i < m.count(); ++i) {
    norms[i] = std::sqrt(dot(m.row(i), m.row(i)));
    if (norms[i] == 0.0) {
      throw Error(ErrorCode::ZeroNormRow, std::string(side) + " row " + std::to_string(i));
    }
  }
  return norms;
}

}  // namespace detail

// Precomputed gallery state for computing one query row at a time.
class DistanceEngine {
 public:
  DistanceEngine(const EmbeddingMatrix& gallery, DistanceMetric metric)
      : gallery_(&gallery), metric_(metric) {
    if (metric_ == DistanceMetric::Cosine) {
      gallery_norms_ = detail::row_norms(gallery, "gallery");
    }
  }

  DistanceMetric metric() const noexcept { return metric_; }

  // Fills out[j] with the distance from `query` to gallery row j. For cosine,
  // `query_norm` must be the query's nonzero L2 norm.
  void compute_row(std::span<const float> query, double query_norm,
                   std::span<double> out) const {
    if (query.size() != gallery_->dim()) {
      throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.size()) +
                                              " vs gallery dim " +
                                              std::to_string(gallery_->dim()));
    }
    for (std::size_t j = 0; j < gallery_->count(); ++j) {
      const auto g = gallery_->row(j);
      if (metric_ == DistanceMetric::Cosine) {
        const double cos = detail::dot(query, g) / (query_norm * gallery_norms_[j]);
        out[j] = std::clamp(1.0 - cos, 0.0, 2.0);
      } else {
        out[j] = std::sqrt(detail::squared_l2(query, g));
      }
    }
  }

 private:
  const EmbeddingMatrix* gallery_;
  DistanceMetric metric_;
  std::vector<double> gallery_norms_;
};

// |q| x |g| distances. Cosine distance is 1 - cos(a, b), clamped to [0, 2].
// Throws DimMismatch, or ZeroNormRow for cosine inputs with a zero row.
inline DistanceMatrix pairwise_distances(const EmbeddingMatrix& q, const EmbeddingMatrix& g,
                                         DistanceMetric metric, std::size_t threads = 1) {
  if (q.dim() != g.dim()) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(q.dim()) +
                                            " vs gallery dim " + std::to_string(g.dim()));
  }
  std::vector<double> query_norms(q.count(), 1.0);
  if (metric == DistanceMetric::Cosine) query_norms = detail::row_norms(q, "query");
  const DistanceEngine engine(g, metric);
  DistanceMatrix out(q.count(), g.count());
  parallel_for(q.count(), threads, [&](std::size_t i) {
    engine.compute_row(q.row(i), query_norms[i], out.row(i));
  });
  return out;
}

// Scales every row to unit L2 norm. Throws ZeroNormRow.
inline EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
  const auto norms = detail::row_norms(m, "embedding");
  std::vector<float> values(m.values().begin(), m.values().end());
  for (std::size_t i = 0; i < m.count(); ++i) {
    for (std::size_t c = 0; c < m.dim(); ++c) {
      values[i * m.dim() + c] = static_cast<float>(values[i * m.dim() + c] / norms[i]);
    }
  }
  return EmbeddingMatrix(m.count(), m.dim(), std::move(values));
}

inline bool excluded_by(ProtocolFilter filter, const ImageRecord& query,
                        const ImageRecord& candidate) {
  return filter == ProtocolFilter::Standard && candidate.identity == query.identity &&
         candidate.camera == query.camera;
}

// Indices of gallery entries kept for `query`, in gallery order.
inline std::vector<std::size_t> apply_protocol_filter(const ImageRecord& query,
                                                      std::span<const ImageRecord> gallery,
                                                      ProtocolFilter filter) {
  std::vector<std::size_t> retained;
  retained.reserve(gallery.size());
  for (std::size_t j = 0; j < gallery.size(); ++j) {
    if (!excluded_by(filter, query, gallery[j])) retained.push_back(j);
  }
  return retained;
}

struct RankedList {
  std::size_t query_index = 0;
  std::vector<std::size_t> ordered_gallery;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

// Sorts `retained` by ascending distance; equal distances keep ascending
// gallery index order.
inline RankedList rank_gallery(std::span<const double> distances,
                               std::span<const std::size_t> retained,
                               std::size_t query_index = 0) {
  RankedList list{query_index, {retained.begin(), retained.end()}};
  std::sort(list.ordered_gallery.begin(), list.ordered_gallery.end(),
            [&](std::size_t a, std::size_t b) {
              if (distances[a] != distances[b]) return distances[a] < distances[b];
              return a < b;
            });
  return list;
}

// Drops protocol-excluded entries from an existing ranking, keeping order.
inline RankedList filter_ranking(const RankedList& list, const ImageRecord& query,
                                 std::span<const ImageRecord> gallery, ProtocolFilter filter) {
  RankedList out{list.query_index, {}};
  out.ordered_gallery.reserve(list.ordered_gallery.size());
  for (std::size_t j : list.ordered_gallery) {
    if (!excluded_by(filter, query, gallery[j])) out.ordered_gallery.push_back(j);
  }
  return out;
}

// Ranks every query of a dataset with embeddings. Per-query work is spread
// over `threads` workers; the result does not depend on the thread count.
inline std::vector<RankedList> rank_all(const Dataset& d, DistanceMetric metric,
                                        ProtocolFilter filter, std::size_t threads = 1) {
  if (!d.query_embeddings || !d.gallery_embeddings) {
    throw Error(ErrorCode::InvalidArgument, "dataset has no embeddings");
  }
  const auto& q = *d.query_embeddings;
  const auto& g = *d.gallery_embeddings;
  if (q.dim() != g.dim()) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(q.dim()) +
                                            " vs gallery dim " + std::to_string(g.dim()));
  }
  if (q.count() != d.queries.size() || g.count() != d.gallery.size()) {
    throw Error(ErrorCode::CountMismatch, "embedding rows do not match metadata");
  }
  std::vector<double> query_norms(q.count(), 1.0);
  if (metric == DistanceMetric::Cosine) query_norms = detail::row_norms(q, "query");
  const DistanceEngine engine(g, metric);

  std::vector<RankedList> rankings(d.queries.size());
  parallel_for(d.queries.size(), threads, [&](std::size_t i) {
    std::vector<double> row(g.count());
    engine.compute_row(q.row(i), query_norms[i], row);
    const auto retained = apply_protocol_filter(d.queries[i], d.gallery, filter);
    rankings[i] = rank_gallery(row, retained, i);
  });
  return rankings;
}

inline std::string format_rankings(std::span<const RankedList> rankings, const Dataset& d) {
  std::string out;
  for (const auto& list : rankings) {
    out += d.queries.at(list.query_index).image_id;
    out += ':';
    for (std::size_t k = 0; k < list.ordered_gallery.size(); ++k) {
      if (k) out += ',';
      out += d.gallery.at(list.ordered_gallery[k]).image_id;
    }
    out += '\n';
  }
  return out;
}

// Parses a ranking file against `d`. The result is indexed by query position;
// every query must appear exactly once and every listed id must be a gallery
// image.
inline std::vector<RankedList> parse_rankings(std::istream& in, const Dataset& d) {
  std::unordered_map<std::string_view, std::size_t> query_index;
  std::unordered_map<std::string_view, std::size_t> gallery_index;
  for (std::size_t i = 0; i < d.queries.size(); ++i) query_index[d.queries[i].image_id] = i;
  for (std::size_t j = 0; j < d.gallery.size(); ++j) gallery_index[d.gallery[j].image_id] = j;

  std::vector<RankedList> rankings(d.queries.size());
  std::vector<bool> seen(d.queries.size(), false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw detail::malformed(line_no, "missing ':'");
    const std::string_view qid = std::string_view(line).substr(0, colon);
    const auto qit = query_index.find(qid);
    if (qit == query_index.end()) {
      throw Error(ErrorCode::UnknownImageId, "line " + std::to_string(line_no) +
                                                 ": query '" + std::string(qid) + "'");
    }
    if (seen[qit->second]) {
      throw Error(ErrorCode::DuplicateImageId, "line " + std::to_string(line_no) +
                                                   ": query '" + std::string(qid) +
                                                   "' ranked twice");
    }
    seen[qit->second] = true;

    RankedList& list = rankings[qit->second];
    list.query_index = qit->second;
    const std::string_view rest = std::string_view(line).substr(colon + 1);
    if (rest.empty()) continue;
    std::unordered_set<std::size_t> used;
    for (std::string_view gid : detail::split(rest, ',')) {
      const auto git = gallery_index.find(gid);
      if (git == gallery_index.end()) {
        throw Error(ErrorCode::UnknownImageId, "line " + std::to_string(line_no) +
                                                   ": gallery '" + std::string(gid) + "'");
      }
      if (!used.insert(git->second).second) {
        throw detail::malformed(line_no, "gallery '" + std::string(gid) + "' listed twice");
      }
      list.ordered_gallery.push_back(git->second);
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw Error(ErrorCode::CountMismatch,
                  "query '" + d.queries[i].image_id + "' missing from ranking file");
    }
  }
  return rankings;
}

inline std::vector<RankedList> load_rankings(const std::filesystem::path& path,
                                             const Dataset& d) {
  auto in = io::open_input(path);
  return parse_rankings(in, d);
}

}  // namespace reidkit
