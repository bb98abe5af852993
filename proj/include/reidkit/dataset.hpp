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

// Image metadata and embedding ingestion.
//
// Metadata is a CSV file with the header `image_id,identity_id,camera_id,role`.
// Records keep file order inside each role; row i of an embedding matrix
// belongs to the i-th record of the matching role.
//
// Embeddings use the little-endian REMB container:
//
//   bytes 0..3    magic "REMB"
//   bytes 4..7    u32 version (1)
//   bytes 8..11   u32 count
//   bytes 12..15  u32 dim
//   then count*dim f32 values, row-major.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "reidkit/error.hpp"
#include "reidkit/io.hpp"

namespace reidkit {

enum class IdentityId : std::uint32_t {};
enum class CameraId : std::uint32_t {};

constexpr std::uint32_t to_int(IdentityId id) { return static_cast<std::uint32_t>(id); }
constexpr std::uint32_t to_int(CameraId id) { return static_cast<std::uint32_t>(id); }

enum class Role { Query, Gallery };

struct ImageRecord {
  std::string image_id;
  IdentityId identity{};
  CameraId camera{};
  Role role = Role::Gallery;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// Dense count x dim matrix of finite floats.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::size_t count, std::size_t dim, std::vector<float> values)
      : count_(count), dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) {
      throw Error(ErrorCode::InvalidArgument, "embedding dim must be positive");
    }
    if (values_.size() != count_ * dim_) {
      throw Error(ErrorCode::CountMismatch,
                  "expected " + std::to_string(count_ * dim_) + " values, got " +
                      std::to_string(values_.size()));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw Error(ErrorCode::NonFiniteValue,
                    "row " + std::to_string(i / dim_) + ", col " +
                        std::to_string(i % dim_));
      }
    }
  }

  std::size_t count() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const float> values() const noexcept { return values_; }

  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(values_).subspan(i * dim_, dim_);
  }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

struct Dataset {
  std::vector<ImageRecord> queries;
  std::vector<ImageRecord> gallery;
  std::optional<EmbeddingMatrix> query_embeddings;
  std::optional<EmbeddingMatrix> gallery_embeddings;
};

constexpr std::string_view kMetadataHeader = "image_id,identity_id,camera_id,role";

namespace detail {

inline Error malformed(std::size_t line, const std::string& why) {
  return Error(ErrorCode::MalformedRow, "line " + std::to_string(line) + ": " + why);
}

inline std::optional<std::uint32_t> parse_u32(std::string_view text) {
  std::uint32_t value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

// Parses metadata CSV. Throws MalformedRow (with the 1-based line number),
// DuplicateImageId or EmptySplit.
inline Dataset parse_metadata(std::istream& in) {
  Dataset dataset;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      if (line != kMetadataHeader) {
        throw detail::malformed(line_no, "expected header '" +
                                             std::string(kMetadataHeader) + "'");
      }
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;

    const auto fields = detail::split(line, ',');
    if (fields.size() != 4) {
      throw detail::malformed(line_no, "expected 4 fields, got " +
                                           std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[0].find(':') != std::string_view::npos) {
      throw detail::malformed(line_no, "image_id must be non-empty and free of ':'");
    }
    const auto identity = detail::parse_u32(fields[1]);
    if (!identity) {
      throw detail::malformed(line_no, "identity_id '" + std::string(fields[1]) +
                                           "' is not a nonnegative integer");
    }
    const auto camera = detail::parse_u32(fields[2]);
    if (!camera) {
      throw detail::malformed(line_no, "camera_id '" + std::string(fields[2]) +
                                           "' is not a nonnegative integer");
    }
    Role role;
    if (fields[3] == "query") {
      role = Role::Query;
    } else if (fields[3] == "gallery") {
      role = Role::Gallery;
    } else {
      throw detail::malformed(line_no, "role must be 'query' or 'gallery'");
    }

    ImageRecord record{std::string(fields[0]), IdentityId{*identity},
                       CameraId{*camera}, role};
    if (!seen.insert(record.image_id).second) {
      throw Error(ErrorCode::DuplicateImageId,
                  "'" + record.image_id + "' at line " + std::to_string(line_no));
    }
    (role == Role::Query ? dataset.queries : dataset.gallery)
        .push_back(std::move(record));
  }
  if (!saw_header) throw detail::malformed(1, "missing header");
  if (dataset.queries.empty() || dataset.gallery.empty()) {
    throw Error(ErrorCode::EmptySplit,
                std::to_string(dataset.queries.size()) + " queries, " +
                    std::to_string(dataset.gallery.size()) + " gallery rows");
  }
  return dataset;
}

inline Dataset load_metadata(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  return parse_metadata(in);
}

// Queries first, then gallery; loading the result reproduces the records.
inline std::string serialize_metadata(const Dataset& dataset) {
  std::ostringstream out;
  out << kMetadataHeader << '\n';
  for (const auto* split : {&dataset.queries, &dataset.gallery}) {
    for (const auto& r : *split) {
      out << r.image_id << ',' << to_int(r.identity) << ',' << to_int(r.camera)
          << ',' << (r.role == Role::Query ? "query" : "gallery") << '\n';
    }
  }
  return std::move(out).str();
}

constexpr char kEmbeddingMagic[4] = {'R', 'E', 'M', 'B'};
constexpr std::uint32_t kEmbeddingVersion = 1;

// Decodes a REMB buffer. `expected_count` / `expected_dim` are checked when
// given (CountMismatch / DimMismatch).
inline EmbeddingMatrix decode_embeddings(std::string_view bytes,
                                         std::optional<std::size_t> expected_count,
                                         std::optional<std::size_t> expected_dim) {
  constexpr std::size_t kHeaderSize = 16;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "missing 'REMB' magic");
  }
  if (bytes.size() < kHeaderSize) {
    throw Error(ErrorCode::TruncatedFile, "header is " + std::to_string(bytes.size()) +
                                              " bytes, need 16");
  }
  auto read_u32 = [&](std::size_t offset) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + offset, sizeof v);
    return io::from_little_endian(v);
  };
  const std::uint32_t version = read_u32(4);
  const std::size_t count = read_u32(8);
  const std::size_t dim = read_u32(12);
  if (version != kEmbeddingVersion) {
    throw Error(ErrorCode::BadMagic, "unsupported version " + std::to_string(version));
  }
  if (dim == 0) {
    throw Error(ErrorCode::BadMagic, "dim must be positive");
  }
  if (expected_count && count != *expected_count) {
    throw Error(ErrorCode::CountMismatch, "file holds " + std::to_string(count) +
                                              " rows, metadata has " +
                                              std::to_string(*expected_count));
  }
  if (expected_dim && dim != *expected_dim) {
    throw Error(ErrorCode::DimMismatch, "file dim " + std::to_string(dim) +
                                            ", expected " + std::to_string(*expected_dim));
  }
  const std::size_t payload = count * dim * sizeof(float);
  if (bytes.size() - kHeaderSize < payload) {
    throw Error(ErrorCode::TruncatedFile,
                "payload is " + std::to_string(bytes.size() - kHeaderSize) +
                    " bytes, need " + std::to_string(payload));
  }
  if (bytes.size() - kHeaderSize > payload) {
    throw Error(ErrorCode::CountMismatch, "trailing bytes after payload");
  }
  std::vector<float> values(count * dim);
  for (std::size_t i = 0; i < values.size(); ++i) {
    float v;
    std::memcpy(&v, bytes.data() + kHeaderSize + i * sizeof(float), sizeof v);
    values[i] = io::from_little_endian(v);
  }
  return EmbeddingMatrix(count, dim, std::move(values));
}

inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                       std::optional<std::size_t> expected_count,
                                       std::optional<std::size_t> expected_dim = std::nullopt) {
  return decode_embeddings(io::read_file(path), expected_count, expected_dim);
}

inline std::string encode_embeddings(const EmbeddingMatrix& m) {
  std::string out(kEmbeddingMagic, 4);
  auto put_u32 = [&](std::uint32_t v) {
    v = io::to_little_endian(v);
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
  };
  put_u32(kEmbeddingVersion);
  put_u32(static_cast<std::uint32_t>(m.count()));
  put_u32(static_cast<std::uint32_t>(m.dim()));
  for (float v : m.values()) {
    v = io::to_little_endian(v);
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  return out;
}

inline void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  io::write_file_atomic(path, encode_embeddings(m));
}

// Loads metadata plus the query and gallery embedding files, checking row
// counts against the metadata and dims against each other.
inline Dataset load_dataset(const std::filesystem::path& metadata,
                            const std::filesystem::path& query_embeddings,
                            const std::filesystem::path& gallery_embeddings) {
  Dataset d = load_metadata(metadata);
  d.query_embeddings = load_embeddings(query_embeddings, d.queries.size());
  d.gallery_embeddings =
      load_embeddings(gallery_embeddings, d.gallery.size(), d.query_embeddings->dim());
  return d;
}

// Coverage diagnostics. Never throws and never modifies `d`.
//   "identity <id>: no targets"     query identity absent from the gallery
//   "identity <id>: single camera"  identity seen under one camera only
//   "camera <id>: singleton"        gallery camera holding a single image
inline std::vector<std::string> validate_dataset(const Dataset& d) {
  std::vector<std::string> warnings;

  std::set<IdentityId> gallery_ids;
  for (const auto& r : d.gallery) gallery_ids.insert(r.identity);
  std::set<IdentityId> missing;
  for (const auto& q : d.queries) {
    if (!gallery_ids.contains(q.identity)) missing.insert(q.identity);
  }
  for (auto id : missing) {
    warnings.push_back("identity " + std::to_string(to_int(id)) + ": no targets");
  }

  std::map<IdentityId, std::set<CameraId>> cameras_of;
  for (const auto* split : {&d.queries, &d.gallery}) {
    for (const auto& r : *split) cameras_of[r.identity].insert(r.camera);
  }
  for (const auto& [id, cams] : cameras_of) {
    if (cams.size() == 1) {
      warnings.push_back("identity " + std::to_string(to_int(id)) + ": single camera");
    }
  }

  std::map<CameraId, std::size_t> per_camera;
  for (const auto& r : d.gallery) ++per_camera[r.camera];
  for (const auto& [cam, n] : per_camera) {
    if (n == 1) warnings.push_back("camera " + std::to_string(to_int(cam)) + ": singleton");
  }
  return warnings;
}

}  // namespace reidkit
