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

#include "reidkit/dataset.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

#include "test_util.hpp"

namespace reidkit {
namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_metadata(in);
}

ErrorCode parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::Io;
}

std::string header() { return std::string(kMetadataHeader) + "\n"; }

TEST(MetadataTest, ParsesRolesInFileOrder) {
  const auto d = parse(header() + "g1,4,2,gallery\nq1,4,1,query\ng0,5,3,gallery\n");
  ASSERT_EQ(d.queries.size(), 1u);
  ASSERT_EQ(d.gallery.size(), 2u);
  EXPECT_EQ(d.queries[0], (ImageRecord{"q1", IdentityId{4}, CameraId{1}, Role::Query}));
  EXPECT_EQ(d.gallery[0].image_id, "g1");
  EXPECT_EQ(d.gallery[1].image_id, "g0");
  EXPECT_EQ(d.gallery[1].camera, CameraId{3});
}

TEST(MetadataTest, RejectsDuplicateImageId) {
  EXPECT_EQ(parse_error(header() + "q1,1,1,query\ng7,1,2,gallery\ng7,2,2,gallery\n"),
            ErrorCode::DuplicateImageId);
}

TEST(MetadataTest, NonIntegerIdentityReportsLine) {
  try {
    parse(header() + "q1,1,1,query\nimg9,abc,2,gallery\n");
    FAIL() << "expected MalformedRow";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRow);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(MetadataTest, RejectsMalformedRows) {
  EXPECT_EQ(parse_error(header() + "q1,-1,1,query\ng1,1,1,gallery\n"), ErrorCode::MalformedRow);
  EXPECT_EQ(parse_error(header() + "q1,1,1,probe\ng1,1,1,gallery\n"), ErrorCode::MalformedRow);
  EXPECT_EQ(parse_error(header() + "q1,1,1\ng1,1,1,gallery\n"), ErrorCode::MalformedRow);
  EXPECT_EQ(parse_error(header() + "q:1,1,1,query\ng1,1,1,gallery\n"), ErrorCode::MalformedRow);
  EXPECT_EQ(parse_error("id,identity,camera,role\nq1,1,1,query\n"), ErrorCode::MalformedRow);
  EXPECT_EQ(parse_error(""), ErrorCode::MalformedRow);
}

TEST(MetadataTest, RejectsEmptySplits) {
  EXPECT_EQ(parse_error(header() + "g1,1,1,gallery\n"), ErrorCode::EmptySplit);
  EXPECT_EQ(parse_error(header() + "q1,1,1,query\n"), ErrorCode::EmptySplit);
}

TEST(MetadataTest, ToleratesCrlfAndBlankLines) {
  const auto d = parse(header() + "q1,1,1,query\r\n\ng1,1,2,gallery\r\n");
  EXPECT_EQ(d.queries.size(), 1u);
  EXPECT_EQ(d.gallery.size(), 1u);
}

TEST(MetadataTest, RoundTripPreservesRecords) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Dataset d;
    const int n = 2 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      const Role role = (i == 0) ? Role::Query : (i == 1 ? Role::Gallery : (rng() % 3 ? Role::Gallery : Role::Query));
      ImageRecord r{"img_" + std::to_string(rng() % 100000) + "_" + std::to_string(i),
                    IdentityId{static_cast<std::uint32_t>(rng() % 50)},
                    CameraId{static_cast<std::uint32_t>(rng() % 8)}, role};
      (role == Role::Query ? d.queries : d.gallery).push_back(r);
    }
    const auto again = parse(serialize_metadata(d));
    EXPECT_EQ(again.queries, d.queries);
    EXPECT_EQ(again.gallery, d.gallery);
  }
}

// Hand-built container (little-endian host), bypassing EmbeddingMatrix checks.
std::string raw_remb(std::uint32_t count, std::uint32_t dim, const std::vector<float>& values) {
  std::string out = "REMB";
  for (std::uint32_t v : {1u, count, dim}) out.append(reinterpret_cast<const char*>(&v), 4);
  out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
  return out;
}

ErrorCode decode_error(const std::string& bytes, std::optional<std::size_t> count,
                       std::optional<std::size_t> dim = std::nullopt) {
  try {
    decode_embeddings(bytes, count, dim);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::Io;
}

TEST(EmbeddingsTest, DecodesRowMajorMatrix) {
  const std::vector<float> v{1, 2, 3, 4, 5, 6, 7, 8};
  const auto m = decode_embeddings(encode_embeddings(EmbeddingMatrix(2, 4, v)), 2, 4);
  EXPECT_EQ(m.count(), 2u);
  EXPECT_EQ(m.dim(), 4u);
  EXPECT_EQ(m.row(1)[0], 5.0f);
  EXPECT_EQ(m.row(1)[3], 8.0f);
}

TEST(EmbeddingsTest, TruncatedPayload) {
  EXPECT_EQ(decode_error(raw_remb(2, 4, {1, 2, 3, 4, 5, 6, 7}), 2), ErrorCode::TruncatedFile);
  EXPECT_EQ(decode_error(std::string("REMB\x01\x00", 6), std::nullopt), ErrorCode::TruncatedFile);
}

TEST(EmbeddingsTest, NonFiniteValueReportsPosition) {
  std::vector<float> v(8, 1.0f);
  v[1 * 4 + 2] = std::numeric_limits<float>::quiet_NaN();
  try {
    decode_embeddings(raw_remb(2, 4, v), 2, std::nullopt);
    FAIL() << "expected NonFiniteValue";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteValue);
    EXPECT_NE(std::string(e.what()).find("row 1, col 2"), std::string::npos) << e.what();
  }
  v[1 * 4 + 2] = std::numeric_limits<float>::infinity();
  EXPECT_EQ(decode_error(raw_remb(2, 4, v), 2), ErrorCode::NonFiniteValue);
}

TEST(EmbeddingsTest, HeaderChecks) {
  std::string bad = raw_remb(1, 1, {1});
  bad[0] = 'X';
  EXPECT_EQ(decode_error(bad, 1), ErrorCode::BadMagic);
  EXPECT_EQ(decode_error("RE", 1), ErrorCode::BadMagic);
  std::string version = raw_remb(1, 1, {1});
  version[4] = 2;
  EXPECT_EQ(decode_error(version, 1), ErrorCode::BadMagic);
  EXPECT_EQ(decode_error(raw_remb(0, 0, {}), 0), ErrorCode::BadMagic);
  EXPECT_EQ(decode_error(raw_remb(2, 1, {1, 2}), 3), ErrorCode::CountMismatch);
  EXPECT_EQ(decode_error(raw_remb(1, 1, {1, 2}), 1), ErrorCode::CountMismatch);
  EXPECT_EQ(decode_error(raw_remb(1, 2, {1, 2}), 1, 3), ErrorCode::DimMismatch);
}

TEST(EmbeddingsTest, FileRoundTrip) {
  testing::TempDir dir;
  const EmbeddingMatrix m(3, 2, {0.5f, -1.0f, 2.0f, 3.25f, 1e-7f, -4.0f});
  save_embeddings(dir / "e.remb", m);
  EXPECT_EQ(load_embeddings(dir / "e.remb", 3, 2), m);
  try {
    load_embeddings(dir / "missing.remb", 3);
    FAIL() << "expected Io";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(EmbeddingsTest, LoadDatasetChecksAlignment) {
  testing::TempDir dir;
  testing::write_text(dir / "meta.csv", header() + "q1,1,1,query\ng1,1,2,gallery\ng2,2,2,gallery\n");
  save_embeddings(dir / "q.remb", EmbeddingMatrix(1, 2, {1, 0}));
  save_embeddings(dir / "g.remb", EmbeddingMatrix(2, 2, {1, 0, 0, 1}));
  save_embeddings(dir / "g3.remb", EmbeddingMatrix(2, 3, {1, 0, 0, 0, 1, 0}));
  const auto d = load_dataset(dir / "meta.csv", dir / "q.remb", dir / "g.remb");
  EXPECT_EQ(d.gallery_embeddings->count(), 2u);
  try {
    load_dataset(dir / "meta.csv", dir / "q.remb", dir / "g3.remb");
    FAIL() << "expected DimMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
  try {
    load_dataset(dir / "meta.csv", dir / "g.remb", dir / "g.remb");
    FAIL() << "expected CountMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CountMismatch);
  }
}

TEST(ValidateDatasetTest, QueryIdentityWithoutTargets) {
  const auto d = parse(header() + "q5,5,1,query\ng1,1,1,gallery\ng2,1,2,gallery\nq1,1,3,query\n");
  const auto w = validate_dataset(d);
  EXPECT_NE(std::find(w.begin(), w.end(), "identity 5: no targets"), w.end());
}

TEST(ValidateDatasetTest, CleanDatasetHasNoWarnings) {
  const auto d = parse(header() +
                       "q1,1,1,query\nq2,2,2,query\n"
                       "g1,1,1,gallery\ng2,1,2,gallery\ng3,2,1,gallery\ng4,2,2,gallery\n");
  EXPECT_TRUE(validate_dataset(d).empty());
}

TEST(ValidateDatasetTest, SingletonCameraAndSingleCameraIdentity) {
  const auto d = parse(header() +
                       "q1,1,1,query\ng1,1,2,gallery\ng2,1,1,gallery\ng3,7,3,gallery\n");
  const auto w = validate_dataset(d);
  EXPECT_NE(std::find(w.begin(), w.end(), "camera 3: singleton"), w.end());
  EXPECT_NE(std::find(w.begin(), w.end(), "identity 7: single camera"), w.end());
}

TEST(ValidateDatasetTest, DoesNotMutateInput) {
  const auto d = parse(header() + "q5,5,1,query\ng1,1,1,gallery\n");
  const Dataset copy = d;
  validate_dataset(d);
  EXPECT_EQ(d.queries, copy.queries);
  EXPECT_EQ(d.gallery, copy.gallery);
}

}  // namespace
}  // namespace reidkit
