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

#include <gtest/gtest.h>

#include <sstream>

#include "reidkit/dataset.hpp"
#include "reidkit/metrics.hpp"
#include "reidkit/ranking.hpp"
#include "test_util.hpp"

namespace reidkit {
namespace {

using testing::run_command;

std::string cli() { return std::string("\"") + REIDKIT_CLI + "\""; }

std::string quoted(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

// One query and three gallery images; g1 shares the query's camera and
// identity and is dropped by the standard protocol.
struct TinyWorld {
  testing::TempDir dir;
  TinyWorld() {
    testing::write_text(dir / "meta.csv", std::string(kMetadataHeader) +
                                              "\nq1,1,1,query\ng1,1,1,gallery\n"
                                              "g2,1,2,gallery\ng3,2,2,gallery\n");
    save_embeddings(dir / "q.remb", EmbeddingMatrix(1, 2, {1, 0}));
    save_embeddings(dir / "g.remb", EmbeddingMatrix(3, 2, {1, 0.1f, 0.8f, 0.6f, 0, 1}));
  }
  std::string rank_args() const {
    return " rank --metadata " + quoted(dir / "meta.csv") + " --query-emb " +
           quoted(dir / "q.remb") + " --gallery-emb " + quoted(dir / "g.remb");
  }
};

TEST(CliTest, RankWritesOneLinePerQuery) {
  TinyWorld w;
  const auto r = run_command(cli() + w.rank_args() + " --out " + quoted(w.dir / "r.txt"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(testing::read_text(w.dir / "r.txt"), "q1:g2,g3\n");

  const auto none = run_command(cli() + w.rank_args() + " --protocol none --out " +
                                quoted(w.dir / "all.txt"));
  ASSERT_EQ(none.exit_code, 0) << none.output;
  EXPECT_EQ(testing::read_text(w.dir / "all.txt"), "q1:g1,g2,g3\n");

  const auto euclid = run_command(cli() + w.rank_args() + " --metric euclidean --out " +
                                  quoted(w.dir / "e.txt"));
  ASSERT_EQ(euclid.exit_code, 0) << euclid.output;
  EXPECT_EQ(testing::read_text(w.dir / "e.txt"), "q1:g2,g3\n");
}

TEST(CliTest, RankRejectsMismatchedDims) {
  TinyWorld w;
  save_embeddings(w.dir / "g.remb", EmbeddingMatrix(3, 3, std::vector<float>(9, 1.0f)));
  const auto r = run_command(cli() + w.rank_args() + " --out " + quoted(w.dir / "r.txt"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("DimMismatch"), std::string::npos) << r.output;
  EXPECT_FALSE(std::filesystem::exists(w.dir / "r.txt"));
}

TEST(CliTest, MissingInputIsIoError) {
  TinyWorld w;
  const auto r = run_command(cli() + " rank --metadata " + quoted(w.dir / "absent.csv") +
                             " --query-emb x --gallery-emb y --out " + quoted(w.dir / "r.txt"));
  EXPECT_EQ(r.exit_code, 2) << r.output;
}

TEST(CliTest, BadUsageExitsOne) {
  EXPECT_EQ(run_command(cli() + " rank").exit_code, 1);
  EXPECT_EQ(run_command(cli() + " synth-fig4 --position sideways").exit_code, 1);
}

// Query q (identity 1, camera 0) and a gallery laid out as the worked list
// T(c1), F, T(c2), F, T(c1).
struct WorkedScenario {
  testing::TempDir dir;
  WorkedScenario() {
    testing::write_text(dir / "meta.csv", std::string(kMetadataHeader) +
                                              "\nq,1,0,query\na,1,1,gallery\nb,2,1,gallery\n"
                                              "c,1,2,gallery\nd,2,2,gallery\ne,1,1,gallery\n");
    testing::write_text(dir / "rank.txt", "q:a,b,c,d,e\n");
  }
  std::string eval_args() const {
    return " eval --metadata " + quoted(dir / "meta.csv") + " --ranking " + quoted(dir / "rank.txt");
  }
};

TEST(CliTest, EvalWorkedScenario) {
  WorkedScenario s;
  const auto r = run_command(cli() + s.eval_args() + " --out " + quoted(s.dir / "report.csv"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(testing::read_text(s.dir / "report.csv"),
            "measure,value\ncmc@1,1.0000\ncmc@5,1.0000\nmap,0.7556\nmcgm,0.5833\n");

  const auto stdout_only = run_command(cli() + s.eval_args() + " --measures map");
  ASSERT_EQ(stdout_only.exit_code, 0) << stdout_only.output;
  EXPECT_EQ(stdout_only.output, "measure,value\nmap,0.7556\n");
}

TEST(CliTest, EvalPerfectRanking) {
  WorkedScenario s;
  testing::write_text(s.dir / "rank.txt", "q:a,c,e,b,d\n");
  const auto r = run_command(cli() + s.eval_args() + " --cmc-k 1,3");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(r.output, "measure,value\ncmc@1,1.0000\ncmc@3,1.0000\nmap,1.0000\nmcgm,1.0000\n");
}

TEST(CliTest, EvalMarkdownAndPerQuery) {
  WorkedScenario s;
  const auto r = run_command(cli() + s.eval_args() + " --format markdown --name Ours --per-query " +
                             quoted(s.dir / "pq.csv"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(r.output,
            "| Method | CMC@1 | CMC@5 | mAP | mCGM |\n|---|---:|---:|---:|---:|\n"
            "| Ours | 1.0000 | 1.0000 | 0.7556 | 0.5833 |\n");
  EXPECT_EQ(testing::read_text(s.dir / "pq.csv"),
            "query_id,ap,cgm,num_cameras,per_camera\nq,0.7556,0.5833,2,1:0.6667;2:0.5000\n");
}

TEST(CliTest, EvalRejectsUnknownImage) {
  WorkedScenario s;
  testing::write_text(s.dir / "rank.txt", "q:a,zz\n");
  const auto r = run_command(cli() + s.eval_args());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("UnknownImageId"), std::string::npos) << r.output;
}

TEST(CliTest, RankThenEvalMatchesLibrary) {
  testing::TempDir dir;
  std::mt19937_64 rng(99);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  Dataset d;
  std::vector<float> q;
  std::vector<float> g;
  const std::size_t dim = 8;
  for (unsigned i = 0; i < 6; ++i) {
    d.queries.push_back({"q" + std::to_string(i), IdentityId{i}, CameraId{i % 3}, Role::Query});
    for (std::size_t k = 0; k < dim; ++k) q.push_back(noise(rng));
  }
  for (unsigned i = 0; i < 30; ++i) {
    d.gallery.push_back({"g" + std::to_string(i), IdentityId{i % 6}, CameraId{i % 4}, Role::Gallery});
    for (std::size_t k = 0; k < dim; ++k) g.push_back(noise(rng));
  }
  testing::write_text(dir / "meta.csv", serialize_metadata(d));
  d.query_embeddings = EmbeddingMatrix(6, dim, q);
  d.gallery_embeddings = EmbeddingMatrix(30, dim, g);
  save_embeddings(dir / "q.remb", *d.query_embeddings);
  save_embeddings(dir / "g.remb", *d.gallery_embeddings);

  const auto rank = run_command(cli() + " rank --metadata " + quoted(dir / "meta.csv") +
                                " --query-emb " + quoted(dir / "q.remb") + " --gallery-emb " +
                                quoted(dir / "g.remb") + " --out " + quoted(dir / "r.txt"));
  ASSERT_EQ(rank.exit_code, 0) << rank.output;
  const auto rankings = rank_all(d, DistanceMetric::Cosine, ProtocolFilter::Standard, 1);
  EXPECT_EQ(testing::read_text(dir / "r.txt"), format_rankings(rankings, d));

  const auto eval = run_command(cli() + " eval --metadata " + quoted(dir / "meta.csv") +
                                " --ranking " + quoted(dir / "r.txt"));
  ASSERT_EQ(eval.exit_code, 0) << eval.output;
  EXPECT_EQ(eval.output, format_report_csv(evaluate_all(rankings, d)));
}

TEST(CliTest, SynthFigure4) {
  testing::TempDir dir;
  const auto r = run_command(cli() + " synth-fig4 --out " + quoted(dir / "curve.csv"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("final mAP="), std::string::npos);
  const std::string csv = testing::read_text(dir / "curve.csv");
  std::istringstream in(csv);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 12u);
  EXPECT_EQ(lines[0], "errors,mAP,mCGM");
  EXPECT_EQ(lines[1], "0,1.000000,1.000000");
  EXPECT_EQ(lines[11].substr(0, 3), "10,");

  const auto one = run_command(cli() + " synth-fig4 --cameras 1 --out " + quoted(dir / "one.csv"));
  ASSERT_EQ(one.exit_code, 0) << one.output;
  EXPECT_EQ(testing::read_text(dir / "one.csv"),
            "errors,mAP,mCGM\n0,1.000000,1.000000\n1,0.798012,0.500000\n");
  EXPECT_EQ(run_command(cli() + " synth-fig4 --cameras 2 --steps 3").exit_code, 1);
}

TEST(CliTest, KernelSelfCheck) {
  const auto ok = run_command(cli() + " kernels selfcheck");
  EXPECT_EQ(ok.exit_code, 0) << ok.output;
  EXPECT_EQ(ok.output.find("FAIL"), std::string::npos) << ok.output;
  EXPECT_EQ(run_command(cli() + " kernels selfcheck --alpha 0").exit_code, 0);
  const auto broken = run_command(cli() + " kernels selfcheck --inject-fault threshold");
  EXPECT_EQ(broken.exit_code, 1);
  EXPECT_NE(broken.output.find("FAIL"), std::string::npos);
}

}  // namespace
}  // namespace reidkit
