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

#include "reidkit/params.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"

namespace reidkit {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::Io;
}

ParamManifest parse(const std::string& text, const std::filesystem::path& base = "/base") {
  std::istringstream in(text);
  return parse_manifest(in, base);
}

TEST(ManifestTest, ResolvesRelativePaths) {
  const auto m = parse("# weights\n\nfusion.0.w_r = w.remb\n  abs = /tmp/x.remb  \n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("fusion.0.w_r"), std::filesystem::path("/base/w.remb"));
  EXPECT_EQ(m.at("abs"), std::filesystem::path("/tmp/x.remb"));
}

TEST(ManifestTest, RejectsMalformedLines) {
  EXPECT_EQ(error_of([] { parse("a = x\na = y\n"); }), ErrorCode::MalformedRow);
  EXPECT_EQ(error_of([] { parse("no equals sign\n"); }), ErrorCode::MalformedRow);
  EXPECT_EQ(error_of([] { parse(" = x\n"); }), ErrorCode::MalformedRow);
  EXPECT_EQ(error_of([] { load_manifest("/nonexistent/reidkit/manifest.txt"); }), ErrorCode::Io);
}

TEST(MatrixFileTest, RoundTrip) {
  testing::TempDir dir;
  MatrixXd m(2, 3);
  m << 1, 2, 3, -4, 0.5, 6;
  save_matrix(dir / "m.remb", m);
  EXPECT_EQ(load_matrix(dir / "m.remb"), m);
}

void write_fusion_step(const testing::TempDir& dir, std::string& manifest, int step, int c_in,
                       int c_out) {
  const std::string prefix = "fusion." + std::to_string(step) + ".";
  auto put = [&](const std::string& role, const MatrixXd& value) {
    save_matrix(dir / (role + ".remb"), value);
    manifest += role + " = " + role + ".remb\n";
  };
  put(prefix + "w_r", MatrixXd::Identity(c_in, c_out));
  put(prefix + "w_a", MatrixXd::Zero(c_in, c_out));
  put(prefix + "bn_scale", MatrixXd::Ones(1, c_out));
  put(prefix + "bn_shift", MatrixXd::Zero(1, c_out));
  put(prefix + "bn_mean", MatrixXd::Zero(1, c_out));
  put(prefix + "bn_var", MatrixXd::Ones(1, c_out));
}

TEST(LoadParamsTest, RelationModuleSteps) {
  testing::TempDir dir;
  std::string manifest;
  write_fusion_step(dir, manifest, 0, 3, 3);
  write_fusion_step(dir, manifest, 1, 3, 2);
  testing::write_text(dir / "params.txt", manifest);
  const auto p = load_relation_module_params(load_manifest(dir / "params.txt"), 0.25);
  EXPECT_EQ(p.alpha, 0.25);
  ASSERT_EQ(p.steps.size(), 2u);
  EXPECT_EQ(p.steps[1].out_channels(), 2);
  const MatrixXd out = relation_module_forward(MatrixXd::Ones(4, 3), p);
  EXPECT_EQ(out.rows(), 4);
  EXPECT_EQ(out.cols(), 2);
}

TEST(LoadParamsTest, MissingRoleAndBadVectorShape) {
  testing::TempDir dir;
  std::string manifest;
  write_fusion_step(dir, manifest, 0, 2, 2);
  auto m = load_manifest([&] {
    testing::write_text(dir / "params.txt", manifest);
    return dir / "params.txt";
  }());
  auto missing = m;
  missing.erase("fusion.0.bn_var");
  EXPECT_EQ(error_of([&] { load_relation_module_params(missing, 1e-3); }),
            ErrorCode::InvalidArgument);
  save_matrix(dir / "tall.remb", MatrixXd::Ones(2, 1));
  m["fusion.0.bn_mean"] = dir / "tall.remb";
  EXPECT_EQ(error_of([&] { load_relation_module_params(m, 1e-3); }), ErrorCode::ShapeMismatch);
}

TEST(LoadParamsTest, RegionalParams) {
  testing::TempDir dir;
  MatrixXd radii(1, 2);
  radii << 1.0, 2.5;
  save_matrix(dir / "radii.remb", radii);
  save_matrix(dir / "w.remb", MatrixXd::Identity(2, 2));
  save_matrix(dir / "b.remb", MatrixXd::Zero(1, 2));
  testing::write_text(dir / "params.txt",
                      "regional.radii = radii.remb\n"
                      "regional.0.weight = w.remb\nregional.0.bias = b.remb\n"
                      "regional.1.weight = w.remb\nregional.1.bias = b.remb\n");
  const auto p = load_regional_params(load_manifest(dir / "params.txt"));
  EXPECT_EQ(p.radii, (std::vector<double>{1.0, 2.5}));
  ASSERT_EQ(p.weights.size(), 2u);
  EXPECT_TRUE(p.validate(8, 8).empty());
  EXPECT_TRUE(load_regional_params(ParamManifest{}).radii.empty());
}

}  // namespace
}  // namespace reidkit
