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

// Kernel parameters on disk. Each matrix is its own REMB file (rows = count,
// cols = dim; vectors are 1 x n). A text manifest maps roles to files:
//
//   # comment
//   fusion.0.w_r = grm0_wr.remb
//   fusion.0.w_a = grm0_wa.remb
//   fusion.0.bn_scale = ...        (also bn_shift, bn_mean, bn_var)
//   regional.radii = radii.remb
//   regional.0.weight = r0_w.remb
//   regional.0.bias = r0_b.remb
//
// Relative paths resolve against the manifest's directory. Fusion steps and
// regions are numbered from 0 without gaps.

#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "reidkit/dataset.hpp"
#include "reidkit/error.hpp"
#include "reidkit/io.hpp"
#include "reidkit/relation_kernels.hpp"

namespace reidkit {

using ParamManifest = std::map<std::string, std::filesystem::path>;

inline ParamManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  ParamManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string_view{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw detail::malformed(line_no, "expected 'role = file'");
    const std::string role(trim(body.substr(0, eq)));
    const std::filesystem::path file(std::string(trim(body.substr(eq + 1))));
    if (role.empty() || file.empty()) throw detail::malformed(line_no, "empty role or file");
    if (!manifest.emplace(role, file.is_absolute() ? file : base_dir / file).second) {
      throw detail::malformed(line_no, "role '" + role + "' listed twice");
    }
  }
  return manifest;
}

inline ParamManifest load_manifest(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  return parse_manifest(in, path.parent_path());
}

inline Eigen::MatrixXd to_eigen(const EmbeddingMatrix& m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.count()), static_cast<Eigen::Index>(m.dim()));
  for (std::size_t i = 0; i < m.count(); ++i) {
    const auto row = m.row(i);
    for (std::size_t j = 0; j < m.dim(); ++j) out(i, j) = row[j];
  }
  return out;
}

inline EmbeddingMatrix from_eigen(const Eigen::MatrixXd& m) {
  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) values.push_back(static_cast<float>(m(i, j)));
  }
  return EmbeddingMatrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
                         std::move(values));
}

inline Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
  return to_eigen(load_embeddings(path, std::nullopt));
}

inline void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  save_embeddings(path, from_eigen(m));
}

namespace detail {

inline const std::filesystem::path& require_role(const ParamManifest& m, const std::string& role) {
  const auto it = m.find(role);
  if (it == m.end()) throw Error(ErrorCode::InvalidArgument, "manifest lacks role '" + role + "'");
  return it->second;
}

inline Eigen::VectorXd load_vector(const ParamManifest& m, const std::string& role) {
  const Eigen::MatrixXd v = load_matrix(require_role(m, role));
  if (v.rows() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "'" + role + "' must be a 1 x n matrix");
  }
  return v.row(0).transpose();
}

}  // namespace detail

// Fusion steps fusion.0, fusion.1, ... until the first missing w_r.
inline RelationModuleParams load_relation_module_params(const ParamManifest& m, double alpha) {
  RelationModuleParams p;
  p.alpha = alpha;
  for (std::size_t i = 0; m.contains("fusion." + std::to_string(i) + ".w_r"); ++i) {
    const std::string prefix = "fusion." + std::to_string(i) + ".";
    FusionParams step;
    step.w_r = load_matrix(detail::require_role(m, prefix + "w_r"));
    step.w_a = load_matrix(detail::require_role(m, prefix + "w_a"));
    step.bn_scale = detail::load_vector(m, prefix + "bn_scale");
    step.bn_shift = detail::load_vector(m, prefix + "bn_shift");
    step.bn_mean = detail::load_vector(m, prefix + "bn_mean");
    step.bn_var = detail::load_vector(m, prefix + "bn_var");
    step.validate();
    p.steps.push_back(std::move(step));
  }
  return p;
}

// Empty params (S = 0) when the manifest has no regional.radii.
inline RegionalParams load_regional_params(const ParamManifest& m) {
  RegionalParams p;
  if (!m.contains("regional.radii")) return p;
  const Eigen::VectorXd radii = detail::load_vector(m, "regional.radii");
  for (Eigen::Index k = 0; k < radii.size(); ++k) {
    const std::string prefix = "regional." + std::to_string(k) + ".";
    p.radii.push_back(radii(k));
    p.weights.push_back(load_matrix(detail::require_role(m, prefix + "weight")));
    p.biases.push_back(detail::load_vector(m, prefix + "bias"));
  }
  return p;
}

}  // namespace reidkit
