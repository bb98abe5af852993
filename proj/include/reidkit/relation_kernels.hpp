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

// Reference forward passes for center-region pooling and the graph relation
// module, evaluated with supplied (never trained) parameters.
//
// Relation pipeline, one node per row of V:
//
//   raw          A    = V V^T
//   thresholded  A'   = A where A >= alpha, else 0
//   row-normed        each nonzero row of A' divided by its sum
//   renormalized Â    = D^-1/2 (A' + I) D^-1/2,  D_ii = sum_j A'_ij + 1
//   fusion       O    = ReLU(BN(Dropout(Â V W_r))) + V W_a
//
// Each stage has its own matrix type, so the stages can only be chained in
// that order.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "reidkit/error.hpp"

namespace reidkit {

// ---------------------------------------------------------------------------
// Center masks and regional pooling

// W x H binary grid. Cell (x, y) uses image coordinates with the origin at
// the bottom-left corner: x grows to the right, y grows upward.
class CenterMask {
 public:
  CenterMask(int width, int height, double radius)
      : width_(width), height_(height), radius_(radius),
        cells_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
    const double cx = width / 2.0;
    const double cy = height / 2.0;
    const double r2 = radius * radius;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        if (dx * dx + dy * dy <= r2) {
          cells_[index(x, y)] = 1;
          ++count_;
        }
      }
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double radius() const noexcept { return radius_; }
  std::size_t count() const noexcept { return count_; }
  bool at(int x, int y) const { return cells_[index(x, y)] != 0; }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  double radius_;
  std::size_t count_ = 0;
  std::vector<std::uint8_t> cells_;
};

// Radii must be finite, nonnegative and non-decreasing (NonAscendingRadii).
inline std::vector<CenterMask> center_masks(int width, int height,
                                            std::span<const double> radii) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "mask size must be at least 1x1");
  }
  std::vector<CenterMask> masks;
  masks.reserve(radii.size());
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!std::isfinite(radii[k]) || radii[k] < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "radius " + std::to_string(k) +
                                                  " must be finite and >= 0");
    }
    if (k > 0 && radii[k] < radii[k - 1]) {
      throw Error(ErrorCode::NonAscendingRadii, "radius " + std::to_string(k) +
                                                    " is smaller than its predecessor");
    }
    masks.emplace_back(width, height, radii[k]);
  }
  return masks;
}

// Radii past half the image diagonal select the whole image; allowed, but
// reported.
inline std::vector<std::string> radius_warnings(int width, int height,
                                                std::span<const double> radii) {
  std::vector<std::string> warnings;
  const double half_diagonal = std::hypot(width, height) / 2.0;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (radii[k] > half_diagonal) {
      warnings.push_back("radius " + std::to_string(k) + " exceeds half the diagonal; mask covers the full image");
    }
  }
  return warnings;
}

// C x W x H feature map, same coordinate convention as CenterMask.
class FeatureMap {
 public:
  FeatureMap(int channels, int width, int height, double fill = 0.0)
      : channels_(channels), width_(width), height_(height),
        values_(static_cast<std::size_t>(channels) * width * height, fill) {
    if (channels < 1 || width < 1 || height < 1) {
      throw Error(ErrorCode::InvalidArgument, "feature map dims must be >= 1");
    }
  }

  int channels() const noexcept { return channels_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  double& at(int c, int x, int y) { return values_[index(c, x, y)]; }
  double at(int c, int x, int y) const { return values_[index(c, x, y)]; }

 private:
  std::size_t index(int c, int x, int y) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_;
  int width_;
  int height_;
  std::vector<double> values_;
};

// Per-channel mean over the whole map.
inline Eigen::VectorXd global_average_pool(const FeatureMap& f) {
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(f.channels());
  for (int c = 0; c < f.channels(); ++c) {
    double sum = 0.0;
    for (int y = 0; y < f.height(); ++y) {
      for (int x = 0; x < f.width(); ++x) sum += f.at(c, x, y);
    }
    pooled(c) = sum / (static_cast<double>(f.width()) * f.height());
  }
  return pooled;
}

// weight * (per-channel mean of f over the mask cells) + bias.
// `weight` is C' x C and `bias` has length C'.
inline Eigen::VectorXd masked_region_pool(const FeatureMap& f, const CenterMask& mask,
                                          const Eigen::MatrixXd& weight,
                                          const Eigen::VectorXd& bias) {
  if (mask.width() != f.width() || mask.height() != f.height()) {
    throw Error(ErrorCode::ShapeMismatch, "mask and feature map sizes differ");
  }
  if (weight.cols() != f.channels() || weight.rows() != bias.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "weight is " + std::to_string(weight.rows()) + "x" +
                    std::to_string(weight.cols()) + ", bias " + std::to_string(bias.size()) +
                    ", channels " + std::to_string(f.channels()));
  }
  if (mask.count() == 0) throw Error(ErrorCode::EmptyMask, "mask selects no cell");

  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(f.channels());
  for (int c = 0; c < f.channels(); ++c) {
    double sum = 0.0;
    for (int y = 0; y < f.height(); ++y) {
      for (int x = 0; x < f.width(); ++x) {
        if (mask.at(x, y)) sum += f.at(c, x, y);
      }
    }
    pooled(c) = sum / static_cast<double>(mask.count());
  }
  return weight * pooled + bias;
}

// S ascending radii with one affine map per region.
struct RegionalParams {
  std::vector<double> radii;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  // Throws on inconsistent sizes or radii that are not strictly ascending;
  // returns warnings for radii past half the diagonal.
  std::vector<std::string> validate(int width, int height) const {
    if (weights.size() != radii.size() || biases.size() != radii.size()) {
      throw Error(ErrorCode::ShapeMismatch, "need one weight and bias per radius");
    }
    for (std::size_t k = 1; k < radii.size(); ++k) {
      if (!(radii[k] > radii[k - 1])) {
        throw Error(ErrorCode::NonAscendingRadii, "radii must be strictly ascending");
      }
    }
    return radius_warnings(width, height, radii);
  }
};

inline std::vector<Eigen::VectorXd> regional_embeddings(const FeatureMap& f,
                                                        const RegionalParams& p) {
  p.validate(f.width(), f.height());
  const auto masks = center_masks(f.width(), f.height(), p.radii);
  std::vector<Eigen::VectorXd> out;
  out.reserve(masks.size());
  for (std::size_t k = 0; k < masks.size(); ++k) {
    out.push_back(masked_region_pool(f, masks[k], p.weights[k], p.biases[k]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Relation matrices

enum class RelationStage { Raw, Thresholded, RowNormalized, Renormalized };

namespace detail {
struct Unchecked {};
}  // namespace detail

template <RelationStage Stage>
class RelationMatrix {
 public:
  static constexpr RelationStage stage = Stage;

  // Validates the stage invariant:
  //   Raw           square, finite
  //   Thresholded   every entry is 0 or >= alpha (alpha >= 0)
  //   RowNormalized entries in [0, 1], each row sums to 1 or is all zero
  //   Renormalized  finite, nonnegative
  explicit RelationMatrix(Eigen::MatrixXd values, double alpha = 0.0)
      : values_(std::move(values)), alpha_(alpha) {
    validate();
  }

  RelationMatrix(detail::Unchecked, Eigen::MatrixXd values, double alpha)
      : values_(std::move(values)), alpha_(alpha) {}

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  double alpha() const noexcept { return alpha_; }
  Eigen::Index size() const noexcept { return values_.rows(); }

 private:
  void validate() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidArgument, why); };
    if (values_.rows() != values_.cols()) fail("relation matrix must be square");
    if (!values_.allFinite()) fail("relation matrix must be finite");
    if constexpr (Stage == RelationStage::Thresholded) {
      if (alpha_ < 0.0) fail("threshold must be >= 0");
      if (((values_.array() != 0.0) && (values_.array() < alpha_)).any()) {
        fail("thresholded matrix holds an entry below alpha");
      }
    } else if constexpr (Stage == RelationStage::RowNormalized) {
      if ((values_.array() < 0.0).any() || (values_.array() > 1.0).any()) {
        fail("row-normalized entries must lie in [0, 1]");
      }
      for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        const double s = values_.row(i).sum();
        if (s != 0.0 && std::abs(s - 1.0) > 1e-9) fail("row " + std::to_string(i) + " sums to " + std::to_string(s));
      }
    } else if constexpr (Stage == RelationStage::Renormalized) {
      if ((values_.array() < 0.0).any()) fail("renormalized matrix must be nonnegative");
    }
  }

  Eigen::MatrixXd values_;
  double alpha_;
};

using RawRelation = RelationMatrix<RelationStage::Raw>;
using ThresholdedRelation = RelationMatrix<RelationStage::Thresholded>;
using RowNormalizedRelation = RelationMatrix<RelationStage::RowNormalized>;
using RenormalizedRelation = RelationMatrix<RelationStage::Renormalized>;

// A = V V^T over the rows of V.
inline RawRelation similarity_matrix(const Eigen::MatrixXd& nodes) {
  if (!nodes.allFinite()) throw Error(ErrorCode::InvalidArgument, "node features must be finite");
  Eigen::MatrixXd a = nodes * nodes.transpose();
  // Force exact symmetry; the product's rounding need not be symmetric.
  a = ((a + a.transpose()) * 0.5).eval();
  return RawRelation(detail::Unchecked{}, std::move(a), 0.0);
}

// Keeps entries where keep(entry, alpha) holds and zeroes the rest. The
// default comparison is entry >= alpha; the parameter exists so the
// self-check can run against a deliberately broken comparison.
template <typename Keep = std::greater_equal<>>
ThresholdedRelation threshold_sparsify(const RawRelation& a, double alpha, Keep keep = {}) {
  if (!(alpha >= 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be >= 0");
  Eigen::MatrixXd out = a.values();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      if (!keep(out(i, j), alpha)) out(i, j) = 0.0;
    }
  }
  return ThresholdedRelation(detail::Unchecked{}, std::move(out), alpha);
}

// Divides every nonzero row by its sum; all-zero rows stay zero.
inline RowNormalizedRelation row_l1_normalize(const ThresholdedRelation& a) {
  Eigen::MatrixXd out = a.values();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double s = out.row(i).sum();
    if (s != 0.0) out.row(i) /= s;
  }
  return RowNormalizedRelation(detail::Unchecked{}, std::move(out), a.alpha());
}

// D^-1/2 (A + I) D^-1/2 with D_ii = sum_j A_ij + 1 >= 1.
inline RenormalizedRelation renormalize_adjacency(const RowNormalizedRelation& a) {
  const Eigen::Index n = a.size();
  Eigen::MatrixXd with_self = a.values() + Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd inv_sqrt_degree = with_self.rowwise().sum().array().rsqrt();
  Eigen::MatrixXd out = inv_sqrt_degree.asDiagonal() * with_self * inv_sqrt_degree.asDiagonal();
  return RenormalizedRelation(detail::Unchecked{}, std::move(out), a.alpha());
}

// A -> A' -> row L1 -> Â for the rows of `nodes`.
inline RenormalizedRelation relation_graph(const Eigen::MatrixXd& nodes, double alpha) {
  return renormalize_adjacency(row_l1_normalize(threshold_sparsify(similarity_matrix(nodes), alpha)));
}

// ---------------------------------------------------------------------------
// Relation fusion

// Eval-mode parameters of one fusion step. W_r and W_a are C_in x C_out; the
// batch-norm vectors have length C_out.
struct FusionParams {
  Eigen::MatrixXd w_r;
  Eigen::MatrixXd w_a;
  Eigen::VectorXd bn_scale;
  Eigen::VectorXd bn_shift;
  Eigen::VectorXd bn_mean;
  Eigen::VectorXd bn_var;
  bool dropout_active = false;

  Eigen::Index in_channels() const noexcept { return w_r.rows(); }
  Eigen::Index out_channels() const noexcept { return w_r.cols(); }

  // W_r = I, W_a = 0, identity batch norm.
  static FusionParams neutral(Eigen::Index channels) {
    return {Eigen::MatrixXd::Identity(channels, channels),
            Eigen::MatrixXd::Zero(channels, channels),
            Eigen::VectorXd::Ones(channels),
            Eigen::VectorXd::Zero(channels),
            Eigen::VectorXd::Zero(channels),
            Eigen::VectorXd::Ones(channels),
            false};
  }

  void validate() const {
    const Eigen::Index c_out = out_channels();
    if (w_a.rows() != w_r.rows() || w_a.cols() != c_out || bn_scale.size() != c_out ||
        bn_shift.size() != c_out || bn_mean.size() != c_out || bn_var.size() != c_out) {
      throw Error(ErrorCode::ShapeMismatch,
                  "fusion parameters disagree on channel counts (W_r is " +
                      std::to_string(w_r.rows()) + "x" + std::to_string(c_out) + ")");
    }
    if (!w_r.allFinite() || !w_a.allFinite() || !bn_scale.allFinite() ||
        !bn_shift.allFinite() || !bn_mean.allFinite() || !bn_var.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "fusion parameters must be finite");
    }
    if ((bn_var.array() <= 0.0).any()) {
      throw Error(ErrorCode::InvalidArgument, "batch-norm variance must be > 0");
    }
    if (dropout_active) {
      throw Error(ErrorCode::InvalidArgument, "dropout is only supported in eval mode");
    }
  }
};

// O = ReLU(BN(Â V W_r)) + V W_a, dropout being the identity in eval mode.
inline Eigen::MatrixXd relation_fusion_forward(const Eigen::MatrixXd& nodes,
                                               const RenormalizedRelation& adjacency,
                                               const FusionParams& p) {
  p.validate();
  if (adjacency.size() != nodes.rows() || p.in_channels() != nodes.cols()) {
    throw Error(ErrorCode::ShapeMismatch,
                "nodes " + std::to_string(nodes.rows()) + "x" + std::to_string(nodes.cols()) +
                    ", adjacency " + std::to_string(adjacency.size()) + ", W_r rows " +
                    std::to_string(p.in_channels()));
  }
  Eigen::MatrixXd x = adjacency.values() * nodes * p.w_r;
  const Eigen::ArrayXd gain = p.bn_scale.array() / p.bn_var.array().sqrt();
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    x.col(c) = ((x.col(c).array() - p.bn_mean(c)) * gain(c) + p.bn_shift(c)).max(0.0).matrix();
  }
  return x + nodes * p.w_a;
}

// Threshold plus the chained fusion steps; every step reuses the same Â.
struct RelationModuleParams {
  double alpha = 1e-3;
  std::vector<FusionParams> steps;
};

inline Eigen::MatrixXd relation_module_forward(const Eigen::MatrixXd& nodes,
                                               const RelationModuleParams& p) {
  if (p.steps.empty()) {
    throw Error(ErrorCode::InvalidArgument, "relation module needs at least one fusion step");
  }
  const auto adjacency = relation_graph(nodes, p.alpha);
  Eigen::MatrixXd x = nodes;
  for (const auto& step : p.steps) x = relation_fusion_forward(x, adjacency, step);
  return x;
}

// E = [lower levels..., flatten(G([high; global; regions...]))]. The relation
// module sees one node per vector, so high, global and regional vectors must
// share a length; its N x C_out output is appended row by row.
inline Eigen::VectorXd compose_final_embedding(std::span<const Eigen::VectorXd> lower_levels,
                                               const Eigen::VectorXd& high,
                                               const Eigen::VectorXd& global,
                                               std::span<const Eigen::VectorXd> regions,
                                               const RelationModuleParams& grm) {
  const Eigen::Index channels = high.size();
  if (global.size() != channels) {
    throw Error(ErrorCode::ShapeMismatch, "global vector length " +
                                              std::to_string(global.size()) + " != " +
                                              std::to_string(channels));
  }
  for (const auto& r : regions) {
    if (r.size() != channels) {
      throw Error(ErrorCode::ShapeMismatch, "regional vector length " +
                                                std::to_string(r.size()) + " != " +
                                                std::to_string(channels));
    }
  }
  Eigen::MatrixXd nodes(2 + static_cast<Eigen::Index>(regions.size()), channels);
  nodes.row(0) = high.transpose();
  nodes.row(1) = global.transpose();
  for (std::size_t k = 0; k < regions.size(); ++k) {
    nodes.row(2 + static_cast<Eigen::Index>(k)) = regions[k].transpose();
  }
  const Eigen::MatrixXd fused = relation_module_forward(nodes, grm);

  Eigen::Index length = fused.size();
  for (const auto& v : lower_levels) length += v.size();
  Eigen::VectorXd out(length);
  Eigen::Index at = 0;
  for (const auto& v : lower_levels) {
    out.segment(at, v.size()) = v;
    at += v.size();
  }
  for (Eigen::Index i = 0; i < fused.rows(); ++i) {
    out.segment(at, fused.cols()) = fused.row(i).transpose();
    at += fused.cols();
  }
  return out;
}

}  // namespace reidkit
