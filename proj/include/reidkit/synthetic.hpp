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

// Synthetic relevance lists: the error-insertion sensitivity experiment and
// seeded random instances for oracle testing.

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "reidkit/error.hpp"
#include "reidkit/metrics.hpp"

namespace reidkit {

struct Scenario {
  std::string name;
  RelevanceList rel;
  std::string description;
};

// Where the error of an insertion step lands relative to the targeted
// camera's block of targets.
enum class InsertPosition {
  // Immediately before the block's first target.
  BeforeBlock,
  // After the first floor(n/2) targets of the block.
  Within,
};

inline InsertPosition parse_insert_position(std::string_view name) {
  if (name == "before") return InsertPosition::BeforeBlock;
  if (name == "within") return InsertPosition::Within;
  throw Error(ErrorCode::InvalidArgument, "unknown position '" + std::string(name) + "'");
}

// Inserted errors carry this camera label; it never owns a target.
inline constexpr CameraId kErrorCamera{0};

// cameras x targets_per_camera targets, contiguous per camera, cameras
// labelled 1..cameras in ascending order, no errors.
inline Scenario build_figure4_initial(std::size_t cameras = 10,
                                      std::size_t targets_per_camera = 10) {
  if (cameras == 0 || targets_per_camera == 0) {
    throw Error(ErrorCode::InvalidArgument, "cameras and targets per camera must be >= 1");
  }
  Scenario s;
  s.name = "figure4";
  s.description = std::to_string(cameras) + " cameras x " +
                  std::to_string(targets_per_camera) + " targets, no errors";
  for (std::size_t c = 1; c <= cameras; ++c) {
    for (std::size_t t = 0; t < targets_per_camera; ++t) {
      s.rel.flags.push_back(true);
      s.rel.cameras.push_back(CameraId{static_cast<std::uint32_t>(c)});
    }
  }
  return s;
}

// Number of cameras of a figure-4 scenario (largest target camera label).
inline std::size_t figure4_cameras(const Scenario& s) {
  std::uint32_t cameras = 0;
  for (std::size_t i = 0; i < s.rel.size(); ++i) {
    if (s.rel.flags[i]) cameras = std::max(cameras, to_int(s.rel.cameras[i]));
  }
  return cameras;
}

// Applies insertion step `step` (1-based): one error goes into the block of
// camera (cameras - step + 1), so step 1 hits the last camera and later steps
// walk toward the front. Existing items keep their relative order.
inline Scenario insert_error_back_to_front(const Scenario& s, std::size_t step,
                                           InsertPosition position = InsertPosition::BeforeBlock) {
  const std::size_t cameras = figure4_cameras(s);
  if (step < 1 || step > cameras) {
    throw Error(ErrorCode::StepOutOfRange, "step " + std::to_string(step) + " not in [1, " +
                                               std::to_string(cameras) + "]");
  }
  const CameraId target{static_cast<std::uint32_t>(cameras - step + 1)};

  std::vector<std::size_t> block;
  for (std::size_t i = 0; i < s.rel.size(); ++i) {
    if (s.rel.flags[i] && s.rel.cameras[i] == target) block.push_back(i);
  }
  if (block.empty()) {
    throw Error(ErrorCode::StepOutOfRange, "camera " + std::to_string(to_int(target)) +
                                               " has no targets");
  }
  const std::size_t at =
      position == InsertPosition::BeforeBlock ? block.front() : block[block.size() / 2];

  Scenario out = s;
  out.rel.flags.insert(out.rel.flags.begin() + static_cast<std::ptrdiff_t>(at), false);
  out.rel.cameras.insert(out.rel.cameras.begin() + static_cast<std::ptrdiff_t>(at),
                         kErrorCamera);
  out.description = s.description + "; step " + std::to_string(step) +
                    " error before position " + std::to_string(at);
  return out;
}

// Runs insertion steps 1..steps on a fresh figure-4 list.
inline Scenario figure4_after(std::size_t steps, std::size_t cameras = 10,
                              std::size_t targets_per_camera = 10,
                              InsertPosition position = InsertPosition::BeforeBlock) {
  Scenario s = build_figure4_initial(cameras, targets_per_camera);
  for (std::size_t step = 1; step <= steps; ++step) {
    s = insert_error_back_to_front(s, step, position);
  }
  return s;
}

// Deterministic for a given seed: length in [1, max_len], target/error coin
// flips, cameras in [1, max_cameras], at least one target.
inline Scenario generate_random_instance(std::uint64_t seed, std::size_t max_len,
                                         std::size_t max_cameras) {
  if (max_len == 0 || max_cameras == 0) {
    throw Error(ErrorCode::InvalidArgument, "max_len and max_cameras must be >= 1");
  }
  std::mt19937_64 rng(seed);
  // Modulo reduction keeps the sequence identical across standard libraries.
  auto draw = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  Scenario s;
  s.name = "random";
  s.description = "seed=" + std::to_string(seed) + " max_len=" + std::to_string(max_len) +
                  " max_cameras=" + std::to_string(max_cameras);
  const std::size_t len = 1 + draw(max_len);
  for (std::size_t i = 0; i < len; ++i) {
    s.rel.flags.push_back(draw(2) == 1);
    s.rel.cameras.push_back(CameraId{static_cast<std::uint32_t>(1 + draw(max_cameras))});
  }
  if (s.rel.num_targets() == 0) s.rel.flags[draw(len)] = true;
  return s;
}

struct CurvePoint {
  std::size_t errors = 0;
  double map = 0.0;
  double mcgm = 0.0;
};

struct SensitivityCurve {
  std::vector<CurvePoint> steps;
};

// Evaluates s0 and then each insertion step 1..steps, treating the list as a
// single query.
inline SensitivityCurve sensitivity_curve(const Scenario& s0, std::size_t steps,
                                          InsertPosition position = InsertPosition::BeforeBlock) {
  const std::size_t cameras = figure4_cameras(s0);
  if (steps > cameras) {
    throw Error(ErrorCode::StepOutOfRange, std::to_string(steps) + " steps for " +
                                               std::to_string(cameras) + " cameras");
  }
  SensitivityCurve curve;
  Scenario s = s0;
  for (std::size_t step = 0; step <= steps; ++step) {
    if (step > 0) s = insert_error_back_to_front(s, step, position);
    const std::optional<double> ap = average_precision(s.rel);
    const std::optional<double> cgm = cgm_query(s.rel).value;
    curve.steps.push_back({s.rel.size() - s.rel.num_targets(),
                           mean_average_precision({&ap, 1}).mean,
                           mean_cgm({&cgm, 1}).mean});
  }
  return curve;
}

// `errors,mAP,mCGM` with 6 decimal places.
inline std::string format_curve_csv(const SensitivityCurve& curve) {
  std::string out = "errors,mAP,mCGM\n";
  for (const auto& p : curve.steps) {
    out += std::to_string(p.errors) + "," + format_fixed(p.map, 6) + "," +
           format_fixed(p.mcgm, 6) + "\n";
  }
  return out;
}

}  // namespace reidkit
