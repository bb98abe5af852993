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

// Randomized invariant suite for the relation kernels, shared by the
// `kernels selfcheck` subcommand and the tests.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "reidkit/relation_kernels.hpp"

namespace reidkit {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// FlipThreshold swaps the threshold comparison for `<`, to confirm the suite
// notices a broken kernel.
enum class KernelFault { None, FlipThreshold };

struct SelfCheckOptions {
  double alpha = 1e-3;
  std::uint64_t seed = 20210401;
  int trials = 200;
  KernelFault fault = KernelFault::None;
};

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows,
                                     Eigen::Index cols, double lo, double hi) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(rng, lo, hi);
  }
  return m;
}

inline Eigen::Index random_size(std::mt19937_64& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

class PropertyRecorder {
 public:
  explicit PropertyRecorder(std::string name) : name_(std::move(name)) {}

  void expect(bool ok, const std::string& what) {
    if (!ok && passed_) {
      passed_ = false;
      detail_ = what;
    }
  }

  template <typename Fn>
  void run(Fn&& fn) {
    try {
      fn(*this);
    } catch (const std::exception& e) {
      expect(false, std::string("threw: ") + e.what());
    }
  }

  PropertyResult result() const { return {name_, passed_, detail_}; }

 private:
  std::string name_;
  bool passed_ = true;
  std::string detail_;
};

template <typename Keep>
RenormalizedRelation pipeline(const Eigen::MatrixXd& nodes, double alpha, Keep keep) {
  return renormalize_adjacency(row_l1_normalize(threshold_sparsify(similarity_matrix(nodes), alpha, keep)));
}

template <typename Keep>
std::vector<PropertyResult> run_selfcheck(const SelfCheckOptions& opt, Keep keep) {
  std::vector<PropertyResult> results;
  std::mt19937_64 rng(opt.seed);
  constexpr double kTol = 1e-12;

  {
    PropertyRecorder p("mask nesting");
    p.run([&](PropertyRecorder& r) {
      for (int t = 0; t < 20; ++t) {
        const int w = static_cast<int>(random_size(rng, 1, 40));
        const int h = static_cast<int>(random_size(rng, 1, 40));
        std::vector<double> radii(5);
        for (auto& radius : radii) radius = uniform(rng, 0.0, 30.0);
        std::sort(radii.begin(), radii.end());
        const auto masks = center_masks(w, h, radii);
        for (std::size_t k = 1; k < masks.size(); ++k) {
          for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
              r.expect(!masks[k - 1].at(x, y) || masks[k].at(x, y),
                       "mask " + std::to_string(k - 1) + " not inside mask " + std::to_string(k));
            }
          }
        }
      }
    });
    results.push_back(p.result());
  }

  {
    PropertyRecorder p("mask extremes");
    p.run([&](PropertyRecorder& r) {
      const CenterMask point(8, 8, 0.0);
      r.expect(point.count() == 1 && point.at(4, 4), "R=0 on 8x8 must select only (4,4)");
      const CenterMask all(8, 8, std::numeric_limits<double>::infinity());
      r.expect(all.count() == 64, "infinite radius must select all 64 cells");
      const CenterMask big(8, 8, 100.0);
      r.expect(big.count() == 64, "R=100 must select all 64 cells");
    });
    results.push_back(p.result());
  }

  {
    PropertyRecorder p("mask disc area");
    p.run([&](PropertyRecorder& r) {
      const CenterMask disc(64, 64, 16.0);
      const double ratio = static_cast<double>(disc.count()) / (std::numbers::pi * 16.0 * 16.0);
      r.expect(ratio >= 0.95 && ratio <= 1.05,
               "64x64 R=16 area ratio " + std::to_string(ratio) + " outside [0.95, 1.05]");
    });
    results.push_back(p.result());
  }

  {
    PropertyRecorder p("similarity symmetry and diagonal");
    p.run([&](PropertyRecorder& r) {
      for (int t = 0; t < opt.trials; ++t) {
        const Eigen::MatrixXd v =
            random_matrix(rng, random_size(rng, 1, 8), random_size(rng, 1, 6), -2.0, 2.0);
        const auto a = similarity_matrix(v).values();
        r.expect(a == a.transpose(), "similarity matrix not symmetric");
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
          const double norm2 = v.row(i).squaredNorm();
          r.expect(std::abs(a(i, i) - norm2) <= kTol * std::max(1.0, norm2),
                   "diagonal differs from squared norm");
        }
      }
    });
    results.push_back(p.result());
  }

  auto threshold_property = [&](const std::string& name, double alpha) {
    PropertyRecorder p(name);
    p.run([&](PropertyRecorder& r) {
      for (int t = 0; t < opt.trials; ++t) {
        const Eigen::MatrixXd v =
            random_matrix(rng, random_size(rng, 1, 8), random_size(rng, 1, 6), -1.0, 1.0);
        const auto raw = similarity_matrix(v);
        const auto out = threshold_sparsify(raw, alpha, keep).values();
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
          for (Eigen::Index j = 0; j < out.cols(); ++j) {
            const double a = raw.values()(i, j);
            const double expected = a >= alpha ? a : 0.0;
            r.expect(out(i, j) == expected, "entry " + std::to_string(a) +
                                                " mishandled");
          }
        }
      }
    });
    results.push_back(p.result());
  };
  char alpha_text[32];
  std::snprintf(alpha_text, sizeof alpha_text, "%g", opt.alpha);
  threshold_property(std::string("threshold at alpha=") + alpha_text, opt.alpha);
  threshold_property("threshold at alpha=0", 0.0);
  threshold_property("threshold at large alpha", 1e6);

  {
    PropertyRecorder p("row L1 sums");
    p.run([&](PropertyRecorder& r) {
      for (int t = 0; t < opt.trials; ++t) {
        const Eigen::MatrixXd v =
            random_matrix(rng, random_size(rng, 1, 8), random_size(rng, 1, 6), -1.0, 1.0);
        const auto a = row_l1_normalize(threshold_sparsify(similarity_matrix(v), opt.alpha, keep)).values();
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
          const double s = a.row(i).sum();
          r.expect(s == 0.0 || std::abs(s - 1.0) <= 1e-12, "row sums to " + std::to_string(s));
          r.expect(a.row(i).minCoeff() >= 0.0 && a.row(i).maxCoeff() <= 1.0,
                   "row entry outside [0, 1]");
        }
      }
    });
    results.push_back(p.result());
  }

  {
    PropertyRecorder p("renormalization bounds");
    p.run([&](PropertyRecorder& r) {
      for (Eigen::Index n = 1; n <= 4; ++n) {
        const auto id = renormalize_adjacency(RowNormalizedRelation(Eigen::MatrixXd::Zero(n, n))).values();
        r.expect(id == Eigen::MatrixXd::Identity(n, n), "zero matrix must map to the identity");
      }
      for (int t = 0; t < opt.trials; ++t) {
        const Eigen::MatrixXd v =
            random_matrix(rng, random_size(rng, 1, 8), random_size(rng, 1, 6), -1.0, 1.0);
        const auto a = pipeline(v, opt.alpha, keep).values();
        r.expect(a.allFinite(), "non-finite entry");
        r.expect(a.minCoeff() >= 0.0, "negative entry");
        r.expect(a.maxCoeff() <= 1.0 + 1e-12, "entry above 1");
      }
    });
    results.push_back(p.result());
  }

  {
    PropertyRecorder p("neutral fusion is ReLU");
    p.run([&](PropertyRecorder& r) {
      for (int t = 0; t < opt.trials; ++t) {
        const Eigen::Index n = random_size(rng, 1, 8);
        const Eigen::Index c = random_size(rng, 1, 6);
        const Eigen::MatrixXd v = random_matrix(rng, n, c, -2.0, 2.0);
        const RenormalizedRelation identity(Eigen::MatrixXd::Identity(n, n));
        const auto out = relation_fusion_forward(v, identity, FusionParams::neutral(c));
        r.expect(out == v.cwiseMax(0.0), "neutral parameters must reduce to ReLU(V)");
      }
    });
    results.push_back(p.result());
  }

  {
    PropertyRecorder p("scale behavior");
    p.run([&](PropertyRecorder& r) {
      for (int t = 0; t < opt.trials; ++t) {
        const Eigen::MatrixXd v =
            random_matrix(rng, random_size(rng, 1, 8), random_size(rng, 1, 6), -1.0, 1.0);
        const double s = uniform(rng, 0.1, 10.0);
        const auto a = similarity_matrix(v).values();
        const auto as = similarity_matrix(s * v).values();
        r.expect(as.isApprox(s * s * a, 1e-12) || (a.norm() == 0.0 && as.norm() == 0.0),
                 "scaling V by s must scale A by s^2");
        const auto n1 = row_l1_normalize(threshold_sparsify(similarity_matrix(v), 0.0, keep)).values();
        const auto n2 = row_l1_normalize(threshold_sparsify(similarity_matrix(s * v), 0.0, keep)).values();
        r.expect((n1 - n2).cwiseAbs().maxCoeff() <= 1e-12,
                 "row normalization must cancel uniform scaling");
      }
    });
    results.push_back(p.result());
  }

  {
    PropertyRecorder p("module forward finite");
    p.run([&](PropertyRecorder& r) {
      for (int t = 0; t < opt.trials / 4 + 1; ++t) {
        const Eigen::Index n = random_size(rng, 1, 6);
        const Eigen::Index c_in = random_size(rng, 1, 6);
        const Eigen::Index c_out = random_size(rng, 1, 6);
        FusionParams f{random_matrix(rng, c_in, c_out, -1.0, 1.0),
                       random_matrix(rng, c_in, c_out, -1.0, 1.0),
                       random_matrix(rng, c_out, 1, 0.5, 1.5),
                       random_matrix(rng, c_out, 1, -0.5, 0.5),
                       random_matrix(rng, c_out, 1, -0.5, 0.5),
                       random_matrix(rng, c_out, 1, 0.1, 2.0),
                       false};
        const Eigen::MatrixXd v = random_matrix(rng, n, c_in, -3.0, 3.0);
        const auto out = relation_fusion_forward(v, pipeline(v, opt.alpha, keep), f);
        r.expect(out.allFinite(), "fusion output not finite");
      }
    });
    results.push_back(p.result());
  }

  return results;
}

}  // namespace detail

inline std::vector<PropertyResult> run_kernel_selfcheck(const SelfCheckOptions& options = {}) {
  if (options.fault == KernelFault::FlipThreshold) {
    return detail::run_selfcheck(options, std::less<>{});
  }
  return detail::run_selfcheck(options, std::greater_equal<>{});
}

}  // namespace reidkit
