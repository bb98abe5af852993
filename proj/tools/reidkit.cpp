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

// reidkit command-line front end.
//
//   reidkit rank    --metadata M --query-emb Q --gallery-emb G --out R
//   reidkit eval    --metadata M --ranking R [--out report.csv]
//   reidkit synth-fig4 --out curve.csv
//   reidkit kernels selfcheck
//
// Exit status: 0 success, 1 validation or metric error, 2 I/O error.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "reidkit/dataset.hpp"
#include "reidkit/error.hpp"
#include "reidkit/io.hpp"
#include "reidkit/metrics.hpp"
#include "reidkit/parallel.hpp"
#include "reidkit/params.hpp"
#include "reidkit/ranking.hpp"
#include "reidkit/selfcheck.hpp"
#include "reidkit/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct RankArgs {
  std::string metadata;
  std::string query_emb;
  std::string gallery_emb;
  std::string out;
  std::string metric = "cosine";
  std::string protocol = "standard";
  bool normalize = false;
};

struct EvalArgs {
  std::string metadata;
  std::string ranking;
  std::string out;
  std::string protocol = "standard";
  std::vector<std::size_t> cmc_ks{1, 5};
  std::vector<std::string> measures{"cmc", "map", "mcgm"};
  std::string format = "csv";
  std::string name = "Method";
  std::string per_query;
};

struct SynthArgs {
  std::string out;
  std::size_t cameras = 10;
  std::size_t targets_per_camera = 10;
  std::size_t steps = 0;
  bool steps_given = false;
  std::string position = "before";
};

struct SelfCheckArgs {
  double alpha = 1e-3;
  std::uint64_t seed = reidkit::SelfCheckOptions{}.seed;
  std::string inject_fault;
  std::string params;
};

void warn(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

void emit(const std::string& path, const std::string& contents) {
  if (path.empty()) {
    std::cout << contents;
  } else {
    reidkit::io::write_file_atomic(path, contents);
  }
}

int run_rank(const RankArgs& args) {
  auto dataset = reidkit::load_dataset(args.metadata, args.query_emb, args.gallery_emb);
  warn(reidkit::validate_dataset(dataset));
  if (args.normalize) {
    dataset.query_embeddings = reidkit::l2_normalize(*dataset.query_embeddings);
    dataset.gallery_embeddings = reidkit::l2_normalize(*dataset.gallery_embeddings);
  }
  const auto rankings = reidkit::rank_all(dataset, reidkit::parse_distance_metric(args.metric),
                                          reidkit::parse_protocol_filter(args.protocol),
                                          reidkit::configured_threads());
  reidkit::io::write_file_atomic(args.out, reidkit::format_rankings(rankings, dataset));
  return kExitOk;
}

std::vector<reidkit::Measure> parse_measures(const std::vector<std::string>& names) {
  std::vector<reidkit::Measure> out;
  for (const auto& n : names) {
    if (n == "cmc") {
      out.push_back(reidkit::Measure::Cmc);
    } else if (n == "map") {
      out.push_back(reidkit::Measure::Map);
    } else if (n == "mcgm") {
      out.push_back(reidkit::Measure::Mcgm);
    } else {
      throw reidkit::Error(reidkit::ErrorCode::InvalidArgument, "unknown measure '" + n + "'");
    }
  }
  return out;
}

int run_eval(const EvalArgs& args) {
  const auto dataset = reidkit::load_metadata(args.metadata);
  warn(reidkit::validate_dataset(dataset));
  const auto filter = reidkit::parse_protocol_filter(args.protocol);

  reidkit::EvalOptions options;
  options.measures = parse_measures(args.measures);
  options.cmc_ks = args.cmc_ks;
  options.per_query = !args.per_query.empty();
  options.threads = reidkit::configured_threads();
  for (auto m : options.measures) {
    if (m == reidkit::Measure::Cmc && options.cmc_ks.empty()) {
      throw reidkit::Error(reidkit::ErrorCode::InvalidArgument, "--cmc-k needs at least one k");
    }
  }
  if (args.format != "csv" && args.format != "markdown") {
    throw reidkit::Error(reidkit::ErrorCode::InvalidArgument,
                         "--format must be csv or markdown");
  }

  auto rankings = reidkit::load_rankings(args.ranking, dataset);
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    rankings[i] = reidkit::filter_ranking(rankings[i], dataset.queries[i], dataset.gallery, filter);
  }
  const auto report = reidkit::evaluate_all(rankings, dataset, options);
  if (!report.invalid_queries.empty()) {
    std::cerr << "warning: " << report.invalid_queries.size() << " of " << report.num_queries
              << " queries have no target and are excluded\n";
  }
  emit(args.out, args.format == "csv" ? reidkit::format_report_csv(report)
                                      : reidkit::format_report_markdown(report, args.name));
  if (options.per_query) {
    reidkit::io::write_file_atomic(args.per_query, reidkit::format_per_query_csv(report));
  }
  return kExitOk;
}

int run_synth_fig4(const SynthArgs& args) {
  const auto position = reidkit::parse_insert_position(args.position);
  const auto initial = reidkit::build_figure4_initial(args.cameras, args.targets_per_camera);
  const auto curve = reidkit::sensitivity_curve(
      initial, args.steps_given ? args.steps : args.cameras, position);
  emit(args.out, reidkit::format_curve_csv(curve));
  const auto& last = curve.steps.back();
  std::ostream& summary = args.out.empty() ? std::cerr : std::cout;
  summary << "final mAP=" << reidkit::format_fixed(last.map, 6)
            << " mCGM=" << reidkit::format_fixed(last.mcgm, 6) << '\n';
  return kExitOk;
}

int run_kernels_selfcheck(const SelfCheckArgs& args) {
  reidkit::SelfCheckOptions options;
  options.alpha = args.alpha;
  options.seed = args.seed;
  if (args.inject_fault == "threshold") {
    options.fault = reidkit::KernelFault::FlipThreshold;
  } else if (!args.inject_fault.empty()) {
    throw reidkit::Error(reidkit::ErrorCode::InvalidArgument,
                         "unknown fault '" + args.inject_fault + "'");
  }
  auto results = reidkit::run_kernel_selfcheck(options);

  if (!args.params.empty()) {
    const auto manifest = reidkit::load_manifest(args.params);
    reidkit::PropertyResult loaded{"parameter file forward", true, ""};
    try {
      const auto grm = reidkit::load_relation_module_params(manifest, args.alpha);
      if (grm.steps.empty()) {
        throw reidkit::Error(reidkit::ErrorCode::InvalidArgument, "no fusion.0 step in manifest");
      }
      const auto regional = reidkit::load_regional_params(manifest);
      const Eigen::Index channels = grm.steps.front().in_channels();
      const Eigen::MatrixXd nodes =
          Eigen::MatrixXd::Ones(2 + static_cast<Eigen::Index>(regional.radii.size()), channels);
      if (!reidkit::relation_module_forward(nodes, grm).allFinite()) {
        loaded = {loaded.name, false, "forward output not finite"};
      }
    } catch (const reidkit::Error& e) {
      loaded = {loaded.name, false, e.what()};
    }
    results.push_back(loaded);
  }

  bool all_passed = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.passed) std::cout << ": " << r.detail;
    std::cout << '\n';
    all_passed = all_passed && r.passed;
  }
  return all_passed ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera-aware retrieval evaluation: CMC, mAP and mCGM"};
  app.require_subcommand(1);

  RankArgs rank;
  auto* rank_cmd = app.add_subcommand("rank", "Rank the gallery for every query");
  rank_cmd->add_option("--metadata", rank.metadata, "Metadata CSV")->required();
  rank_cmd->add_option("--query-emb", rank.query_emb, "Query embeddings (REMB)")->required();
  rank_cmd->add_option("--gallery-emb", rank.gallery_emb, "Gallery embeddings (REMB)")->required();
  rank_cmd->add_option("--out", rank.out, "Ranking file to write")->required();
  rank_cmd->add_option("--metric", rank.metric, "cosine or euclidean")
      ->check(CLI::IsMember({"cosine", "euclidean"}));
  rank_cmd->add_option("--protocol", rank.protocol, "standard or none")
      ->check(CLI::IsMember({"standard", "none"}));
  rank_cmd->add_flag("--normalize", rank.normalize, "L2-normalize embeddings before ranking");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a ranking file");
  eval_cmd->add_option("--metadata", eval.metadata, "Metadata CSV")->required();
  eval_cmd->add_option("--ranking", eval.ranking, "Ranking file")->required();
  eval_cmd->add_option("--out", eval.out, "Report path (stdout when omitted)");
  eval_cmd->add_option("--protocol", eval.protocol, "standard or none")
      ->check(CLI::IsMember({"standard", "none"}));
  eval_cmd->add_option("--cmc-k", eval.cmc_ks, "CMC cutoffs, comma separated")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--measures", eval.measures, "Subset of cmc,map,mcgm")->delimiter(',');
  eval_cmd->add_option("--format", eval.format, "csv or markdown");
  eval_cmd->add_option("--name", eval.name, "Method name for the markdown row");
  eval_cmd->add_option("--per-query", eval.per_query, "Write a per-query breakdown CSV");

  SynthArgs synth;
  auto* synth_cmd =
      app.add_subcommand("synth-fig4", "Error-insertion sensitivity curve for mAP and mCGM");
  synth_cmd->add_option("--out", synth.out, "Curve CSV (stdout when omitted)");
  synth_cmd->add_option("--cameras", synth.cameras, "Number of cameras")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--targets-per-camera", synth.targets_per_camera, "Targets per camera")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--steps", synth.steps, "Insertion steps (default: one per camera)");
  synth_cmd->add_option("--position", synth.position, "before or within the camera block")
      ->check(CLI::IsMember({"before", "within"}));

  SelfCheckArgs check;
  auto* kernels_cmd = app.add_subcommand("kernels", "Relation kernel utilities");
  kernels_cmd->require_subcommand(1);
  auto* selfcheck_cmd = kernels_cmd->add_subcommand("selfcheck", "Run the kernel invariant suite");
  selfcheck_cmd->add_option("--alpha", check.alpha, "Relation threshold")
      ->check(CLI::NonNegativeNumber);
  selfcheck_cmd->add_option("--seed", check.seed, "Random seed");
  selfcheck_cmd->add_option("--params", check.params, "Parameter manifest to load and run");
  selfcheck_cmd->add_option("--inject-fault", check.inject_fault, "Test hook: 'threshold'")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  synth.steps_given = synth_cmd->count("--steps") > 0;

  try {
    if (*rank_cmd) return run_rank(rank);
    if (*eval_cmd) return run_eval(eval);
    if (*synth_cmd) return run_synth_fig4(synth);
    if (*selfcheck_cmd) return run_kernels_selfcheck(check);
  } catch (const reidkit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == reidkit::ErrorCode::Io ? kExitIo : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}
