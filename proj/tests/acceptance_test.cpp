/*
 * Copyright 2026 The ordiag Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ordiag/dataset.hpp"
#include "ordiag/decomposition.hpp"
#include "ordiag/human_test.hpp"
#include "ordiag/llm_annotator.hpp"
#include "ordiag/metrics.hpp"
#include "ordiag/simulator.hpp"
#include "support/cli_fixture.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

namespace {

using namespace ordiag;
namespace fs = std::filesystem;
using testing::Rational;
using testing::read_text;
using testing::run_cli;
using Clock = std::chrono::steady_clock;

// Collects failed checks for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (std::abs(got - want) <= tol) return;
    std::ostringstream s;
    s.precision(17);
    s << what << ": got " << got << ", want " << want << " (tol " << tol << ")";
    expect(false, s.str());
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::string out = std::to_string(failed_) + " failed check(s)";
    for (const auto& f : failures_) out += "; " + f;
    return out;
  }

 private:
  std::vector<std::string> failures_;
  int failed_ = 0;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string seconds(double s) {
  std::ostringstream o;
  o.precision(3);
  o << std::fixed << s << " s";
  return o.str();
}

// ---------------------------------------------------------------------------

std::string decomposition_algebra(Check& c) {
  std::mt19937_64 rng(20261014);
  std::uniform_int_distribution<int> count(0, 400);
  const auto start = Clock::now();
  for (int trial = 0; trial < 10000; ++trial) {
    auto profile = [&] {
      for (;;) {
        // Every fourth draw forces a zero bucket so degenerate shapes appear.
        int a = count(rng), b = count(rng), d = count(rng);
        if (rng() % 4 == 0) (rng() % 2 ? b : d) = 0;
        if (a + b + d > 0) return ErrorProfile::from_counts(a, b, d);
      }
    };
    const ErrorProfile m = profile();
    const ErrorProfile h = profile();
    const Decomposition dec = decompose(m, h);
    for (double v : dec.components()) c.expect(v >= 0.0, "component negative");
    c.near(dec.sum(), 1.0, 1e-12, "components sum");
    c.expect(dec.pT_boundary <= std::min(h.p_boundary(), m.p_boundary()) + 1e-15, "pT_boundary bound");
    c.expect(dec.pT_concept <= std::min(h.p_concept(), m.p_concept()) + 1e-15, "pT_concept bound");
  }
  const double t = seconds_since(start);
  c.expect(t < 5.0, "runtime " + seconds(t) + " >= 5 s");
  return "10000 pairs in " + seconds(t);
}

std::string worked_decomposition(Check& c) {
  // Model 0.6 / 0.3 / 0.1 from counts out of 10; human boundary 0.2 and
  // concept 0.05 from counts out of 20.
  const Decomposition d = decompose(ErrorProfile::from_counts(6, 3, 1), ErrorProfile::from_counts(15, 4, 1));
  auto shared = [](Rational h, Rational m) { return h * m / (h + m); };
  const Rational tb = shared(Rational(2, 10), Rational(3, 10));
  const Rational tc = shared(Rational(5, 100), Rational(1, 10));
  c.expect(tb == Rational(12, 100), "boundary share oracle");
  c.expect(tc == Rational(1, 30), "concept share oracle");
  c.near(d.p_correct, Rational(6, 10).to_double(), 0.0, "p_correct");
  c.near(d.pT_boundary, tb.to_double(), 1e-15, "pT_boundary");
  c.near(d.pM_boundary, (Rational(3, 10) - tb).to_double(), 1e-15, "pM_boundary");
  c.near(d.pT_concept, tc.to_double(), 1e-15, "pT_concept");
  c.near(d.pM_concept, (Rational(1, 10) - tc).to_double(), 1e-15, "pM_concept");
  c.near(d.pM_concept, 1.0 / 15.0, 1e-15, "pM_concept = 1/15");
  return "(0.6, 0.12, 0.18, 1/30, 1/15)";
}

std::string degenerate_cases(Check& c) {
  const Decomposition no_human_error =
      decompose(ErrorProfile::from_counts(5, 3, 2), ErrorProfile::from_counts(40, 0, 0));
  c.expect(no_human_error.pT_boundary == 0.0 && no_human_error.pT_concept == 0.0, "human exact => no task share");
  c.expect(no_human_error.pM_boundary == 0.3 && no_human_error.pM_concept == 0.2, "all model-specific");
  const Decomposition no_model_error =
      decompose(ErrorProfile::from_counts(10, 0, 0), ErrorProfile::from_counts(3, 4, 5));
  c.expect(no_model_error.p_correct == 1.0, "model exact => p_correct 1");
  for (double v : {no_model_error.pT_boundary, no_model_error.pM_boundary, no_model_error.pT_concept,
                   no_model_error.pM_concept}) {
    c.expect(v == 0.0, "model exact => zero error components");
  }
  c.expect(share_task_driven(0.0, 0.0) == 0.0, "0/0 share is 0");
  return "zero human error, zero model error";
}

std::string alpha_exhaustive(Check& c) {
  const auto start = Clock::now();
  long matrices = 0, defined = 0;
  for (int coders = 1; coders <= 3; ++coders) {
    for (int units = 1; units <= 4; ++units) {
      const int cells = coders * units;
      long total = 1;
      for (int i = 0; i < cells; ++i) total *= 4;
      ReliabilityMatrix m(static_cast<std::size_t>(units), std::vector<std::optional<int>>(coders));
      for (long code = 0; code < total; ++code) {
        long rest = code;
        for (auto& unit : m) {
          for (auto& v : unit) {
            const int d = static_cast<int>(rest % 4);
            rest /= 4;
            v = d == 0 ? std::nullopt : std::optional<int>(d);
          }
        }
        ++matrices;
        for (bool ordinal : {false, true}) {
          const auto lib = try_krippendorff_alpha(m, ordinal ? AlphaDifference::Ordinal : AlphaDifference::Nominal);
          const auto ref = testing::alpha_by_pair_enumeration(m, ordinal);
          if (lib.has_value() != ref.has_value()) {
            c.expect(false, "definedness differs at code " + std::to_string(code));
          } else if (lib) {
            ++defined;
            if (std::abs(*lib - *ref) > 1e-9) c.near(*lib, *ref, 1e-9, "alpha at code " + std::to_string(code));
          }
        }
      }
    }
  }
  const double t = seconds_since(start);
  c.expect(t < 60.0, "runtime " + seconds(t) + " >= 60 s");
  return std::to_string(matrices) + " matrices, " + std::to_string(defined) + " defined values, " + seconds(t);
}

// Kappa from a contingency table in exact arithmetic. `weight(i, j)` is the
// disagreement weight.
Rational kappa_oracle(const std::vector<std::vector<int>>& t, const std::function<std::int64_t(int, int)>& weight) {
  const int k = static_cast<int>(t.size());
  std::vector<std::int64_t> rows(k, 0), cols(k, 0);
  std::int64_t n = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      rows[i] += t[i][j];
      cols[j] += t[i][j];
      n += t[i][j];
    }
  }
  Rational observed, expected;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      observed = observed + Rational(weight(i, j) * t[i][j], n);
      expected = expected + Rational(weight(i, j) * rows[i] * cols[j], n * n);
    }
  }
  return Rational(1) - observed / expected;
}

std::string kappa_fixtures(Check& c) {
  const std::vector<std::vector<std::vector<int>>> tables = {
      {{20, 5}, {10, 15}},
      {{0, 0, 5}, {0, 0, 0}, {5, 0, 0}},
      {{5, 2, 0, 0}, {1, 5, 2, 0}, {0, 1, 5, 2}, {0, 0, 1, 5}},
      {{9, 3, 1}, {2, 7, 4}, {0, 2, 8}},
  };
  auto nominal = [](int i, int j) -> std::int64_t { return i == j ? 0 : 1; };
  auto linear = [](int i, int j) -> std::int64_t { return std::abs(i - j); };
  auto quadratic = [](int i, int j) -> std::int64_t { return (i - j) * (i - j); };
  // Fixed hand-worked values for the first table and the third.
  c.expect(kappa_oracle(tables[0], nominal) == Rational(2, 5), "2x2 hand value 0.4");
  c.expect(kappa_oracle(tables[2], nominal) == Rational(368, 629), "4x4 hand value 368/629");
  c.expect(kappa_oracle(tables[2], linear) == Rational(746, 1007), "4x4 linear 746/1007");
  c.expect(kappa_oracle(tables[2], quadratic) == Rational(1672, 1933), "4x4 quadratic 1672/1933");
  int n = 0;
  for (const auto& t : tables) {
    const LabelSet s = testing::set_from_table(t);
    const std::string id = "table " + std::to_string(n++);
    c.near(cohen_kappa(s).value, kappa_oracle(t, nominal).to_double(), 1e-12, id + " unweighted");
    c.near(weighted_kappa(s, KappaWeighting::Linear).value, kappa_oracle(t, linear).to_double(), 1e-12,
           id + " linear");
    c.near(weighted_kappa(s, KappaWeighting::Quadratic).value, kappa_oracle(t, quadratic).to_double(), 1e-12,
           id + " quadratic");
  }
  return std::to_string(tables.size()) + " tables x {unweighted, linear, quadratic}";
}

std::string simulator_convergence(Check& c) {
  struct Fixture {
    int levels;
    DisplacementKernel task, model, human;
  };
  const std::vector<Fixture> fixtures = {
      {4, DisplacementKernel({{0, 0.8}, {-1, 0.1}, {1, 0.1}}), DisplacementKernel({{0, 0.7}, {1, 0.3}}),
       DisplacementKernel()},
      {5, DisplacementKernel({{-2, 0.05}, {-1, 0.1}, {0, 0.7}, {1, 0.15}}),
       DisplacementKernel({{-1, 0.2}, {0, 0.6}, {1, 0.1}, {2, 0.1}}), DisplacementKernel({{0, 0.9}, {-1, 0.1}})},
      {3, DisplacementKernel(), DisplacementKernel({{0, 0.5}, {2, 0.25}, {-2, 0.25}}),
       DisplacementKernel({{0, 0.85}, {1, 0.15}})},
      {7, DisplacementKernel::mixture(0.4, {{-1, 1}, {1, 1}}), DisplacementKernel::mixture(0.2, {{-3, 1}, {3, 1}}),
       DisplacementKernel::mixture(0.1, {{-2, 1}, {1, 2}})},
      {2, DisplacementKernel({{0, 0.75}, {1, 0.25}}), DisplacementKernel({{0, 0.9}, {-1, 0.1}}),
       DisplacementKernel({{0, 0.6}, {-1, 0.2}, {1, 0.2}})},
  };
  const auto start = Clock::now();
  int n = 0;
  for (const Fixture& f : fixtures) {
    SimConfig cfg;
    cfg.task_id = "conv" + std::to_string(n);
    cfg.scale = OrdinalScale::with_levels(f.levels);
    cfg.n_items = 100000;
    cfg.seed = 1000 + static_cast<std::uint64_t>(n);
    cfg.task_kernel = f.task;
    cfg.model_kernel = f.model;
    cfg.human_kernel = f.human;
    const SimulatedSets s = simulate(cfg);
    for (SimArm arm : {SimArm::Model, SimArm::Human}) {
      const ProfileExpectation e = analytic_profile(cfg, arm);
      const ErrorProfile p = error_profile(arm == SimArm::Model ? s.model : s.human, s.dataset.gold);
      const std::string id = cfg.task_id + (arm == SimArm::Model ? " model" : " human");
      c.near(p.p_correct(), e.p_correct, 0.01, id + " correct");
      c.near(p.p_boundary(), e.p_boundary, 0.01, id + " boundary");
      c.near(p.p_concept(), e.p_concept, 0.01, id + " concept");
    }
    ++n;
  }
  const double t = seconds_since(start);
  c.expect(t < 10.0, "runtime " + seconds(t) + " >= 10 s");
  return "5 kernels at n=100000 in " + seconds(t);
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_text(e.path());
  }
  return out;
}

std::string end_to_end_determinism(Check& c) {
  testing::TempDir dir;
  testing::write_text(dir / "sim.json", R"({"task_id": "e2e", "levels": 5, "n_items": 500, "seed": 77,
    "task_kernel": {"0": 0.75, "-1": 0.15, "1": 0.1}, "model_kernel": {"0": 0.8, "1": 0.1, "2": 0.1},
    "human_kernel": {"0": 0.9, "-1": 0.1}, "sweep": {"magnitudes": [0.0, 0.1, 0.2]}})");
  std::vector<std::map<std::string, std::string>> trees;
  for (const char* name : {"run_a", "run_b"}) {
    const std::string out = (dir / name).string();
    for (std::vector<std::string> args : {std::vector<std::string>{"simulate", "--config", (dir / "sim.json").string()},
                                          std::vector<std::string>{"decompose", "--resamples", "200", "--seed", "5"},
                                          std::vector<std::string>{"report"}}) {
      args.push_back("--out");
      args.push_back(out);
      const auto r = run_cli(args);
      c.expect(r.code == 0, args[0] + " exited " + std::to_string(r.code) + ": " + r.err);
    }
    trees.push_back(tree_contents(dir / name));
  }
  int json_csv = 0;
  for (const auto& [path, text] : trees[0]) {
    const auto ext = fs::path(path).extension();
    if (ext == ".json" || ext == ".csv" || ext == ".jsonl") ++json_csv;
  }
  c.expect(!trees[0].empty() && trees[0] == trees[1], "output trees differ");
  c.expect(trees[0].count("reports/e2e/summary.json") && trees[0].count("reports/correlations.csv") &&
               trees[0].count("decompositions/e2e/sim-model/zero_shot.json"),
           "expected outputs missing");
  return std::to_string(trees[0].size()) + " files (" + std::to_string(json_csv) + " JSON/CSV) identical";
}

std::string structural_defaults(Check& c) {
  c.expect(kGroundTruthSampleSize == 150, "ground-truth size");
  c.expect(kHumanTestSampleSize == 40, "human-test size");
  c.expect(kHumanTestRoundSize == 20 && HumanTestConfig{}.round_size == 20, "round size");
  c.expect(Strategy::of(StrategyKind::SelfConsistency).sc_samples == 5, "self-consistency samples");
  c.expect(kActivePoolSize == 20 && Strategy::of(StrategyKind::ActivePrompting).active_pool_size == 20,
           "active pool size");

  // The same numbers through the command line with no sample block.
  testing::TempDir dir;
  testing::write_task_files(dir / "data", "defaults", 60);
  nlohmann::json config{{"seed", 3},
                        {"out", "out"},
                        {"tasks", {{{"task", "data/task.json"}, {"items", "data/items.jsonl"}, {"gold", "data/gold.jsonl"}}}}};
  testing::write_text(dir / "config.json", config.dump());
  const auto r = run_cli({"sample", "--config", (dir / "config.json").string()});
  c.expect(r.code == 0, "sample exited " + std::to_string(r.code) + ": " + r.err);
  const fs::path samples = dir / "out/samples/defaults";
  const Dataset gt = load_dataset_dir(samples / "ground_truth");
  const Dataset human = load_dataset_dir(samples / "human_test");
  const Dataset pool = load_dataset_dir(samples / "active_pool");
  c.expect(gt.items.size() == 150, "sampled ground truth has " + std::to_string(gt.items.size()));
  c.expect(human.items.size() == 40, "sampled human test has " + std::to_string(human.items.size()));
  c.expect(pool.items.size() == 20, "sampled pool has " + std::to_string(pool.items.size()));

  HumanTestConfig ht;
  ht.data_dir = dir / "out";
  ht.tasks = {human};
  ht.seed = 3;
  HumanTestService service(ht);
  const Session s = service.open_session("ann1", "defaults");
  c.expect(s.total() == 40 && s.batches.size() == 2 && s.batches[0].size() == 20 && s.round_of(19) == 1 &&
               s.round_of(20) == 2,
           "two rounds of 20");
  return "150 / 40 in 2x20 / 5 samples / 20-item pool";
}

std::string mock_endpoint_run(Check& c) {
  testing::TempDir dir;
  testing::MockOpenAiServer server;
  testing::write_project(dir.path(), server.base_url(), {"self_consistency"});
  const std::string config = (dir / "config.json").string();
  c.expect(run_cli({"sample", "--config", config}).code == 0, "sample failed");
  const auto cold = run_cli({"annotate", "--config", config});
  c.expect(cold.code == 0, "cold annotate failed: " + cold.err);
  const int cold_requests = server.requests();

  const fs::path run = dir / "out/runs/fluency/mock-model/self_consistency";
  const Dataset gt = load_dataset_dir(dir / "out/samples/fluency/ground_truth");
  const LabelSet labels = load_labels(run / "labels.jsonl", gt.task, Origin::ModelPrediction);
  c.expect(labels.size() == gt.items.size(), "one label per item");
  for (const Label& l : labels.labels()) {
    c.expect(l.level == testing::mock_level(gt.find_item(l.item_id)->content), "label for " + l.item_id);
  }
  std::map<std::string, int> transcripts;
  std::istringstream lines(read_text(run / "transcripts.jsonl"));
  for (std::string line; std::getline(lines, line);) ++transcripts[nlohmann::json::parse(line)["item_id"]];
  c.expect(transcripts.size() == gt.items.size(), "transcripts cover every item");
  for (const auto& [id, n] : transcripts) c.expect(n == 5, id + " has " + std::to_string(n) + " transcripts");
  c.expect(cold_requests == 5 * static_cast<int>(gt.items.size()), "cold requests");

  const auto before = tree_contents(dir / "out/runs");
  const auto warm = run_cli({"annotate", "--config", config});
  c.expect(warm.code == 0, "warm annotate failed: " + warm.err);
  c.expect(server.requests() == cold_requests, "warm rerun reached the endpoint");
  c.expect(tree_contents(dir / "out/runs") == before, "warm rerun changed outputs");
  return std::to_string(gt.items.size()) + " items, " + std::to_string(cold_requests) + " cold requests, " +
         std::to_string(server.requests() - cold_requests) + " warm";
}

std::string perception_fixture(Check& c) {
  // Human profiles from simulated label sets with rising boundary noise and
  // falling non-adjacent noise across three tasks.
  std::map<std::string, ErrorProfile> profiles;
  const std::vector<std::pair<double, double>> noise = {{0.05, 0.20}, {0.15, 0.10}, {0.30, 0.02}};
  for (std::size_t i = 0; i < noise.size(); ++i) {
    SimConfig cfg;
    cfg.task_id = "task_" + std::string(1, static_cast<char>('a' + i));
    cfg.scale = OrdinalScale::with_levels(5);
    cfg.n_items = 4000;
    cfg.seed = 40 + i;
    const auto [b, k] = noise[i];
    cfg.human_kernel = DisplacementKernel({{0, 1 - b - k}, {-1, b / 2}, {1, b / 2}, {-2, k / 2}, {2, k / 2}});
    const SimulatedSets s = simulate(cfg);
    profiles.emplace(cfg.task_id, error_profile(s.human, s.dataset.gold));
  }
  // Both annotators rank tasks from the fewest to the most errors of each
  // kind, read off the profiles.
  auto order_by = [&](double (ErrorProfile::*rate)() const) {
    std::vector<std::string> ids;
    for (const auto& [id, p] : profiles) ids.push_back(id);
    std::sort(ids.begin(), ids.end(), [&](const auto& a, const auto& b) {
      return (profiles.at(a).*rate)() < (profiles.at(b).*rate)();
    });
    return ids;
  };
  SurveyResponse first{"ann1", {{kBoundaryItem, order_by(&ErrorProfile::p_boundary)},
                                {kConceptItem, order_by(&ErrorProfile::p_concept)}}, {}};
  SurveyResponse second = first;
  second.annotator_id = "ann2";
  const AlignmentReport report = perception_alignment({first, second}, profiles);
  c.expect(report.observed_boundary_order == std::vector<std::string>{"task_a", "task_b", "task_c"},
           "observed boundary order");
  c.expect(report.observed_concept_order == std::vector<std::string>{"task_c", "task_b", "task_a"},
           "observed concept order");
  int rows = 0;
  for (const RankingComparison& r : report.comparisons) {
    ++rows;
    c.expect(r.exact_match, r.annotator_id + "/" + r.dimension + " exact match");
    c.near(r.spearman, 1.0, 1e-12, r.annotator_id + "/" + r.dimension + " spearman");
  }
  c.expect(rows == 6, "two annotators plus pooled, two dimensions");
  return std::to_string(rows) + " comparison rows";
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::string (*run)(Check&);
  };
  const Criterion criteria[] = {
      {"decomposition_algebra", decomposition_algebra},
      {"worked_decomposition", worked_decomposition},
      {"degenerate_cases", degenerate_cases},
      {"krippendorff_alpha_exhaustive", alpha_exhaustive},
      {"kappa_fixtures", kappa_fixtures},
      {"simulator_convergence", simulator_convergence},
      {"end_to_end_determinism", end_to_end_determinism},
      {"structural_defaults", structural_defaults},
      {"mock_endpoint_annotation", mock_endpoint_run},
      {"perception_alignment_fixture", perception_fixture},
  };
  int failed = 0;
  for (const Criterion& criterion : criteria) {
    Check check;
    std::string detail;
    try {
      detail = criterion.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const bool ok = check.ok();
    failed += ok ? 0 : 1;
    std::cout << (ok ? "PASS " : "FAIL ") << criterion.name << " : " << (ok ? detail : check.summary()) << std::endl;
  }
  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " criterion(s) failed") << std::endl;
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
