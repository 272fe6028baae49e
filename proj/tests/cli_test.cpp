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

#include "ordiag/cli.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <csignal>
#include <cstdlib>
#include <future>

#include "gtest/gtest.h"
#include "json.hpp"
#include "ordiag/dataset.hpp"
#include "ordiag/decomposition.hpp"
#include "ordiag/simulator.hpp"
#include "support/cli_fixture.hpp"
#include "support/headless_client.hpp"
#include "support/temp_dir.hpp"

namespace ordiag {
namespace {

namespace fs = std::filesystem;
using testing::read_text;
using testing::run_cli;

// Human labels for the human-test sample: gold on even positions, one level
// off (towards the middle) on odd ones.
void write_human_labels(const fs::path& out, const std::string& task) {
  const Dataset human = load_dataset_dir(out / "samples" / task / "human_test");
  std::vector<Label> labels;
  int i = 0;
  for (const Label& g : human.gold.labels()) {
    Label l = g;
    l.annotator_id = "ann1";
    l.origin = Origin::HumanTest;
    if (i++ % 2 == 1) l.level = g.level <= 2 ? g.level + 1 : g.level - 1;
    labels.push_back(l);
  }
  save_labels(LabelSet("human", task, Origin::HumanTest, labels), out / "human" / (task + ".jsonl"));
}

std::string config_path(const testing::TempDir& dir) { return (dir.path() / "config.json").string(); }

class CliProject : public ::testing::Test {
 protected:
  void SetUp() override {
    ::unsetenv("ORDIAG_SEED");
    ::unsetenv("ORDIAG_OUT");
    testing::write_project(dir_.path(), server_.base_url(), {"zero_shot", "self_consistency"});
  }
  fs::path out() const { return dir_.path() / "out"; }

  testing::TempDir dir_;
  testing::MockOpenAiServer server_;
};

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(run_cli({}).code, cli::kExitValidation);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitValidation);
  EXPECT_EQ(run_cli({"sample", "--config", "/nonexistent/config.json"}).code, cli::kExitIo);
}

TEST(Cli, ExitCodesFollowErrorKinds) {
  EXPECT_EQ(cli::exit_code_for(ErrorKind::Io), 2);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::Endpoint), 3);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::MissingPrerequisite), 4);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::Validation), 1);
}

TEST_F(CliProject, SampleWritesDisjointStages) {
  const auto r = run_cli({"sample", "--config", config_path(dir_)});
  ASSERT_EQ(r.code, 0) << r.err;
  const Dataset gt = load_dataset_dir(out() / "samples/fluency/ground_truth");
  const Dataset human = load_dataset_dir(out() / "samples/fluency/human_test");
  const Dataset pool = load_dataset_dir(out() / "samples/fluency/active_pool");
  EXPECT_EQ(gt.items.size(), 24u);
  EXPECT_EQ(human.items.size(), 8u);
  EXPECT_EQ(pool.items.size(), 8u);
  const auto gt_ids = gt.gold.item_ids();
  for (const auto& id : human.gold.item_ids()) EXPECT_TRUE(std::binary_search(gt_ids.begin(), gt_ids.end(), id));
  for (const auto& id : pool.gold.item_ids()) EXPECT_FALSE(std::binary_search(gt_ids.begin(), gt_ids.end(), id));

  const std::string manifest = read_text(out() / "manifests/sample.fluency.json");
  EXPECT_EQ(manifest.find(dir_.path().string() + "/out"), std::string::npos);
  ASSERT_EQ(run_cli({"sample", "--config", config_path(dir_)}).code, 0);
  EXPECT_EQ(read_text(out() / "manifests/sample.fluency.json"), manifest);
}

TEST_F(CliProject, SeedIsRequired) {
  nlohmann::json cfg = nlohmann::json::parse(read_text(dir_.path() / "config.json"));
  cfg.erase("seed");
  testing::write_text(dir_.path() / "config.json", cfg.dump());
  const auto r = run_cli({"sample", "--config", config_path(dir_)});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("seed"), std::string::npos);
}

TEST_F(CliProject, FlagBeatsEnvironmentBeatsConfig) {
  auto seed_in = [&](const fs::path& out_dir) {
    const auto m = nlohmann::json::parse(read_text(out_dir / "manifests/sample.fluency.json"));
    return m["parameters"]["seed"].get<std::uint64_t>();
  };
  ASSERT_EQ(run_cli({"sample", "--config", config_path(dir_)}).code, 0);
  EXPECT_EQ(seed_in(out()), 11u);

  ::setenv("ORDIAG_SEED", "12", 1);
  ::setenv("ORDIAG_OUT", (dir_.path() / "env_out").c_str(), 1);
  ASSERT_EQ(run_cli({"sample", "--config", config_path(dir_)}).code, 0);
  EXPECT_EQ(seed_in(dir_.path() / "env_out"), 12u);

  const std::string flag_out = (dir_.path() / "flag_out").string();
  ASSERT_EQ(run_cli({"sample", "--config", config_path(dir_), "--seed", "13", "--out", flag_out}).code, 0);
  EXPECT_EQ(seed_in(flag_out), 13u);
  ::unsetenv("ORDIAG_SEED");
  ::unsetenv("ORDIAG_OUT");
}

TEST_F(CliProject, AnnotateColdThenWarm) {
  ASSERT_EQ(run_cli({"sample", "--config", config_path(dir_)}).code, 0);
  const auto cold = run_cli({"annotate", "--config", config_path(dir_)});
  ASSERT_EQ(cold.code, 0) << cold.err;
  // 24 items: one request each for zero-shot, five each for self-consistency.
  EXPECT_EQ(server_.requests(), 24 + 24 * 5);

  const fs::path zs = out() / "runs/fluency/mock-model/zero_shot";
  const fs::path sc = out() / "runs/fluency/mock-model/self_consistency";
  const Dataset gt = load_dataset_dir(out() / "samples/fluency/ground_truth");
  for (const fs::path& dir : {zs, sc}) {
    const LabelSet labels = load_labels(dir / "labels.jsonl", gt.task, Origin::ModelPrediction);
    ASSERT_EQ(labels.size(), 24u);
    for (const Label& l : labels.labels()) EXPECT_EQ(l.level, testing::mock_level(gt.find_item(l.item_id)->content));
  }
  std::map<std::string, int> per_item;
  std::istringstream lines(read_text(sc / "transcripts.jsonl"));
  for (std::string line; std::getline(lines, line);) ++per_item[nlohmann::json::parse(line)["item_id"]];
  EXPECT_EQ(per_item.size(), 24u);
  for (const auto& [id, n] : per_item) EXPECT_EQ(n, 5) << id;

  std::map<fs::path, std::string> before;
  for (const auto& e : fs::recursive_directory_iterator(out() / "runs")) {
    if (e.is_regular_file()) before[e.path()] = read_text(e.path());
  }
  const std::string manifest = read_text(out() / "manifests/annotate.fluency.mock-model.zero_shot.json");
  const auto warm = run_cli({"annotate", "--config", config_path(dir_)});
  ASSERT_EQ(warm.code, 0) << warm.err;
  EXPECT_EQ(server_.requests(), 24 + 24 * 5);
  for (const auto& [path, text] : before) EXPECT_EQ(read_text(path), text) << path;
  EXPECT_EQ(read_text(out() / "manifests/annotate.fluency.mock-model.zero_shot.json"), manifest);
}

TEST_F(CliProject, UnreachableEndpointExitsThree) {
  nlohmann::json cfg = nlohmann::json::parse(read_text(dir_.path() / "config.json"));
  cfg["endpoints"][0]["base_url"] = "http://127.0.0.1:1/v1";
  cfg["strategies"] = {"zero_shot"};
  testing::write_text(dir_.path() / "config.json", cfg.dump());
  ASSERT_EQ(run_cli({"sample", "--config", config_path(dir_)}).code, 0);
  const auto r = run_cli({"annotate", "--config", config_path(dir_)});
  EXPECT_EQ(r.code, cli::kExitEndpoint) << r.err;
}

TEST_F(CliProject, StagesOutOfOrderExitFour) {
  EXPECT_EQ(run_cli({"annotate", "--config", config_path(dir_)}).code, cli::kExitMissingPrerequisite);
  EXPECT_EQ(run_cli({"decompose", "--config", config_path(dir_)}).code, cli::kExitMissingPrerequisite);
  const auto r = run_cli({"report", "--config", config_path(dir_)});
  EXPECT_EQ(r.code, cli::kExitMissingPrerequisite);
  EXPECT_NE(r.err.find("decompos"), std::string::npos);

  ASSERT_EQ(run_cli({"sample", "--config", config_path(dir_)}).code, 0);
  ASSERT_EQ(run_cli({"annotate", "--config", config_path(dir_)}).code, 0);
  // Runs exist but nobody has labeled the human test yet.
  const auto d = run_cli({"decompose", "--config", config_path(dir_)});
  EXPECT_EQ(d.code, cli::kExitMissingPrerequisite);
  EXPECT_NE(d.err.find("human"), std::string::npos);
}

TEST_F(CliProject, DecomposeMatchesLibraryAndReportRuns) {
  ASSERT_EQ(run_cli({"sample", "--config", config_path(dir_)}).code, 0);
  ASSERT_EQ(run_cli({"annotate", "--config", config_path(dir_)}).code, 0);
  write_human_labels(out(), "fluency");
  const auto d = run_cli({"decompose", "--config", config_path(dir_), "--resamples", "200"});
  ASSERT_EQ(d.code, 0) << d.err;

  const Dataset gt = load_dataset_dir(out() / "samples/fluency/ground_truth");
  const LabelSet human = load_labels(out() / "human/fluency.jsonl", gt.task, Origin::HumanTest);
  for (const char* strategy : {"zero_shot", "self_consistency"}) {
    const LabelSet model = load_labels(out() / "runs/fluency/mock-model" / strategy / "labels.jsonl", gt.task,
                                       Origin::ModelPrediction);
    const auto rec =
        decomposition_from_json(read_text(out() / "decompositions/fluency/mock-model" / (std::string(strategy) + ".json")));
    EXPECT_EQ(rec.model_id, "mock-model");
    EXPECT_EQ(rec.strategy, strategy);
    EXPECT_EQ(rec.decomposition, decompose_from_sets(model, human, gt.gold));
    ASSERT_TRUE(rec.ci.has_value());
  }
  const auto r = run_cli({"report", "--config", config_path(dir_)});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out() / "reports/fluency/summary.json"));
  EXPECT_TRUE(fs::exists(out() / "reports/fluency/decomposition.svg"));
  EXPECT_TRUE(fs::exists(out() / "reports/correlations.csv"));
  EXPECT_TRUE(fs::exists(out() / "manifests/report.json"));
}

TEST(CliSimulate, DecomposeMatchesSimulatedSets) {
  testing::TempDir dir;
  testing::write_text(dir / "sim.json", R"({"task_id": "simtask", "levels": 5, "n_items": 400, "seed": 9,
    "task_kernel": {"0": 0.8, "1": 0.1, "-1": 0.1}, "model_kernel": {"0": 0.7, "2": 0.3}})");
  const std::string out = (dir / "out").string();
  ASSERT_EQ(run_cli({"simulate", "--config", (dir / "sim.json").string(), "--out", out}).code, 0);
  ASSERT_EQ(run_cli({"decompose", "--out", out}).code, 0);
  const auto sets = simulate(load_sim_config(dir / "sim.json").config);
  const auto rec = decomposition_from_json(read_text(dir / "out/decompositions/simtask/sim-model/zero_shot.json"));
  EXPECT_EQ(rec.decomposition, decompose_from_sets(sets.model, sets.human, sets.dataset.gold));
  EXPECT_EQ(rec.model_id, "sim-model");
  EXPECT_EQ(run_cli({"decompose", "--out", out, "--resamples", "10", "--seed", "1"}).code, cli::kExitValidation);
}

TEST(CliConfigs, ShippedExamplesParse) {
  const fs::path dir = fs::path(ORDIAG_TEST_DATA_DIR) / "../../config";
  const auto sim = load_sim_config(dir / "sim.example.json");
  EXPECT_EQ(sim.config.task_id, "sim_fluency");
  EXPECT_EQ(sim.sweep_magnitudes.size(), 4u);
  const auto project = nlohmann::json::parse(read_text(dir / "project.example.json"));
  EXPECT_EQ(project["sample"]["ground_truth"], 150);
  EXPECT_EQ(project["strategies"].size(), 5u);
}

int free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

TEST_F(CliProject, ServeRunsUntilInterrupted) {
  ASSERT_EQ(run_cli({"sample", "--config", config_path(dir_)}).code, 0);
  const int port = free_port();
  auto served = std::async(std::launch::async, [&] {
    return run_cli({"serve", "--config", config_path(dir_), "--port", std::to_string(port)});
  });
  // Stops the server if an assertion below bails out early; raising with no
  // server running would hit the default handler and kill the test binary.
  struct Interrupt {
    std::future<testing::CliResult>& f;
    ~Interrupt() {
      if (f.valid() && f.wait_for(std::chrono::seconds(0)) != std::future_status::ready) std::raise(SIGINT);
    }
  } interrupt_on_exit{served};
  testing::HeadlessClient client(port);
  bool up = false;
  for (int i = 0; i < 200 && !up; ++i) {
    try {
      up = client.get("/health").status == 200;
    } catch (const std::exception&) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }
  ASSERT_TRUE(up) << (served.wait_for(std::chrono::seconds(0)) == std::future_status::ready ? served.get().err : "");
  const std::string sid = client.open("ann1", "fluency");
  const auto breaks = client.complete(sid, [](const std::string&) { return 2; });
  EXPECT_EQ(breaks, std::vector<int>{4});
  const std::string excluded = client.post("/session", {{"annotator_id", "curator"}, {"task_id", "fluency"}}).body.dump();
  EXPECT_NE(excluded.find("excluded"), std::string::npos) << excluded;
  std::raise(SIGINT);
  const auto r = served.get();
  EXPECT_EQ(r.code, 0) << r.err;
  const Dataset human = load_dataset_dir(out() / "samples/fluency/human_test");
  EXPECT_EQ(load_labels(out() / "human/fluency.jsonl", human.task, Origin::HumanTest).size(), 8u);
}

}  // namespace
}  // namespace ordiag
