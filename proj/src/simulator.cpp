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

#include "ordiag/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace ordiag {

using Json = nlohmann::json;

DisplacementKernel::DisplacementKernel() : DisplacementKernel(std::map<int, double>{{0, 1.0}}) {}

DisplacementKernel::DisplacementKernel(std::map<int, double> probabilities) {
  double total = 0.0;
  for (const auto& [d, p] : probabilities) {
    if (!(p >= 0.0)) {
      fail(ErrorKind::Validation, "kernel mass at displacement " + std::to_string(d) + " is negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    fail(ErrorKind::Validation, "kernel probabilities sum to " + std::to_string(total) + ", not 1");
  }
  for (const auto& [d, p] : probabilities) {
    if (p > 0.0) probabilities_.emplace(d, p);
  }
  double acc = 0.0;
  for (const auto& [d, p] : probabilities_) {
    acc += p;
    cumulative_.emplace_back(acc, d);
  }
}

DisplacementKernel DisplacementKernel::mixture(double magnitude, const std::map<int, double>& shape) {
  if (!(magnitude >= 0.0 && magnitude <= 1.0)) {
    fail(ErrorKind::Domain, "kernel magnitude must lie in [0, 1]");
  }
  double shape_total = 0.0;
  for (const auto& [d, p] : shape) {
    if (d != 0) shape_total += p;
  }
  if (shape_total <= 0.0) fail(ErrorKind::Validation, "mixture shape has no off-zero mass");
  std::map<int, double> probs{{0, 1.0 - magnitude}};
  for (const auto& [d, p] : shape) {
    if (d != 0) probs[d] += magnitude * p / shape_total;
  }
  return DisplacementKernel(std::move(probs));
}

int DisplacementKernel::sample(SplitMix64& rng) const {
  const double u = rng.uniform01() * cumulative_.back().first;
  for (const auto& [acc, d] : cumulative_) {
    if (u < acc) return d;
  }
  return cumulative_.back().second;
}

bool DisplacementKernel::is_identity() const {
  return probabilities_.size() == 1 && probabilities_.begin()->first == 0;
}

DisplacementKernel DisplacementKernel::convolve(const DisplacementKernel& other) const {
  std::map<int, double> out;
  for (const auto& [a, pa] : probabilities_) {
    for (const auto& [b, pb] : other.probabilities_) out[a + b] += pa * pb;
  }
  // Renormalize away accumulated rounding so the constructor check holds.
  double total = 0.0;
  for (const auto& [d, p] : out) total += p;
  for (auto& [d, p] : out) p /= total;
  return DisplacementKernel(std::move(out));
}

void SimConfig::validate() const {
  if (n_items < 1) fail(ErrorKind::Validation, "n_items must be at least 1");
  if (human_annotators < 1) fail(ErrorKind::Validation, "human_annotators must be at least 1");
  if (task_id.empty()) fail(ErrorKind::Validation, "task_id is empty");
}

namespace {

int clamp_level(int level, const OrdinalScale& scale) {
  return std::clamp(level, scale.min_level(), scale.max_level());
}

std::string item_id_for(int i, int n) {
  const std::size_t width = std::max<std::size_t>(6, std::to_string(n).size());
  std::string digits = std::to_string(i);
  return "sim-" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

SimulatedSets simulate(const SimConfig& config) {
  config.validate();
  const int k = config.scale.size();
  SimulatedSets out;
  out.dataset.task.task_id = config.task_id;
  out.dataset.task.scale = config.scale;
  out.dataset.task.instructions = "Synthetic ordinal task with " + std::to_string(k) + " levels.";

  std::vector<Label> gold;
  std::vector<Label> model;
  std::vector<Label> human;
  gold.reserve(static_cast<std::size_t>(config.n_items));
  model.reserve(static_cast<std::size_t>(config.n_items));
  human.reserve(static_cast<std::size_t>(config.n_items) * static_cast<std::size_t>(config.human_annotators));
  for (int i = 1; i <= config.n_items; ++i) {
    // One substream per item; generation order within an item is fixed:
    // gold, then (task, human) per human annotator, then (task, model).
    SplitMix64 rng = substream(config.seed, static_cast<std::uint64_t>(i));
    const std::string id = item_id_for(i, config.n_items);
    const int g = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    out.dataset.items.push_back({id, "synthetic item " + std::to_string(i), {}, {}});
    gold.push_back({id, "sim-gold", g, Origin::GroundTruth, std::nullopt, std::nullopt, std::nullopt, {}});
    for (int a = 1; a <= config.human_annotators; ++a) {
      const int d_task = config.task_kernel.sample(rng);
      const int d_human = config.human_kernel.sample(rng);
      human.push_back({id, "sim-human-" + std::to_string(a), clamp_level(g + d_task + d_human, config.scale),
                       Origin::HumanTest, std::nullopt, std::nullopt, std::nullopt, {}});
    }
    const int d_task = config.task_kernel.sample(rng);
    const int d_model = config.model_kernel.sample(rng);
    model.push_back({id, kSimModelId, clamp_level(g + d_task + d_model, config.scale),
                     Origin::ModelPrediction, std::string("simulated"), std::nullopt, std::nullopt, {}});
  }
  out.dataset.gold = LabelSet("gold", config.task_id, Origin::GroundTruth, std::move(gold));
  out.model = LabelSet(kSimModelId, config.task_id, Origin::ModelPrediction, std::move(model));
  out.human = LabelSet("human", config.task_id, Origin::HumanTest, std::move(human));
  return out;
}

ProfileExpectation analytic_profile(const SimConfig& config, SimArm arm) {
  config.validate();
  const DisplacementKernel total =
      config.task_kernel.convolve(arm == SimArm::Human ? config.human_kernel : config.model_kernel);
  const int k = config.scale.size();
  ProfileExpectation e;
  for (int g = 1; g <= k; ++g) {
    for (const auto& [d, p] : total.probabilities()) {
      const int label = clamp_level(g + d, config.scale);
      const double mass = p / static_cast<double>(k);
      switch (classify_error(std::abs(label - g))) {
        case ErrorOutcome::Correct: e.p_correct += mass; break;
        case ErrorOutcome::Boundary: e.p_boundary += mass; break;
        case ErrorOutcome::Concept: e.p_concept += mass; break;
      }
    }
  }
  return e;
}

std::vector<SweepRow> sweep(const SimConfig& config_template,
                            const std::vector<DisplacementKernel>& model_kernels,
                            const std::vector<double>& points) {
  if (model_kernels.size() < 2) fail(ErrorKind::Validation, "a sweep needs at least 2 points");
  if (points.size() != model_kernels.size()) {
    fail(ErrorKind::Validation, "sweep points and kernels differ in length");
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < model_kernels.size(); ++i) {
    SimConfig config = config_template;
    config.model_kernel = model_kernels[i];
    const SimulatedSets sets = simulate(config);
    rows.push_back({points[i], decompose_from_sets(sets.model, sets.human, sets.dataset.gold)});
  }
  return rows;
}

std::vector<SweepRow> sweep(const SimConfig& config_template, const std::vector<double>& magnitudes,
                            const std::map<int, double>& shape) {
  std::vector<DisplacementKernel> kernels;
  for (double m : magnitudes) kernels.push_back(DisplacementKernel::mixture(m, shape));
  return sweep(config_template, kernels, magnitudes);
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "point,p_correct,pT_boundary,pM_boundary,pT_concept,pM_concept\n";
  char buf[64];
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof buf, "%.3f", row.point);
    out += buf;
    for (double v : row.decomposition.components()) {
      std::snprintf(buf, sizeof buf, ",%.3f", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

namespace {

std::map<int, double> kernel_map_from_json(const Json& j) {
  std::map<int, double> probs;
  for (auto it = j.begin(); it != j.end(); ++it) {
    int d = 0;
    const std::string& key = it.key();
    const auto [end, ec] = std::from_chars(key.data(), key.data() + key.size(), d);
    if (ec != std::errc() || end != key.data() + key.size()) {
      fail(ErrorKind::Parse, "kernel key '" + key + "' is not an integer");
    }
    probs[d] = it.value().get<double>();
  }
  return probs;
}

}  // namespace

SimConfigFile parse_sim_config(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::Parse, std::string("sim config: ") + e.what());
  }
  try {
    SimConfigFile file;
    SimConfig& c = file.config;
    c.task_id = j.value("task_id", std::string("sim"));
    const Json& levels = j.at("levels");
    if (levels.is_number_integer()) {
      c.scale = OrdinalScale::with_levels(levels.get<int>());
    } else {
      std::vector<Level> ls;
      for (const Json& l : levels) {
        ls.push_back({l.at("index").get<int>(), l.at("name").get<std::string>(), l.value("description", "")});
      }
      c.scale = OrdinalScale(std::move(ls));
    }
    c.n_items = j.at("n_items").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("task_kernel")) c.task_kernel = DisplacementKernel(kernel_map_from_json(j["task_kernel"]));
    if (j.contains("model_kernel")) c.model_kernel = DisplacementKernel(kernel_map_from_json(j["model_kernel"]));
    if (j.contains("human_kernel")) c.human_kernel = DisplacementKernel(kernel_map_from_json(j["human_kernel"]));
    c.human_annotators = j.value("human_annotators", 1);
    if (auto it = j.find("sweep"); it != j.end()) {
      file.sweep_magnitudes = it->at("magnitudes").get<std::vector<double>>();
      if (it->contains("shape")) file.sweep_shape = kernel_map_from_json((*it)["shape"]);
    }
    c.validate();
    return file;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Parse, std::string("sim config: ") + e.what());
  }
}

SimConfigFile load_sim_config(const std::filesystem::path& path) {
  try {
    return parse_sim_config(read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace ordiag
