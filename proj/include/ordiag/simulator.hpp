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

#pragma once

// Synthetic annotators driven by displacement kernels.
//
// For each item a gold level g is drawn uniformly from the scale. A human
// label is clamp(g + d_T + d_H) and the model label is clamp(g + d_T' + d_M),
// where d_T and d_T' are independent draws from the shared task kernel and
// d_H, d_M come from the arm-specific kernels. Task ambiguity is therefore
// modeled as independent per-arm draws, not as an item-level latent: the
// decomposition only ever sees aggregate rates. Nothing here claims that the
// decomposition recovers the kernel parameters.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ordiag/dataset.hpp"
#include "ordiag/decomposition.hpp"
#include "ordiag/rng.hpp"

namespace ordiag {

class DisplacementKernel {
 public:
  // Point mass at 0.
  DisplacementKernel();
  // Signed displacement -> probability; throws Validation on negative mass
  // or a total that is not 1 (within 1e-9).
  explicit DisplacementKernel(std::map<int, double> probabilities);

  static DisplacementKernel identity() { return DisplacementKernel(); }
  // Mass `magnitude` spread over `shape` (normalized, displacement 0
  // ignored) and the rest at 0.
  static DisplacementKernel mixture(double magnitude, const std::map<int, double>& shape);

  const std::map<int, double>& probabilities() const { return probabilities_; }
  int sample(SplitMix64& rng) const;
  bool is_identity() const;
  // Distribution of the sum of independent draws from both kernels.
  DisplacementKernel convolve(const DisplacementKernel& other) const;

  bool operator==(const DisplacementKernel&) const = default;

 private:
  std::map<int, double> probabilities_;
  std::vector<std::pair<double, int>> cumulative_;
};

struct SimConfig {
  std::string task_id = "sim";
  OrdinalScale scale = OrdinalScale::with_levels(4);
  int n_items = 100;
  DisplacementKernel task_kernel;
  DisplacementKernel model_kernel;
  DisplacementKernel human_kernel;
  int human_annotators = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimulatedSets {
  Dataset dataset;
  LabelSet model;
  LabelSet human;
};

inline constexpr const char* kSimModelId = "sim-model";

SimulatedSets simulate(const SimConfig& config);

enum class SimArm { Human, Model };

struct ProfileExpectation {
  double p_correct = 0.0;
  double p_boundary = 0.0;
  double p_concept = 0.0;
};

// Exact expected profile, enumerating gold levels and the convolved kernel
// with clamping at the scale ends.
ProfileExpectation analytic_profile(const SimConfig& config, SimArm arm);

struct SweepRow {
  double point = 0.0;
  Decomposition decomposition;

  bool operator==(const SweepRow&) const = default;
};

// One simulation per model kernel, all with the template's seed. Needs at
// least two points.
std::vector<SweepRow> sweep(const SimConfig& config_template,
                            const std::vector<DisplacementKernel>& model_kernels,
                            const std::vector<double>& points);
// Model kernels DisplacementKernel::mixture(m, shape) for each magnitude m.
std::vector<SweepRow> sweep(const SimConfig& config_template, const std::vector<double>& magnitudes,
                            const std::map<int, double>& shape = {{-1, 0.5}, {1, 0.5}});

// CSV with header point,p_correct,pT_boundary,pM_boundary,pT_concept,pM_concept.
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct SimConfigFile {
  SimConfig config;
  std::vector<double> sweep_magnitudes;  // empty when no sweep is requested
  std::map<int, double> sweep_shape{{-1, 0.5}, {1, 0.5}};
};

// JSON: {task_id?, levels: <k> | [{index,name,description}], n_items, seed,
//        task_kernel?, model_kernel?, human_kernel?, human_annotators?,
//        sweep?: {magnitudes: [...], shape?: {...}}}
// Kernels are objects mapping displacement strings to probabilities.
SimConfigFile load_sim_config(const std::filesystem::path& path);
SimConfigFile parse_sim_config(const std::string& json_text);

}  // namespace ordiag
