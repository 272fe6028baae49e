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

// Per-task summaries, cross-task correlations and their rendered forms.
//
// Output layout written by write_reports():
//   <out>/<task_id>/summary.json
//   <out>/<task_id>/decomposition.csv
//   <out>/<task_id>/decomposition.svg
//   <out>/correlations.csv
//
// Every number is printed with three decimals. The SVG is a stacked bar per
// (model, strategy) with this palette, bottom to top:
//   p_correct    #2e7d32  green
//   pT_boundary  #1565c0  dark blue   (task-inherent boundary)
//   pM_boundary  #90caf9  light blue  (model-specific boundary)
//   pT_concept   #c62828  dark red    (task-inherent conceptual)
//   pM_concept   #ef9a9a  light red   (model-specific conceptual)

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ordiag/decomposition.hpp"

namespace ordiag {

struct StrategyRun {
  std::string model_id;
  std::string strategy;
  LabelSet labels;
};

struct TaskInputs {
  std::string task_id;
  LabelSet gold;
  LabelSet human;
  std::vector<StrategyRun> runs;
  // Precomputed records (for example with intervals) take the place of the
  // point decomposition computed from `runs`.
  std::vector<DecompositionRecord> decompositions;
  // Model whose runs define baseline and best accuracy. May be left empty
  // when all runs come from one model.
  std::string reference_model;
};

struct StrategyResult {
  DecompositionRecord record;
  double accuracy = 0.0;
};

struct TaskSummary {
  std::string task_id;
  std::string reference_model;
  double baseline_accuracy = 0.0;  // zero-shot
  std::string best_strategy;
  double best_accuracy = 0.0;
  double gain = 0.0;
  double human_accuracy = 0.0;
  std::optional<double> human_alpha;  // ordinal alpha; absent with one annotator
  double human_boundary = 0.0;
  double human_concept = 0.0;
  // Model-specific error left in the zero-shot run.
  double baseline_model_specific = 0.0;
  std::vector<StrategyResult> strategies;  // canonical strategy order, then model

  // Scalar fields by name, for correlate(). Unknown names throw Validation.
  std::optional<double> field(const std::string& name) const;
};

inline constexpr std::array<const char*, 8> kSummaryFields = {
    "baseline_accuracy", "best_accuracy",  "gain",          "human_accuracy",
    "human_alpha",       "human_boundary", "human_concept", "baseline_model_specific"};

// Throws MissingPrerequisite naming the task when its zero-shot run or its
// human set is missing.
std::vector<TaskSummary> build_summary(const std::vector<TaskInputs>& inputs);

enum class CorrelationMethod { Pearson, Spearman };
std::string_view to_string(CorrelationMethod method);

struct Correlation {
  std::string x_field;
  std::string y_field;
  CorrelationMethod method = CorrelationMethod::Pearson;
  double coefficient = 0.0;
  int n = 0;
};

// Uses the summaries carrying both fields. Needs at least three; throws
// UndefinedStatistic on a constant vector.
Correlation correlate(const std::vector<TaskSummary>& summaries, const std::string& x_field,
                      const std::string& y_field, CorrelationMethod method);

// Human-side fields against model-side fields, both methods.
inline constexpr std::array<const char*, 4> kHumanFields = {"human_accuracy", "human_alpha", "human_boundary",
                                                            "human_concept"};
inline constexpr std::array<const char*, 2> kModelFields = {"baseline_accuracy", "gain"};

std::string format_fixed3(double value);

std::string summary_json(const TaskSummary& summary);
std::string decomposition_csv(const TaskSummary& summary);
std::string decomposition_svg(const TaskSummary& summary);
// Undefined correlations are written as NA so the file shape is fixed.
std::string correlations_csv(const std::vector<TaskSummary>& summaries);

// Writes every file of the layout above; returns the paths written.
std::vector<std::filesystem::path> write_reports(const std::vector<TaskSummary>& summaries,
                                                 const std::filesystem::path& out_dir);

}  // namespace ordiag
