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

// Error profiles and the five-way decomposition of model error into
// boundary/concept types and task-inherent/model-specific sources.
//
// Given the model's boundary and concept rates m_x and the human-test rates
// h_x against the same ground truth, the task-driven share of each error
// type is
//
//     T_x = h_x / (h_x + m_x) * m_x      (0 when h_x + m_x = 0)
//
// and the model-specific share is the residual M_x = m_x - T_x. Together
// with the model's correct rate the five components sum to one.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "ordiag/core.hpp"

namespace ordiag {

class ErrorProfile {
 public:
  ErrorProfile() = default;
  // Throws Validation when the counts sum to zero or are negative.
  static ErrorProfile from_counts(std::int64_t correct, std::int64_t boundary,
                                  std::int64_t concept_count);

  double p_correct() const { return ratio(correct_); }
  double p_boundary() const { return ratio(boundary_); }
  double p_concept() const { return ratio(concept_); }
  std::int64_t n() const { return correct_ + boundary_ + concept_; }
  std::int64_t n_correct() const { return correct_; }
  std::int64_t n_boundary() const { return boundary_; }
  std::int64_t n_concept() const { return concept_; }

  bool operator==(const ErrorProfile&) const = default;

 private:
  double ratio(std::int64_t count) const {
    return static_cast<double>(count) / static_cast<double>(n());
  }

  std::int64_t correct_ = 0;
  std::int64_t boundary_ = 0;
  std::int64_t concept_ = 0;
};

struct Decomposition {
  double p_correct = 0.0;
  double pT_boundary = 0.0;
  double pM_boundary = 0.0;
  double pT_concept = 0.0;
  double pM_concept = 0.0;
  std::int64_t n_model = 0;
  std::int64_t n_human = 0;

  static constexpr std::size_t kComponents = 5;
  static constexpr std::array<const char*, kComponents> kComponentNames = {
      "p_correct", "pT_boundary", "pM_boundary", "pT_concept", "pM_concept"};

  std::array<double, kComponents> components() const {
    return {p_correct, pT_boundary, pM_boundary, pT_concept, pM_concept};
  }
  double sum() const { return p_correct + pT_boundary + pM_boundary + pT_concept + pM_concept; }

  bool operator==(const Decomposition&) const = default;
};

// Pools all aligned (item, annotator) rows. Throws NoOverlap when nothing
// aligns.
ErrorProfile error_profile(const LabelSet& pred, const LabelSet& truth);

// One profile per annotator of `pred`, for checking how sensitive a pooled
// human profile is to the individual annotators.
std::map<std::string, ErrorProfile> error_profiles_by_annotator(const LabelSet& pred,
                                                                const LabelSet& truth);

// h * m / (h + m), the task-driven part of a model error rate m given the
// human rate h. Throws Domain outside [0, 1].
double share_task_driven(double p_human, double p_model);

Decomposition decompose(const ErrorProfile& model, const ErrorProfile& human);

// Throws NoOverlap when either set fails to align with `truth` and
// ExcludedAnnotator when a human annotator also authored `truth`.
Decomposition decompose_from_sets(const LabelSet& model, const LabelSet& human,
                                  const LabelSet& truth);

struct Interval {
  double low = 0.0;
  double high = 0.0;

  bool operator==(const Interval&) const = default;
};

using DecompositionIntervals = std::array<Interval, Decomposition::kComponents>;

inline constexpr int kMinBootstrapResamples = 100;
inline constexpr int kMinBootstrapItems = 5;

// 95% percentile intervals for each of the five components. Items of the
// model alignment and of the human alignment are resampled independently
// with replacement; an item's rows for all annotators travel together. Each
// resample draws from its own seed-derived substream, so results do not
// depend on evaluation order.
DecompositionIntervals bootstrap_ci(const LabelSet& model, const LabelSet& human,
                                    const LabelSet& truth, int resamples,
                                    std::uint64_t seed);

// Quantile with linear interpolation between order statistics (the common
// "type 7" definition). `sorted` must be ascending and non-empty.
double quantile_sorted(const std::vector<double>& sorted, double q);

// Serialized form of one decomposition:
//   {task_id, strategy, model_id, p_correct, pT_boundary, pM_boundary,
//    pT_concept, pM_concept, n_model, n_human, ci?}
// where ci maps each component name to [low, high]. Numbers are written at
// full precision; reports round them for display.
struct DecompositionRecord {
  std::string task_id;
  std::string strategy;
  std::string model_id;
  Decomposition decomposition;
  std::optional<DecompositionIntervals> ci;

  bool operator==(const DecompositionRecord&) const = default;
};

std::string decomposition_json(const DecompositionRecord& record);
// Throws Parse on malformed documents and Validation when the components
// do not sum to one.
DecompositionRecord decomposition_from_json(const std::string& text);

}  // namespace ordiag
