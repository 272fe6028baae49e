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

#include "ordiag/core.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <utility>

namespace ordiag {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidLevel: return "invalid-level";
    case ErrorKind::CorruptGroundTruth: return "corrupt-ground-truth";
    case ErrorKind::NoOverlap: return "no-overlap";
    case ErrorKind::UndefinedStatistic: return "undefined-statistic";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Sequencing: return "sequencing";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::ExcludedAnnotator: return "excluded-annotator";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Endpoint: return "endpoint";
    case ErrorKind::MissingPrerequisite: return "missing-prerequisite";
  }
  return "unknown";
}

OrdinalScale::OrdinalScale(std::vector<Level> levels) : levels_(std::move(levels)) {
  if (levels_.size() < 2) {
    fail(ErrorKind::Validation, "ordinal scale needs at least 2 levels, got " +
                                    std::to_string(levels_.size()));
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const Level& l = levels_[i];
    if (l.index != static_cast<int>(i) + 1) {
      fail(ErrorKind::Validation,
           "level indices must be consecutive from 1; position " +
               std::to_string(i) + " has index " + std::to_string(l.index));
    }
    if (!names.insert(l.name).second) {
      fail(ErrorKind::Validation, "duplicate level name '" + l.name + "'");
    }
  }
}

OrdinalScale OrdinalScale::with_levels(int k) {
  std::vector<Level> levels;
  for (int i = 1; i <= k; ++i) levels.push_back({i, std::to_string(i), ""});
  return OrdinalScale(std::move(levels));
}

const Level& OrdinalScale::level(int index) const {
  check(index);
  return levels_[static_cast<std::size_t>(index - 1)];
}

std::optional<int> OrdinalScale::find_by_name(std::string_view name) const {
  for (const Level& l : levels_) {
    if (l.name == name) return l.index;
  }
  return std::nullopt;
}

void OrdinalScale::check(int level) const {
  if (!contains(level)) {
    fail(ErrorKind::InvalidLevel, "level " + std::to_string(level) +
                                      " is outside the scale 1.." +
                                      std::to_string(size()));
  }
}

void TaskSpec::validate() const {
  if (task_id.empty()) fail(ErrorKind::Validation, "task_id is empty");
  if (instructions.empty()) {
    fail(ErrorKind::Validation, "task '" + task_id + "' has empty instructions");
  }
  if (scale.size() < 2) {
    fail(ErrorKind::Validation, "task '" + task_id + "' has no usable scale");
  }
  for (const Exemplar& e : exemplars) scale.check(e.level);
}

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::GroundTruth: return "ground_truth";
    case Origin::ModelPrediction: return "model_prediction";
    case Origin::HumanTest: return "human_test";
  }
  return "unknown";
}

Origin origin_from_string(std::string_view text) {
  if (text == "ground_truth") return Origin::GroundTruth;
  if (text == "model_prediction") return Origin::ModelPrediction;
  if (text == "human_test") return Origin::HumanTest;
  fail(ErrorKind::Parse, "unknown origin '" + std::string(text) + "'");
}

std::string_view to_string(ErrorOutcome outcome) {
  switch (outcome) {
    case ErrorOutcome::Correct: return "correct";
    case ErrorOutcome::Boundary: return "boundary";
    case ErrorOutcome::Concept: return "concept";
  }
  return "unknown";
}

LabelSet::LabelSet(std::string set_id, std::string task_id, Origin origin,
                   std::vector<Label> labels)
    : set_id_(std::move(set_id)),
      task_id_(std::move(task_id)),
      origin_(origin),
      labels_(std::move(labels)) {
  std::set<std::pair<std::string_view, std::string_view>> seen;
  for (const Label& l : labels_) {
    if (l.origin != origin_) {
      fail(ErrorKind::Validation,
           "label for item '" + l.item_id + "' has origin " +
               std::string(to_string(l.origin)) + " in a " +
               std::string(to_string(origin_)) + " set");
    }
    if (!seen.emplace(l.item_id, l.annotator_id).second) {
      fail(ErrorKind::Validation, "duplicate label for item '" + l.item_id +
                                      "' by annotator '" + l.annotator_id + "'");
    }
  }
}

std::vector<std::string> LabelSet::annotators() const {
  std::set<std::string> ids;
  for (const Label& l : labels_) ids.insert(l.annotator_id);
  return {ids.begin(), ids.end()};
}

std::vector<std::string> LabelSet::item_ids() const {
  std::set<std::string> ids;
  for (const Label& l : labels_) ids.insert(l.item_id);
  return {ids.begin(), ids.end()};
}

LabelSet LabelSet::filter_annotator(std::string_view annotator_id) const {
  std::vector<Label> kept;
  for (const Label& l : labels_) {
    if (l.annotator_id == annotator_id) kept.push_back(l);
  }
  return LabelSet(set_id_ + "/" + std::string(annotator_id), task_id_, origin_,
                  std::move(kept));
}

void LabelSet::check_levels(const OrdinalScale& scale) const {
  for (const Label& l : labels_) {
    if (!scale.contains(l.level)) {
      fail(ErrorKind::InvalidLevel,
           "item '" + l.item_id + "' has level " + std::to_string(l.level) +
               " outside the scale 1.." + std::to_string(scale.size()));
    }
  }
}

int ordinal_distance(const OrdinalScale& scale, int predicted, int truth) {
  scale.check(predicted);
  scale.check(truth);
  return predicted > truth ? predicted - truth : truth - predicted;
}

std::vector<AlignedRow> align(const LabelSet& labels, const LabelSet& truth) {
  if (labels.task_id() != truth.task_id()) {
    fail(ErrorKind::Validation, "cannot align sets of different tasks ('" +
                                    labels.task_id() + "' vs '" +
                                    truth.task_id() + "')");
  }
  std::unordered_map<std::string_view, int> resolved;
  for (const Label& t : truth.labels()) {
    auto [it, inserted] = resolved.emplace(t.item_id, t.level);
    if (!inserted && it->second != t.level) {
      fail(ErrorKind::CorruptGroundTruth,
           "truth set '" + truth.set_id() + "' has conflicting levels " +
               std::to_string(it->second) + " and " + std::to_string(t.level) +
               " for item '" + t.item_id + "'");
    }
  }
  std::vector<AlignedRow> rows;
  rows.reserve(labels.size());
  for (const Label& l : labels.labels()) {
    auto it = resolved.find(l.item_id);
    if (it == resolved.end()) continue;
    rows.push_back({l.item_id, l.annotator_id, l.level, it->second});
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace ordiag
