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

// Domain types shared by every module and the ordinal error model.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ordiag/error.hpp"

namespace ordiag {

struct Level {
  int index = 0;
  std::string name;
  std::string description;

  bool operator==(const Level&) const = default;
};

// Ordered levels, indexed 1..k.
class OrdinalScale {
 public:
  OrdinalScale() = default;
  explicit OrdinalScale(std::vector<Level> levels);

  // Convenience for tests and synthetic tasks: levels "1".."k".
  static OrdinalScale with_levels(int k);

  const std::vector<Level>& levels() const { return levels_; }
  int size() const { return static_cast<int>(levels_.size()); }
  int min_level() const { return 1; }
  int max_level() const { return size(); }
  bool contains(int level) const { return level >= 1 && level <= size(); }
  const Level& level(int index) const;
  std::optional<int> find_by_name(std::string_view name) const;

  // Throws InvalidLevel when level is outside the scale.
  void check(int level) const;

  bool operator==(const OrdinalScale&) const = default;

 private:
  std::vector<Level> levels_;
};

struct Exemplar {
  std::string content;
  int level = 0;
  // Set when the exemplar was drawn from a dataset item; lets prompt
  // construction keep an item's own gold label out of its prompt.
  std::optional<std::string> source_item_id;

  bool operator==(const Exemplar&) const = default;
};

// Unknown JSON fields carried through load/save untouched, stored as
// serialized JSON text keyed by field name.
using ExtraFields = std::map<std::string, std::string>;

struct TaskSpec {
  std::string task_id;
  OrdinalScale scale;
  std::string instructions;
  std::vector<Exemplar> exemplars;
  ExtraFields extras;

  void validate() const;
  bool operator==(const TaskSpec&) const = default;
};

struct Item {
  std::string item_id;
  std::string content;
  std::map<std::string, std::string> metadata;
  ExtraFields extras;

  bool operator==(const Item&) const = default;
};

enum class Origin { GroundTruth, ModelPrediction, HumanTest };

std::string_view to_string(Origin origin);
Origin origin_from_string(std::string_view text);

struct Label {
  std::string item_id;
  std::string annotator_id;
  int level = 0;
  Origin origin = Origin::GroundTruth;
  std::optional<std::string> provenance;
  std::optional<int> round;
  std::optional<std::int64_t> elapsed_ms;
  ExtraFields extras;

  bool operator==(const Label&) const = default;
};

class LabelSet {
 public:
  LabelSet() = default;
  // Validates that every label carries `origin` and that (item, annotator)
  // pairs are unique.
  LabelSet(std::string set_id, std::string task_id, Origin origin,
           std::vector<Label> labels);

  const std::string& set_id() const { return set_id_; }
  const std::string& task_id() const { return task_id_; }
  Origin origin() const { return origin_; }
  const std::vector<Label>& labels() const { return labels_; }
  bool empty() const { return labels_.empty(); }
  std::size_t size() const { return labels_.size(); }

  std::vector<std::string> annotators() const;  // sorted, unique
  std::vector<std::string> item_ids() const;    // sorted, unique
  LabelSet filter_annotator(std::string_view annotator_id) const;

  // Throws InvalidLevel if any label falls outside the scale.
  void check_levels(const OrdinalScale& scale) const;

  bool operator==(const LabelSet&) const = default;

 private:
  std::string set_id_;
  std::string task_id_;
  Origin origin_ = Origin::GroundTruth;
  std::vector<Label> labels_;
};

enum class ErrorOutcome { Correct = 0, Boundary = 1, Concept = 2 };

std::string_view to_string(ErrorOutcome outcome);

// |predicted - truth|; both levels must be on `scale`.
int ordinal_distance(const OrdinalScale& scale, int predicted, int truth);

constexpr ErrorOutcome classify_error(int distance) {
  if (distance <= 0) return ErrorOutcome::Correct;
  if (distance == 1) return ErrorOutcome::Boundary;
  return ErrorOutcome::Concept;
}

struct AlignedRow {
  std::string item_id;
  std::string annotator_id;  // annotator of the left-hand set
  int level = 0;             // left-hand level
  int truth_level = 0;       // resolved right-hand level

  bool operator==(const AlignedRow&) const = default;
  auto operator<=>(const AlignedRow&) const = default;
};

// Inner join of `labels` against `truth` on item_id. Every label of
// `labels` whose item has a truth label yields one row; rows are sorted by
// (item_id, annotator_id). Throws CorruptGroundTruth when `truth` holds two
// different levels for one item.
std::vector<AlignedRow> align(const LabelSet& labels, const LabelSet& truth);

}  // namespace ordiag
