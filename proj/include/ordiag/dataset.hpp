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

// Ingestion, validation, balanced sampling and persistence of tasks, items
// and label sets.
//
// File formats (UTF-8):
//   task config  JSON   {task_id, instructions, levels: [{index, name, description}],
//                        exemplars?: [{content, level}]}
//   items        JSONL  {item_id, content, metadata?}
//   labels       JSONL  {item_id, annotator_id, level, origin, provenance?, round?,
//                        elapsed_ms?}
// Unknown fields are kept and written back unchanged.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ordiag/core.hpp"

namespace ordiag {

struct Dataset {
  TaskSpec task;
  std::vector<Item> items;  // sorted by item_id after loading or sampling
  LabelSet gold;

  // Every gold label references an item; exactly one gold label per item
  // that has any.
  void validate() const;
  const Item* find_item(std::string_view item_id) const;
  // Level of the gold label for item_id; throws Validation when absent.
  int gold_level(std::string_view item_id) const;
  Dataset subset(const std::vector<std::string>& item_ids) const;

  bool operator==(const Dataset&) const = default;
};

inline constexpr int kGroundTruthSampleSize = 150;
inline constexpr int kHumanTestSampleSize = 40;
inline constexpr int kHumanTestRoundSize = 20;

struct SamplePlan {
  int total_n = 0;
  int per_class_n = 0;
  std::uint64_t seed = 0;
  // Only items whose metadata carries every key with the given value are
  // eligible. Empty means no filter.
  std::map<std::string, std::string> metadata_equals;

  static SamplePlan balanced(const OrdinalScale& scale, int per_class_n, std::uint64_t seed);
  void validate(const OrdinalScale& scale) const;
};

// Task config levels may use any strictly increasing integer indices (for
// example a 0-based source scale); they are renumbered 1..k here and gold
// levels in `gold_path` are translated accordingly. Gold levels may also be
// given as level names.
TaskSpec load_task(const std::filesystem::path& task_config_path,
                   std::map<int, int>* source_index_map = nullptr);
Dataset load_dataset(const std::filesystem::path& task_config_path,
                     const std::filesystem::path& items_path,
                     const std::filesystem::path& gold_path);

void save_task(const TaskSpec& task, const std::filesystem::path& path);
std::vector<Item> load_items(const std::filesystem::path& path);
void save_items(const std::vector<Item>& items, const std::filesystem::path& path);
// Writes task.json, items.jsonl and gold.jsonl into `dir`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset_dir(const std::filesystem::path& dir);

// Exactly per_class_n items per level drawn without replacement. Within each
// level the eligible item ids are sorted, shuffled with a level-specific
// substream of plan.seed and truncated, so the result does not depend on
// the input order. Output is sorted by item_id.
Dataset stratified_sample(const Dataset& dataset, const SamplePlan& plan);

// Same selection rule for a total that need not divide evenly: per-level
// quotas differ by at most one, and the levels receiving the extra items are
// chosen by a seeded shuffle. Equals stratified_sample when k divides total_n.
Dataset balanced_sample(const Dataset& dataset, int total_n, std::uint64_t seed,
                        const std::map<std::string, std::string>& metadata_equals = {});

// Splits into batches of round_size. Items are grouped by gold level,
// shuffled per level, laid end to end and dealt round-robin, so each batch
// gets floor or ceil of its share of every level. Items within a batch are
// sorted by item_id.
std::vector<std::vector<std::string>> split_rounds(const Dataset& sample, int round_size,
                                                   std::uint64_t seed);

// Label files. `set_id` is written per row and restored on load; files
// without it take the file stem. An empty file needs `expected_origin`.
void save_labels(const LabelSet& labels, const std::filesystem::path& path);
LabelSet load_labels(const std::filesystem::path& path, const TaskSpec& task,
                     std::optional<Origin> expected_origin = std::nullopt);

// Atomic replacement of `path`: write to a sibling temp file, then rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace ordiag
