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

#include "ordiag/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "json.hpp"
#include "ordiag/rng.hpp"

namespace ordiag {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::Io, "cannot create '" + path.parent_path().string() + "': " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) fail(ErrorKind::Io, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::Io, "cannot replace '" + path.string() + "'");
  }
}

namespace {

template <typename Fn>
void for_each_jsonl(const fs::path& path, Fn&& fn) {
  std::istringstream in(read_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json row;
    try {
      row = Json::parse(line);
    } catch (const Json::parse_error& e) {
      fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!row.is_object()) {
      fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": expected a JSON object");
    }
    try {
      fn(row, line_no);
    } catch (const Json::exception& e) {
      fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

Json parse_json_file(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

const Json& required(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorKind::Parse, std::string("missing field '") + key + "'");
  return *it;
}

ExtraFields collect_extras(const Json& obj, std::initializer_list<std::string_view> known) {
  ExtraFields extras;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      extras.emplace(it.key(), it.value().dump());
    }
  }
  return extras;
}

void put_extras(Json& obj, const ExtraFields& extras) {
  for (const auto& [key, text] : extras) obj[key] = Json::parse(text);
}

// Level given either as an integer in `index_map`'s source space or as a
// level name.
int resolve_level(const Json& value, const OrdinalScale& scale, const std::map<int, int>* index_map) {
  if (value.is_string()) {
    const auto found = scale.find_by_name(value.get<std::string>());
    if (!found) fail(ErrorKind::InvalidLevel, "unknown level name '" + value.get<std::string>() + "'");
    return *found;
  }
  if (!value.is_number_integer()) fail(ErrorKind::Parse, "level must be an integer or a level name");
  const int raw = value.get<int>();
  if (index_map) {
    auto it = index_map->find(raw);
    if (it == index_map->end()) fail(ErrorKind::InvalidLevel, "level " + std::to_string(raw) + " is not on the task scale");
    return it->second;
  }
  scale.check(raw);
  return raw;
}

Json item_to_json(const Item& item) {
  Json j;
  j["item_id"] = item.item_id;
  j["content"] = item.content;
  if (!item.metadata.empty()) j["metadata"] = item.metadata;
  put_extras(j, item.extras);
  return j;
}

Item item_from_json(const Json& j) {
  Item item;
  item.item_id = required(j, "item_id").get<std::string>();
  item.content = required(j, "content").get<std::string>();
  if (auto it = j.find("metadata"); it != j.end() && !it->is_null()) {
    for (auto m = it->begin(); m != it->end(); ++m) {
      item.metadata[m.key()] = m->is_string() ? m->get<std::string>() : m->dump();
    }
  }
  item.extras = collect_extras(j, {"item_id", "content", "metadata"});
  if (item.item_id.empty()) fail(ErrorKind::Validation, "empty item_id");
  if (item.content.empty()) fail(ErrorKind::Validation, "item '" + item.item_id + "' has empty content");
  return item;
}

Json label_to_json(const Label& l, const std::string& set_id) {
  Json j;
  j["item_id"] = l.item_id;
  j["annotator_id"] = l.annotator_id;
  j["level"] = l.level;
  j["origin"] = std::string(to_string(l.origin));
  if (l.provenance) j["provenance"] = *l.provenance;
  if (l.round) j["round"] = *l.round;
  if (l.elapsed_ms) j["elapsed_ms"] = *l.elapsed_ms;
  j["set_id"] = set_id;
  put_extras(j, l.extras);
  return j;
}


Label label_from_json(const Json& j, const OrdinalScale& scale, const std::map<int, int>* index_map) {
  Label l;
  l.item_id = required(j, "item_id").get<std::string>();
  l.annotator_id = required(j, "annotator_id").get<std::string>();
  l.level = resolve_level(required(j, "level"), scale, index_map);
  l.origin = origin_from_string(required(j, "origin").get<std::string>());
  if (auto it = j.find("provenance"); it != j.end() && !it->is_null()) l.provenance = it->get<std::string>();
  if (auto it = j.find("round"); it != j.end() && !it->is_null()) l.round = it->get<int>();
  if (auto it = j.find("elapsed_ms"); it != j.end() && !it->is_null()) l.elapsed_ms = it->get<std::int64_t>();
  l.extras = collect_extras(
      j, {"item_id", "annotator_id", "level", "origin", "provenance", "round", "elapsed_ms", "set_id"});
  return l;
}

LabelSet labels_from_file(const fs::path& path, const OrdinalScale& scale, const std::string& task_id,
                          std::optional<Origin> expected_origin, const std::map<int, int>* index_map) {
  std::vector<Label> labels;
  std::optional<std::string> set_id;
  for_each_jsonl(path, [&](const Json& row, int) {
    labels.push_back(label_from_json(row, scale, index_map));
    if (auto it = row.find("set_id"); it != row.end()) {
      const std::string id = it->get<std::string>();
      if (set_id && *set_id != id) fail(ErrorKind::Validation, "rows disagree on set_id");
      set_id = id;
    }
    if (expected_origin && labels.back().origin != *expected_origin) {
      fail(ErrorKind::Validation, "expected origin " + std::string(to_string(*expected_origin)) +
                                      ", found " + std::string(to_string(labels.back().origin)));
    }
  });
  Origin origin;
  if (!labels.empty()) {
    origin = labels.front().origin;
  } else if (expected_origin) {
    origin = *expected_origin;
  } else {
    fail(ErrorKind::Validation, "cannot infer the origin of empty label file '" + path.string() + "'");
  }
  try {
    return LabelSet(set_id.value_or(path.stem().string()), task_id, origin, std::move(labels));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace

void Dataset::validate() const {
  task.validate();
  if (gold.origin() != Origin::GroundTruth) {
    fail(ErrorKind::Validation, "gold set must have ground_truth origin");
  }
  std::set<std::string_view> ids;
  for (const Item& item : items) {
    if (!ids.insert(item.item_id).second) {
      fail(ErrorKind::Validation, "duplicate item_id '" + item.item_id + "'");
    }
  }
  std::set<std::string_view> labeled;
  for (const Label& l : gold.labels()) {
    if (!ids.contains(l.item_id)) {
      fail(ErrorKind::Validation, "gold label references missing item '" + l.item_id + "'");
    }
    if (!labeled.insert(l.item_id).second) {
      fail(ErrorKind::Validation, "item '" + l.item_id + "' has more than one gold label");
    }
  }
  gold.check_levels(task.scale);
}

const Item* Dataset::find_item(std::string_view item_id) const {
  auto it = std::lower_bound(items.begin(), items.end(), item_id,
                             [](const Item& item, std::string_view id) { return item.item_id < id; });
  if (it != items.end() && it->item_id == item_id) return &*it;
  // Fall back for unsorted hand-built datasets.
  for (const Item& item : items) {
    if (item.item_id == item_id) return &item;
  }
  return nullptr;
}

int Dataset::gold_level(std::string_view item_id) const {
  for (const Label& l : gold.labels()) {
    if (l.item_id == item_id) return l.level;
  }
  fail(ErrorKind::Validation, "item '" + std::string(item_id) + "' has no gold label");
}

Dataset Dataset::subset(const std::vector<std::string>& item_ids) const {
  const std::set<std::string_view> keep(item_ids.begin(), item_ids.end());
  Dataset out;
  out.task = task;
  for (const Item& item : items) {
    if (keep.contains(item.item_id)) out.items.push_back(item);
  }
  std::sort(out.items.begin(), out.items.end(),
            [](const Item& a, const Item& b) { return a.item_id < b.item_id; });
  std::vector<Label> labels;
  for (const Label& l : gold.labels()) {
    if (keep.contains(l.item_id)) labels.push_back(l);
  }
  std::sort(labels.begin(), labels.end(),
            [](const Label& a, const Label& b) { return a.item_id < b.item_id; });
  out.gold = LabelSet(gold.set_id(), gold.task_id(), gold.origin(), std::move(labels));
  return out;
}

SamplePlan SamplePlan::balanced(const OrdinalScale& scale, int per_class_n, std::uint64_t seed) {
  return {per_class_n * scale.size(), per_class_n, seed, {}};
}

void SamplePlan::validate(const OrdinalScale& scale) const {
  if (per_class_n < 1) fail(ErrorKind::Validation, "per_class_n must be at least 1");
  if (total_n != per_class_n * scale.size()) {
    fail(ErrorKind::Validation, "total_n " + std::to_string(total_n) + " != per_class_n " +
                                    std::to_string(per_class_n) + " x " +
                                    std::to_string(scale.size()) + " levels");
  }
}

TaskSpec load_task(const fs::path& task_config_path, std::map<int, int>* source_index_map) {
  const Json j = parse_json_file(task_config_path);
  try {
    TaskSpec task;
    task.task_id = required(j, "task_id").get<std::string>();
    task.instructions = required(j, "instructions").get<std::string>();
    std::vector<std::pair<int, Level>> raw;
    for (const Json& lv : required(j, "levels")) {
      Level level;
      level.index = required(lv, "index").get<int>();
      level.name = required(lv, "name").get<std::string>();
      level.description = lv.value("description", "");
      raw.emplace_back(level.index, std::move(level));
    }
    for (std::size_t i = 1; i < raw.size(); ++i) {
      if (raw[i].first <= raw[i - 1].first) {
        fail(ErrorKind::Validation, "level indices must be strictly increasing");
      }
    }
    std::map<int, int> index_map;
    std::vector<Level> levels;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      index_map[raw[i].first] = static_cast<int>(i) + 1;
      Level l = raw[i].second;
      l.index = static_cast<int>(i) + 1;
      levels.push_back(std::move(l));
    }
    task.scale = OrdinalScale(std::move(levels));
    if (auto it = j.find("exemplars"); it != j.end() && !it->is_null()) {
      for (const Json& ex : *it) {
        Exemplar e;
        e.content = required(ex, "content").get<std::string>();
        e.level = resolve_level(required(ex, "level"), task.scale, &index_map);
        if (auto src = ex.find("item_id"); src != ex.end()) e.source_item_id = src->get<std::string>();
        task.exemplars.push_back(std::move(e));
      }
    }
    task.extras = collect_extras(j, {"task_id", "instructions", "levels", "exemplars"});
    task.validate();
    if (source_index_map) *source_index_map = std::move(index_map);
    return task;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Parse, task_config_path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.kind(), task_config_path.string() + ": " + e.what());
  }
}

void save_task(const TaskSpec& task, const fs::path& path) {
  Json j;
  j["task_id"] = task.task_id;
  j["instructions"] = task.instructions;
  Json levels = Json::array();
  for (const Level& l : task.scale.levels()) {
    levels.push_back({{"index", l.index}, {"name", l.name}, {"description", l.description}});
  }
  j["levels"] = std::move(levels);
  if (!task.exemplars.empty()) {
    Json ex = Json::array();
    for (const Exemplar& e : task.exemplars) {
      Json row{{"content", e.content}, {"level", e.level}};
      if (e.source_item_id) row["item_id"] = *e.source_item_id;
      ex.push_back(std::move(row));
    }
    j["exemplars"] = std::move(ex);
  }
  put_extras(j, task.extras);
  write_file_atomic(path, j.dump(2) + "\n");
}

std::vector<Item> load_items(const fs::path& path) {
  std::vector<Item> items;
  for_each_jsonl(path, [&](const Json& row, int) { items.push_back(item_from_json(row)); });
  return items;
}

void save_items(const std::vector<Item>& items, const fs::path& path) {
  std::string out;
  for (const Item& item : items) out += item_to_json(item).dump() + "\n";
  write_file_atomic(path, out);
}

Dataset load_dataset(const fs::path& task_config_path, const fs::path& items_path,
                     const fs::path& gold_path) {
  std::map<int, int> index_map;
  Dataset ds;
  ds.task = load_task(task_config_path, &index_map);
  ds.items = load_items(items_path);
  std::sort(ds.items.begin(), ds.items.end(),
            [](const Item& a, const Item& b) { return a.item_id < b.item_id; });
  ds.gold = labels_from_file(gold_path, ds.task.scale, ds.task.task_id, Origin::GroundTruth, &index_map);
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  save_task(dataset.task, dir / "task.json");
  save_items(dataset.items, dir / "items.jsonl");
  save_labels(dataset.gold, dir / "gold.jsonl");
}

Dataset load_dataset_dir(const fs::path& dir) {
  return load_dataset(dir / "task.json", dir / "items.jsonl", dir / "gold.jsonl");
}

Dataset balanced_sample(const Dataset& dataset, int total_n, std::uint64_t seed,
                        const std::map<std::string, std::string>& metadata_equals) {
  const OrdinalScale& scale = dataset.task.scale;
  const int k = scale.size();
  if (total_n < k) {
    fail(ErrorKind::Validation, "sample size " + std::to_string(total_n) +
                                    " is smaller than the number of levels");
  }
  std::vector<std::vector<std::string>> by_level(static_cast<std::size_t>(k) + 1);
  for (const Label& l : dataset.gold.labels()) {
    const Item* item = dataset.find_item(l.item_id);
    if (!item) continue;
    const bool eligible = std::all_of(metadata_equals.begin(), metadata_equals.end(), [&](const auto& kv) {
      auto it = item->metadata.find(kv.first);
      return it != item->metadata.end() && it->second == kv.second;
    });
    if (eligible) by_level[static_cast<std::size_t>(l.level)].push_back(l.item_id);
  }

  std::vector<int> quota(static_cast<std::size_t>(k) + 1, total_n / k);
  if (const int extra = total_n % k; extra > 0) {
    std::vector<int> levels(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) levels[static_cast<std::size_t>(i)] = i + 1;
    SplitMix64 rng = substream(seed, "extra-levels");
    rng.shuffle(std::span<int>(levels));
    for (int i = 0; i < extra; ++i) ++quota[static_cast<std::size_t>(levels[static_cast<std::size_t>(i)])];
  }

  std::vector<std::string> chosen;
  for (int level = 1; level <= k; ++level) {
    auto& ids = by_level[static_cast<std::size_t>(level)];
    const int need = quota[static_cast<std::size_t>(level)];
    if (static_cast<int>(ids.size()) < need) {
      fail(ErrorKind::Validation, "level " + std::to_string(level) + " ('" + scale.level(level).name +
                                      "') has " + std::to_string(ids.size()) +
                                      " eligible items, need " + std::to_string(need));
    }
    std::sort(ids.begin(), ids.end());
    SplitMix64 rng = substream(seed, static_cast<std::uint64_t>(level));
    rng.shuffle(std::span<std::string>(ids));
    chosen.insert(chosen.end(), ids.begin(), ids.begin() + need);
  }
  return dataset.subset(chosen);
}

Dataset stratified_sample(const Dataset& dataset, const SamplePlan& plan) {
  plan.validate(dataset.task.scale);
  return balanced_sample(dataset, plan.total_n, plan.seed, plan.metadata_equals);
}

std::vector<std::vector<std::string>> split_rounds(const Dataset& sample, int round_size,
                                                   std::uint64_t seed) {
  const auto n = static_cast<int>(sample.items.size());
  if (round_size < 1) fail(ErrorKind::Validation, "round size must be positive");
  if (n == 0 || n % round_size != 0) {
    fail(ErrorKind::Validation, "round size " + std::to_string(round_size) +
                                    " does not divide the sample size " + std::to_string(n));
  }
  std::map<int, std::vector<std::string>> by_level;
  std::map<std::string_view, int> gold;
  for (const Label& l : sample.gold.labels()) gold[l.item_id] = l.level;
  for (const Item& item : sample.items) {
    auto it = gold.find(item.item_id);
    by_level[it == gold.end() ? 0 : it->second].push_back(item.item_id);
  }
  std::vector<std::string> sequence;
  for (auto& [level, ids] : by_level) {
    std::sort(ids.begin(), ids.end());
    SplitMix64 rng = substream(seed, static_cast<std::uint64_t>(level));
    rng.shuffle(std::span<std::string>(ids));
    sequence.insert(sequence.end(), ids.begin(), ids.end());
  }
  const std::size_t batches = static_cast<std::size_t>(n / round_size);
  std::vector<std::vector<std::string>> out(batches);
  for (std::size_t t = 0; t < sequence.size(); ++t) out[t % batches].push_back(sequence[t]);
  for (auto& batch : out) std::sort(batch.begin(), batch.end());
  return out;
}

void save_labels(const LabelSet& labels, const fs::path& path) {
  std::string out;
  for (const Label& l : labels.labels()) out += label_to_json(l, labels.set_id()).dump() + "\n";
  write_file_atomic(path, out);
}

LabelSet load_labels(const fs::path& path, const TaskSpec& task, std::optional<Origin> expected_origin) {
  return labels_from_file(path, task.scale, task.task_id, expected_origin, nullptr);
}

}  // namespace ordiag
