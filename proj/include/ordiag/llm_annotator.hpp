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

// LLM annotation under five prompting strategies. Responses go through a
// content-addressed cache; labels are parsed strictly.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ordiag/chat_client.hpp"
#include "ordiag/dataset.hpp"

namespace ordiag {

enum class StrategyKind { ZeroShot, FewShot, ChainOfThought, SelfConsistency, ActivePrompting };

std::string_view to_string(StrategyKind kind);
StrategyKind strategy_from_string(std::string_view text);

inline constexpr int kSelfConsistencySamples = 5;
inline constexpr int kActivePoolSize = 20;
inline constexpr double kSamplingTemperature = 0.7;
inline constexpr const char* kChainOfThoughtCue = "Please think step by step before selecting the label.";

struct Strategy {
  StrategyKind kind = StrategyKind::ZeroShot;
  std::optional<int> few_shot_k;
  int sc_samples = kSelfConsistencySamples;
  double sc_temperature = kSamplingTemperature;
  int active_pool_size = kActivePoolSize;
  // Active prompting: samples per pool item and number of exemplars kept.
  int active_queries = kSelfConsistencySamples;
  int active_exemplars = 4;
  double entropy_weight = 0.5;
  double error_weight = 0.5;

  static Strategy of(StrategyKind kind);
  std::string name() const { return std::string(to_string(kind)); }
  void validate() const;
};

// Deterministic prompt text. Exemplars whose source item is `item` are
// skipped so an item's own gold label never appears in its prompt.
std::string build_prompt(const TaskSpec& task, const Strategy& strategy, const Item& item,
                         const std::vector<Exemplar>& exemplars);

// Level from the last line of the form "LABEL: k"; otherwise the last
// integer token in the text that is a valid level; otherwise nullopt.
std::optional<int> parse_label(std::string_view response, const OrdinalScale& scale);

// Mode; ties go to the candidate closest to the median of all samples, then
// to the smaller level. `samples` must be non-empty.
int majority_vote(const std::vector<int>& samples);

// Cache of completions, one JSON file per request named by the SHA-256 of
// the canonical key {model, prompt_sha256, temperature, sample_index}.
// Writes are atomic.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(const std::string& model_id, const std::string& prompt_sha256, double temperature,
                         int sample_index);
  std::optional<std::string> lookup(const std::string& key) const;
  void store(const std::string& key, const std::string& model_id, const std::string& prompt_sha256,
             double temperature, int sample_index, const std::string& response) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct Transcript {
  std::string prompt_sha256;
  int sample_index = 0;
  double temperature = 0.0;
  std::string response;
};

struct ItemFailure {
  std::string item_id;
  std::string reason;
  bool endpoint = false;  // true when caused by the endpoint, false for unparsable output
};

struct RetryPolicy {
  int max_retries = 5;
  std::chrono::milliseconds base_backoff{500};
};

struct ActiveScore {
  std::string item_id;
  double entropy = 0.0;     // normalized to [0, 1]
  double error_rate = 0.0;  // fraction of responses not equal to gold
  double score = 0.0;
};

struct ActiveSelection {
  std::vector<Exemplar> exemplars;
  std::vector<ActiveScore> scores;  // ranked, best first
};

struct AnnotationRun {
  std::string run_id;
  std::string task_id;
  ModelEndpoint endpoint;
  Strategy strategy;
  std::uint64_t seed = 0;
  std::chrono::system_clock::time_point started;
  std::chrono::system_clock::time_point finished;
  std::vector<std::pair<std::string, std::vector<Transcript>>> transcripts;  // by item_id
  LabelSet result;
  std::vector<ItemFailure> failures;
  std::vector<Exemplar> exemplars_used;
  int network_requests = 0;
  int cache_hits = 0;
};

struct RunOptions {
  // Few-shot exemplars (defaults to the task's own) or precomputed active
  // exemplars.
  std::vector<Exemplar> exemplars;
  // Pool for active prompting when `exemplars` is empty.
  std::optional<Dataset> active_pool;
  RetryPolicy retry;
};

// Score = entropy_weight * normalized response entropy + error_weight *
// error rate against gold. Normalized entropy divides by
// log(min(active_queries, number of response categories possible)).
// Unparsable responses form their own category and count as errors.
// Ties rank by item_id.
ActiveSelection select_active_exemplars(const Dataset& pool, ChatClient& client, const ModelEndpoint& endpoint,
                                        const Strategy& strategy, const ResponseCache& cache, std::uint64_t seed,
                                        const RetryPolicy& retry = {});

// Scoring used by select_active_exemplars, exposed for checking.
ActiveScore score_pool_item(const std::string& item_id, const std::vector<std::optional<int>>& responses, int gold,
                            int n_levels, const Strategy& strategy);

AnnotationRun run_annotation(const Dataset& dataset, ChatClient& client, const ModelEndpoint& endpoint,
                             const Strategy& strategy, const std::filesystem::path& cache_dir, std::uint64_t seed,
                             const RunOptions& options = {});

std::string annotator_id_for(const ModelEndpoint& endpoint, const Strategy& strategy);

// {run_id, task_id, model_id, strategy, seed, counts, failures}
std::string run_manifest_json(const AnnotationRun& run);
// One JSON object per line: {item_id, prompt_sha256, sample_index, temperature, response}.
std::string transcripts_jsonl(const AnnotationRun& run);

}  // namespace ordiag
