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

#include "ordiag/llm_annotator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include "json.hpp"
#include "ordiag/digest.hpp"
#include "ordiag/rng.hpp"

namespace ordiag {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::ZeroShot: return "zero_shot";
    case StrategyKind::FewShot: return "few_shot";
    case StrategyKind::ChainOfThought: return "chain_of_thought";
    case StrategyKind::SelfConsistency: return "self_consistency";
    case StrategyKind::ActivePrompting: return "active_prompting";
  }
  return "unknown";
}

StrategyKind strategy_from_string(std::string_view text) {
  for (StrategyKind k : {StrategyKind::ZeroShot, StrategyKind::FewShot, StrategyKind::ChainOfThought,
                         StrategyKind::SelfConsistency, StrategyKind::ActivePrompting}) {
    if (to_string(k) == text) return k;
  }
  fail(ErrorKind::Validation, "unknown strategy '" + std::string(text) + "'");
}

Strategy Strategy::of(StrategyKind kind) {
  Strategy s;
  s.kind = kind;
  if (kind == StrategyKind::FewShot) s.few_shot_k = 3;
  return s;
}

void Strategy::validate() const {
  if (sc_samples < 1) fail(ErrorKind::Validation, "sc_samples must be at least 1");
  if (kind == StrategyKind::FewShot && (!few_shot_k || *few_shot_k < 1)) {
    fail(ErrorKind::Validation, "few-shot strategy needs few_shot_k >= 1");
  }
  if (active_pool_size < 1 || active_queries < 1 || active_exemplars < 1) {
    fail(ErrorKind::Validation, "active prompting sizes must be positive");
  }
  if (!(sc_temperature >= 0.0)) fail(ErrorKind::Validation, "sc_temperature must be nonnegative");
  if (entropy_weight < 0.0 || error_weight < 0.0) fail(ErrorKind::Validation, "active weights must be nonnegative");
}

std::string build_prompt(const TaskSpec& task, const Strategy& strategy, const Item& item,
                         const std::vector<Exemplar>& exemplars) {
  for (const Exemplar& e : exemplars) task.scale.check(e.level);
  std::string p = task.instructions;
  p += "\n\nLevels:\n";
  for (const Level& l : task.scale.levels()) {
    p += std::to_string(l.index) + ". " + l.name;
    if (!l.description.empty()) p += ": " + l.description;
    p += "\n";
  }

  std::vector<const Exemplar*> shown;
  if (strategy.kind == StrategyKind::FewShot || strategy.kind == StrategyKind::ActivePrompting) {
    const std::size_t limit =
        strategy.kind == StrategyKind::FewShot ? static_cast<std::size_t>(strategy.few_shot_k.value_or(0))
                                               : exemplars.size();
    for (const Exemplar& e : exemplars) {
      if (shown.size() >= limit) break;
      if (e.source_item_id ? *e.source_item_id == item.item_id : e.content == item.content) continue;
      shown.push_back(&e);
    }
  }
  if (!shown.empty()) {
    p += "\nExamples:\n";
    for (std::size_t i = 0; i < shown.size(); ++i) {
      p += "\nExample " + std::to_string(i + 1) + ":\n" + shown[i]->content + "\nLABEL: " +
           std::to_string(shown[i]->level) + "\n";
    }
  }

  p += "\nText to annotate:\n" + item.content + "\n\n";
  if (strategy.kind == StrategyKind::ChainOfThought) p += std::string(kChainOfThoughtCue) + "\n";
  p += "The final line of your answer must be `LABEL: <index>` with <index> between 1 and " +
       std::to_string(task.scale.size()) + ".\n";
  return p;
}

std::optional<int> parse_label(std::string_view response, const OrdinalScale& scale) {
  static const std::regex label_line(R"(^[\s*_`>#-]*LABEL\s*:\s*[*_`]*\s*(-?\d+))", std::regex::icase);
  const std::string text(response);
  std::optional<int> from_line;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    const std::string line = text.substr(start, end - start);
    std::smatch m;
    if (std::regex_search(line, m, label_line)) {
      try {
        from_line = std::stoi(m[1].str());
      } catch (const std::exception&) {
        from_line.reset();
      }
    }
    start = end + 1;
  }
  if (from_line && scale.contains(*from_line)) return from_line;

  std::optional<int> last_valid;
  for (std::size_t i = 0; i < text.size();) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j - i <= 9) {
      const int v = std::stoi(text.substr(i, j - i));
      if (scale.contains(v)) last_valid = v;
    }
    i = j;
  }
  return last_valid;
}

int majority_vote(const std::vector<int>& samples) {
  if (samples.empty()) fail(ErrorKind::Validation, "majority vote over no samples");
  std::map<int, int> counts;
  for (int s : samples) ++counts[s];
  int best = 0;
  for (const auto& [level, c] : counts) best = std::max(best, c);
  std::vector<int> tied;
  for (const auto& [level, c] : counts) {
    if (c == best) tied.push_back(level);
  }
  if (tied.size() == 1) return tied.front();
  std::vector<int> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
  // `tied` is ascending, so the first minimum is the smaller level.
  int pick = tied.front();
  double pick_dist = std::abs(pick - median);
  for (int t : tied) {
    const double d = std::abs(t - median);
    if (d < pick_dist) {
      pick = t;
      pick_dist = d;
    }
  }
  return pick;
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) fail(ErrorKind::Io, "cannot create cache directory '" + dir_.string() + "': " + ec.message());
}

std::string ResponseCache::key(const std::string& model_id, const std::string& prompt_sha256, double temperature,
                               int sample_index) {
  // nlohmann::json objects keep keys sorted, so dump() is canonical.
  const Json canonical{{"model", model_id},
                       {"prompt_sha256", prompt_sha256},
                       {"temperature", temperature},
                       {"sample_index", sample_index}};
  return sha256_hex(canonical.dump());
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
  const fs::path p = dir_ / (key + ".json");
  if (!fs::exists(p)) return std::nullopt;
  try {
    return Json::parse(read_file(p)).at("response").get<std::string>();
  } catch (const Json::exception&) {
    return std::nullopt;  // a damaged entry is refetched and overwritten
  }
}

void ResponseCache::store(const std::string& key, const std::string& model_id, const std::string& prompt_sha256,
                          double temperature, int sample_index, const std::string& response) const {
  const Json entry{{"model", model_id},         {"prompt_sha256", prompt_sha256}, {"temperature", temperature},
                   {"sample_index", sample_index}, {"response", response}};
  write_file_atomic(dir_ / (key + ".json"), entry.dump(2) + "\n");
}

namespace {

class RateLimiter {
 public:
  explicit RateLimiter(double per_minute)
      : interval_(per_minute > 0.0 ? std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                         std::chrono::duration<double>(60.0 / per_minute))
                                   : std::chrono::steady_clock::duration::zero()) {}

  void acquire() {
    if (interval_ == std::chrono::steady_clock::duration::zero()) return;
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(mu_);
      slot = std::max(std::chrono::steady_clock::now(), next_);
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  std::chrono::steady_clock::duration interval_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_{};
};

struct Fetcher {
  ChatClient& client;
  const ModelEndpoint& endpoint;
  const ResponseCache& cache;
  const RetryPolicy& retry;
  RateLimiter limiter;
  std::atomic<int> requests{0};
  std::atomic<int> hits{0};

  Fetcher(ChatClient& c, const ModelEndpoint& e, const ResponseCache& ca, const RetryPolicy& r)
      : client(c), endpoint(e), cache(ca), retry(r), limiter(e.rate_limit_per_minute) {}

  // Throws EndpointError once retries are exhausted or on a permanent error.
  std::string fetch(const std::string& prompt, const std::string& prompt_sha, double temperature, int sample_index,
                    std::uint64_t request_seed) {
    const std::string key = ResponseCache::key(endpoint.model_id, prompt_sha, temperature, sample_index);
    if (auto cached = cache.lookup(key)) {
      ++hits;
      return *cached;
    }
    ChatRequest request{endpoint.model_id, {{"user", prompt}}, temperature, request_seed};
    for (int attempt = 0;; ++attempt) {
      limiter.acquire();
      ++requests;
      try {
        std::string text = client.complete(request);
        cache.store(key, endpoint.model_id, prompt_sha, temperature, sample_index, text);
        return text;
      } catch (const EndpointError& e) {
        if (!e.transient() || attempt >= retry.max_retries) throw;
        std::this_thread::sleep_for(retry.base_backoff * (1LL << std::min(attempt, 20)));
      }
    }
  }
};

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first
// exception after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n);
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < count; ++t) threads.emplace_back(body);
  body();
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::uint64_t request_seed(std::uint64_t seed, const std::string& item_id, int sample_index) {
  return mix_seed(seed, fnv1a64(item_id) ^ static_cast<std::uint64_t>(sample_index));
}

}  // namespace

ActiveScore score_pool_item(const std::string& item_id, const std::vector<std::optional<int>>& responses, int gold,
                            int n_levels, const Strategy& strategy) {
  ActiveScore s;
  s.item_id = item_id;
  if (responses.empty()) return s;
  std::map<int, int> counts;  // 0 = unparsable
  int errors = 0;
  for (const auto& r : responses) {
    ++counts[r.value_or(0)];
    if (!r || *r != gold) ++errors;
  }
  const double n = static_cast<double>(responses.size());
  double h = 0.0;
  for (const auto& [level, c] : counts) {
    const double p = c / n;
    h -= p * std::log(p);
  }
  const int categories = std::min(static_cast<int>(responses.size()), n_levels + 1);
  s.entropy = categories > 1 ? h / std::log(static_cast<double>(categories)) : 0.0;
  s.error_rate = errors / n;
  s.score = strategy.entropy_weight * s.entropy + strategy.error_weight * s.error_rate;
  return s;
}

ActiveSelection select_active_exemplars(const Dataset& pool, ChatClient& client, const ModelEndpoint& endpoint,
                                        const Strategy& strategy, const ResponseCache& cache, std::uint64_t seed,
                                        const RetryPolicy& retry) {
  strategy.validate();
  if (static_cast<int>(pool.items.size()) != strategy.active_pool_size) {
    fail(ErrorKind::Validation, "active prompting pool has " + std::to_string(pool.items.size()) +
                                    " items, expected " + std::to_string(strategy.active_pool_size));
  }
  const Strategy probe = Strategy::of(StrategyKind::ZeroShot);
  Fetcher fetcher(client, endpoint, cache, retry);
  std::vector<ActiveScore> scores(pool.items.size());
  parallel_for(pool.items.size(), endpoint.max_concurrency, [&](std::size_t i) {
    const Item& item = pool.items[i];
    const int gold = pool.gold_level(item.item_id);
    const std::string prompt = build_prompt(pool.task, probe, item, {});
    const std::string sha = sha256_hex(prompt);
    std::vector<std::optional<int>> responses;
    for (int s = 0; s < strategy.active_queries; ++s) {
      try {
        responses.push_back(parse_label(
            fetcher.fetch(prompt, sha, strategy.sc_temperature, s, request_seed(seed, item.item_id, s)),
            pool.task.scale));
      } catch (const EndpointError& e) {
        throw EndpointError("active pool item '" + item.item_id + "': " + e.what(), e.transient());
      }
    }
    scores[i] = score_pool_item(item.item_id, responses, gold, pool.task.scale.size(), strategy);
  });
  std::stable_sort(scores.begin(), scores.end(), [](const ActiveScore& a, const ActiveScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
  ActiveSelection out;
  out.scores = scores;
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(strategy.active_exemplars), scores.size());
  for (std::size_t i = 0; i < keep; ++i) {
    const Item* item = pool.find_item(scores[i].item_id);
    out.exemplars.push_back({item->content, pool.gold_level(item->item_id), item->item_id});
  }
  return out;
}

std::string annotator_id_for(const ModelEndpoint& endpoint, const Strategy& strategy) {
  return endpoint.model_id + ":" + strategy.name();
}

AnnotationRun run_annotation(const Dataset& dataset, ChatClient& client, const ModelEndpoint& endpoint,
                             const Strategy& strategy, const fs::path& cache_dir, std::uint64_t seed,
                             const RunOptions& options) {
  dataset.validate();
  endpoint.validate();
  strategy.validate();
  const ResponseCache cache(cache_dir);

  AnnotationRun run;
  run.task_id = dataset.task.task_id;
  run.endpoint = endpoint;
  run.strategy = strategy;
  run.seed = seed;
  run.started = std::chrono::system_clock::now();
  {
    std::string ids;
    for (const Item& item : dataset.items) ids += item.item_id + "\n";
    run.run_id = sha256_hex(run.task_id + "|" + endpoint.model_id + "|" + strategy.name() + "|" +
                            std::to_string(seed) + "|" + ids)
                     .substr(0, 16);
  }

  std::vector<Exemplar> exemplars = options.exemplars;
  if (strategy.kind == StrategyKind::FewShot) {
    if (exemplars.empty()) exemplars = dataset.task.exemplars;
    if (static_cast<int>(exemplars.size()) < *strategy.few_shot_k) {
      fail(ErrorKind::Validation, "few-shot needs " + std::to_string(*strategy.few_shot_k) + " exemplars, " +
                                      std::to_string(exemplars.size()) + " available");
    }
  } else if (strategy.kind == StrategyKind::ActivePrompting && exemplars.empty()) {
    if (!options.active_pool) fail(ErrorKind::Validation, "active prompting needs a pool or exemplars");
    exemplars = select_active_exemplars(*options.active_pool, client, endpoint, strategy, cache, seed,
                                        options.retry)
                    .exemplars;
  }
  run.exemplars_used = exemplars;

  const bool sampled = strategy.kind == StrategyKind::SelfConsistency;
  const int samples = sampled ? strategy.sc_samples : 1;
  const double temperature = sampled ? strategy.sc_temperature : 0.0;
  const std::string annotator = annotator_id_for(endpoint, strategy);

  struct Outcome {
    std::vector<Transcript> transcripts;
    std::optional<int> level;
    std::optional<ItemFailure> failure;
  };
  std::vector<Outcome> outcomes(dataset.items.size());
  Fetcher fetcher(client, endpoint, cache, options.retry);
  parallel_for(dataset.items.size(), endpoint.max_concurrency, [&](std::size_t i) {
    const Item& item = dataset.items[i];
    const std::string prompt = build_prompt(dataset.task, strategy, item, exemplars);
    const std::string sha = sha256_hex(prompt);
    Outcome& out = outcomes[i];
    std::vector<int> parsed;
    for (int s = 0; s < samples; ++s) {
      try {
        std::string text = fetcher.fetch(prompt, sha, temperature, s, request_seed(seed, item.item_id, s));
        if (auto level = parse_label(text, dataset.task.scale)) parsed.push_back(*level);
        out.transcripts.push_back({sha, s, temperature, std::move(text)});
      } catch (const EndpointError& e) {
        out.failure = ItemFailure{item.item_id, e.what(), true};
        return;
      }
    }
    if (parsed.empty()) {
      out.failure = ItemFailure{item.item_id, "unparsable response", false};
      return;
    }
    out.level = sampled ? majority_vote(parsed) : parsed.front();
  });

  std::vector<Label> labels;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const std::string& id = dataset.items[i].item_id;
    run.transcripts.emplace_back(id, std::move(outcomes[i].transcripts));
    if (outcomes[i].failure) {
      run.failures.push_back(*outcomes[i].failure);
      continue;
    }
    Label l;
    l.item_id = id;
    l.annotator_id = annotator;
    l.level = *outcomes[i].level;
    l.origin = Origin::ModelPrediction;
    l.provenance = strategy.name();
    labels.push_back(std::move(l));
  }
  run.result = LabelSet(endpoint.model_id + "." + strategy.name(), run.task_id, Origin::ModelPrediction,
                        std::move(labels));
  run.network_requests = fetcher.requests.load();
  run.cache_hits = fetcher.hits.load();
  run.finished = std::chrono::system_clock::now();
  return run;
}

std::string run_manifest_json(const AnnotationRun& run) {
  nlohmann::ordered_json j;
  j["run_id"] = run.run_id;
  j["task_id"] = run.task_id;
  j["model_id"] = run.endpoint.model_id;
  j["strategy"] = run.strategy.name();
  j["seed"] = run.seed;
  int unparsable = 0;
  for (const ItemFailure& f : run.failures) unparsable += f.endpoint ? 0 : 1;
  j["counts"] = {{"items", run.transcripts.size()},
                 {"labeled", run.result.size()},
                 {"failed", run.failures.size()},
                 {"unparsable", unparsable},
                 {"endpoint_failures", static_cast<int>(run.failures.size()) - unparsable}};
  j["failures"] = nlohmann::ordered_json::array();
  for (const ItemFailure& f : run.failures) {
    j["failures"].push_back({{"item_id", f.item_id}, {"reason", f.reason}, {"endpoint", f.endpoint}});
  }
  if (!run.exemplars_used.empty()) {
    j["exemplars"] = nlohmann::ordered_json::array();
    for (const Exemplar& e : run.exemplars_used) {
      nlohmann::ordered_json row{{"level", e.level}};
      if (e.source_item_id) row["item_id"] = *e.source_item_id;
      j["exemplars"].push_back(std::move(row));
    }
  }
  return j.dump(2) + "\n";
}

std::string transcripts_jsonl(const AnnotationRun& run) {
  std::string out;
  for (const auto& [item_id, list] : run.transcripts) {
    for (const Transcript& t : list) {
      nlohmann::ordered_json row{{"item_id", item_id},
                                 {"prompt_sha256", t.prompt_sha256},
                                 {"sample_index", t.sample_index},
                                 {"temperature", t.temperature},
                                 {"response", t.response}};
      out += row.dump() + "\n";
    }
  }
  return out;
}

}  // namespace ordiag
