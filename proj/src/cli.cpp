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

#include "ordiag/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "ordiag/chat_client.hpp"
#include "ordiag/dataset.hpp"
#include "ordiag/decomposition.hpp"
#include "ordiag/digest.hpp"
#include "ordiag/human_test.hpp"
#include "ordiag/llm_annotator.hpp"
#include "ordiag/report.hpp"
#include "ordiag/rng.hpp"
#include "ordiag/simulator.hpp"

namespace ordiag::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;
using OJson = nlohmann::ordered_json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return kExitIo;
    case ErrorKind::Endpoint: return kExitEndpoint;
    case ErrorKind::MissingPrerequisite: return kExitMissingPrerequisite;
    default: return kExitValidation;
  }
}

namespace {

struct Flags {
  std::string config, task, model, strategy, seed, out, cache, port, resamples;
};

struct Context {
  Json config = Json::object();
  fs::path base = ".";
  fs::path out;
  fs::path cache;
  std::optional<std::uint64_t> seed;
  std::string task;
  std::string model;
  std::string strategy;
  std::optional<int> port;
  std::optional<int> resamples;
  std::ostream* out_stream = &std::cout;
  std::ostream* err = &std::cerr;

  std::ostream& log() const { return *err; }
  std::ostream& say() const { return *out_stream; }
};

std::optional<std::string> config_scalar(const Json& config, const std::string& key) {
  const auto it = config.find(key);
  if (it == config.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer() || it->is_number_unsigned()) return it->dump();
  fail(ErrorKind::Validation, "config key '" + key + "' must be a string or an integer");
}

// flag > ORDIAG_<KEY> > config[key]. Second member tells whether the value
// came from the config file (paths are then relative to its directory).
std::optional<std::pair<std::string, bool>> resolve(const std::string& flag, const std::string& key,
                                                    const Json& config) {
  if (!flag.empty()) return std::pair(flag, false);
  std::string env_name = "ORDIAG_" + key;
  std::transform(env_name.begin(), env_name.end(), env_name.begin(), [](unsigned char c) { return std::toupper(c); });
  if (const char* v = std::getenv(env_name.c_str()); v && *v) return std::pair(std::string(v), false);
  if (auto v = config_scalar(config, key)) return std::pair(*v, true);
  return std::nullopt;
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorKind::Validation, what + " must be a nonnegative integer, got '" + text + "'");
  }
  return value;
}

Context make_context(const Flags& f, std::ostream& out, std::ostream& err, bool config_is_project = true) {
  Context c;
  c.out_stream = &out;
  c.err = &err;
  std::string config_path = f.config;
  if (config_path.empty()) {
    if (const char* v = std::getenv("ORDIAG_CONFIG"); v && *v) config_path = v;
  }
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) fail(ErrorKind::Io, "config file '" + config_path + "' does not exist");
    if (config_is_project) {
      try {
        c.config = Json::parse(read_file(config_path));
      } catch (const Json::parse_error& e) {
        fail(ErrorKind::Parse, config_path + ": " + e.what());
      }
      if (!c.config.is_object()) fail(ErrorKind::Validation, config_path + ": config must be a JSON object");
    }
    c.base = fs::path(config_path).parent_path();
    if (c.base.empty()) c.base = ".";
  }
  auto path_of = [&](const std::pair<std::string, bool>& v) { return v.second ? c.base / v.first : fs::path(v.first); };
  const Json& cfg = c.config;
  const auto out_v = resolve(f.out, "out", cfg);
  c.out = out_v ? path_of(*out_v) : c.base / "out";
  const auto cache_v = resolve(f.cache, "cache", cfg);
  c.cache = cache_v ? path_of(*cache_v) : c.out / "cache";
  if (auto v = resolve(f.seed, "seed", cfg)) c.seed = parse_number<std::uint64_t>(v->first, "seed");
  if (auto v = resolve(f.task, "task", cfg)) c.task = v->first;
  if (auto v = resolve(f.model, "model", cfg)) c.model = v->first;
  if (auto v = resolve(f.strategy, "strategy", cfg)) c.strategy = v->first;
  if (auto v = resolve(f.port, "port", cfg)) c.port = parse_number<int>(v->first, "port");
  if (auto v = resolve(f.resamples, "resamples", cfg)) c.resamples = parse_number<int>(v->first, "resamples");
  return c;
}

std::uint64_t require_seed(const Context& c, const std::string& stage) {
  if (!c.seed) fail(ErrorKind::Validation, stage + " needs an explicit seed (--seed, ORDIAG_SEED or config 'seed')");
  return *c.seed;
}

std::string file_component(const std::string& id) {
  std::string out = id;
  for (char& ch : out) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) ch = '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

std::string display_path(const Context& c, const fs::path& p) {
  const fs::path abs = fs::absolute(p).lexically_normal();
  const fs::path root = fs::absolute(c.out).lexically_normal();
  const fs::path rel = abs.lexically_relative(root);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return abs.generic_string();
}

class Manifest {
 public:
  explicit Manifest(std::string stage) { json_["stage"] = std::move(stage); }
  void param(const std::string& key, OJson value) { json_["parameters"][key] = std::move(value); }
  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void extra(const std::string& key, OJson value) { json_[key] = std::move(value); }

  fs::path write(const Context& c, const std::string& name) {
    auto entries = [&](std::vector<fs::path> paths) {
      std::vector<std::pair<std::string, std::string>> rows;
      for (const fs::path& p : paths) rows.emplace_back(display_path(c, p), file_sha256_hex(p));
      std::sort(rows.begin(), rows.end());
      rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
      OJson arr = OJson::array();
      for (const auto& [path, digest] : rows) arr.push_back({{"path", path}, {"sha256", digest}});
      return arr;
    };
    if (!json_.contains("parameters")) json_["parameters"] = OJson::object();
    json_["inputs"] = entries(inputs_);
    json_["outputs"] = entries(outputs_);
    const fs::path path = c.out / "manifests" / (name + ".json");
    fs::create_directories(path.parent_path());
    write_file_atomic(path, json_.dump(2) + "\n");
    return path;
  }

 private:
  OJson json_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());
}

const Json& config_section(const Context& c, const std::string& key) {
  static const Json empty = Json::object();
  const auto it = c.config.find(key);
  return it == c.config.end() ? empty : *it;
}

template <typename T>
T config_value(const Json& section, const std::string& key, T fallback) {
  const auto it = section.find(key);
  if (it == section.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    fail(ErrorKind::Validation, "config key '" + key + "' has the wrong type");
  }
}

struct TaskSource {
  std::string task_id;
  fs::path task, items, gold;
  std::map<std::string, std::string> metadata_equals;
};

std::vector<TaskSource> configured_tasks(const Context& c) {
  const Json& tasks = config_section(c, "tasks");
  if (!tasks.is_array() || tasks.empty()) fail(ErrorKind::Validation, "config needs a non-empty 'tasks' list");
  std::vector<TaskSource> out;
  for (const Json& t : tasks) {
    TaskSource s;
    s.task = c.base / config_value<std::string>(t, "task", "");
    s.items = c.base / config_value<std::string>(t, "items", "");
    s.gold = c.base / config_value<std::string>(t, "gold", "");
    s.metadata_equals = config_value<std::map<std::string, std::string>>(t, "metadata_equals", {});
    s.task_id = config_value<std::string>(t, "task_id", "");
    if (s.task_id.empty()) s.task_id = load_task(s.task).task_id;
    if (c.task.empty() || c.task == s.task_id) out.push_back(std::move(s));
  }
  if (out.empty()) fail(ErrorKind::Validation, "task '" + c.task + "' is not configured");
  return out;
}

// Task ids with a directory under `root`, or the selected one.
std::vector<std::string> discover_tasks(const Context& c, const fs::path& root) {
  if (!c.task.empty()) return {c.task};
  std::vector<std::string> out;
  if (!c.config.is_null() && c.config.contains("tasks")) {
    for (const TaskSource& t : configured_tasks(c)) out.push_back(t.task_id);
    return out;
  }
  if (fs::is_directory(root)) {
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory()) out.push_back(e.path().filename().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path sample_dir(const Context& c, const std::string& task, const std::string& part) {
  return c.out / "samples" / file_component(task) / part;
}

Dataset load_stage_dataset(const Context& c, const std::string& task, const std::string& part, Manifest* m) {
  const fs::path dir = sample_dir(c, task, part);
  if (!fs::exists(dir / "task.json")) {
    fail(ErrorKind::MissingPrerequisite, "no " + part + " sample for task '" + task + "' under " + dir.string() +
                                             " (run `ordiag sample` first)");
  }
  if (m) {
    m->input(dir / "task.json");
    m->input(dir / "items.jsonl");
    m->input(dir / "gold.jsonl");
  }
  return load_dataset_dir(dir);
}

// ---------------------------------------------------------------------------

int cmd_sample(const Context& c) {
  const std::uint64_t seed = require_seed(c, "sample");
  const Json& plan = config_section(c, "sample");
  const int gt_n = config_value<int>(plan, "ground_truth", kGroundTruthSampleSize);
  const int human_n = config_value<int>(plan, "human_test", kHumanTestSampleSize);
  const int pool_n = config_value<int>(plan, "active_pool", kActivePoolSize);
  for (const TaskSource& src : configured_tasks(c)) {
    Manifest m("sample");
    m.param("task_id", src.task_id);
    m.param("seed", seed);
    m.param("ground_truth", gt_n);
    m.param("human_test", human_n);
    m.param("active_pool", pool_n);
    m.input(src.task);
    m.input(src.items);
    m.input(src.gold);
    const Dataset full = load_dataset(src.task, src.items, src.gold);
    const Dataset gt = balanced_sample(full, gt_n, seed, src.metadata_equals);
    const Dataset human = balanced_sample(gt, human_n, mix_seed(seed, fnv1a64("human_test")));
    std::vector<std::pair<std::string, const Dataset*>> parts{{"ground_truth", &gt}, {"human_test", &human}};

    std::vector<std::string> rest;
    const auto taken = gt.gold.item_ids();
    for (const std::string& id : full.gold.item_ids()) {
      if (!std::binary_search(taken.begin(), taken.end(), id)) rest.push_back(id);
    }
    std::optional<Dataset> pool;
    try {
      pool = balanced_sample(full.subset(rest), pool_n, mix_seed(seed, fnv1a64("active_pool")), src.metadata_equals);
      parts.emplace_back("active_pool", &*pool);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Validation) throw;
      c.log() << "warning: task '" << src.task_id << "': no active-prompting pool (" << e.what() << ")\n";
    }
    for (const auto& [part, ds] : parts) {
      const fs::path dir = sample_dir(c, src.task_id, part);
      ensure_dir(dir);
      save_dataset(*ds, dir);
      for (const char* f : {"task.json", "items.jsonl", "gold.jsonl"}) m.output(dir / f);
    }
    m.write(c, "sample." + file_component(src.task_id));
    c.say() << src.task_id << ": " << gt.items.size() << " ground-truth, " << human.items.size() << " human-test"
            << (pool ? ", " + std::to_string(pool->items.size()) + " pool" : std::string()) << " items\n";
  }
  return kExitOk;
}

std::vector<ModelEndpoint> configured_endpoints(const Context& c) {
  const Json& list = config_section(c, "endpoints");
  if (!list.is_array() || list.empty()) fail(ErrorKind::Validation, "config needs a non-empty 'endpoints' list");
  std::vector<ModelEndpoint> out;
  for (const Json& e : list) {
    ModelEndpoint ep;
    ep.model_id = config_value<std::string>(e, "model_id", "");
    ep.base_url = config_value<std::string>(e, "base_url", "");
    ep.auth_env = config_value<std::string>(e, "auth_env", "");
    ep.request_timeout_s = config_value<double>(e, "request_timeout_s", ep.request_timeout_s);
    ep.max_concurrency = config_value<int>(e, "max_concurrency", ep.max_concurrency);
    ep.rate_limit_per_minute = config_value<double>(e, "rate_limit_per_minute", ep.rate_limit_per_minute);
    ep.validate();
    if (c.model.empty() || c.model == ep.model_id) out.push_back(std::move(ep));
  }
  if (out.empty()) fail(ErrorKind::Validation, "model '" + c.model + "' is not configured");
  return out;
}

std::vector<Strategy> configured_strategies(const Context& c) {
  std::vector<std::string> names;
  if (!c.strategy.empty()) {
    names.push_back(c.strategy);
  } else {
    const Json& list = config_section(c, "strategies");
    if (list.is_array() && !list.empty()) {
      names = list.get<std::vector<std::string>>();
    } else {
      for (auto k : {StrategyKind::ZeroShot, StrategyKind::FewShot, StrategyKind::ChainOfThought,
                     StrategyKind::SelfConsistency, StrategyKind::ActivePrompting}) {
        names.emplace_back(to_string(k));
      }
    }
  }
  const Json& opt = config_section(c, "strategy_options");
  std::vector<Strategy> out;
  for (const std::string& name : names) {
    Strategy s = Strategy::of(strategy_from_string(name));
    if (s.kind == StrategyKind::FewShot) s.few_shot_k = config_value<int>(opt, "few_shot_k", *s.few_shot_k);
    s.sc_samples = config_value<int>(opt, "sc_samples", s.sc_samples);
    s.sc_temperature = config_value<double>(opt, "sc_temperature", s.sc_temperature);
    s.active_queries = config_value<int>(opt, "active_queries", s.active_queries);
    s.active_exemplars = config_value<int>(opt, "active_exemplars", s.active_exemplars);
    s.validate();
    out.push_back(s);
  }
  return out;
}

fs::path run_dir(const Context& c, const std::string& task, const std::string& model, const std::string& strategy) {
  return c.out / "runs" / file_component(task) / file_component(model) / file_component(strategy);
}

int cmd_annotate(const Context& c) {
  const std::uint64_t seed = require_seed(c, "annotate");
  const auto endpoints = configured_endpoints(c);
  const auto strategies = configured_strategies(c);
  const Json& retry_cfg = config_section(c, "retry");
  RetryPolicy retry;
  retry.max_retries = config_value<int>(retry_cfg, "max_retries", retry.max_retries);
  retry.base_backoff = std::chrono::milliseconds(
      config_value<std::int64_t>(retry_cfg, "base_backoff_ms", retry.base_backoff.count()));
  bool endpoint_failure = false;

  for (const TaskSource& src : configured_tasks(c)) {
    for (const ModelEndpoint& ep : endpoints) {
      HttpChatClient client(ep);
      for (const Strategy& strategy : strategies) {
        Manifest m("annotate");
        const Dataset gt = load_stage_dataset(c, src.task_id, "ground_truth", &m);
        // Gold is loaded with the sample but never reaches a prompt.
        RunOptions options;
        options.retry = retry;
        Strategy s = strategy;
        std::optional<Dataset> pool;
        if (fs::exists(sample_dir(c, src.task_id, "active_pool") / "task.json")) {
          pool = load_stage_dataset(c, src.task_id, "active_pool",
                                    s.kind == StrategyKind::FewShot || s.kind == StrategyKind::ActivePrompting ? &m
                                                                                                                : nullptr);
        }
        if (s.kind == StrategyKind::FewShot && static_cast<int>(gt.task.exemplars.size()) < *s.few_shot_k) {
          if (!pool) {
            fail(ErrorKind::MissingPrerequisite, "few-shot on '" + src.task_id +
                                                     "' needs task exemplars or an active-prompting pool");
          }
          std::vector<std::string> ids = pool->gold.item_ids();
          SplitMix64 rng = substream(seed, "few_shot:" + src.task_id);
          rng.shuffle(std::span<std::string>(ids));
          for (int i = 0; i < *s.few_shot_k && i < static_cast<int>(ids.size()); ++i) {
            const Item* item = pool->find_item(ids[static_cast<std::size_t>(i)]);
            options.exemplars.push_back({item->content, pool->gold_level(item->item_id), item->item_id});
          }
        }
        if (s.kind == StrategyKind::ActivePrompting) {
          if (!pool) {
            fail(ErrorKind::MissingPrerequisite, "active prompting on '" + src.task_id + "' needs an active_pool sample");
          }
          s.active_pool_size = static_cast<int>(pool->items.size());
          options.active_pool = pool;
        }
        const AnnotationRun run = run_annotation(gt, client, ep, s, c.cache, seed, options);
        const fs::path dir = run_dir(c, src.task_id, ep.model_id, s.name());
        ensure_dir(dir);
        save_labels(run.result, dir / "labels.jsonl");
        write_file_atomic(dir / "transcripts.jsonl", transcripts_jsonl(run));
        write_file_atomic(dir / "manifest.json", run_manifest_json(run));
        m.param("task_id", src.task_id);
        m.param("model_id", ep.model_id);
        m.param("strategy", s.name());
        m.param("seed", seed);
        for (const char* f : {"labels.jsonl", "transcripts.jsonl", "manifest.json"}) m.output(dir / f);
        m.write(c, "annotate." + file_component(src.task_id) + "." + file_component(ep.model_id) + "." + s.name());

        int endpoint_failed = 0;
        for (const ItemFailure& f : run.failures) {
          endpoint_failed += f.endpoint ? 1 : 0;
          c.log() << (f.endpoint ? "error: " : "warning: ") << src.task_id << "/" << ep.model_id << "/" << s.name()
                  << ": item " << f.item_id << ": " << f.reason << "\n";
        }
        endpoint_failure = endpoint_failure || endpoint_failed > 0;
        c.say() << src.task_id << "/" << ep.model_id << "/" << s.name() << ": " << run.result.size() << " labeled, "
                << run.failures.size() << " failed, " << run.network_requests << " requests, " << run.cache_hits
                << " cache hits\n";
      }
    }
  }
  return endpoint_failure ? kExitEndpoint : kExitOk;
}

std::atomic<bool> g_stop{false};
extern "C" void on_stop_signal(int) { g_stop = true; }

int cmd_serve(const Context& c) {
  const Json& ht = config_section(c, "human_test");
  HumanTestConfig cfg;
  cfg.data_dir = c.out;
  cfg.round_size = config_value<int>(ht, "round_size", kHumanTestRoundSize);
  cfg.seed = require_seed(c, "serve");
  const auto excluded_annotators = config_value<std::vector<std::string>>(ht, "excluded_annotators", {});
  cfg.excluded_annotators = {excluded_annotators.begin(), excluded_annotators.end()};
  if (const auto dir = config_value<std::string>(ht, "static_dir", ""); !dir.empty()) cfg.static_dir = c.base / dir;
  for (const std::string& task : discover_tasks(c, c.out / "samples")) {
    cfg.tasks.push_back(load_stage_dataset(c, task, "human_test", nullptr));
  }
  if (cfg.tasks.empty()) fail(ErrorKind::MissingPrerequisite, "no human-test samples to serve (run `ordiag sample`)");
  const std::string host = config_value<std::string>(ht, "host", "127.0.0.1");
  const int port = c.port.value_or(8080);

  HumanTestService service(std::move(cfg));
  g_stop = false;
  auto old_int = std::signal(SIGINT, on_stop_signal);
  auto old_term = std::signal(SIGTERM, on_stop_signal);
  {
    HumanTestServer server(service, host, port);
    c.say() << "serving " << service.task_ids().size() << " task(s) on http://" << host << ":" << server.port()
            << "\n"
            << std::flush;
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  }
  std::signal(SIGINT, old_int);
  std::signal(SIGTERM, old_term);
  c.log() << "stopped\n";
  return kExitOk;
}

struct RunFile {
  std::string model_dir;
  std::string strategy;
  fs::path labels;
};

std::vector<RunFile> find_runs(const Context& c, const std::string& task) {
  std::vector<RunFile> out;
  const fs::path root = c.out / "runs" / file_component(task);
  if (!fs::is_directory(root)) return out;
  for (const auto& model : fs::directory_iterator(root)) {
    if (!model.is_directory()) continue;
    if (!c.model.empty() && model.path().filename() != file_component(c.model)) continue;
    for (const auto& strat : fs::directory_iterator(model.path())) {
      if (!strat.is_directory() || !fs::exists(strat.path() / "labels.jsonl")) continue;
      if (!c.strategy.empty() && strat.path().filename() != file_component(c.strategy)) continue;
      out.push_back({model.path().filename().string(), strat.path().filename().string(), strat.path() / "labels.jsonl"});
    }
  }
  std::sort(out.begin(), out.end(), [](const RunFile& a, const RunFile& b) {
    return std::tie(a.model_dir, a.strategy) < std::tie(b.model_dir, b.strategy);
  });
  return out;
}

std::string model_id_of(const LabelSet& labels, const RunFile& run) {
  const auto annotators = labels.annotators();
  if (annotators.empty()) return run.model_dir;
  if (annotators.size() > 1) {
    fail(ErrorKind::Validation, run.labels.string() + ": a model run must have exactly one annotator");
  }
  const std::string suffix = ":" + run.strategy;
  std::string id = annotators.front();
  if (id.size() > suffix.size() && id.compare(id.size() - suffix.size(), suffix.size(), suffix) == 0) {
    id.resize(id.size() - suffix.size());
  }
  return id;
}

LabelSet load_human(const Context& c, const std::string& task, const TaskSpec& spec, Manifest* m) {
  const fs::path p = c.out / "human" / (file_component(task) + ".jsonl");
  if (!fs::exists(p)) {
    fail(ErrorKind::MissingPrerequisite, "no human-test labels for task '" + task + "' at " + p.string());
  }
  if (m) m->input(p);
  LabelSet human = load_labels(p, spec, Origin::HumanTest);
  if (human.empty()) fail(ErrorKind::MissingPrerequisite, "human-test labels for '" + task + "' are empty");
  return human;
}

int cmd_decompose(const Context& c) {
  const std::vector<std::string> tasks = discover_tasks(c, c.out / "runs");
  if (tasks.empty()) fail(ErrorKind::MissingPrerequisite, "no annotation runs under " + (c.out / "runs").string());
  const int resamples = c.resamples.value_or(0);
  if (resamples > 0 && resamples < kMinBootstrapResamples) {
    fail(ErrorKind::Validation, "--resamples must be 0 or at least " + std::to_string(kMinBootstrapResamples));
  }
  for (const std::string& task : tasks) {
    Manifest m("decompose");
    m.param("task_id", task);
    m.param("resamples", resamples);
    const Dataset gt = load_stage_dataset(c, task, "ground_truth", &m);
    const LabelSet human = load_human(c, task, gt.task, &m);
    const auto runs = find_runs(c, task);
    if (runs.empty()) fail(ErrorKind::MissingPrerequisite, "no annotation runs for task '" + task + "'");
    std::optional<std::uint64_t> seed;
    if (resamples > 0) {
      seed = require_seed(c, "bootstrap");
      m.param("seed", *seed);
    }
    for (const RunFile& run : runs) {
      m.input(run.labels);
      const LabelSet labels = load_labels(run.labels, gt.task, Origin::ModelPrediction);
      DecompositionRecord rec{task, run.strategy, model_id_of(labels, run),
                              decompose_from_sets(labels, human, gt.gold), std::nullopt};
      if (seed) {
        rec.ci = bootstrap_ci(labels, human, gt.gold, resamples,
                              mix_seed(*seed, fnv1a64(task + "\n" + rec.model_id + "\n" + rec.strategy)));
      }
      const fs::path out = c.out / "decompositions" / file_component(task) / run.model_dir / (run.strategy + ".json");
      ensure_dir(out.parent_path());
      write_file_atomic(out, decomposition_json(rec));
      m.output(out);
      c.say() << task << "/" << rec.model_id << "/" << rec.strategy << ": p_correct "
              << format_fixed3(rec.decomposition.p_correct) << ", task-inherent "
              << format_fixed3(rec.decomposition.pT_boundary + rec.decomposition.pT_concept) << ", model-specific "
              << format_fixed3(rec.decomposition.pM_boundary + rec.decomposition.pM_concept) << "\n";
    }
    m.write(c, "decompose." + file_component(task));
  }
  return kExitOk;
}

int cmd_report(const Context& c) {
  const fs::path droot = c.out / "decompositions";
  std::vector<std::string> tasks = discover_tasks(c, droot);
  Manifest m("report");
  std::vector<TaskInputs> inputs;
  std::map<std::string, ErrorProfile> human_profiles;
  for (const std::string& task : tasks) {
    const fs::path tdir = droot / file_component(task);
    std::vector<fs::path> files;
    if (fs::is_directory(tdir)) {
      for (const auto& e : fs::recursive_directory_iterator(tdir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
      }
    }
    if (files.empty()) continue;
    std::sort(files.begin(), files.end());
    const Dataset gt = load_stage_dataset(c, task, "ground_truth", &m);
    TaskInputs in;
    in.task_id = gt.task.task_id;
    in.gold = gt.gold;
    in.human = load_human(c, task, gt.task, &m);
    in.reference_model = c.model.empty() ? config_value<std::string>(c.config, "reference_model", "") : c.model;
    for (const fs::path& f : files) {
      m.input(f);
      DecompositionRecord rec = decomposition_from_json(read_file(f));
      const fs::path labels = run_dir(c, task, rec.model_id, rec.strategy) / "labels.jsonl";
      const fs::path labels_by_dir = c.out / "runs" / file_component(task) / f.parent_path().filename() / (f.stem().string() + "/labels.jsonl");
      for (const fs::path& p : {labels, labels_by_dir}) {
        if (!fs::exists(p)) continue;
        m.input(p);
        in.runs.push_back({rec.model_id, rec.strategy, load_labels(p, gt.task, Origin::ModelPrediction)});
        break;
      }
      in.decompositions.push_back(std::move(rec));
    }
    human_profiles.emplace(in.task_id, error_profile(in.human, in.gold));
    inputs.push_back(std::move(in));
  }
  if (inputs.empty()) {
    fail(ErrorKind::MissingPrerequisite, "no decomposition files under " + droot.string() +
                                             " (run `ordiag decompose` first)");
  }
  const auto summaries = build_summary(inputs);
  const fs::path rdir = c.out / "reports";
  for (const fs::path& p : write_reports(summaries, rdir)) m.output(p);

  const fs::path sdir = c.out / "surveys";
  if (fs::is_directory(sdir) && human_profiles.size() >= 2) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(sdir)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<SurveyResponse> responses;
    for (const fs::path& f : files) {
      m.input(f);
      responses.push_back(survey_from_json(read_file(f)));
    }
    if (!responses.empty()) {
      try {
        write_file_atomic(rdir / "perception.json", alignment_json(perception_alignment(responses, human_profiles)));
        m.output(rdir / "perception.json");
      } catch (const Error& e) {
        c.log() << "warning: perception alignment skipped: " << e.what() << "\n";
      }
    }
  }
  m.param("tasks", tasks);
  m.write(c, "report");
  c.say() << "wrote reports for " << summaries.size() << " task(s) to " << rdir.string() << "\n";
  return kExitOk;
}

int cmd_simulate(const Context& c, const std::string& config_path) {
  if (config_path.empty()) fail(ErrorKind::Validation, "simulate needs --config with a simulation config");
  SimConfigFile file = load_sim_config(config_path);
  if (c.seed) file.config.seed = *c.seed;
  const SimConfig& cfg = file.config;
  const SimulatedSets sets = simulate(cfg);
  Manifest m("simulate");
  m.input(config_path);
  m.param("seed", cfg.seed);
  m.param("task_id", cfg.task_id);

  const fs::path gt_dir = sample_dir(c, cfg.task_id, "ground_truth");
  ensure_dir(gt_dir);
  save_dataset(sets.dataset, gt_dir);
  const fs::path runs = run_dir(c, cfg.task_id, kSimModelId, std::string(to_string(StrategyKind::ZeroShot)));
  ensure_dir(runs);
  save_labels(sets.model, runs / "labels.jsonl");
  const fs::path human = c.out / "human" / (file_component(cfg.task_id) + ".jsonl");
  ensure_dir(human.parent_path());
  save_labels(sets.human, human);
  for (const fs::path& p : {gt_dir / "task.json", gt_dir / "items.jsonl", gt_dir / "gold.jsonl",
                            runs / "labels.jsonl", human}) {
    m.output(p);
  }
  if (!file.sweep_magnitudes.empty()) {
    const fs::path sweep_path = c.out / "simulate" / (file_component(cfg.task_id) + ".sweep.csv");
    ensure_dir(sweep_path.parent_path());
    write_file_atomic(sweep_path, sweep_csv(sweep(cfg, file.sweep_magnitudes, file.sweep_shape)));
    m.output(sweep_path);
  }
  m.write(c, "simulate." + file_component(cfg.task_id));
  c.say() << "simulated " << cfg.n_items << " items for task '" << cfg.task_id << "' into " << c.out.string()
          << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ordinal annotation error diagnosis"};
  app.name("ordiag");
  app.set_version_flag("--version", "ordiag 0.1.0");
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "Project config (JSON)");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--seed", flags.seed, "Random seed");
  };
  auto* sample = app.add_subcommand("sample", "Draw the ground-truth, human-test and pool samples");
  add_common(sample);
  sample->add_option("--task", flags.task, "Only this task");
  auto* annotate = app.add_subcommand("annotate", "Label the ground-truth sample with model endpoints");
  add_common(annotate);
  annotate->add_option("--task", flags.task, "Only this task");
  annotate->add_option("--model", flags.model, "Only this endpoint model_id");
  annotate->add_option("--strategy", flags.strategy, "Only this prompting strategy");
  annotate->add_option("--cache", flags.cache, "Response cache directory");
  auto* serve = app.add_subcommand("serve", "Run the human annotation test service");
  add_common(serve);
  serve->add_option("--task", flags.task, "Only this task");
  serve->add_option("--port", flags.port, "Listen port (0 picks a free one)");
  auto* decompose = app.add_subcommand("decompose", "Split model errors into task-inherent and model-specific parts");
  add_common(decompose);
  decompose->add_option("--task", flags.task, "Only this task");
  decompose->add_option("--model", flags.model, "Only this model");
  decompose->add_option("--strategy", flags.strategy, "Only this strategy");
  decompose->add_option("--resamples", flags.resamples, "Bootstrap resamples for intervals (0 = none)");
  auto* report = app.add_subcommand("report", "Render summaries, figures and correlations");
  add_common(report);
  report->add_option("--task", flags.task, "Only this task");
  report->add_option("--model", flags.model, "Reference model for baseline and gain");
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic label sets from displacement kernels");
  add_common(simulate);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (simulate->parsed()) {
      std::string sim_config = flags.config;
      if (sim_config.empty()) {
        if (const char* v = std::getenv("ORDIAG_CONFIG"); v && *v) sim_config = v;
      }
      return cmd_simulate(make_context(flags, out, err, false), sim_config);
    }
    const Context c = make_context(flags, out, err);
    if (sample->parsed()) return cmd_sample(c);
    if (annotate->parsed()) return cmd_annotate(c);
    if (serve->parsed()) return cmd_serve(c);
    if (decompose->parsed()) return cmd_decompose(c);
    if (report->parsed()) return cmd_report(c);
  } catch (const Error& e) {
    err << "ordiag: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "ordiag: io: " << e.what() << "\n";
    return kExitIo;
  } catch (const Json::exception& e) {
    err << "ordiag: parse: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace ordiag::cli
