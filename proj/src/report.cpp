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

#include "ordiag/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "json.hpp"
#include "ordiag/dataset.hpp"
#include "ordiag/llm_annotator.hpp"
#include "ordiag/metrics.hpp"

namespace ordiag {

namespace fs = std::filesystem;

namespace {

int strategy_rank(const std::string& name) {
  static const std::array<StrategyKind, 5> order = {StrategyKind::ZeroShot, StrategyKind::FewShot,
                                                    StrategyKind::ChainOfThought, StrategyKind::SelfConsistency,
                                                    StrategyKind::ActivePrompting};
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (to_string(order[i]) == name) return static_cast<int>(i);
  }
  return static_cast<int>(order.size());
}

bool result_before(const StrategyResult& a, const StrategyResult& b) {
  const int ra = strategy_rank(a.record.strategy), rb = strategy_rank(b.record.strategy);
  if (ra != rb) return ra < rb;
  if (a.record.strategy != b.record.strategy) return a.record.strategy < b.record.strategy;
  return a.record.model_id < b.record.model_id;
}

double round3(double v) {
  const double r = std::round(v * 1000.0) / 1000.0;
  return r == 0.0 ? 0.0 : r;  // no negative zero
}

const std::string kZeroShot(to_string(StrategyKind::ZeroShot));

}  // namespace

std::optional<double> TaskSummary::field(const std::string& name) const {
  if (name == "baseline_accuracy") return baseline_accuracy;
  if (name == "best_accuracy") return best_accuracy;
  if (name == "gain") return gain;
  if (name == "human_accuracy") return human_accuracy;
  if (name == "human_alpha") return human_alpha;
  if (name == "human_boundary") return human_boundary;
  if (name == "human_concept") return human_concept;
  if (name == "baseline_model_specific") return baseline_model_specific;
  fail(ErrorKind::Validation, "unknown summary field '" + name + "'");
}

std::vector<TaskSummary> build_summary(const std::vector<TaskInputs>& inputs) {
  std::vector<TaskSummary> out;
  std::set<std::string> seen_tasks;
  for (const TaskInputs& in : inputs) {
    if (!seen_tasks.insert(in.task_id).second) fail(ErrorKind::Validation, "task '" + in.task_id + "' given twice");
    if (in.human.empty()) fail(ErrorKind::MissingPrerequisite, "task '" + in.task_id + "' has no human annotation set");
    if (in.gold.empty()) fail(ErrorKind::MissingPrerequisite, "task '" + in.task_id + "' has no ground truth");

    TaskSummary s;
    s.task_id = in.task_id;
    s.reference_model = in.reference_model;
    if (s.reference_model.empty()) {
      std::set<std::string> models;
      for (const StrategyRun& r : in.runs) models.insert(r.model_id);
      for (const DecompositionRecord& r : in.decompositions) models.insert(r.model_id);
      if (models.size() > 1) {
        fail(ErrorKind::Validation, "task '" + in.task_id + "' has runs from several models; name a reference model");
      }
      if (!models.empty()) s.reference_model = *models.begin();
    }

    std::map<std::pair<std::string, std::string>, const DecompositionRecord*> given;
    for (const DecompositionRecord& r : in.decompositions) {
      if (r.task_id != in.task_id) {
        fail(ErrorKind::Validation, "decomposition for task '" + r.task_id + "' filed under '" + in.task_id + "'");
      }
      if (!given.emplace(std::pair(r.model_id, r.strategy), &r).second) {
        fail(ErrorKind::Validation, "duplicate decomposition for " + r.model_id + "/" + r.strategy);
      }
    }
    std::set<std::pair<std::string, std::string>> covered;
    for (const StrategyRun& run : in.runs) {
      const auto key = std::pair(run.model_id, run.strategy);
      if (!covered.insert(key).second) {
        fail(ErrorKind::Validation, "duplicate run for " + run.model_id + "/" + run.strategy);
      }
      StrategyResult result;
      if (const auto it = given.find(key); it != given.end()) {
        result.record = *it->second;
      } else {
        result.record = {in.task_id, run.strategy, run.model_id, decompose_from_sets(run.labels, in.human, in.gold),
                         std::nullopt};
      }
      result.accuracy = accuracy(run.labels, in.gold).value;
      s.strategies.push_back(std::move(result));
    }
    for (const auto& [key, record] : given) {
      if (covered.count(key)) continue;
      s.strategies.push_back({*record, record->decomposition.p_correct});
    }
    std::sort(s.strategies.begin(), s.strategies.end(), result_before);

    const StrategyResult* baseline = nullptr;
    const StrategyResult* best = nullptr;
    for (const StrategyResult& r : s.strategies) {
      if (r.record.model_id != s.reference_model) continue;
      if (r.record.strategy == kZeroShot) baseline = &r;
      if (!best || r.accuracy > best->accuracy) best = &r;
    }
    if (!baseline) {
      fail(ErrorKind::MissingPrerequisite, "task '" + in.task_id + "' has no zero-shot run" +
                                               (s.reference_model.empty() ? "" : " for " + s.reference_model));
    }
    s.baseline_accuracy = baseline->accuracy;
    s.best_strategy = best->record.strategy;
    s.best_accuracy = best->accuracy;
    s.gain = s.best_accuracy - s.baseline_accuracy;
    s.baseline_model_specific = baseline->record.decomposition.pM_boundary + baseline->record.decomposition.pM_concept;

    s.human_accuracy = accuracy(in.human, in.gold).value;
    const ErrorProfile hp = error_profile(in.human, in.gold);
    s.human_boundary = hp.p_boundary();
    s.human_concept = hp.p_concept();
    if (in.human.annotators().size() >= 2) {
      try {
        s.human_alpha = krippendorff_alpha(in.human, AlphaDifference::Ordinal).value;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedStatistic) throw;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string_view to_string(CorrelationMethod method) {
  return method == CorrelationMethod::Pearson ? "pearson" : "spearman";
}

Correlation correlate(const std::vector<TaskSummary>& summaries, const std::string& x_field,
                      const std::string& y_field, CorrelationMethod method) {
  std::vector<double> x, y;
  for (const TaskSummary& s : summaries) {
    const auto a = s.field(x_field), b = s.field(y_field);
    if (a && b) {
      x.push_back(*a);
      y.push_back(*b);
    }
  }
  if (x.size() < 3) {
    fail(ErrorKind::InsufficientData, "correlating " + x_field + " with " + y_field + " needs 3 tasks, have " +
                                          std::to_string(x.size()));
  }
  Correlation c{x_field, y_field, method, 0.0, static_cast<int>(x.size())};
  c.coefficient = method == CorrelationMethod::Pearson ? pearson(x, y) : spearman(x, y);
  return c;
}

std::string format_fixed3(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", round3(value));
  return buf;
}

std::string summary_json(const TaskSummary& s) {
  nlohmann::ordered_json j;
  j["task_id"] = s.task_id;
  j["reference_model"] = s.reference_model;
  j["baseline_accuracy"] = round3(s.baseline_accuracy);
  j["best_strategy"] = s.best_strategy;
  j["best_accuracy"] = round3(s.best_accuracy);
  j["gain"] = round3(s.gain);
  j["human_accuracy"] = round3(s.human_accuracy);
  if (s.human_alpha) {
    j["human_alpha"] = round3(*s.human_alpha);
  } else {
    j["human_alpha"] = nullptr;
  }
  j["human_boundary"] = round3(s.human_boundary);
  j["human_concept"] = round3(s.human_concept);
  j["baseline_model_specific"] = round3(s.baseline_model_specific);
  j["strategies"] = nlohmann::ordered_json::array();
  for (const StrategyResult& r : s.strategies) {
    nlohmann::ordered_json row;
    row["model_id"] = r.record.model_id;
    row["strategy"] = r.record.strategy;
    row["accuracy"] = round3(r.accuracy);
    const auto values = r.record.decomposition.components();
    for (std::size_t i = 0; i < values.size(); ++i) row[Decomposition::kComponentNames[i]] = round3(values[i]);
    row["n_model"] = r.record.decomposition.n_model;
    row["n_human"] = r.record.decomposition.n_human;
    if (r.record.ci) {
      nlohmann::ordered_json ci;
      for (std::size_t i = 0; i < r.record.ci->size(); ++i) {
        ci[Decomposition::kComponentNames[i]] = {round3((*r.record.ci)[i].low), round3((*r.record.ci)[i].high)};
      }
      row["ci"] = std::move(ci);
    }
    j["strategies"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

std::string decomposition_csv(const TaskSummary& s) {
  std::string out = "task_id,model_id,strategy,accuracy";
  for (const char* name : Decomposition::kComponentNames) out += std::string(",") + name;
  out += ",n_model,n_human";
  for (const char* name : Decomposition::kComponentNames) {
    out += std::string(",") + name + "_low," + name + "_high";
  }
  out += "\n";
  for (const StrategyResult& r : s.strategies) {
    out += s.task_id + "," + r.record.model_id + "," + r.record.strategy + "," + format_fixed3(r.accuracy);
    for (double v : r.record.decomposition.components()) out += "," + format_fixed3(v);
    out += "," + std::to_string(r.record.decomposition.n_model) + "," + std::to_string(r.record.decomposition.n_human);
    for (std::size_t i = 0; i < Decomposition::kComponents; ++i) {
      if (r.record.ci) {
        out += "," + format_fixed3((*r.record.ci)[i].low) + "," + format_fixed3((*r.record.ci)[i].high);
      } else {
        out += ",,";
      }
    }
    out += "\n";
  }
  return out;
}

namespace {

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr std::array<const char*, Decomposition::kComponents> kPalette = {"#2e7d32", "#1565c0", "#90caf9",
                                                                          "#c62828", "#ef9a9a"};
constexpr std::array<const char*, Decomposition::kComponents> kLegend = {
    "correct", "task-inherent boundary", "model-specific boundary", "task-inherent conceptual",
    "model-specific conceptual"};

}  // namespace

std::string decomposition_svg(const TaskSummary& s) {
  constexpr double kTop = 40.0, kBarHeight = 300.0, kBarWidth = 48.0, kGap = 28.0, kLeft = 56.0;
  const double bars_width = static_cast<double>(s.strategies.size()) * (kBarWidth + kGap);
  const double legend_x = kLeft + bars_width + 16.0;
  const double width = legend_x + 230.0;
  const double height = kTop + kBarHeight + 90.0;
  auto f = [](double v) { return format_fixed3(v); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f(width) + "\" height=\"" + f(height) +
         "\" viewBox=\"0 0 " + f(width) + " " + f(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<title>" + xml_escape(s.task_id) + " error decomposition</title>\n";
  out += "<text x=\"" + f(kLeft) + "\" y=\"20\" font-size=\"14\">" + xml_escape(s.task_id) + "</text>\n";
  // Axis with ticks at 0, 0.25, ..., 1.
  out += "<line x1=\"" + f(kLeft - 6) + "\" y1=\"" + f(kTop) + "\" x2=\"" + f(kLeft - 6) + "\" y2=\"" +
         f(kTop + kBarHeight) + "\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = kTop + kBarHeight * (1.0 - t / 4.0);
    out += "<text x=\"" + f(kLeft - 10) + "\" y=\"" + f(y + 4) + "\" text-anchor=\"end\">" + f(t / 4.0) +
           "</text>\n";
  }
  for (std::size_t b = 0; b < s.strategies.size(); ++b) {
    const StrategyResult& r = s.strategies[b];
    const double x = kLeft + static_cast<double>(b) * (kBarWidth + kGap);
    out += "<g class=\"bar\" data-model=\"" + xml_escape(r.record.model_id) + "\" data-strategy=\"" +
           xml_escape(r.record.strategy) + "\">\n";
    const auto values = r.record.decomposition.components();
    double below = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = std::max(0.0, values[i]);
      const double y_bottom = kTop + kBarHeight * (1.0 - below);
      below += v;
      const double y_top = kTop + kBarHeight * (1.0 - below);
      out += "<rect class=\"" + std::string(Decomposition::kComponentNames[i]) + "\" x=\"" + f(x) + "\" y=\"" +
             f(y_top) + "\" width=\"" + f(kBarWidth) + "\" height=\"" + f(y_bottom - y_top) + "\" fill=\"" +
             kPalette[i] + "\"><title>" + Decomposition::kComponentNames[i] + " " + f(values[i]) +
             "</title></rect>\n";
    }
    const double label_y = kTop + kBarHeight + 16.0;
    out += "<text x=\"" + f(x + kBarWidth / 2) + "\" y=\"" + f(label_y) + "\" text-anchor=\"middle\">" +
           xml_escape(r.record.strategy) + "</text>\n";
    out += "<text x=\"" + f(x + kBarWidth / 2) + "\" y=\"" + f(label_y + 14) + "\" text-anchor=\"middle\" fill=\"#666\">" +
           xml_escape(r.record.model_id) + "</text>\n";
    out += "</g>\n";
  }
  for (std::size_t i = 0; i < kLegend.size(); ++i) {
    const double y = kTop + static_cast<double>(i) * 20.0;
    out += "<rect x=\"" + f(legend_x) + "\" y=\"" + f(y) + "\" width=\"12\" height=\"12\" fill=\"" + kPalette[i] +
           "\"/>\n";
    out += "<text x=\"" + f(legend_x + 18) + "\" y=\"" + f(y + 10) + "\">" + kLegend[i] + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string correlations_csv(const std::vector<TaskSummary>& summaries) {
  std::string out = "x_field,y_field,method,coefficient,n\n";
  for (const char* x : kHumanFields) {
    for (const char* y : kModelFields) {
      for (CorrelationMethod m : {CorrelationMethod::Pearson, CorrelationMethod::Spearman}) {
        int n = 0;
        for (const TaskSummary& s : summaries) n += (s.field(x) && s.field(y)) ? 1 : 0;
        std::string value = "NA";
        try {
          value = format_fixed3(correlate(summaries, x, y, m).coefficient);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::InsufficientData && e.kind() != ErrorKind::UndefinedStatistic) throw;
        }
        out += std::string(x) + "," + y + "," + std::string(to_string(m)) + "," + value + "," + std::to_string(n) +
               "\n";
      }
    }
  }
  return out;
}

std::vector<fs::path> write_reports(const std::vector<TaskSummary>& summaries, const fs::path& out_dir) {
  if (summaries.empty()) fail(ErrorKind::MissingPrerequisite, "no task summaries to render");
  std::vector<fs::path> written;
  for (const TaskSummary& s : summaries) {
    const fs::path dir = out_dir / s.task_id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());
    write_file_atomic(dir / "summary.json", summary_json(s));
    write_file_atomic(dir / "decomposition.csv", decomposition_csv(s));
    write_file_atomic(dir / "decomposition.svg", decomposition_svg(s));
    written.insert(written.end(), {dir / "summary.json", dir / "decomposition.csv", dir / "decomposition.svg"});
  }
  write_file_atomic(out_dir / "correlations.csv", correlations_csv(summaries));
  written.push_back(out_dir / "correlations.csv");
  return written;
}

}  // namespace ordiag
