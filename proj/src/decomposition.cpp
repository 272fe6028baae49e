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

#include "ordiag/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "json.hpp"
#include "ordiag/rng.hpp"

namespace ordiag {

ErrorProfile ErrorProfile::from_counts(std::int64_t correct, std::int64_t boundary,
                                       std::int64_t concept_count) {
  if (correct < 0 || boundary < 0 || concept_count < 0) {
    fail(ErrorKind::Validation, "error profile counts must be nonnegative");
  }
  if (correct + boundary + concept_count == 0) {
    fail(ErrorKind::Validation, "error profile needs at least one compared row");
  }
  ErrorProfile p;
  p.correct_ = correct;
  p.boundary_ = boundary;
  p.concept_ = concept_count;
  return p;
}

namespace {

struct Counts {
  std::int64_t correct = 0;
  std::int64_t boundary = 0;
  std::int64_t concept_count = 0;

  void add(int level, int truth) {
    switch (classify_error(std::abs(level - truth))) {
      case ErrorOutcome::Correct: ++correct; break;
      case ErrorOutcome::Boundary: ++boundary; break;
      case ErrorOutcome::Concept: ++concept_count; break;
    }
  }
  void add(const Counts& other) {
    correct += other.correct;
    boundary += other.boundary;
    concept_count += other.concept_count;
  }
  std::int64_t total() const { return correct + boundary + concept_count; }
};

// Per-item outcome counts over all annotators, in item_id order.
std::vector<Counts> counts_by_item(const LabelSet& pred, const LabelSet& truth) {
  std::vector<Counts> out;
  std::string_view current;
  for (const AlignedRow& r : align(pred, truth)) {
    if (out.empty() || r.item_id != current) {
      out.emplace_back();
      current = r.item_id;
    }
    out.back().add(r.level, r.truth_level);
  }
  return out;
}

void require_overlap(const LabelSet& pred, const LabelSet& truth, std::size_t rows) {
  if (rows == 0) {
    fail(ErrorKind::NoOverlap, "set '" + pred.set_id() + "' shares no items with '" +
                                   truth.set_id() + "'");
  }
}

void check_disjoint_annotators(const LabelSet& human, const LabelSet& truth) {
  const std::vector<std::string> authors = truth.annotators();
  for (const std::string& a : human.annotators()) {
    if (std::binary_search(authors.begin(), authors.end(), a)) {
      fail(ErrorKind::ExcludedAnnotator, "human-test annotator '" + a +
                                             "' also authored the ground truth");
    }
  }
}

Decomposition decompose_rates(double correct, double m_boundary, double m_concept,
                              double h_boundary, double h_concept) {
  Decomposition d;
  d.p_correct = correct;
  d.pT_boundary = share_task_driven(h_boundary, m_boundary);
  d.pM_boundary = m_boundary - d.pT_boundary;
  d.pT_concept = share_task_driven(h_concept, m_concept);
  d.pM_concept = m_concept - d.pT_concept;
  return d;
}

}  // namespace

ErrorProfile error_profile(const LabelSet& pred, const LabelSet& truth) {
  Counts total;
  for (const Counts& c : counts_by_item(pred, truth)) total.add(c);
  require_overlap(pred, truth, static_cast<std::size_t>(total.total()));
  return ErrorProfile::from_counts(total.correct, total.boundary, total.concept_count);
}

std::map<std::string, ErrorProfile> error_profiles_by_annotator(const LabelSet& pred,
                                                                const LabelSet& truth) {
  std::map<std::string, Counts> by_annotator;
  for (const AlignedRow& r : align(pred, truth)) by_annotator[r.annotator_id].add(r.level, r.truth_level);
  require_overlap(pred, truth, by_annotator.size());
  std::map<std::string, ErrorProfile> out;
  for (const auto& [id, c] : by_annotator) {
    out.emplace(id, ErrorProfile::from_counts(c.correct, c.boundary, c.concept_count));
  }
  return out;
}

double share_task_driven(double p_human, double p_model) {
  // Negated comparisons so NaN is rejected too.
  if (!(p_human >= 0.0 && p_human <= 1.0) || !(p_model >= 0.0 && p_model <= 1.0)) {
    fail(ErrorKind::Domain, "error rates must lie in [0, 1], got human=" +
                                std::to_string(p_human) + " model=" + std::to_string(p_model));
  }
  const double denom = p_human + p_model;
  if (denom == 0.0) return 0.0;
  // h * m / (h + m) is symmetric under exact floating-point evaluation; the
  // clamp removes the last-ulp overshoot past min(h, m).
  return std::min(p_human * p_model / denom, std::min(p_human, p_model));
}

Decomposition decompose(const ErrorProfile& model, const ErrorProfile& human) {
  Decomposition d = decompose_rates(model.p_correct(), model.p_boundary(), model.p_concept(),
                                    human.p_boundary(), human.p_concept());
  d.n_model = model.n();
  d.n_human = human.n();
  return d;
}

Decomposition decompose_from_sets(const LabelSet& model, const LabelSet& human,
                                  const LabelSet& truth) {
  check_disjoint_annotators(human, truth);
  return decompose(error_profile(model, truth), error_profile(human, truth));
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) fail(ErrorKind::Validation, "quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

DecompositionIntervals bootstrap_ci(const LabelSet& model, const LabelSet& human,
                                    const LabelSet& truth, int resamples,
                                    std::uint64_t seed) {
  if (resamples < kMinBootstrapResamples) {
    fail(ErrorKind::Validation, "bootstrap needs at least " +
                                    std::to_string(kMinBootstrapResamples) +
                                    " resamples, got " + std::to_string(resamples));
  }
  check_disjoint_annotators(human, truth);
  const std::vector<Counts> model_items = counts_by_item(model, truth);
  const std::vector<Counts> human_items = counts_by_item(human, truth);
  for (const auto* items : {&model_items, &human_items}) {
    if (items->size() < static_cast<std::size_t>(kMinBootstrapItems)) {
      fail(ErrorKind::InsufficientData,
           "bootstrap needs at least " + std::to_string(kMinBootstrapItems) +
               " aligned items per set, got " + std::to_string(items->size()));
    }
  }

  auto resample = [](SplitMix64& rng, const std::vector<Counts>& items) {
    Counts total;
    for (std::size_t i = 0; i < items.size(); ++i) total.add(items[rng.below(items.size())]);
    return total;
  };

  std::array<std::vector<double>, Decomposition::kComponents> draws;
  for (auto& d : draws) d.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    SplitMix64 rng = substream(seed, static_cast<std::uint64_t>(r));
    const Counts m = resample(rng, model_items);
    const Counts h = resample(rng, human_items);
    const double mn = static_cast<double>(m.total());
    const double hn = static_cast<double>(h.total());
    const Decomposition d = decompose_rates(static_cast<double>(m.correct) / mn, static_cast<double>(m.boundary) / mn,
                        static_cast<double>(m.concept_count) / mn,
                        static_cast<double>(h.boundary) / hn,
                        static_cast<double>(h.concept_count) / hn);
    const auto comps = d.components();
    for (std::size_t c = 0; c < comps.size(); ++c) draws[c].push_back(comps[c]);
  }

  DecompositionIntervals out;
  for (std::size_t c = 0; c < draws.size(); ++c) {
    std::sort(draws[c].begin(), draws[c].end());
    out[c] = {quantile_sorted(draws[c], 0.025), quantile_sorted(draws[c], 0.975)};
  }
  return out;
}

std::string decomposition_json(const DecompositionRecord& r) {
  nlohmann::ordered_json j;
  j["task_id"] = r.task_id;
  j["strategy"] = r.strategy;
  j["model_id"] = r.model_id;
  const auto values = r.decomposition.components();
  for (std::size_t i = 0; i < values.size(); ++i) j[Decomposition::kComponentNames[i]] = values[i];
  j["n_model"] = r.decomposition.n_model;
  j["n_human"] = r.decomposition.n_human;
  if (r.ci) {
    nlohmann::ordered_json ci;
    for (std::size_t i = 0; i < r.ci->size(); ++i) {
      ci[Decomposition::kComponentNames[i]] = {(*r.ci)[i].low, (*r.ci)[i].high};
    }
    j["ci"] = std::move(ci);
  }
  return j.dump(2) + "\n";
}

DecompositionRecord decomposition_from_json(const std::string& text) {
  DecompositionRecord r;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    r.task_id = j.at("task_id").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    Decomposition& d = r.decomposition;
    d.p_correct = j.at("p_correct").get<double>();
    d.pT_boundary = j.at("pT_boundary").get<double>();
    d.pM_boundary = j.at("pM_boundary").get<double>();
    d.pT_concept = j.at("pT_concept").get<double>();
    d.pM_concept = j.at("pM_concept").get<double>();
    d.n_model = j.at("n_model").get<std::int64_t>();
    d.n_human = j.at("n_human").get<std::int64_t>();
    if (j.contains("ci") && !j["ci"].is_null()) {
      DecompositionIntervals ci{};
      for (std::size_t i = 0; i < ci.size(); ++i) {
        const auto& pair = j["ci"].at(Decomposition::kComponentNames[i]);
        ci[i] = {pair.at(0).get<double>(), pair.at(1).get<double>()};
      }
      r.ci = ci;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed decomposition document: ") + e.what());
  }
  if (std::abs(r.decomposition.sum() - 1.0) > 1e-9) {
    fail(ErrorKind::Validation, "decomposition components of '" + r.task_id + "' do not sum to one");
  }
  return r;
}

}  // namespace ordiag
