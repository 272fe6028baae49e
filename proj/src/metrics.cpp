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

#include "ordiag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>

namespace ordiag {

std::string_view to_string(ReliabilityMetric metric) {
  switch (metric) {
    case ReliabilityMetric::KrippendorffAlphaOrdinal: return "krippendorff_alpha_ordinal";
    case ReliabilityMetric::KrippendorffAlphaNominal: return "krippendorff_alpha_nominal";
    case ReliabilityMetric::CohenKappa: return "cohen_kappa";
    case ReliabilityMetric::WeightedKappaLinear: return "weighted_kappa_linear";
    case ReliabilityMetric::WeightedKappaQuadratic: return "weighted_kappa_quadratic";
    case ReliabilityMetric::Accuracy: return "accuracy";
  }
  return "unknown";
}

namespace {

double difference_of(int c, int k, AlphaDifference difference) {
  if (difference == AlphaDifference::Nominal) return c == k ? 0.0 : 1.0;
  const double d = static_cast<double>(c - k);
  return d * d;
}

}  // namespace

std::optional<double> try_krippendorff_alpha(const ReliabilityMatrix& units,
                                             AlphaDifference difference) {
  std::vector<int> categories;
  for (const auto& unit : units) {
    for (const auto& v : unit) {
      if (v) categories.push_back(*v);
    }
  }
  std::sort(categories.begin(), categories.end());
  categories.erase(std::unique(categories.begin(), categories.end()), categories.end());
  const std::size_t c = categories.size();
  if (c == 0) return std::nullopt;
  auto index_of = [&](int v) {
    return static_cast<std::size_t>(
        std::lower_bound(categories.begin(), categories.end(), v) - categories.begin());
  };

  // Coincidence matrix o[c][k]: each unit with m values contributes its
  // ordered pairs of distinct positions, weighted 1 / (m - 1).
  std::vector<double> o(c * c, 0.0);
  std::vector<std::size_t> counts(c);
  for (const auto& unit : units) {
    std::fill(counts.begin(), counts.end(), 0);
    std::size_t m = 0;
    for (const auto& v : unit) {
      if (v) {
        ++counts[index_of(*v)];
        ++m;
      }
    }
    if (m < 2) continue;
    const double w = 1.0 / static_cast<double>(m - 1);
    for (std::size_t a = 0; a < c; ++a) {
      if (counts[a] == 0) continue;
      for (std::size_t b = 0; b < c; ++b) {
        if (counts[b] == 0) continue;
        const double pairs = a == b ? static_cast<double>(counts[a] * (counts[a] - 1))
                                    : static_cast<double>(counts[a] * counts[b]);
        o[a * c + b] += pairs * w;
      }
    }
  }

  std::vector<double> marginals(c, 0.0);
  double n = 0.0;
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = 0; b < c; ++b) marginals[a] += o[a * c + b];
    n += marginals[a];
  }
  if (n < 2.0) return std::nullopt;

  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = 0; b < c; ++b) {
      const double delta = difference_of(categories[a], categories[b], difference);
      observed += o[a * c + b] * delta;
      expected += marginals[a] * marginals[b] * delta;
    }
  }
  if (expected <= 0.0) return std::nullopt;
  return 1.0 - (n - 1.0) * observed / expected;
}

ReliabilityReport krippendorff_alpha(const LabelSet& labels, AlphaDifference difference) {
  const std::vector<std::string> annotators = labels.annotators();
  if (annotators.size() < 2) {
    fail(ErrorKind::Validation, "krippendorff alpha needs at least 2 annotators, set '" +
                                    labels.set_id() + "' has " +
                                    std::to_string(annotators.size()));
  }
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < annotators.size(); ++i) column[annotators[i]] = i;
  std::map<std::string, std::vector<std::optional<int>>> by_item;
  for (const Label& l : labels.labels()) {
    auto& row = by_item[l.item_id];
    row.resize(annotators.size());
    row[column[l.annotator_id]] = l.level;
  }
  ReliabilityMatrix units;
  int pairable = 0;
  for (auto& [item, row] : by_item) {
    const auto m = std::count_if(row.begin(), row.end(), [](const auto& v) { return v.has_value(); });
    if (m >= 2) ++pairable;
    units.push_back(std::move(row));
  }
  if (pairable == 0) {
    fail(ErrorKind::Validation, "no item in set '" + labels.set_id() +
                                    "' carries two or more labels");
  }
  const auto alpha = try_krippendorff_alpha(units, difference);
  if (!alpha) {
    fail(ErrorKind::UndefinedStatistic,
         "krippendorff alpha is undefined for set '" + labels.set_id() +
             "': expected disagreement is zero (all " + std::to_string(labels.size()) +
             " labels over " + std::to_string(pairable) + " pairable items are identical)");
  }
  return {difference == AlphaDifference::Ordinal ? ReliabilityMetric::KrippendorffAlphaOrdinal
                                                 : ReliabilityMetric::KrippendorffAlphaNominal,
          *alpha, pairable, static_cast<int>(annotators.size())};
}

namespace {

struct Marginals {
  std::vector<double> rows;
  std::vector<double> cols;
  double total = 0.0;
};

Marginals marginals_of(const ContingencyTable& table) {
  const std::size_t k = table.size();
  Marginals m{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0), 0.0};
  for (std::size_t i = 0; i < k; ++i) {
    if (table[i].size() != k) fail(ErrorKind::Validation, "contingency table is not square");
    for (std::size_t j = 0; j < k; ++j) {
      if (table[i][j] < 0.0) fail(ErrorKind::Validation, "negative contingency count");
      m.rows[i] += table[i][j];
      m.cols[j] += table[i][j];
      m.total += table[i][j];
    }
  }
  if (m.total <= 0.0) fail(ErrorKind::Validation, "empty contingency table");
  return m;
}

}  // namespace

double cohen_kappa(const ContingencyTable& table) {
  const Marginals m = marginals_of(table);
  double p_o = 0.0;
  double p_e = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    p_o += table[i][i] / m.total;
    p_e += (m.rows[i] / m.total) * (m.cols[i] / m.total);
  }
  if (1.0 - p_e <= 1e-15) {
    fail(ErrorKind::UndefinedStatistic, "cohen kappa is undefined: chance agreement is 1");
  }
  return (p_o - p_e) / (1.0 - p_e);
}

double weighted_kappa(const ContingencyTable& table, KappaWeighting weighting) {
  const Marginals m = marginals_of(table);
  const std::size_t k = table.size();
  if (k < 2) {
    fail(ErrorKind::UndefinedStatistic, "weighted kappa is undefined on a single category");
  }
  const double span = static_cast<double>(k - 1);
  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double d = std::abs(static_cast<double>(i) - static_cast<double>(j)) / span;
      const double w = weighting == KappaWeighting::Linear ? d : d * d;
      observed += w * table[i][j] / m.total;
      expected += w * (m.rows[i] / m.total) * (m.cols[j] / m.total);
    }
  }
  if (expected <= 1e-15) {
    fail(ErrorKind::UndefinedStatistic,
         "weighted kappa is undefined: expected weighted disagreement is 0");
  }
  return 1.0 - observed / expected;
}

ContingencyTable contingency_table(const LabelSet& labels, int* min_level) {
  const std::vector<std::string> annotators = labels.annotators();
  if (annotators.size() != 2) {
    fail(ErrorKind::Validation, "kappa needs exactly 2 annotators, set '" + labels.set_id() +
                                    "' has " + std::to_string(annotators.size()));
  }
  std::map<std::string, std::pair<std::optional<int>, std::optional<int>>> by_item;
  int lo = 0;
  int hi = 0;
  bool first = true;
  for (const Label& l : labels.labels()) {
    auto& cell = by_item[l.item_id];
    (l.annotator_id == annotators[0] ? cell.first : cell.second) = l.level;
    lo = first ? l.level : std::min(lo, l.level);
    hi = first ? l.level : std::max(hi, l.level);
    first = false;
  }
  const auto k = static_cast<std::size_t>(hi - lo + 1);
  ContingencyTable table(k, std::vector<double>(k, 0.0));
  for (const auto& [item, cell] : by_item) {
    if (!cell.first || !cell.second) {
      fail(ErrorKind::Validation, "kappa requires full overlap; item '" + item +
                                      "' is missing a label");
    }
    table[static_cast<std::size_t>(*cell.first - lo)][static_cast<std::size_t>(*cell.second - lo)] += 1.0;
  }
  if (min_level) *min_level = lo;
  return table;
}

ReliabilityReport cohen_kappa(const LabelSet& labels) {
  const ContingencyTable table = contingency_table(labels);
  double n = 0.0;
  for (const auto& row : table) n = std::accumulate(row.begin(), row.end(), n);
  return {ReliabilityMetric::CohenKappa, cohen_kappa(table), static_cast<int>(n), 2};
}

ReliabilityReport weighted_kappa(const LabelSet& labels, KappaWeighting weighting) {
  const ContingencyTable table = contingency_table(labels);
  double n = 0.0;
  for (const auto& row : table) n = std::accumulate(row.begin(), row.end(), n);
  return {weighting == KappaWeighting::Linear ? ReliabilityMetric::WeightedKappaLinear
                                              : ReliabilityMetric::WeightedKappaQuadratic,
          weighted_kappa(table, weighting), static_cast<int>(n), 2};
}

ReliabilityReport accuracy(const LabelSet& pred, const LabelSet& truth) {
  if (truth.origin() != Origin::GroundTruth) {
    fail(ErrorKind::Validation, "accuracy needs a ground-truth reference, got " +
                                    std::string(to_string(truth.origin())));
  }
  const std::vector<AlignedRow> rows = align(pred, truth);
  if (rows.empty()) {
    fail(ErrorKind::NoOverlap, "set '" + pred.set_id() + "' shares no items with '" +
                                   truth.set_id() + "'");
  }
  std::map<std::string_view, std::pair<int, int>> per_annotator;  // hits, total
  std::set<std::string_view> items;
  for (const AlignedRow& r : rows) {
    auto& [hits, total] = per_annotator[r.annotator_id];
    hits += r.level == r.truth_level ? 1 : 0;
    ++total;
    items.insert(r.item_id);
  }
  double sum = 0.0;
  for (const auto& [id, counts] : per_annotator) {
    sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return {ReliabilityMetric::Accuracy, sum / static_cast<double>(per_annotator.size()),
          static_cast<int>(items.size()), static_cast<int>(per_annotator.size())};
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::Validation, "correlation inputs differ in length");
  if (x.size() < 2) fail(ErrorKind::Validation, "correlation needs at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    fail(ErrorKind::UndefinedStatistic, "correlation is undefined for a constant input");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::Validation, "correlation inputs differ in length");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  return pearson(rx, ry);
}

}  // namespace ordiag
