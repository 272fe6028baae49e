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

// Agreement and reliability statistics.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ordiag/core.hpp"

namespace ordiag {

enum class ReliabilityMetric {
  KrippendorffAlphaOrdinal,
  KrippendorffAlphaNominal,
  CohenKappa,
  WeightedKappaLinear,
  WeightedKappaQuadratic,
  Accuracy,
};

std::string_view to_string(ReliabilityMetric metric);

struct ReliabilityReport {
  ReliabilityMetric metric = ReliabilityMetric::Accuracy;
  double value = 0.0;
  int n_items = 0;
  int n_annotators = 0;
};

enum class AlphaDifference { Nominal, Ordinal };
enum class KappaWeighting { Linear, Quadratic };

// Reliability data as a units x coders matrix; nullopt marks a missing
// value. This is the form the alpha computation works on; the LabelSet
// overload builds it from (item, annotator) labels.
using ReliabilityMatrix = std::vector<std::vector<std::optional<int>>>;

// Coincidence-matrix alpha. Units with fewer than two values are not
// pairable and contribute nothing. The ordinal difference is the squared
// index distance (c - k)^2. Returns nullopt when no unit is pairable or the
// expected disagreement is zero.
std::optional<double> try_krippendorff_alpha(const ReliabilityMatrix& units,
                                             AlphaDifference difference);

// Throws UndefinedStatistic when alpha is undefined (e.g. every label across
// the whole set is identical) and Validation when fewer than two annotators
// are present.
ReliabilityReport krippendorff_alpha(const LabelSet& labels,
                                     AlphaDifference difference);

// Square table indexed [rater_a][rater_b] over consecutive categories.
using ContingencyTable = std::vector<std::vector<double>>;

// Unweighted kappa from a table; throws UndefinedStatistic when p_e = 1.
double cohen_kappa(const ContingencyTable& table);
// Weighted kappa with disagreement weights |i-j|/(k-1) or ((i-j)/(k-1))^2.
double weighted_kappa(const ContingencyTable& table, KappaWeighting weighting);

// Build the contingency table of a two-annotator set over the level span
// [min observed, max observed]. Requires exactly two annotators labeling the
// same items; missing labels are a Validation error.
ContingencyTable contingency_table(const LabelSet& labels, int* min_level = nullptr);

ReliabilityReport cohen_kappa(const LabelSet& labels);
ReliabilityReport weighted_kappa(const LabelSet& labels, KappaWeighting weighting);

// Fraction of aligned rows with distance 0. When `pred` has several
// annotators the mean of the per-annotator accuracies is reported.
ReliabilityReport accuracy(const LabelSet& pred, const LabelSet& truth);

// Product-moment and rank (average ranks for ties) correlation. Both throw
// UndefinedStatistic when either vector is constant and Validation on
// mismatched or too-short input.
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

// 1-based average ranks, ascending.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace ordiag
