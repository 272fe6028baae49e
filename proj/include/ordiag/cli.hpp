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

// Command-line entry point.
//
//   ordiag sample    --config C [--task T] [--seed S] [--out O]
//   ordiag annotate  --config C [--task T] [--model M] [--strategy S] [--seed S] [--out O] [--cache D]
//   ordiag serve     --config C [--task T] [--port P] [--seed S] [--out O]
//   ordiag decompose [--config C] [--task T] [--model M] [--strategy S] [--resamples N] [--seed S] [--out O]
//   ordiag report    [--config C] [--task T] [--model REF] [--out O]
//   ordiag simulate  --config SIM [--seed S] [--out O]
//
// Each option can also come from the environment (ORDIAG_CONFIG,
// ORDIAG_TASK, ORDIAG_MODEL, ORDIAG_STRATEGY, ORDIAG_SEED, ORDIAG_OUT,
// ORDIAG_CACHE, ORDIAG_PORT, ORDIAG_RESAMPLES) or from the project config.
// Flags win over the environment, which wins over the config file. For
// `report`, --model names the reference model for baseline and gain and
// falls back to the config key reference_model.
//
// Layout under the output directory:
//   samples/<task>/{ground_truth,human_test,active_pool}/{task.json,items.jsonl,gold.jsonl}
//   runs/<task>/<model>/<strategy>/{labels.jsonl,transcripts.jsonl,manifest.json}
//   human/<task>.jsonl, surveys/<annotator>.json
//   decompositions/<task>/<model>/<strategy>.json
//   reports/<task>/{summary.json,decomposition.csv,decomposition.svg}
//   reports/correlations.csv, reports/perception.json (when surveys exist)
//   manifests/<stage>[.<task>...].json   inputs and outputs with SHA-256
//
// Exit status: 0 success, 1 validation, 2 I/O, 3 endpoint failure,
// 4 missing stage prerequisite.

#include <iosfwd>
#include <string>
#include <vector>

#include "ordiag/error.hpp"

namespace ordiag::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitEndpoint = 3;
inline constexpr int kExitMissingPrerequisite = 4;

int exit_code_for(ErrorKind kind);

// `args` excludes the program name. Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace ordiag::cli
