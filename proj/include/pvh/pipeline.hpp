// Copyright 2026 The PVH Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Glue from dataset records to model-ready examples.

#include <vector>

#include "pvh/core_model.hpp"
#include "pvh/features.hpp"
#include "pvh/hipher.hpp"
#include "pvh/synthworld.hpp"

namespace pvh {

struct ExampleOptions {
  int history_length = 0;  // most recent k history videos; 0 keeps all
  FeatureConfig features;
};

// History = videos of turns 1..m-1, target = the turn-m video, gt = the
// annotation scores. Output order follows the input.
std::vector<hipher::Example> build_examples(const std::vector<DatasetRecord>& records,
                                            const EmbeddingProvider& provider,
                                            const ExampleOptions& options = {}, int jobs = 0);

struct SynthDataset {
  std::vector<DatasetRecord> records;
  std::vector<std::string> errors;
};

// Runs one mock session per world user and annotates its target with the
// same user's mock model. Records are in user order.
SynthDataset simulate_world(std::shared_ptr<const synth::SynthWorld> world, std::uint64_t seed,
                            int jobs = 0);

// ---- ablation harness ------------------------------------------------------------

enum class AblationAxis { kHistoryLength, kModality, kGamma };

AblationAxis ablation_axis_from_string(const std::string& s);  // throws ValidationError
std::string to_string(AblationAxis axis);

// Modality values: "full", "visual" (text block zeroed), "text" (visual
// block zeroed), "none" (both zeroed).
FeatureConfig modality_features(const std::string& value);

struct ExperimentConfig {
  hipher::ModelConfig model;  // input_dim is overwritten from the provider
  hipher::TrainConfig train;
  ExampleOptions examples;
  metrics::EvalConfig eval;
  std::uint64_t model_seed = 0;
  // Train and evaluate with every history embedding zeroed (no e_p signal).
  bool zero_preference = false;
  int jobs = 0;

  nlohmann::json to_json() const;
};

struct ExperimentResult {
  metrics::EvalReport report;
  hipher::TrainResult training;
};

// Featurizes, trains a fresh model on `train`, evaluates on `test`.
ExperimentResult run_experiment(const std::vector<DatasetRecord>& train,
                                const std::vector<DatasetRecord>& test,
                                const EmbeddingProvider& provider, const ExperimentConfig& config);

struct AblationRow {
  std::string value;
  ExperimentResult result;
};

// One experiment per value, each a variant of `base` along `axis`.
std::vector<AblationRow> run_ablation(const std::vector<DatasetRecord>& train,
                                      const std::vector<DatasetRecord>& test,
                                      const EmbeddingProvider& provider, AblationAxis axis,
                                      const std::vector<std::string>& values,
                                      const ExperimentConfig& base);

// Fixed-width text table: one row per value, one column per metric.
std::string ablation_table(AblationAxis axis, const std::vector<AblationRow>& rows);

}  // namespace pvh
