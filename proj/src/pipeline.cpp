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

#include "pvh/pipeline.hpp"

#include <omp.h>

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <optional>

#include "pvh/errors.hpp"
#include "pvh/rng.hpp"
#include "pvh/simulator.hpp"

namespace pvh {

namespace {

hipher::Example build_one(const DatasetRecord& r, const EmbeddingProvider& provider,
                          const ExampleOptions& options) {
  const WatchSession& s = r.session;
  if (s.turns.size() < 2)
    throw ValidationError("session " + s.session_id + " has no history before the target");
  const VideoRecord& target = s.target();
  if (r.annotation.scores.size() != target.segments.size())
    throw DimensionError("session " + s.session_id + ": annotation length " +
                         std::to_string(r.annotation.scores.size()) + " != " +
                         std::to_string(target.segments.size()) + " segments");
  hipher::Example ex;
  ex.id = s.session_id;
  const std::size_t available = s.turns.size() - 1;
  const std::size_t k = options.history_length > 0
                            ? std::min<std::size_t>(available, static_cast<std::size_t>(options.history_length))
                            : available;
  for (std::size_t i = available - k; i < available; ++i)
    ex.history.push_back(encode_video(s.turns[i].chosen, provider, options.features));
  ex.target = video_features(target, provider, options.features);
  ex.gt = r.annotation.scores;
  for (const auto& seg : target.segments) ex.spans.push_back({seg.start_s, seg.end_s});
  return ex;
}

}  // namespace

std::vector<hipher::Example> build_examples(const std::vector<DatasetRecord>& records,
                                            const EmbeddingProvider& provider,
                                            const ExampleOptions& options, int jobs) {
  std::vector<std::optional<hipher::Example>> out(records.size());
  std::vector<std::string> errors(records.size());
  const auto n = static_cast<std::ptrdiff_t>(records.size());
  const int threads = !provider.thread_safe() ? 1 : (jobs > 0 ? jobs : omp_get_max_threads());
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = build_one(records[static_cast<std::size_t>(i)], provider, options);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  std::vector<hipher::Example> examples;
  examples.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!out[i]) throw ValidationError(errors[i]);  // first failure in input order
    examples.push_back(std::move(*out[i]));
  }
  return examples;
}

SynthDataset simulate_world(std::shared_ptr<const synth::SynthWorld> world, std::uint64_t seed,
                            int jobs) {
  const auto seeds = synth::world_seeds(*world);
  sim::SessionParams params;
  params.l = static_cast<std::size_t>(world->config.l);
  params.m = static_cast<std::size_t>(world->config.m);
  auto ports_for = [&](std::size_t i) { return synth::mock_ports(world, static_cast<int>(i)); };
  sim::BatchOutcome batch =
      sim::run_sessions(seeds, ports_for, params, derive_seed(seed, "simulate"), jobs);

  SynthDataset out;
  out.errors = batch.errors;
  std::map<std::string, int> user_of;
  for (std::size_t i = 0; i < seeds.size(); ++i)
    user_of[seeds[i].extra.value("session_id", std::string())] = static_cast<int>(i);
  std::vector<std::optional<DatasetRecord>> records(batch.sessions.size());
  std::vector<std::string> errors(batch.sessions.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.sessions.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs > 0 ? jobs : omp_get_max_threads())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = batch.sessions[static_cast<std::size_t>(i)];
    try {
      synth::SynthLanguageModel lm(world, user_of.at(s.session_id));
      SaliencyAnnotation a =
          sim::annotate_saliency(s, lm, derive_seed(seed, "annotate/" + s.session_id));
      records[static_cast<std::size_t>(i)] = DatasetRecord{s, std::move(a), nlohmann::json::object()};
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = s.session_id + ": " + e.what();
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i]) out.records.push_back(std::move(*records[i]));
    else out.errors.push_back(errors[i]);
  }
  return out;
}

// ---- ablation harness ------------------------------------------------------------

AblationAxis ablation_axis_from_string(const std::string& s) {
  if (s == "history_length") return AblationAxis::kHistoryLength;
  if (s == "modality") return AblationAxis::kModality;
  if (s == "gamma") return AblationAxis::kGamma;
  throw ValidationError("unknown ablation axis '" + s + "' (history_length, modality, gamma)");
}

std::string to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::kHistoryLength: return "history_length";
    case AblationAxis::kModality: return "modality";
    case AblationAxis::kGamma: return "gamma";
  }
  return "";
}

FeatureConfig modality_features(const std::string& value) {
  FeatureConfig f;
  if (value == "full") return f;
  if (value == "visual") f.zero_text = true;
  else if (value == "text") f.zero_visual = true;
  else if (value == "none") f.zero_text = f.zero_visual = true;
  else throw ValidationError("unknown modality '" + value + "' (full, visual, text, none)");
  return f;
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"model", model.to_json()},
          {"train", train.to_json()},
          {"history_length", examples.history_length},
          {"features",
           {{"include_caption", examples.features.include_caption},
            {"zero_visual", examples.features.zero_visual},
            {"zero_text", examples.features.zero_text}}},
          {"eval", eval.to_json()},
          {"model_seed", model_seed},
          {"zero_preference", zero_preference}};
}

ExperimentResult run_experiment(const std::vector<DatasetRecord>& train,
                                const std::vector<DatasetRecord>& test,
                                const EmbeddingProvider& provider, const ExperimentConfig& config) {
  auto train_ex = build_examples(train, provider, config.examples, config.jobs);
  if (config.zero_preference)
    for (auto& e : train_ex)
      for (auto& h : e.history) h.vector.setZero();
  const auto test_ex = build_examples(test, provider, config.examples, config.jobs);
  hipher::ModelConfig mc = config.model;
  mc.input_dim = provider.dims().first + provider.dims().second;
  mc.gamma = config.train.gamma;
  hipher::Model model(mc, config.model_seed);
  hipher::TrainConfig tc = config.train;
  tc.jobs = config.jobs;
  ExperimentResult out;
  out.training = hipher::train(model, train_ex, tc);
  out.report =
      hipher::evaluate_model(model, test_ex, config.eval, config.zero_preference, config.jobs);
  return out;
}

std::vector<AblationRow> run_ablation(const std::vector<DatasetRecord>& train,
                                      const std::vector<DatasetRecord>& test,
                                      const EmbeddingProvider& provider, AblationAxis axis,
                                      const std::vector<std::string>& values,
                                      const ExperimentConfig& base) {
  if (values.empty()) throw ValidationError("ablation needs at least one value");
  std::vector<AblationRow> rows;
  for (const auto& v : values) {
    ExperimentConfig c = base;
    try {
      switch (axis) {
        case AblationAxis::kHistoryLength: {
          std::size_t pos = 0;
          c.examples.history_length = std::stoi(v, &pos);
          if (pos != v.size() || c.examples.history_length < 1) throw std::invalid_argument(v);
          break;
        }
        case AblationAxis::kModality:
          c.examples.features = modality_features(v);
          break;
        case AblationAxis::kGamma: {
          std::size_t pos = 0;
          c.train.gamma = std::stod(v, &pos);
          if (pos != v.size() || !(c.train.gamma > 0.0)) throw std::invalid_argument(v);
          break;
        }
      }
    } catch (const std::logic_error&) {
      throw ValidationError("bad value '" + v + "' for axis " + to_string(axis));
    }
    rows.push_back({v, run_experiment(train, test, provider, c)});
  }
  return rows;
}

std::string ablation_table(AblationAxis axis, const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-16s", to_string(axis).c_str());
  os << buf;
  const auto& names = rows.empty() ? std::vector<std::string>{} : rows.front().result.report.metric_names;
  for (const auto& n : names) {
    std::snprintf(buf, sizeof(buf), " %8s", n.c_str());
    os << buf;
  }
  os << '\n';
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-16s", r.value.c_str());
    os << buf;
    for (const auto& n : names) {
      std::snprintf(buf, sizeof(buf), " %8.4f", r.result.report.mean(n));
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace pvh
