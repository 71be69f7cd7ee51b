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

// Serial reference kernels against their OpenMP counterparts. The parallel
// variants take the thread count as the benchmark argument.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "pvh/hipher.hpp"
#include "pvh/metrics.hpp"
#include "pvh/rng.hpp"

using namespace pvh;

namespace {

std::vector<metrics::VideoPrediction> random_videos(std::size_t count) {
  Rng r(1);
  std::vector<metrics::VideoPrediction> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& v = out[i];
    v.video_id = "v" + std::to_string(i);
    double t = 0.0;
    for (int k = 0; k < 30; ++k) {
      v.pred.push_back(r.uniform(0.0, 1.0));
      v.gt.push_back(1 + static_cast<int>(r.below(10)));
      v.spans.push_back({t, t + 2.0});
      t += 2.0;
    }
  }
  return out;
}

struct Fixture {
  hipher::Model model;
  std::vector<hipher::Example> examples;
  std::vector<hipher::PreferenceEmbedding> prefs;
  std::vector<hipher::PairSet> pairs;
  std::vector<hipher::BatchItem> items;

  Fixture() : model(config(), 3) {
    Rng r(2);
    for (int i = 0; i < 32; ++i) {
      hipher::Example e;
      e.id = "e" + std::to_string(i);
      e.target = hipher::Mat(30, 32);
      for (Eigen::Index k = 0; k < e.target.size(); ++k) e.target.data()[k] = r.normal();
      for (int h = 0; h < 9; ++h) {
        Eigen::VectorXd v(32);
        for (int k = 0; k < 32; ++k) v[k] = r.normal();
        e.history.push_back({v});
      }
      for (int k = 0; k < 30; ++k) e.gt.push_back(1 + static_cast<int>(r.below(10)));
      examples.push_back(std::move(e));
    }
    for (const auto& e : examples) {
      prefs.push_back(hipher::preference_embedding(e.history));
      pairs.push_back(hipher::make_pairs(e.gt, hipher::kDefaultMaxPairs, 4));
    }
    for (std::size_t i = 0; i < examples.size(); ++i)
      items.push_back({&examples[i].target, &prefs[i], examples[i].gt, &pairs[i], i});
  }

  static hipher::ModelConfig config() {
    hipher::ModelConfig c;
    c.input_dim = 32;
    c.hidden_dim = 64;
    c.heads = 2;
    c.encoder_layers = 1;
    c.ffn_dim = 128;
    return c;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_EvaluateSerial(benchmark::State& state) {
  const auto videos = random_videos(2000);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::evaluate_serial(videos, {}));
}

void BM_Evaluate(benchmark::State& state) {
  const auto videos = random_videos(2000);
  for (auto _ : state) {
    // evaluate() uses the OpenMP default team size
    omp_set_num_threads(static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(metrics::evaluate(videos, {}));
  }
}

void BM_ScoreBatchSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(hipher::score_batch_serial(f.model, f.examples));
}

void BM_ScoreBatch(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(hipher::score_batch(f.model, f.examples, static_cast<int>(state.range(0))));
}

void BM_BatchGradientSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        hipher::batch_gradient_serial(f.model, f.items, 0.15, 0.0, hipher::Mode::kTrain));
}

void BM_BatchGradient(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(hipher::batch_gradient(f.model, f.items, 0.15, 0.0, hipher::Mode::kTrain,
                                                    static_cast<int>(state.range(0))));
}

}  // namespace

BENCHMARK(BM_EvaluateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreBatchSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreBatch)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradient)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
