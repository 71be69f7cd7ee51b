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

// Dense layers with explicit forward caches and hand-written backward passes.
// Activations are row-major in the sense that each row is one token.

#include <Eigen/Dense>
#include <vector>

#include "pvh/rng.hpp"

namespace pvh::nn {

using Mat = Eigen::MatrixXd;

inline constexpr double kLayerNormEps = 1e-5;

// y = x W + b, with W (in x out) and b (1 x out).
Mat linear_forward(const Mat& x, const Mat& W, const Mat& b);
// Accumulates into dW/db and returns dL/dx.
Mat linear_backward(const Mat& x, const Mat& W, const Mat& dy, Mat& dW, Mat& db);

struct LayerNormCache {
  Mat xhat;
  Eigen::VectorXd inv_std;
};

Mat layer_norm_forward(const Mat& x, const Mat& gain, const Mat& bias, LayerNormCache* cache);
Mat layer_norm_backward(const LayerNormCache& cache, const Mat& gain, const Mat& dy, Mat& dgain,
                        Mat& dbias);

struct DropoutMask {
  Mat scale;  // empty when inactive
};

// Inverted dropout. With a null rng or zero rate it is the identity.
Mat dropout_forward(const Mat& x, double rate, Rng* rng, DropoutMask* mask);
Mat dropout_backward(const DropoutMask& mask, const Mat& dy);

Mat relu(const Mat& x);
Mat relu_backward(const Mat& pre_activation, const Mat& dy);

struct AttentionWeights {
  const Mat* Wq;
  const Mat* bq;
  const Mat* Wk;
  const Mat* bk;
  const Mat* Wv;
  const Mat* bv;
  const Mat* Wo;
  const Mat* bo;
};

struct AttentionGrads {
  Mat* Wq;
  Mat* bq;
  Mat* Wk;
  Mat* bk;
  Mat* Wv;
  Mat* bv;
  Mat* Wo;
  Mat* bo;
};

struct AttentionCache {
  Mat xq, xkv;
  Mat Q, K, V, O;
  std::vector<Mat> probs;  // per head, rows = queries, cols = keys (+1 null slot)
};

// Multi-head scaled dot-product attention. With `null_slot` an extra key and
// value fixed at zero is appended, so a single key/value token still yields
// query-dependent attention weights.
Mat attention_forward(const Mat& xq, const Mat& xkv, const AttentionWeights& w, int heads,
                      bool null_slot, AttentionCache* cache);
void attention_backward(const AttentionCache& cache, const AttentionWeights& w,
                        const AttentionGrads& g, const Mat& dy, int heads, Mat& dxq,
                        Mat& dxkv);

// Sinusoidal positional table, rows = positions.
Mat sinusoidal_positions(int n, int dim);

}  // namespace pvh::nn
