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

#include "pvh/nn.hpp"

#include <cmath>

namespace pvh::nn {

Mat linear_forward(const Mat& x, const Mat& W, const Mat& b) {
  Mat y = x * W;
  y.rowwise() += b.row(0);
  return y;
}

Mat linear_backward(const Mat& x, const Mat& W, const Mat& dy, Mat& dW, Mat& db) {
  dW.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
  return dy * W.transpose();
}

Mat layer_norm_forward(const Mat& x, const Mat& gain, const Mat& bias, LayerNormCache* cache) {
  const auto n = x.rows();
  const auto d = static_cast<double>(x.cols());
  Mat xhat(x.rows(), x.cols());
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = x.row(r).sum() / d;
    const auto centered = x.row(r).array() - mu;
    const double var = centered.square().sum() / d;
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = centered * inv_std[r];
  }
  Mat y = xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Mat layer_norm_backward(const LayerNormCache& c, const Mat& gain, const Mat& dy, Mat& dgain,
                        Mat& dbias) {
  dgain.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * gain.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).sum() / d;
    const double mean_dx = dxhat.row(r).dot(c.xhat.row(r)) / d;
    dx.row(r) = c.inv_std[r] *
                (dxhat.row(r).array() - mean_d - c.xhat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

Mat dropout_forward(const Mat& x, double rate, Rng* rng, DropoutMask* mask) {
  if (!rng || rate <= 0.0) {
    if (mask) mask->scale.resize(0, 0);
    return x;
  }
  const double keep = 1.0 - rate;
  Mat scale(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) scale(i, j) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
  Mat y = x.cwiseProduct(scale);
  if (mask) mask->scale = std::move(scale);
  return y;
}

Mat dropout_backward(const DropoutMask& mask, const Mat& dy) {
  if (mask.scale.size() == 0) return dy;
  return dy.cwiseProduct(mask.scale);
}

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

Mat relu_backward(const Mat& pre, const Mat& dy) {
  return (pre.array() > 0.0).select(dy, 0.0);
}

Mat attention_forward(const Mat& xq, const Mat& xkv, const AttentionWeights& w, int heads,
                      bool null_slot, AttentionCache* cache) {
  Mat Q = linear_forward(xq, *w.Wq, *w.bq);
  Mat K = linear_forward(xkv, *w.Wk, *w.bk);
  Mat V = linear_forward(xkv, *w.Wv, *w.bv);
  const auto nq = Q.rows();
  const auto nk = K.rows();
  const auto dim = Q.cols();
  const auto dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat O(nq, dim);
  std::vector<Mat> probs;
  probs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const auto off = h * dh;
    Mat logits(nq, nk + (null_slot ? 1 : 0));
    logits.leftCols(nk) = Q.middleCols(off, dh) * K.middleCols(off, dh).transpose() * scale;
    if (null_slot) logits.col(nk).setZero();
    for (Eigen::Index r = 0; r < nq; ++r) {
      const double mx = logits.row(r).maxCoeff();
      logits.row(r) = (logits.row(r).array() - mx).exp();
      logits.row(r) /= logits.row(r).sum();
    }
    O.middleCols(off, dh) = logits.leftCols(nk) * V.middleCols(off, dh);
    probs.push_back(std::move(logits));
  }
  Mat y = linear_forward(O, *w.Wo, *w.bo);
  if (cache) {
    cache->xq = xq;
    cache->xkv = xkv;
    cache->Q = std::move(Q);
    cache->K = std::move(K);
    cache->V = std::move(V);
    cache->O = std::move(O);
    cache->probs = std::move(probs);
  }
  return y;
}

void attention_backward(const AttentionCache& c, const AttentionWeights& w,
                        const AttentionGrads& g, const Mat& dy, int heads, Mat& dxq,
                        Mat& dxkv) {
  const Mat dO = linear_backward(c.O, *w.Wo, dy, *g.Wo, *g.bo);
  const auto nk = c.K.rows();
  const auto dim = c.Q.cols();
  const auto dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat dQ(c.Q.rows(), dim), dK(nk, dim), dV(nk, dim);
  for (int h = 0; h < heads; ++h) {
    const auto off = h * dh;
    const Mat& P = c.probs[static_cast<std::size_t>(h)];
    const auto dOh = dO.middleCols(off, dh);
    Mat dP = Mat::Zero(P.rows(), P.cols());
    dP.leftCols(nk) = dOh * c.V.middleCols(off, dh).transpose();
    dV.middleCols(off, dh) = P.leftCols(nk).transpose() * dOh;
    // softmax Jacobian, row-wise; the null column has zero value so dP is 0 there
    const Eigen::VectorXd row_dot = (dP.array() * P.array()).rowwise().sum();
    Mat dS = P.array() * (dP.colwise() - row_dot).array();
    const auto dSk = dS.leftCols(nk);
    dQ.middleCols(off, dh) = dSk * c.K.middleCols(off, dh) * scale;
    dK.middleCols(off, dh) = dSk.transpose() * c.Q.middleCols(off, dh) * scale;
  }
  dxq = linear_backward(c.xq, *w.Wq, dQ, *g.Wq, *g.bq);
  dxkv = linear_backward(c.xkv, *w.Wk, dK, *g.Wk, *g.bk);
  dxkv += linear_backward(c.xkv, *w.Wv, dV, *g.Wv, *g.bv);
}

Mat sinusoidal_positions(int n, int dim) {
  Mat pe(n, dim);
  for (int pos = 0; pos < n; ++pos) {
    for (int i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
    }
  }
  return pe;
}

}  // namespace pvh::nn
