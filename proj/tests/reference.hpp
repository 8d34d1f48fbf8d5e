#pragma once
// Straight-line loop implementation of the model's forward pass, sharing no
// code with the library beyond reading parameter values by name.

#include <cmath>
#include <string>
#include <vector>

#include "ram/params.hpp"

namespace ref {

using Mat = std::vector<std::vector<double>>;

inline Mat from(const ram::Tensor<double>& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

inline Mat param(const ram::ParamStore<double>& s, const std::string& name) { return from(s.value(s.index_of(name))); }

inline Mat linear(const Mat& x, const ram::ParamStore<double>& s, const std::string& name) {
  const Mat w = param(s, name + ".weight"), b = param(s, name + ".bias");
  Mat y(x.size(), std::vector<double>(w[0].size()));
  for (std::size_t r = 0; r < x.size(); ++r)
    for (std::size_t o = 0; o < w[0].size(); ++o) {
      double acc = b[0][o];
      for (std::size_t i = 0; i < w.size(); ++i) acc += x[r][i] * w[i][o];
      y[r][o] = acc;
    }
  return y;
}

inline Mat plus(const Mat& a, const Mat& b) {
  Mat y = a;
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) y[r][c] += b[r][c];
  return y;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Mat attention(const Mat& q, const Mat& k, const Mat& v, std::size_t heads) {
  const std::size_t d = q[0].size(), dk = d / heads;
  Mat out(q.size(), std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<double> score(k.size());
      double top = -1e300;
      for (std::size_t j = 0; j < k.size(); ++j) {
        double dot = 0;
        for (std::size_t c = h * dk; c < (h + 1) * dk; ++c) dot += q[i][c] * k[j][c];
        score[j] = dot / std::sqrt(double(dk));
        top = std::max(top, score[j]);
      }
      double z = 0;
      for (auto& s : score) z += (s = std::exp(s - top));
      for (std::size_t j = 0; j < k.size(); ++j)
        for (std::size_t c = h * dk; c < (h + 1) * dk; ++c) out[i][c] += score[j] / z * v[j][c];
    }
  }
  return out;
}

inline Mat attend(const Mat& from, const Mat& over, const ram::ParamStore<double>& s, const std::string& name,
                  std::size_t heads) {
  return linear(attention(linear(from, s, name + ".query"), linear(over, s, name + ".key"),
                          linear(over, s, name + ".value"), heads),
                s, name + ".output");
}

inline Mat ffn(const Mat& x, const ram::ParamStore<double>& s, const std::string& name) {
  Mat h = linear(x, s, name + ".inner");
  for (auto& row : h)
    for (auto& v : row) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  return linear(h, s, name + ".outer");
}

inline Mat layer_norm(const Mat& x, const ram::ParamStore<double>& s, const std::string& name) {
  const Mat g = param(s, name + ".gain"), b = param(s, name + ".bias");
  Mat y = x;
  for (std::size_t r = 0; r < x.size(); ++r) {
    double mean = 0, var = 0;
    for (double v : x[r]) mean += v;
    mean /= double(x[r].size());
    for (double v : x[r]) var += (v - mean) * (v - mean);
    var /= double(x[r].size());
    for (std::size_t c = 0; c < x[r].size(); ++c) y[r][c] = (x[r][c] - mean) / std::sqrt(var + 1e-5) * g[0][c] + b[0][c];
  }
  return y;
}

inline Mat gate(const Mat& prev, const Mat& source, const ram::ParamStore<double>& s, const std::string& name) {
  const Mat z = linear(source, s, name + ".candidate"), i = linear(source, s, name + ".input"),
            f = linear(source, s, name + ".forget");
  Mat out = prev;
  for (std::size_t r = 0; r < prev.size(); ++r)
    for (std::size_t c = 0; c < prev[r].size(); ++c)
      out[r][c] = prev[r][c] * sigmoid(f[r][c] + 1.0) + std::tanh(z[r][c]) * sigmoid(i[r][c] - 1.0);
  return out;
}

inline Mat fuse(const Mat& m, const Mat& e, const ram::ParamStore<double>& s, std::size_t heads) {
  return plus(m, attend(attend(m, m, s, "memory.self_attn", heads), e, s, "memory.cross_attn", heads));
}

inline Mat memory_step(const Mat& m, const Mat& e, const ram::ParamStore<double>& s, std::size_t heads) {
  const Mat gated = gate(m, fuse(m, e, s, heads), s, "memory.gate_a");
  return gate(gated, ffn(gated, s, "memory.ffn"), s, "memory.gate_b");
}

inline Mat decode_hop(const Mat& x0, const Mat& mem, const ram::ParamStore<double>& s, const std::string& dec,
                      std::size_t heads) {
  Mat h = layer_norm(x0, s, dec + ".norm_self");
  Mat x = plus(x0, attend(h, h, s, dec + ".self_attn", heads));
  x = plus(x, attend(layer_norm(x, s, dec + ".norm_cross"), mem, s, dec + ".cross_attn", heads));
  return plus(x, ffn(layer_norm(x, s, dec + ".norm_ffn"), s, dec + ".ffn"));
}

inline double max_abs_diff(const Mat& a, const ram::Tensor<double>& b) {
  double worst = 0;
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) worst = std::max(worst, std::abs(a[r][c] - b.at(r, c)));
  return worst;
}

}  // namespace ref
