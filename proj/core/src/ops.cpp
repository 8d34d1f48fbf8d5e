#include "ram/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

namespace ram {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const Mat<T>> view(const Tensor<T>& t) {
  return Eigen::Map<const Mat<T>>(t.data(), Eigen::Index(t.rows()), Eigen::Index(t.cols()));
}

template <typename T>
Eigen::Map<Mat<T>> view(Tensor<T>& t) {
  return Eigen::Map<Mat<T>>(t.data(), Eigen::Index(t.rows()), Eigen::Index(t.cols()));
}

template <typename T>
Tensor<T> matrix(std::size_t rows, std::size_t cols) {
  return Tensor<T>(Shape{rows, cols});
}

template <typename T>
void require_same_shape(const char* op, const Var<T>& a, const Var<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

template <typename T>
void require_same_graph(const Var<T>& a, const Var<T>& b) {
  if (&a.graph() != &b.graph()) throw ContractError("operands belong to different graphs");
}

// Elementwise op whose derivative is expressed through input x and output y.
template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const Var<T>& a, Fwd fwd, Deriv deriv) {
  Graph<T>& g = a.graph();
  Tensor<T> y = a.value();
  for (auto& v : y.values()) v = fwd(v);
  const std::size_t ia = a.id();
  const std::size_t io = g.size();
  return g.record(std::move(y), {ia}, [ia, io, deriv](Graph<T>& gr, const Tensor<T>& grad) {
    const Tensor<T>& x = gr.value(ia);
    const Tensor<T>& out = gr.value(io);
    Tensor<T>& dx = gr.grad_buffer(ia);
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] += grad[i] * deriv(x[i], out[i]);
  });
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require_same_graph(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Graph<T>& g = a.graph();
  Tensor<T> out = matrix<T>(a.rows(), b.cols());
  view(out).noalias() = view(a.value()) * view(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph<T>& gr, const Tensor<T>& grad) {
    if (gr.needs_grad(ia)) view(gr.grad_buffer(ia)).noalias() += view(grad) * view(gr.value(ib)).transpose();
    if (gr.needs_grad(ib)) view(gr.grad_buffer(ib)).noalias() += view(gr.value(ia)).transpose() * view(grad);
  });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  require_same_graph(a, b);
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions disagree for " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
  }
  Graph<T>& g = a.graph();
  Tensor<T> out = matrix<T>(a.rows(), b.rows());
  view(out).noalias() = view(a.value()) * view(b.value()).transpose();
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph<T>& gr, const Tensor<T>& grad) {
    if (gr.needs_grad(ia)) view(gr.grad_buffer(ia)).noalias() += view(grad) * view(gr.value(ib));
    if (gr.needs_grad(ib)) view(gr.grad_buffer(ib)).noalias() += view(grad).transpose() * view(gr.value(ia));
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_graph(a, b);
  require_same_shape("add", a, b);
  Graph<T>& g = a.graph();
  Tensor<T> out = a.value();
  view(out) += view(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph<T>& gr, const Tensor<T>& grad) {
    if (gr.needs_grad(ia)) view(gr.grad_buffer(ia)) += view(grad);
    if (gr.needs_grad(ib)) view(gr.grad_buffer(ib)) += view(grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_graph(a, b);
  require_same_shape("sub", a, b);
  Graph<T>& g = a.graph();
  Tensor<T> out = a.value();
  view(out) -= view(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph<T>& gr, const Tensor<T>& grad) {
    if (gr.needs_grad(ia)) view(gr.grad_buffer(ia)) += view(grad);
    if (gr.needs_grad(ib)) view(gr.grad_buffer(ib)) -= view(grad);
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_graph(a, b);
  require_same_shape("mul", a, b);
  Graph<T>& g = a.graph();
  Tensor<T> out = a.value();
  view(out).array() *= view(b.value()).array();
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph<T>& gr, const Tensor<T>& grad) {
    if (gr.needs_grad(ia)) view(gr.grad_buffer(ia)).array() += view(grad).array() * view(gr.value(ib)).array();
    if (gr.needs_grad(ib)) view(gr.grad_buffer(ib)).array() += view(grad).array() * view(gr.value(ia)).array();
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Graph<T>& g = a.graph();
  Tensor<T> out = a.value();
  view(out) *= factor;
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, factor](Graph<T>& gr, const Tensor<T>& grad) {
    view(gr.grad_buffer(ia)) += factor * view(grad);
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T offset) {
  Graph<T>& g = a.graph();
  Tensor<T> out = a.value();
  view(out).array() += offset;
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia](Graph<T>& gr, const Tensor<T>& grad) {
    view(gr.grad_buffer(ia)) += view(grad);
  });
}

template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  require_same_graph(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: row " + shape_string(row.shape()) + " does not broadcast over " +
                         shape_string(a.shape()));
  }
  Graph<T>& g = a.graph();
  Tensor<T> out = a.value();
  view(out).rowwise() += view(row.value()).row(0);
  const std::size_t ia = a.id(), ir = row.id();
  return g.record(std::move(out), {ia, ir}, [ia, ir](Graph<T>& gr, const Tensor<T>& grad) {
    if (gr.needs_grad(ia)) view(gr.grad_buffer(ia)) += view(grad);
    if (gr.needs_grad(ir)) view(gr.grad_buffer(ir)).row(0) += view(grad).colwise().sum();
  });
}


template <typename T>
Var<T> tanh(const Var<T>& a) {
  return unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary(
      a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return unary(
      a, [](T x) { return T(0.5) * x * (T(1) + std::erf(x * T(inv_sqrt2))); },
      [](T x, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(x * T(inv_sqrt2)));
        return cdf + x * T(inv_sqrt_2pi) * std::exp(T(-0.5) * x * x);
      });
}

namespace {

template <typename T>
void softmax_inplace(T* row, std::size_t n) {
  T peak = row[0];
  for (std::size_t j = 1; j < n; ++j) peak = std::max(peak, row[j]);
  T total = 0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - peak);
    total += row[j];
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= total;
}

// dS = P * (dP - rowsum(dP * P)), in place over dP.
template <typename T>
void softmax_backward_inplace(const T* p, T* dp, std::size_t n) {
  T dot = 0;
  for (std::size_t j = 0; j < n; ++j) dot += dp[j] * p[j];
  for (std::size_t j = 0; j < n; ++j) dp[j] = p[j] * (dp[j] - dot);
}

}  // namespace

template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
  Graph<T>& g = a.graph();
  Tensor<T> y = a.value();
  const std::size_t m = y.rows(), n = y.cols();
  for (std::size_t r = 0; r < m; ++r) softmax_inplace(y.data() + r * n, n);
  const std::size_t ia = a.id();
  const std::size_t io = g.size();
  return g.record(std::move(y), {ia}, [ia, io, m, n](Graph<T>& gr, const Tensor<T>& grad) {
    const Tensor<T>& p = gr.value(io);
    Tensor<T> ds = grad;
    for (std::size_t r = 0; r < m; ++r) softmax_backward_inplace(p.data() + r * n, ds.data() + r * n, n);
    view(gr.grad_buffer(ia)) += view(ds);
  });
}

template <typename T>
Var<T> layer_norm_rows(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  require_same_graph(x, gain);
  require_same_graph(x, bias);
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw DimensionError("layer_norm_rows: gain/bias must be 1x" + std::to_string(n));
  }
  Graph<T>& g = x.graph();
  auto normalized = std::make_shared<Tensor<T>>(Shape{m, n});
  auto inv_std = std::make_shared<std::vector<T>>(m);
  Tensor<T> y(Shape{m, n});
  const Tensor<T>& xv = x.value();
  const Tensor<T>& gv = gain.value();
  const Tensor<T>& bv = bias.value();
  for (std::size_t r = 0; r < m; ++r) {
    const T* row = xv.data() + r * n;
    T mean = 0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= T(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= T(n);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const T xhat = (row[j] - mean) * is;
      normalized->at(r, j) = xhat;
      y.at(r, j) = xhat * gv[j] + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return g.record(std::move(y), {ix, ig, ib},
                  [ix, ig, ib, m, n, normalized, inv_std](Graph<T>& gr, const Tensor<T>& grad) {
                    const Tensor<T>& gv = gr.value(ig);
                    if (gr.needs_grad(ig) || gr.needs_grad(ib)) {
                      Tensor<T>* dg = gr.needs_grad(ig) ? &gr.grad_buffer(ig) : nullptr;
                      Tensor<T>* db = gr.needs_grad(ib) ? &gr.grad_buffer(ib) : nullptr;
                      for (std::size_t r = 0; r < m; ++r) {
                        for (std::size_t j = 0; j < n; ++j) {
                          if (dg) (*dg)[j] += grad.at(r, j) * normalized->at(r, j);
                          if (db) (*db)[j] += grad.at(r, j);
                        }
                      }
                    }
                    if (!gr.needs_grad(ix)) return;
                    Tensor<T>& dx = gr.grad_buffer(ix);
                    std::vector<T> dxhat(n);
                    for (std::size_t r = 0; r < m; ++r) {
                      T mean_d = 0, mean_dx = 0;
                      for (std::size_t j = 0; j < n; ++j) {
                        dxhat[j] = grad.at(r, j) * gv[j];
                        mean_d += dxhat[j];
                        mean_dx += dxhat[j] * normalized->at(r, j);
                      }
                      mean_d /= T(n);
                      mean_dx /= T(n);
                      const T is = (*inv_std)[r];
                      for (std::size_t j = 0; j < n; ++j) {
                        dx.at(r, j) += is * (dxhat[j] - mean_d - normalized->at(r, j) * mean_dx);
                      }
                    }
                  });
}

template <typename T>
Var<T> mean_rows(const Var<T>& a) {
  Graph<T>& g = a.graph();
  const std::size_t m = a.rows(), n = a.cols();
  Tensor<T> out(Shape{1, n});
  view(out).row(0) = view(a.value()).colwise().sum() / T(m);
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, m](Graph<T>& gr, const Tensor<T>& grad) {
    view(gr.grad_buffer(ia)).rowwise() += view(grad).row(0) / T(m);
  });
}

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  Graph<T>& g = a.graph();
  T total = 0;
  for (auto v : a.value().values()) total += v;
  const std::size_t ia = a.id();
  return g.record(Tensor<T>::scalar(total), {ia}, [ia](Graph<T>& gr, const Tensor<T>& grad) {
    view(gr.grad_buffer(ia)).array() += grad[0];
  });
}

template <typename T>
Var<T> gather_rows(const Var<T>& table, std::span<const std::size_t> ids) {
  if (ids.empty()) throw ContractError("gather_rows: empty id list");
  const std::size_t n = table.cols();
  const Tensor<T>& tv = table.value();
  for (auto id : ids) {
    if (id >= tv.rows()) {
      throw ContractError("gather_rows: row " + std::to_string(id) + " out of range for " + shape_string(tv.shape()));
    }
  }
  Graph<T>& g = table.graph();
  Tensor<T> out(Shape{ids.size(), n});
  for (std::size_t r = 0; r < ids.size(); ++r) std::copy_n(tv.data() + ids[r] * n, n, out.data() + r * n);
  const std::size_t it = table.id();
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return g.record(std::move(out), {it}, [it, rows, n](Graph<T>& gr, const Tensor<T>& grad) {
    Tensor<T>& dt = gr.grad_buffer(it);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      T* dst = dt.data() + rows[r] * n;
      const T* src = grad.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
    }
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > a.rows()) {
    throw ContractError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                        ") outside " + shape_string(a.shape()));
  }
  Graph<T>& g = a.graph();
  const std::size_t n = a.cols();
  Tensor<T> out(Shape{count, n});
  std::copy_n(a.value().data() + begin * n, count * n, out.data());
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, begin, count, n](Graph<T>& gr, const Tensor<T>& grad) {
    T* dst = gr.grad_buffer(ia).data() + begin * n;
    for (std::size_t i = 0; i < count * n; ++i) dst[i] += grad[i];
  });
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::size_t> targets) {
  const std::size_t m = logits.rows(), c = logits.cols();
  if (targets.size() != m) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(m) +
                         " rows");
  }
  for (auto t : targets) {
    if (t >= c) throw ContractError("cross_entropy: target " + std::to_string(t) + " outside " + std::to_string(c));
  }
  Graph<T>& g = logits.graph();
  auto probs = std::make_shared<Tensor<T>>(logits.value());
  T loss = 0;
  for (std::size_t r = 0; r < m; ++r) {
    T* row = probs->data() + r * c;
    T peak = row[0];
    for (std::size_t j = 1; j < c; ++j) peak = std::max(peak, row[j]);
    T total = 0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(row[j] - peak);
    loss += std::log(total) + peak - row[targets[r]];
    softmax_inplace(row, c);
  }
  loss /= T(m);
  const std::size_t il = logits.id();
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return g.record(Tensor<T>::scalar(loss), {il}, [il, probs, tgt, m, c](Graph<T>& gr, const Tensor<T>& grad) {
    Tensor<T>& dl = gr.grad_buffer(il);
    const T w = grad[0] / T(m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t j = 0; j < c; ++j) dl.at(r, j) += w * probs->at(r, j);
      dl.at(r, tgt[r]) -= w;
    }
  });
}

template <typename T>
Var<T> sigmoid_bce(const Var<T>& logit, T label) {
  if (logit.value().size() != 1) throw DimensionError("sigmoid_bce: logit must be 1x1, got " + shape_string(logit.shape()));
  if (label != T(0) && label != T(1)) throw ContractError("sigmoid_bce: label must be 0 or 1");
  Graph<T>& g = logit.graph();
  const T z = logit.value()[0];
  const T loss = std::max(z, T(0)) - z * label + std::log1p(std::exp(-std::abs(z)));
  const std::size_t il = logit.id();
  return g.record(Tensor<T>::scalar(loss), {il}, [il, z, label](Graph<T>& gr, const Tensor<T>& grad) {
    const T p = z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
    gr.grad_buffer(il)[0] += grad[0] * (p - label);
  });
}

template <typename T>
Var<T> multi_head_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, std::size_t heads,
                            Tensor<T>* weights) {
  require_same_graph(q, k);
  require_same_graph(q, v);
  const std::size_t m = q.rows(), n = k.rows(), d = q.cols();
  if (n == 0) throw ContractError("attention over zero keys");
  if (k.cols() != d || v.cols() != d || v.rows() != n) {
    throw DimensionError("attention: q " + shape_string(q.shape()) + ", k " + shape_string(k.shape()) + ", v " +
                         shape_string(v.shape()));
  }
  if (heads == 0 || d % heads != 0) {
    throw ContractError("attention: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                        " heads");
  }
  const std::size_t dk = d / heads;
  const T inv_scale = T(1) / std::sqrt(T(dk));
  Graph<T>& g = q.graph();
  const auto Q = view(q.value());
  const auto Kv = view(k.value());
  const auto V = view(v.value());

  auto probs = std::make_shared<Tensor<T>>(Shape{heads, m, n});
  Tensor<T> out(Shape{m, d});
  auto O = view(out);
  for (std::size_t h = 0; h < heads; ++h) {
    Eigen::Map<Mat<T>> P(probs->data() + h * m * n, Eigen::Index(m), Eigen::Index(n));
    const auto cols = Eigen::Index(h * dk);
    P.noalias() = (Q.middleCols(cols, dk) * Kv.middleCols(cols, dk).transpose()) * inv_scale;
    for (std::size_t r = 0; r < m; ++r) softmax_inplace(P.data() + r * n, n);
    O.middleCols(cols, dk).noalias() = P * V.middleCols(cols, dk);
  }
  if (weights) *weights = *probs;

  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  return g.record(std::move(out), {iq, ik, iv},
                  [iq, ik, iv, m, n, heads, dk, inv_scale, probs](Graph<T>& gr, const Tensor<T>& grad) {
                    const auto Q = view(gr.value(iq));
                    const auto K = view(gr.value(ik));
                    const auto V = view(gr.value(iv));
                    const auto G = view(grad);
                    const bool gq = gr.needs_grad(iq), gk = gr.needs_grad(ik), gv = gr.needs_grad(iv);
                    Mat<T> dS(m, n);
                    for (std::size_t h = 0; h < heads; ++h) {
                      Eigen::Map<const Mat<T>> P(probs->data() + h * m * n, Eigen::Index(m), Eigen::Index(n));
                      const auto cols = Eigen::Index(h * dk);
                      const auto Gh = G.middleCols(cols, dk);
                      if (gv) view(gr.grad_buffer(iv)).middleCols(cols, dk).noalias() += P.transpose() * Gh;
                      if (!gq && !gk) continue;
                      dS.noalias() = Gh * V.middleCols(cols, dk).transpose();
                      for (std::size_t r = 0; r < m; ++r) softmax_backward_inplace(P.data() + r * n, dS.data() + r * n, n);
                      dS *= inv_scale;
                      if (gq) view(gr.grad_buffer(iq)).middleCols(cols, dk).noalias() += dS * K.middleCols(cols, dk);
                      if (gk) view(gr.grad_buffer(ik)).middleCols(cols, dk).noalias() += dS.transpose() * Q.middleCols(cols, dk);
                    }
                  });
}

#define RAM_INSTANTIATE_OPS(T)                                                                           \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                                  \
  template Var<T> matmul_nt(const Var<T>&, const Var<T>&);                                               \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                     \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                     \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                     \
  template Var<T> scale(const Var<T>&, T);                                                               \
  template Var<T> add_scalar(const Var<T>&, T);                                                          \
  template Var<T> add_row(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> tanh(const Var<T>&);                                                                   \
  template Var<T> sigmoid(const Var<T>&);                                                                \
  template Var<T> gelu(const Var<T>&);                                                                   \
  template Var<T> softmax_rows(const Var<T>&);                                                           \
  template Var<T> layer_norm_rows(const Var<T>&, const Var<T>&, const Var<T>&, T);                       \
  template Var<T> mean_rows(const Var<T>&);                                                              \
  template Var<T> sum_all(const Var<T>&);                                                                \
  template Var<T> gather_rows(const Var<T>&, std::span<const std::size_t>);                              \
  template Var<T> slice_rows(const Var<T>&, std::size_t, std::size_t);                                   \
  template Var<T> cross_entropy(const Var<T>&, std::span<const std::size_t>);                            \
  template Var<T> sigmoid_bce(const Var<T>&, T);                                                         \
  template Var<T> multi_head_attention(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t, Tensor<T>*);

RAM_INSTANTIATE_OPS(float)
RAM_INSTANTIATE_OPS(double)

}  // namespace ram
