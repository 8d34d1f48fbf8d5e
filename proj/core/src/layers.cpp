#include "ram/layers.hpp"

#include <cmath>

namespace ram {

namespace init {

template <typename T>
Tensor<T> normal(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.values()) v = T(dist(rng));
  return t;
}

template <typename T>
Tensor<T> truncated_normal(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.values()) {
    double x = dist(rng);
    while (std::abs(x) > 2.0 * stddev) x = dist(rng);
    v = T(x);
  }
  return t;
}

template <typename T>
Tensor<T> uniform(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = T(dist(rng));
  return t;
}

template Tensor<float> normal<float>(Shape, double, std::mt19937_64&);
template Tensor<double> normal<double>(Shape, double, std::mt19937_64&);
template Tensor<float> truncated_normal<float>(Shape, double, std::mt19937_64&);
template Tensor<double> truncated_normal<double>(Shape, double, std::mt19937_64&);
template Tensor<float> uniform<float>(Shape, double, std::mt19937_64&);
template Tensor<double> uniform<double>(Shape, double, std::mt19937_64&);

}  // namespace init

template <typename T>
Linear make_linear(ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
                   std::mt19937_64& rng) {
  Linear l;
  l.weight = store.add(name + ".weight", init::uniform<T>({in, out}, 1.0 / std::sqrt(double(in)), rng));
  l.bias = store.add(name + ".bias", Tensor<T>(Shape{1, out}));
  return l;
}

template <typename T>
LayerNormParams make_layer_norm(ParamStore<T>& store, const std::string& name, std::size_t width) {
  LayerNormParams ln;
  ln.gain = store.add(name + ".gain", Tensor<T>(Shape{1, width}, T(1)));
  ln.bias = store.add(name + ".bias", Tensor<T>(Shape{1, width}));
  return ln;
}

template <typename T>
AttentionParams make_attention(ParamStore<T>& store, const std::string& name, std::size_t width,
                               std::mt19937_64& rng) {
  AttentionParams a;
  a.query = make_linear(store, name + ".query", width, width, rng);
  a.key = make_linear(store, name + ".key", width, width, rng);
  a.value = make_linear(store, name + ".value", width, width, rng);
  a.output = make_linear(store, name + ".output", width, width, rng);
  return a;
}

template <typename T>
FeedForwardParams make_feed_forward(ParamStore<T>& store, const std::string& name, std::size_t width,
                                    std::size_t inner, std::mt19937_64& rng) {
  FeedForwardParams f;
  f.inner = make_linear(store, name + ".inner", width, inner, rng);
  f.outer = make_linear(store, name + ".outer", inner, width, rng);
  return f;
}

#define RAM_INSTANTIATE_LAYERS(T)                                                                              \
  template Linear make_linear(ParamStore<T>&, const std::string&, std::size_t, std::size_t, std::mt19937_64&); \
  template LayerNormParams make_layer_norm(ParamStore<T>&, const std::string&, std::size_t);                   \
  template AttentionParams make_attention(ParamStore<T>&, const std::string&, std::size_t, std::mt19937_64&);  \
  template FeedForwardParams make_feed_forward(ParamStore<T>&, const std::string&, std::size_t, std::size_t,   \
                                               std::mt19937_64&);

RAM_INSTANTIATE_LAYERS(float)
RAM_INSTANTIATE_LAYERS(double)

}  // namespace ram
