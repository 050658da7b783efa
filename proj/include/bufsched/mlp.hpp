#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bufsched {

namespace detail {

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
void read_raw(std::istream& is, T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("truncated checkpoint stream");
}

inline void write_doubles(std::ostream& os, const std::vector<double>& v) {
  write_raw(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> read_doubles(std::istream& is) {
  std::uint64_t n = 0;
  read_raw(is, n);
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("truncated checkpoint stream");
  return v;
}

}  // namespace detail

struct TrainSample {
  std::vector<double> input;
  double target = 0.0;
};

class Mlp;

/// Adam moment accumulators, shaped to mirror one network's parameters.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t t = 0;

  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;

  AdamState() = default;
  explicit AdamState(const Mlp& net, double lr = 1e-3);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Fully connected network with rectified-linear hidden layers and a single
/// identity output: the Q-value approximator. Weights start from a fan-in
/// scaled uniform distribution, biases from zero.
class Mlp {
 public:
  Mlp(std::vector<std::size_t> layer_dims, std::uint64_t seed)
      : dims_(std::move(layer_dims)) {
    if (dims_.size() < 2) {
      throw std::invalid_argument("network needs at least input and output dims");
    }
    for (std::size_t d : dims_) {
      if (d == 0) throw std::invalid_argument("layer dims must be >= 1");
    }
    if (dims_.back() != 1) {
      throw std::invalid_argument("output layer must have exactly one unit");
    }
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      Layer layer;
      layer.in = dims_[l];
      layer.out = dims_[l + 1];
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.in));
      std::uniform_real_distribution<double> dist(-limit, limit);
      layer.w.resize(layer.out * layer.in);
      for (double& w : layer.w) w = dist(rng);
      layer.b.assign(layer.out, 0.0);
      layers_.push_back(std::move(layer));
    }
  }

  std::size_t input_dim() const { return dims_.front(); }
  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t layer_count() const { return layers_.size(); }

  std::span<const double> weights(std::size_t layer) const {
    return layers_[layer].w;
  }
  std::span<const double> biases(std::size_t layer) const {
    return layers_[layer].b;
  }
  double& weight(std::size_t layer, std::size_t out, std::size_t in) {
    return layers_[layer].w[out * layers_[layer].in + in];
  }
  double& bias(std::size_t layer, std::size_t out) {
    return layers_[layer].b[out];
  }

  double forward(std::span<const double> x) const {
    if (x.size() != input_dim()) {
      throw std::invalid_argument("input size " + std::to_string(x.size()) +
                                  " does not match network input dim " +
                                  std::to_string(input_dim()));
    }
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      next.assign(layer.out, 0.0);
      for (std::size_t i = 0; i < layer.out; ++i) {
        const double* w = layer.w.data() + i * layer.in;
        double z = layer.b[i];
        for (std::size_t j = 0; j < layer.in; ++j) z += w[j] * cur[j];
        next[i] = (l + 1 < layers_.size()) ? relu(z) : z;
      }
      cur.swap(next);
    }
    return cur[0];
  }

  /// First-layer pre-activation contribution of one input slice (no bias):
  /// W1[:, offset .. offset+|slice|) * slice. With the input split into a
  /// state part and an action part, the slice for a repeated part can be
  /// projected once and reused.
  std::vector<double> first_layer_partial(std::span<const double> slice,
                                          std::size_t offset) const {
    const Layer& l0 = layers_.front();
    if (offset + slice.size() > l0.in) {
      throw std::invalid_argument("first-layer slice exceeds input dim");
    }
    std::vector<double> out(l0.out, 0.0);
    for (std::size_t i = 0; i < l0.out; ++i) {
      const double* w = l0.w.data() + i * l0.in + offset;
      double z = 0.0;
      for (std::size_t j = 0; j < slice.size(); ++j) z += w[j] * slice[j];
      out[i] = z;
    }
    return out;
  }

  std::span<const double> first_layer_bias() const {
    return layers_.front().b;
  }

  /// Finishes a forward pass given the complete first-layer pre-activation
  /// (partials summed, bias included).
  double forward_from_first_layer(std::span<const double> preactivation) const {
    const Layer& l0 = layers_.front();
    if (preactivation.size() != l0.out) {
      throw std::invalid_argument("first-layer pre-activation size mismatch");
    }
    std::vector<double> cur(l0.out);
    for (std::size_t i = 0; i < l0.out; ++i) {
      cur[i] = layers_.size() > 1 ? relu(preactivation[i]) : preactivation[i];
    }
    std::vector<double> next;
    for (std::size_t l = 1; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      next.assign(layer.out, 0.0);
      for (std::size_t i = 0; i < layer.out; ++i) {
        const double* w = layer.w.data() + i * layer.in;
        double z = layer.b[i];
        for (std::size_t j = 0; j < layer.in; ++j) z += w[j] * cur[j];
        next[i] = (l + 1 < layers_.size()) ? relu(z) : z;
      }
      cur.swap(next);
    }
    return cur[0];
  }

  struct Gradients {
    std::vector<std::vector<double>> w, b;  // per layer, shaped like params
  };

  /// Mean-squared-error loss over the batch and its exact parameter
  /// gradients by backpropagation. Does not modify the network.
  std::pair<double, Gradients> backprop(std::span<const TrainSample> batch) const;

  /// One optimization step: backprop, then one Adam update. Returns the
  /// pre-step loss.
  double train_batch(AdamState& opt, std::span<const TrainSample> batch);

  void save(std::ostream& os) const {
    os.write(kMagic, 8);
    detail::write_raw(os, static_cast<std::uint64_t>(dims_.size()));
    for (std::size_t d : dims_) {
      detail::write_raw(os, static_cast<std::uint64_t>(d));
    }
    for (const Layer& l : layers_) {
      detail::write_doubles(os, l.w);
      detail::write_doubles(os, l.b);
    }
  }

  static Mlp load(std::istream& is) {
    char magic[8] = {};
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
      throw std::runtime_error("bad network checkpoint magic");
    }
    std::uint64_t n = 0;
    detail::read_raw(is, n);
    std::vector<std::size_t> dims(n);
    for (auto& d : dims) {
      std::uint64_t v = 0;
      detail::read_raw(is, v);
      d = static_cast<std::size_t>(v);
    }
    Mlp net(dims, 0);
    for (Layer& l : net.layers_) {
      l.w = detail::read_doubles(is);
      l.b = detail::read_doubles(is);
      if (l.w.size() != l.in * l.out || l.b.size() != l.out) {
        throw std::runtime_error("network checkpoint shape mismatch");
      }
    }
    return net;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.dims_ != b.dims_) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l) {
      if (a.layers_[l].w != b.layers_[l].w) return false;
      if (a.layers_[l].b != b.layers_[l].b) return false;
    }
    return true;
  }

 private:
  struct Layer {
    std::size_t in = 0, out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;  // out
  };

  static double relu(double z) { return z > 0.0 ? z : 0.0; }

  static constexpr const char kMagic[9] = "BSQNET1\0";

  std::vector<std::size_t> dims_;
  std::vector<Layer> layers_;

  friend struct AdamState;
};

inline AdamState::AdamState(const Mlp& net, double lr) : learning_rate(lr) {
  for (const auto& l : net.layers_) {
    m_w.emplace_back(l.w.size(), 0.0);
    v_w.emplace_back(l.w.size(), 0.0);
    m_b.emplace_back(l.b.size(), 0.0);
    v_b.emplace_back(l.b.size(), 0.0);
  }
}

inline std::pair<double, Mlp::Gradients> Mlp::backprop(
    std::span<const TrainSample> batch) const {
  if (batch.empty()) {
    throw std::invalid_argument("training batch must be nonempty");
  }
  const std::size_t n_layers = layers_.size();

  Gradients grads;
  std::vector<std::vector<double>>& gw = grads.w;
  std::vector<std::vector<double>>& gb = grads.b;
  gw.resize(n_layers);
  gb.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    gw[l].assign(layers_[l].w.size(), 0.0);
    gb[l].assign(layers_[l].b.size(), 0.0);
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;

  // activations[0] is the input; activations[l+1] the output of layer l.
  std::vector<std::vector<double>> acts(n_layers + 1);
  std::vector<double> delta, prev_delta;

  for (const TrainSample& sample : batch) {
    if (sample.input.size() != input_dim()) {
      throw std::invalid_argument("training sample input dim mismatch");
    }
    if (!std::isfinite(sample.target)) {
      throw std::invalid_argument("training target must be finite");
    }

    acts[0].assign(sample.input.begin(), sample.input.end());
    for (std::size_t l = 0; l < n_layers; ++l) {
      const Layer& layer = layers_[l];
      acts[l + 1].assign(layer.out, 0.0);
      for (std::size_t i = 0; i < layer.out; ++i) {
        const double* w = layer.w.data() + i * layer.in;
        double z = layer.b[i];
        for (std::size_t j = 0; j < layer.in; ++j) z += w[j] * acts[l][j];
        acts[l + 1][i] = (l + 1 < n_layers) ? relu(z) : z;
      }
    }

    const double pred = acts[n_layers][0];
    const double err = pred - sample.target;
    loss += err * err * inv_n;

    // output layer delta: d(mse)/d(pred), averaged over the batch
    delta.assign(1, 2.0 * err * inv_n);

    for (std::size_t l = n_layers; l-- > 0;) {
      const Layer& layer = layers_[l];
      for (std::size_t i = 0; i < layer.out; ++i) {
        const double d = delta[i];
        if (d == 0.0) continue;
        double* g = gw[l].data() + i * layer.in;
        const double* a = acts[l].data();
        for (std::size_t j = 0; j < layer.in; ++j) g[j] += d * a[j];
        gb[l][i] += d;
      }
      if (l == 0) break;
      prev_delta.assign(layer.in, 0.0);
      for (std::size_t i = 0; i < layer.out; ++i) {
        const double d = delta[i];
        if (d == 0.0) continue;
        const double* w = layer.w.data() + i * layer.in;
        for (std::size_t j = 0; j < layer.in; ++j) prev_delta[j] += d * w[j];
      }
      // rectifier gate of the layer below (its output is acts[l])
      for (std::size_t j = 0; j < layer.in; ++j) {
        if (acts[l][j] <= 0.0) prev_delta[j] = 0.0;
      }
      delta.swap(prev_delta);
    }
  }
  return {loss, std::move(grads)};
}

inline double Mlp::train_batch(AdamState& opt,
                               std::span<const TrainSample> batch) {
  if (opt.m_w.size() != layers_.size()) {
    throw std::invalid_argument("optimizer state does not match network");
  }
  auto [loss, grads] = backprop(batch);
  const auto& gw = grads.w;
  const auto& gb = grads.b;
  const std::size_t n_layers = layers_.size();

  opt.t += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
  auto adam_update = [&](std::vector<double>& param,
                         const std::vector<double>& grad,
                         std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t k = 0; k < param.size(); ++k) {
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * grad[k];
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * grad[k] * grad[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      param[k] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  };
  for (std::size_t l = 0; l < n_layers; ++l) {
    adam_update(layers_[l].w, gw[l], opt.m_w[l], opt.v_w[l]);
    adam_update(layers_[l].b, gb[l], opt.m_b[l], opt.v_b[l]);
  }
  return loss;
}

inline void save_adam(std::ostream& os, const AdamState& opt) {
  detail::write_raw(os, opt.learning_rate);
  detail::write_raw(os, opt.beta1);
  detail::write_raw(os, opt.beta2);
  detail::write_raw(os, opt.epsilon);
  detail::write_raw(os, opt.t);
  detail::write_raw(os, static_cast<std::uint64_t>(opt.m_w.size()));
  for (std::size_t l = 0; l < opt.m_w.size(); ++l) {
    detail::write_doubles(os, opt.m_w[l]);
    detail::write_doubles(os, opt.v_w[l]);
    detail::write_doubles(os, opt.m_b[l]);
    detail::write_doubles(os, opt.v_b[l]);
  }
}

inline AdamState load_adam(std::istream& is) {
  AdamState opt;
  detail::read_raw(is, opt.learning_rate);
  detail::read_raw(is, opt.beta1);
  detail::read_raw(is, opt.beta2);
  detail::read_raw(is, opt.epsilon);
  detail::read_raw(is, opt.t);
  std::uint64_t n = 0;
  detail::read_raw(is, n);
  for (std::uint64_t l = 0; l < n; ++l) {
    opt.m_w.push_back(detail::read_doubles(is));
    opt.v_w.push_back(detail::read_doubles(is));
    opt.m_b.push_back(detail::read_doubles(is));
    opt.v_b.push_back(detail::read_doubles(is));
  }
  return opt;
}

/// Model checkpoint: layer dims, parameters, and optimizer state. Round-trips
/// bit-exactly.
inline void save_model(const std::string& path, const Mlp& net,
                       const AdamState& opt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint file " + path);
  net.save(os);
  save_adam(os, opt);
  if (!os) throw std::runtime_error("failed writing checkpoint file " + path);
}

inline std::pair<Mlp, AdamState> load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint file " + path);
  Mlp net = Mlp::load(is);
  AdamState opt = load_adam(is);
  return {std::move(net), std::move(opt)};
}

}  // namespace bufsched
