#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "robusteval/dataset.hpp"
#include "robusteval/error.hpp"
#include "robusteval/perturb.hpp"
#include "robusteval/tensor.hpp"
#include "robusteval/trace.hpp"

namespace robusteval {

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
};
struct ReluLayer {};
/// Valid (unpadded), stride-1 convolution with a square kernel over [C,H,W].
struct ConvLayer {
  std::size_t channels = 0;
  std::size_t kernel = 0;
};
struct FlattenLayer {};

using LayerSpec = std::variant<DenseLayer, ReluLayer, ConvLayer, FlattenLayer>;

struct NetworkSpec {
  Shape input_shape;
  std::vector<LayerSpec> layers;
  std::size_t classes = 0;
  std::uint64_t seed = 0;
};

inline std::string layer_kind(const LayerSpec& l) {
  return std::visit(
      [](const auto& v) -> std::string {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, DenseLayer>) return "dense";
        if constexpr (std::is_same_v<V, ReluLayer>) return "relu";
        if constexpr (std::is_same_v<V, ConvLayer>) return "conv";
        return "flatten";
      },
      l);
}

/// Output shapes of every layer; throws on incompatible adjacent layers.
inline std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
  require(!spec.layers.empty(), Errc::invalid_argument, "network has no layers");
  require(spec.classes >= 1, Errc::invalid_argument, "network class count must be >= 1");
  Shape cur = spec.input_shape;
  require(!cur.empty() && element_count(cur) > 0, Errc::invalid_argument, "network input shape must be non-empty");
  std::vector<Shape> out;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const std::string where = "layer " + std::to_string(l) + " (" + layer_kind(spec.layers[l]) + ")";
    std::visit(
        [&](const auto& v) {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, DenseLayer>) {
            require(cur.size() == 1 && cur[0] == v.in && v.out > 0, Errc::invalid_argument,
                    where + ": expects flat input of width " + std::to_string(v.in) + ", got " + shape_string(cur));
            cur = {v.out};
          } else if constexpr (std::is_same_v<V, ConvLayer>) {
            require(cur.size() == 3 && v.channels > 0 && v.kernel > 0 && cur[1] >= v.kernel && cur[2] >= v.kernel,
                    Errc::invalid_argument, where + ": expects [C,H,W] input at least kernel-sized, got " +
                                                shape_string(cur));
            cur = {v.channels, cur[1] - v.kernel + 1, cur[2] - v.kernel + 1};
          } else if constexpr (std::is_same_v<V, FlattenLayer>) {
            cur = {element_count(cur)};
          }
        },
        spec.layers[l]);
    out.push_back(cur);
  }
  require(out.back() == Shape{spec.classes}, Errc::invalid_argument,
          "final layer width must equal the class count " + std::to_string(spec.classes));
  return out;
}

template <std::floating_point T>
struct LayerParams {
  std::vector<T> weight;  // dense: [out, in]; conv: [out_c, in_c, k, k]
  std::vector<T> bias;
};

/// Small feed-forward classifier with softmax cross-entropy, exact reverse-mode
/// gradients and a fixed summation order. T = float is the production
/// instantiation; T = double serves finite-difference checks.
template <std::floating_point T = float>
class Network {
 public:
  static constexpr bool reentrant = true;

  struct Forward {
    std::vector<std::vector<T>> outputs;  // outputs[l] = output of layer l; back() = logits
    std::vector<T> probs;
  };

  struct Backward {
    T loss{};
    std::vector<T> input_grad;
    std::vector<LayerParams<T>> param_grads;
  };

  Network() = default;

  explicit Network(NetworkSpec spec) : spec_(std::move(spec)), shapes_(infer_shapes(spec_)) {
    params_.resize(spec_.layers.size());
    std::mt19937_64 rng(spec_.seed);
    Shape in = spec_.input_shape;
    for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
      auto init = [&](std::size_t weights, std::size_t biases, std::size_t fan_in) {
        // He-style uniform bound sqrt(6 / fan_in).
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        params_[l].weight.resize(weights);
        for (T& w : params_[l].weight) w = static_cast<T>(bound * u(rng));
        params_[l].bias.assign(biases, T{0});
      };
      if (const auto* d = std::get_if<DenseLayer>(&spec_.layers[l])) {
        init(d->in * d->out, d->out, d->in);
      } else if (const auto* c = std::get_if<ConvLayer>(&spec_.layers[l])) {
        init(c->channels * in[0] * c->kernel * c->kernel, c->channels, in[0] * c->kernel * c->kernel);
      }
      in = shapes_[l];
    }
  }

  const NetworkSpec& spec() const noexcept { return spec_; }
  const std::vector<Shape>& output_shapes() const noexcept { return shapes_; }
  std::vector<LayerParams<T>>& params() noexcept { return params_; }
  const std::vector<LayerParams<T>>& params() const noexcept { return params_; }
  std::size_t input_size() const { return element_count(spec_.input_shape); }

  std::string layer_name(std::size_t l) const { return layer_kind(spec_.layers.at(l)) + "_" + std::to_string(l); }

  Forward forward(std::span<const T> x) const {
    require(x.size() == input_size(), Errc::shape_mismatch,
            "input has " + std::to_string(x.size()) + " elements, network expects " + shape_string(spec_.input_shape));
    Forward f;
    f.outputs.reserve(spec_.layers.size());
    std::span<const T> in = x;
    Shape in_shape = spec_.input_shape;
    for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
      f.outputs.push_back(layer_forward(l, in, in_shape));
      in = f.outputs.back();
      in_shape = shapes_[l];
    }
    f.probs = softmax(f.outputs.back());
    return f;
  }

  Backward backward(std::span<const T> x, std::size_t y, bool want_param_grads = true) const {
    require(y < spec_.classes, Errc::invalid_argument, "label out of range");
    const Forward f = forward(x);
    const auto& logits = f.outputs.back();
    const T zmax = *std::max_element(logits.begin(), logits.end());
    T sum{0};
    for (T z : logits) sum += std::exp(z - zmax);
    Backward b;
    b.loss = std::log(sum) + zmax - logits[y];

    std::vector<T> g(f.probs);
    g[y] -= T{1};
    if (want_param_grads) b.param_grads.resize(spec_.layers.size());
    for (std::size_t l = spec_.layers.size(); l-- > 0;) {
      const std::span<const T> in = l == 0 ? x : std::span<const T>(f.outputs[l - 1]);
      const Shape& in_shape = l == 0 ? spec_.input_shape : shapes_[l - 1];
      g = layer_backward(l, in, in_shape, g, want_param_grads ? &b.param_grads[l] : nullptr);
    }
    b.input_grad = std::move(g);
    return b;
  }

  // ModelOracle surface.

  std::vector<double> predict(const TensorBlock& x) const {
    const auto f = forward(to_scalar(x));
    return std::vector<double>(f.probs.begin(), f.probs.end());
  }

  double loss(const TensorBlock& x, std::size_t y) const {
    return static_cast<double>(backward(to_scalar(x), y, false).loss);
  }

  TensorBlock input_grad(const TensorBlock& x, std::size_t y) const {
    const auto b = backward(to_scalar(x), y, false);
    return TensorBlock(x.shape(), std::vector<float>(b.input_grad.begin(), b.input_grad.end()));
  }

  template <std::floating_point U>
  Network<U> cast() const {
    Network<U> out(spec_);
    for (std::size_t l = 0; l < params_.size(); ++l) {
      out.params()[l].weight.assign(params_[l].weight.begin(), params_[l].weight.end());
      out.params()[l].bias.assign(params_[l].bias.begin(), params_[l].bias.end());
    }
    return out;
  }

  bool operator==(const Network& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (std::size_t l = 0; l < params_.size(); ++l) {
      if (params_[l].weight != other.params_[l].weight || params_[l].bias != other.params_[l].bias) return false;
    }
    return shapes_ == other.shapes_;
  }

 private:
  std::vector<T> to_scalar(const TensorBlock& x) const {
    require(x.shape() == spec_.input_shape || x.size() == input_size(), Errc::shape_mismatch,
            "input shape " + shape_string(x.shape()) + " does not match network input " +
                shape_string(spec_.input_shape));
    return std::vector<T>(x.data().begin(), x.data().end());
  }

  static std::vector<T> softmax(std::span<const T> z) {
    const T zmax = *std::max_element(z.begin(), z.end());
    std::vector<T> p(z.size());
    T sum{0};
    for (std::size_t i = 0; i < z.size(); ++i) sum += (p[i] = std::exp(z[i] - zmax));
    for (T& v : p) v /= sum;
    return p;
  }

  std::vector<T> layer_forward(std::size_t l, std::span<const T> in, const Shape& in_shape) const {
    const auto& P = params_[l];
    return std::visit(
        [&](const auto& v) -> std::vector<T> {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, DenseLayer>) {
            std::vector<T> out(v.out);
            for (std::size_t o = 0; o < v.out; ++o) {
              T acc = P.bias[o];
              const T* w = &P.weight[o * v.in];
              for (std::size_t i = 0; i < v.in; ++i) acc += w[i] * in[i];
              out[o] = acc;
            }
            return out;
          } else if constexpr (std::is_same_v<V, ReluLayer>) {
            std::vector<T> out(in.begin(), in.end());
            for (T& t : out) t = t > T{0} ? t : T{0};
            return out;
          } else if constexpr (std::is_same_v<V, ConvLayer>) {
            const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2], K = v.kernel;
            const std::size_t OH = H - K + 1, OW = W - K + 1;
            std::vector<T> out(v.channels * OH * OW);
            for (std::size_t o = 0; o < v.channels; ++o) {
              for (std::size_t i = 0; i < OH; ++i) {
                for (std::size_t j = 0; j < OW; ++j) {
                  T acc = P.bias[o];
                  for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t u = 0; u < K; ++u) {
                      for (std::size_t w = 0; w < K; ++w) {
                        acc += P.weight[((o * C + c) * K + u) * K + w] * in[(c * H + i + u) * W + j + w];
                      }
                    }
                  }
                  out[(o * OH + i) * OW + j] = acc;
                }
              }
            }
            return out;
          } else {
            return std::vector<T>(in.begin(), in.end());
          }
        },
        spec_.layers[l]);
  }

  // Gradient w.r.t. the layer input given gradient g w.r.t. its output.
  std::vector<T> layer_backward(std::size_t l, std::span<const T> in, const Shape& in_shape, const std::vector<T>& g,
                                LayerParams<T>* pg) const {
    const auto& P = params_[l];
    return std::visit(
        [&](const auto& v) -> std::vector<T> {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, DenseLayer>) {
            std::vector<T> gin(v.in, T{0});
            for (std::size_t o = 0; o < v.out; ++o) {
              const T* w = &P.weight[o * v.in];
              for (std::size_t i = 0; i < v.in; ++i) gin[i] += w[i] * g[o];
            }
            if (pg) {
              pg->weight.resize(P.weight.size());
              pg->bias = g;
              for (std::size_t o = 0; o < v.out; ++o) {
                for (std::size_t i = 0; i < v.in; ++i) pg->weight[o * v.in + i] = g[o] * in[i];
              }
            }
            return gin;
          } else if constexpr (std::is_same_v<V, ReluLayer>) {
            std::vector<T> gin(g);
            for (std::size_t i = 0; i < gin.size(); ++i) {
              if (!(in[i] > T{0})) gin[i] = T{0};
            }
            return gin;
          } else if constexpr (std::is_same_v<V, ConvLayer>) {
            const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2], K = v.kernel;
            const std::size_t OH = H - K + 1, OW = W - K + 1;
            std::vector<T> gin(in.size(), T{0});
            if (pg) {
              pg->weight.assign(P.weight.size(), T{0});
              pg->bias.assign(v.channels, T{0});
            }
            for (std::size_t o = 0; o < v.channels; ++o) {
              for (std::size_t i = 0; i < OH; ++i) {
                for (std::size_t j = 0; j < OW; ++j) {
                  const T go = g[(o * OH + i) * OW + j];
                  if (pg) pg->bias[o] += go;
                  for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t u = 0; u < K; ++u) {
                      for (std::size_t w = 0; w < K; ++w) {
                        const std::size_t wi = ((o * C + c) * K + u) * K + w;
                        const std::size_t xi = (c * H + i + u) * W + j + w;
                        gin[xi] += P.weight[wi] * go;
                        if (pg) pg->weight[wi] += in[xi] * go;
                      }
                    }
                  }
                }
              }
            }
            return gin;
          } else {
            return g;
          }
        },
        spec_.layers[l]);
  }

  NetworkSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<LayerParams<T>> params_;
};

// ---------------------------------------------------------------------------
// Activation capture
// ---------------------------------------------------------------------------

/// Trace of every non-flatten layer. Flat outputs become one-element neurons;
/// [C,H,W] outputs group each channel's H*W elements into one neuron.
template <std::floating_point T>
ActivationTrace capture_trace(const Network<T>& net, std::span<const std::string> ids,
                              std::span<const TensorBlock> inputs) {
  require(ids.size() == inputs.size(), Errc::shape_mismatch, "capture_trace ids and inputs disagree in length");
  std::vector<std::size_t> kept;
  std::vector<LayerGeometry> layers;
  for (std::size_t l = 0; l < net.spec().layers.size(); ++l) {
    if (std::holds_alternative<FlattenLayer>(net.spec().layers[l])) continue;
    const Shape& s = net.output_shapes()[l];
    kept.push_back(l);
    if (s.size() == 3) {
      layers.push_back({net.layer_name(l), s[0], s[1] * s[2]});
    } else {
      layers.push_back({net.layer_name(l), element_count(s), 1});
    }
  }
  std::vector<std::vector<float>> values(kept.size());
  for (const auto& x : inputs) {
    const std::vector<T> xs(x.data().begin(), x.data().end());
    const auto f = net.forward(xs);
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const auto& o = f.outputs[kept[k]];
      values[k].insert(values[k].end(), o.begin(), o.end());
    }
  }
  return ActivationTrace(std::move(layers), std::vector<std::string>(ids.begin(), ids.end()), std::move(values));
}

template <std::floating_point T>
ActivationTrace capture_trace(const Network<T>& net, const LabeledSet& set) {
  return capture_trace(net, set.ids, set.inputs);
}

/// Trace of the perturbed side of a pair set, keyed by the pairs' sample ids.
template <std::floating_point T>
ActivationTrace capture_trace(const Network<T>& net, const SamplePairSet& pairs, bool perturbed) {
  std::vector<std::string> ids;
  std::vector<TensorBlock> xs;
  for (const auto& p : pairs.pairs()) {
    ids.push_back(p.sample_id);
    xs.push_back(perturbed ? p.perturbed : p.clean);
  }
  return capture_trace(net, ids, xs);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class Recipe { vanilla, adversarial };

inline std::string to_string(Recipe r) { return r == Recipe::vanilla ? "vanilla" : "adversarial"; }

inline Recipe parse_recipe(const std::string& s) {
  if (s == "vanilla") return Recipe::vanilla;
  if (s == "adversarial") return Recipe::adversarial;
  fail(Errc::invalid_argument, "unknown training recipe '" + s + "'");
}

struct TrainConfig {
  Recipe recipe = Recipe::vanilla;
  double epsilon = 0.0;          // l-inf budget of the adversarial recipe
  std::size_t attack_steps = 7;  // PGD iterations per batch
  double attack_alpha = 0.0;     // 0 selects 2.5 * epsilon / attack_steps
  double learning_rate = 0.3;
  std::size_t batch_size = 32;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"recipe", to_string(recipe)}, {"epsilon", epsilon},           {"attack_steps", attack_steps},
            {"attack_alpha", attack_alpha}, {"learning_rate", learning_rate}, {"batch_size", batch_size},
            {"epochs", epochs},             {"seed", seed}};
  }
};

struct TrainedModel {
  Network<float> network;
  std::string recipe = "vanilla";
};

/// Minibatch SGD on mean cross-entropy. Batch order comes from (seed, epoch);
/// the adversarial recipe replaces every batch by PGD-l-inf examples against
/// the current parameters.
inline TrainedModel train(const NetworkSpec& spec, const LabeledSet& data, const TrainConfig& cfg) {
  data.validate();
  require(data.classes <= spec.classes, Errc::invalid_argument, "dataset has more classes than the network");
  require(cfg.batch_size >= 1 && cfg.epochs >= 1, Errc::invalid_argument, "batch size and epochs must be >= 1");
  require(cfg.learning_rate > 0.0, Errc::invalid_argument, "learning rate must be > 0");
  require(cfg.epsilon >= 0.0, Errc::invalid_argument, "training epsilon must be >= 0");

  TrainedModel model{Network<float>(spec), to_string(cfg.recipe)};
  auto& net = model.network;
  const float lr = static_cast<float>(cfg.learning_rate);

  AttackConfig adv;
  adv.method = AttackMethod::pgd;
  adv.norm = Norm::linf;
  adv.epsilon = cfg.epsilon;
  adv.iterations = std::max<std::size_t>(1, cfg.attack_steps);
  adv.alpha = cfg.attack_alpha > 0.0 ? std::min(cfg.attack_alpha, cfg.epsilon)
                                     : std::min(cfg.epsilon, 2.5 * cfg.epsilon / static_cast<double>(adv.iterations));
  adv.random_start = true;

  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = sample_rng(cfg.seed, epoch, 0x7261696eu);
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<LayerParams<float>> acc(net.params().size());
      for (std::size_t l = 0; l < acc.size(); ++l) {
        acc[l].weight.assign(net.params()[l].weight.size(), 0.0f);
        acc[l].bias.assign(net.params()[l].bias.size(), 0.0f);
      }
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        TensorBlock x = data.inputs[i];
        if (cfg.recipe == Recipe::adversarial && cfg.epsilon > 0.0) {
          adv.seed = cfg.seed ^ (0x9e3779b97f4a7c15ull * (epoch + 1));
          x = pgd(net, x, data.labels[i], adv, i);
        }
        const std::vector<float> xs(x.data().begin(), x.data().end());
        const auto g = net.backward(xs, data.labels[i], true);
        require(std::isfinite(g.loss), Errc::divergence, "non-finite loss at epoch " + std::to_string(epoch));
        for (std::size_t l = 0; l < acc.size(); ++l) {
          for (std::size_t k = 0; k < acc[l].weight.size(); ++k) acc[l].weight[k] += g.param_grads[l].weight[k];
          for (std::size_t k = 0; k < acc[l].bias.size(); ++k) acc[l].bias[k] += g.param_grads[l].bias[k];
        }
      }
      const float scale = lr / static_cast<float>(end - start);
      for (std::size_t l = 0; l < acc.size(); ++l) {
        auto& p = net.params()[l];
        for (std::size_t k = 0; k < p.weight.size(); ++k) p.weight[k] -= scale * acc[l].weight[k];
        for (std::size_t k = 0; k < p.bias.size(); ++k) p.bias[k] -= scale * acc[l].bias[k];
        require(all_finite<float>(p.weight) && all_finite<float>(p.bias), Errc::divergence,
                "non-finite parameters at epoch " + std::to_string(epoch));
      }
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoints: model.json manifest + one .rtt per parameter tensor.
// ---------------------------------------------------------------------------

inline constexpr const char* kModelFormat = "robusteval-model";

inline nlohmann::json spec_to_json(const NetworkSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    nlohmann::json j{{"type", layer_kind(l)}};
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      j["in"] = d->in;
      j["out"] = d->out;
    } else if (const auto* c = std::get_if<ConvLayer>(&l)) {
      j["channels"] = c->channels;
      j["kernel"] = c->kernel;
    }
    layers.push_back(j);
  }
  return {{"input_shape", spec.input_shape}, {"classes", spec.classes}, {"seed", spec.seed}, {"layers", layers}};
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  try {
    spec.input_shape = j.at("input_shape").get<Shape>();
    spec.classes = j.at("classes").get<std::size_t>();
    spec.seed = j.value("seed", std::uint64_t{0});
    for (const auto& l : j.at("layers")) {
      const auto type = l.at("type").get<std::string>();
      if (type == "dense") {
        spec.layers.push_back(DenseLayer{l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>()});
      } else if (type == "relu") {
        spec.layers.push_back(ReluLayer{});
      } else if (type == "conv") {
        spec.layers.push_back(ConvLayer{l.at("channels").get<std::size_t>(), l.at("kernel").get<std::size_t>()});
      } else if (type == "flatten") {
        spec.layers.push_back(FlattenLayer{});
      } else {
        fail(Errc::bad_header, "unknown layer type '" + type + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, std::string("malformed network spec: ") + e.what());
  }
  infer_shapes(spec);
  return spec;
}

inline void save_model(const std::filesystem::path& dir, const TrainedModel& model) {
  std::filesystem::create_directories(dir);
  const auto& net = model.network;
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t l = 0; l < net.params().size(); ++l) {
    const auto& p = net.params()[l];
    if (p.weight.empty()) {
      params.push_back(nullptr);
      continue;
    }
    const std::string w = net.layer_name(l) + ".weight.rtt";
    const std::string b = net.layer_name(l) + ".bias.rtt";
    write_rtt(dir / w, TensorBlock({p.weight.size()}, p.weight));
    write_rtt(dir / b, TensorBlock({p.bias.size()}, p.bias));
    params.push_back({{"weight", w}, {"bias", b}});
  }
  nlohmann::json doc{{"format", kModelFormat},
                     {"version", 1},
                     {"recipe", model.recipe},
                     {"spec", spec_to_json(net.spec())},
                     {"params", params}};
  detail::write_file(dir / "model.json", doc.dump(2) + "\n");
}

inline TrainedModel load_model(const std::filesystem::path& dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, (dir / "model.json").string() + ": invalid model manifest: " + e.what());
  }
  require(doc.value("format", "") == kModelFormat, Errc::bad_header, dir.string() + ": not a robusteval model");
  TrainedModel model{Network<float>(spec_from_json(doc.at("spec"))), doc.value("recipe", std::string("vanilla"))};
  const auto& params = doc.at("params");
  require(params.size() == model.network.params().size(), Errc::bad_header,
          dir.string() + ": parameter list does not match layer count");
  for (std::size_t l = 0; l < params.size(); ++l) {
    auto& p = model.network.params()[l];
    if (params[l].is_null()) {
      require(p.weight.empty(), Errc::bad_header, dir.string() + ": missing parameters for layer " + std::to_string(l));
      continue;
    }
    const auto w = load_tensor(dir / params[l].at("weight").get<std::string>());
    const auto b = load_tensor(dir / params[l].at("bias").get<std::string>());
    require(w.size() == p.weight.size() && b.size() == p.bias.size(), Errc::shape_mismatch,
            dir.string() + ": parameter size mismatch at layer " + std::to_string(l));
    p.weight = w.values();
    p.bias = b.values();
  }
  return model;
}

}  // namespace robusteval
