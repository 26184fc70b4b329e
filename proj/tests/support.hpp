#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "robusteval/robusteval.hpp"

namespace rt {

using namespace robusteval;

/// Two-class logistic model written out by hand: s = w.x + b, P(1) = sigmoid(s).
struct LinearOracle {
  static constexpr bool reentrant = true;
  std::vector<double> w;
  double b = 0.0;

  double score(const TensorBlock& x) const {
    double s = b;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
    return s;
  }
  std::vector<double> predict(const TensorBlock& x) const {
    const double p1 = 1.0 / (1.0 + std::exp(-score(x)));
    return {1.0 - p1, p1};
  }
  double loss(const TensorBlock& x, std::size_t y) const {
    const double s = score(x);
    // -log sigmoid(+-s), written stably
    const double t = y == 1 ? s : -s;
    return t > 0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
  }
  TensorBlock input_grad(const TensorBlock& x, std::size_t y) const {
    const double p1 = predict(x)[1];
    std::vector<float> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) g[i] = static_cast<float>((p1 - (y == 1 ? 1.0 : 0.0)) * w[i]);
    return TensorBlock(x.shape(), std::move(g));
  }
};

/// Ignores its input entirely.
struct ConstantOracle {
  std::vector<double> probs{0.7, 0.3};
  std::vector<double> predict(const TensorBlock&) const { return probs; }
  double loss(const TensorBlock&, std::size_t y) const { return -std::log(probs[y]); }
  TensorBlock input_grad(const TensorBlock& x, std::size_t) const { return TensorBlock(x.shape()); }
};

/// Error code thrown by f; records a test failure when nothing is thrown.
inline Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::invalid_argument;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("robusteval-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline TensorBlock random_block(const Shape& shape, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<float> v(element_count(shape));
  for (float& x : v) x = static_cast<float>(u(rng));
  return TensorBlock(shape, std::move(v));
}

inline std::vector<double> random_probs(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> p(k);
  double s = 0.0;
  for (double& v : p) s += (v = u(rng));
  for (double& v : p) v /= s;
  return p;
}

inline PredictionRecord record(const std::string& id, std::size_t y, std::vector<double> probs,
                               const std::string& condition = "clean", const std::string& model = "f") {
  return PredictionRecord{id, y, std::move(probs), condition, model};
}

/// Trace with one layer of scalar neurons; values[s][n].
inline ActivationTrace scalar_trace(const std::vector<std::vector<float>>& values, const std::string& prefix = "s") {
  const std::size_t n = values.empty() ? 0 : values.front().size();
  std::vector<std::string> ids;
  std::vector<float> flat;
  for (std::size_t s = 0; s < values.size(); ++s) {
    ids.push_back(prefix + std::to_string(s));
    flat.insert(flat.end(), values[s].begin(), values[s].end());
  }
  return ActivationTrace({{"layer", n, 1}}, ids, {flat});
}

inline SamplePairSet make_pairs(const std::vector<std::pair<std::vector<float>, std::vector<float>>>& xs,
                                std::optional<Norm> norm = std::nullopt, std::optional<double> eps = std::nullopt) {
  std::vector<SamplePair> pairs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Shape s{xs[i].first.size()};
    pairs.push_back({"p" + std::to_string(i), 0, TensorBlock(s, xs[i].first), TensorBlock(s, xs[i].second), true});
  }
  return SamplePairSet(PerturbationMeta{"test", norm, eps, "f"}, std::move(pairs));
}

inline SamplePair shaped_pair(const std::string& id, const Shape& shape, std::vector<float> clean,
                              std::vector<float> perturbed, bool success = true) {
  return {id, 0, TensorBlock(shape, std::move(clean)), TensorBlock(shape, std::move(perturbed)), success};
}

}  // namespace rt
