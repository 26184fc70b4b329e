#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "robusteval/dataset.hpp"
#include "robusteval/error.hpp"
#include "robusteval/numeric.hpp"
#include "robusteval/oracle.hpp"
#include "robusteval/pairs.hpp"
#include "robusteval/records.hpp"
#include "robusteval/tensor.hpp"

namespace robusteval {

inline constexpr double kBudgetTolerance = 1e-5;

enum class AttackMethod { fgsm, pgd, bim };

inline std::string to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::fgsm: return "fgsm";
    case AttackMethod::pgd: return "pgd";
    case AttackMethod::bim: return "bim";
  }
  return "?";
}

inline AttackMethod parse_attack_method(const std::string& s) {
  if (s == "fgsm") return AttackMethod::fgsm;
  if (s == "pgd") return AttackMethod::pgd;
  if (s == "bim") return AttackMethod::bim;
  fail(Errc::invalid_argument, "unknown attack method '" + s + "' (expected fgsm, pgd or bim)");
}

struct AttackConfig {
  AttackMethod method = AttackMethod::pgd;
  Norm norm = Norm::linf;
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  std::size_t iterations = 10;
  bool random_start = true;
  std::uint64_t seed = 0;
  // Fraction of coordinates (by |gradient|) moved per l1 step.
  double l1_sparsity = 0.01;

  void validate() const {
    require(std::isfinite(epsilon) && epsilon > 0.0, Errc::invalid_argument, "attack epsilon must be > 0");
    require(std::isfinite(alpha) && alpha > 0.0, Errc::invalid_argument, "attack step size must be > 0");
    require(iterations >= 1, Errc::invalid_argument, "attack iterations must be >= 1");
    require(l1_sparsity > 0.0 && l1_sparsity <= 1.0, Errc::invalid_argument, "l1 sparsity must be in (0, 1]");
    if (norm == Norm::linf) {
      require(alpha <= epsilon, Errc::invalid_argument, "l-inf step size must not exceed epsilon");
    }
    if (method == AttackMethod::fgsm) {
      require(norm == Norm::linf, Errc::invalid_argument, "fgsm is an l-inf attack");
    }
    if (method == AttackMethod::bim) {
      require(norm == Norm::linf && !random_start, Errc::invalid_argument,
              "bim requires the l-inf norm and no random start");
    }
  }

  /// Condition-tag fragment "<method>:<norm>:<epsilon>".
  std::string tag() const { return to_string(method) + ":" + to_string(norm) + ":" + number_text(epsilon); }
};

// ---------------------------------------------------------------------------
// Projections onto the epsilon-ball centred at zero.
// ---------------------------------------------------------------------------

inline void project_linf(std::vector<double>& delta, double eps) {
  for (double& d : delta) d = std::clamp(d, -eps, eps);
}

inline void project_l2(std::vector<double>& delta, double eps) {
  const double n = lp_norm<double>(delta, Norm::l2);
  if (n > eps) {
    const double s = eps / n;
    for (double& d : delta) d *= s;
  }
}

/// Euclidean projection onto the l1 ball via the sorted-threshold rule.
inline void project_l1(std::vector<double>& delta, double eps) {
  if (lp_norm<double>(delta, Norm::l1) <= eps) return;
  std::vector<double> u(delta.size());
  std::transform(delta.begin(), delta.end(), u.begin(), [](double d) { return std::abs(d); });
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - eps) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  for (double& d : delta) d = std::copysign(std::max(std::abs(d) - theta, 0.0), d);
}

inline void project(std::vector<double>& delta, Norm p, double eps) {
  switch (p) {
    case Norm::l1: project_l1(delta, eps); break;
    case Norm::l2: project_l2(delta, eps); break;
    case Norm::linf: project_linf(delta, eps); break;
  }
}

namespace detail {

inline float clip01(float v) { return std::clamp(v, 0.0f, 1.0f); }

inline float sign_of(double g) { return g > 0.0 ? 1.0f : (g < 0.0 ? -1.0f : 0.0f); }

// x + delta clipped to [0,1] in f32, with delta shrunk until the f32 result
// honours the budget (rounding can push a projected delta over it).
inline TensorBlock apply_delta(const TensorBlock& x, std::vector<double> delta, Norm p, double eps) {
  std::vector<float> out(x.size());
  for (int attempt = 0; attempt < 16; ++attempt) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = clip01(static_cast<float>(static_cast<double>(x[i]) + delta[i]));
    }
    const double d = lp_distance<float>(out, x.data(), p);
    if (d <= eps) break;
    const double s = (eps / d) * (1.0 - 1e-7);
    for (double& v : delta) v *= s;
  }
  return TensorBlock(x.shape(), std::move(out));
}

inline std::vector<double> random_ball_point(std::size_t dim, Norm p, double eps, std::mt19937_64& rng) {
  std::vector<double> d(dim);
  switch (p) {
    case Norm::linf: {
      std::uniform_real_distribution<double> u(-eps, eps);
      for (double& v : d) v = u(rng);
      break;
    }
    case Norm::l2: {
      std::normal_distribution<double> n(0.0, 1.0);
      for (double& v : d) v = n(rng);
      const double len = lp_norm<double>(d, Norm::l2);
      const double r = eps * std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(rng), 1.0 / double(dim));
      for (double& v : d) v = len > 0.0 ? v * r / len : 0.0;
      break;
    }
    case Norm::l1: {
      // d exponentials normalised by the sum of d+1 are uniform in the simplex.
      std::exponential_distribution<double> e(1.0);
      std::bernoulli_distribution coin(0.5);
      double total = 0.0;
      for (double& v : d) total += (v = e(rng));
      total += e(rng);
      for (double& v : d) v = eps * (coin(rng) ? v : -v) / total;
      break;
    }
  }
  return d;
}

}  // namespace detail

inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

/// x_adv = clip01(x + eps * sign(grad)).
template <ModelOracle M>
TensorBlock fgsm(const M& model, const TensorBlock& x, std::size_t y, double epsilon) {
  const TensorBlock g = model.input_grad(x, y);
  require(g.shape() == x.shape(), Errc::shape_mismatch, "gradient shape differs from input shape");
  const float e = static_cast<float>(epsilon);
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = detail::clip01(x[i] + e * detail::sign_of(g[i]));
  return TensorBlock(x.shape(), std::move(out));
}

/// Iterated projected gradient ascent on the loss. `sample_index` decorrelates
/// random starts across samples sharing one seed.
template <ModelOracle M>
TensorBlock pgd(const M& model, const TensorBlock& x, std::size_t y, const AttackConfig& cfg,
                std::uint64_t sample_index = 0) {
  cfg.validate();
  if (cfg.method == AttackMethod::fgsm) return fgsm(model, x, y, cfg.epsilon);
  const std::size_t dim = x.size();
  TensorBlock cur = x;
  if (cfg.random_start) {
    auto rng = sample_rng(cfg.seed, sample_index);
    cur = detail::apply_delta(x, detail::random_ball_point(dim, cfg.norm, cfg.epsilon, rng), cfg.norm, cfg.epsilon);
  }

  if (cfg.norm == Norm::linf) {
    const float a = static_cast<float>(cfg.alpha);
    const float e = static_cast<float>(cfg.epsilon);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      const TensorBlock g = model.input_grad(cur, y);
      std::vector<float> next(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        const float stepped = cur[i] + a * detail::sign_of(g[i]);
        next[i] = detail::clip01(std::clamp(stepped, x[i] - e, x[i] + e));
      }
      cur = TensorBlock(x.shape(), std::move(next));
    }
    return cur;
  }

  std::vector<double> delta(dim);
  for (std::size_t i = 0; i < dim; ++i) delta[i] = static_cast<double>(cur[i]) - static_cast<double>(x[i]);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const TensorBlock g = model.input_grad(cur, y);
    if (cfg.norm == Norm::l2) {
      const double n = lp_norm<float>(g.data(), Norm::l2);
      if (n > 0.0) {
        for (std::size_t i = 0; i < dim; ++i) delta[i] += cfg.alpha * g[i] / n;
      }
    } else {
      // Steepest l1 ascent restricted to the top fraction of |gradient|.
      const std::size_t q = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(cfg.l1_sparsity * static_cast<double>(dim))));
      std::vector<std::size_t> order(dim);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return std::abs(g[a]) > std::abs(g[b]); });
      for (std::size_t k = 0; k < q; ++k) {
        const std::size_t i = order[k];
        delta[i] += cfg.alpha * detail::sign_of(g[i]) / static_cast<double>(q);
      }
    }
    project(delta, cfg.norm, cfg.epsilon);
    cur = detail::apply_delta(x, delta, cfg.norm, cfg.epsilon);
    for (std::size_t i = 0; i < dim; ++i) delta[i] = static_cast<double>(cur[i]) - static_cast<double>(x[i]);
  }
  return cur;
}

template <ModelOracle M>
TensorBlock attack(const M& model, const TensorBlock& x, std::size_t y, const AttackConfig& cfg,
                   std::uint64_t sample_index = 0) {
  cfg.validate();
  if (cfg.method == AttackMethod::fgsm) return fgsm(model, x, y, cfg.epsilon);
  return pgd(model, x, y, cfg, sample_index);
}

template <ModelOracle M, class Fn>
void for_each_sample(const M&, std::size_t n, Fn&& fn) {
  if constexpr (is_reentrant<M>()) {
    parallel_for(n, fn);
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
}

/// Attacks every sample of `set` and flags pairs that are correct when clean
/// and misclassified when perturbed by `model`.
template <ModelOracle M>
SamplePairSet generate_pairs(const M& model, const LabeledSet& set, const AttackConfig& cfg,
                             const std::string& model_name = "f") {
  set.validate();
  cfg.validate();
  std::vector<SamplePair> pairs(set.size());
  for_each_sample(model, set.size(), [&](std::size_t i) {
    TensorBlock adv = attack(model, set.inputs[i], set.labels[i], cfg, i);
    const bool clean_ok = predicted_class(model, set.inputs[i]) == set.labels[i];
    const bool adv_ok = predicted_class(model, adv) == set.labels[i];
    pairs[i] = {set.ids[i], set.labels[i], set.inputs[i], std::move(adv), clean_ok && !adv_ok};
  });
  PerturbationMeta meta{to_string(cfg.method), cfg.norm, cfg.epsilon, model_name};
  return SamplePairSet(std::move(meta), std::move(pairs));
}

/// Re-flags success of an existing pair set against another model (for
/// transferred, black-box style sets).
template <ModelOracle M>
SamplePairSet reflag_pairs(const M& model, const SamplePairSet& set, const std::string& model_name) {
  auto pairs = set.pairs();
  for (auto& p : pairs) {
    p.success = predicted_class(model, p.clean) == p.label && predicted_class(model, p.perturbed) != p.label;
  }
  auto meta = set.meta();
  meta.model = model_name;
  return SamplePairSet(std::move(meta), std::move(pairs));
}

template <ModelOracle M>
std::vector<PredictionRecord> predict_records(const M& model, std::span<const std::string> ids,
                                              std::span<const TensorBlock> inputs, std::span<const std::size_t> labels,
                                              const std::string& condition, const std::string& model_name) {
  require(ids.size() == inputs.size() && labels.size() == inputs.size(), Errc::shape_mismatch,
          "predict_records inputs disagree in length");
  std::vector<PredictionRecord> out(inputs.size());
  for_each_sample(model, inputs.size(), [&](std::size_t i) {
    out[i] = {ids[i], labels[i], model.predict(inputs[i]), condition, model_name};
  });
  return out;
}

template <ModelOracle M>
std::vector<PredictionRecord> predict_records(const M& model, const LabeledSet& set, const std::string& condition,
                                              const std::string& model_name) {
  return predict_records(model, set.ids, set.inputs, set.labels, condition, model_name);
}

template <ModelOracle M>
std::vector<PredictionRecord> predict_records(const M& model, const SamplePairSet& pairs,
                                              const std::string& condition, const std::string& model_name) {
  std::vector<std::string> ids;
  std::vector<TensorBlock> xs;
  std::vector<std::size_t> ys;
  for (const auto& p : pairs.pairs()) {
    ids.push_back(p.sample_id);
    xs.push_back(p.perturbed);
    ys.push_back(p.label);
  }
  return predict_records(model, ids, xs, ys, condition, model_name);
}

}  // namespace robusteval
