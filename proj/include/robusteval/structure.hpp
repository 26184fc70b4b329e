#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "robusteval/align.hpp"
#include "robusteval/dataset.hpp"
#include "robusteval/error.hpp"
#include "robusteval/numeric.hpp"
#include "robusteval/oracle.hpp"
#include "robusteval/pairs.hpp"
#include "robusteval/perturb.hpp"
#include "robusteval/trace.hpp"

namespace robusteval {

// ---------------------------------------------------------------------------
// Empirical boundary distance
// ---------------------------------------------------------------------------

struct EbdConfig {
  std::size_t directions = 10;
  std::uint64_t seed = 0;
  double step = 0.01;      // l2 length of one marching increment
  double max_dist = 0.0;   // l2 marching budget; 0 selects sqrt(dim)

  double resolved_max_dist(std::size_t dim) const {
    return max_dist > 0.0 ? max_dist : std::sqrt(static_cast<double>(dim));
  }
};

struct BoundaryResult {
  double ebd = 0.0;
  std::vector<std::string> sample_ids;  // evaluated samples, input order
  std::vector<double> distances;        // d_i as RMS distance
  std::vector<bool> capped;             // every direction exhausted the budget
  std::size_t capped_count = 0;
  std::vector<std::string> skipped;     // misclassified when clean
  double step = 0.0;
  double max_dist = 0.0;
  std::size_t directions = 0;

  bool operator==(const BoundaryResult&) const = default;
};

/// m orthonormal directions from a seeded Gaussian draw and Gram-Schmidt.
inline std::vector<std::vector<double>> orthonormal_directions(std::size_t dim, std::size_t m, std::mt19937_64& rng) {
  require(m >= 1, Errc::invalid_argument, "direction count must be >= 1");
  require(m <= dim, Errc::invalid_argument,
          "direction count " + std::to_string(m) + " exceeds input dimension " + std::to_string(dim));
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> out;
  while (out.size() < m) {
    std::vector<double> v(dim);
    for (double& x : v) x = n(rng);
    for (const auto& u : out) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += v[i] * u[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * u[i];
    }
    const double len = lp_norm<double>(v, Norm::l2);
    if (len < 1e-9) continue;  // nearly dependent draw
    for (double& x : v) x /= len;
    out.push_back(std::move(v));
  }
  return out;
}

namespace detail {

// First marching multiple of `step` along +/-v that changes the prediction,
// or nullopt within the budget. Stops early once `best` cannot be beaten.
template <ModelOracle M>
std::optional<double> first_flip(const M& model, const TensorBlock& x, std::size_t y, std::span<const double> v,
                                 double step, double max_dist, double best) {
  std::optional<double> found;
  for (double sgn : {1.0, -1.0}) {
    for (std::size_t t = 1;; ++t) {
      const double dist = static_cast<double>(t) * step;
      if (dist > max_dist * (1.0 + 1e-12) || dist >= best) break;
      std::vector<float> moved(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) moved[i] = static_cast<float>(x[i] + sgn * dist * v[i]);
      if (predicted_class(model, TensorBlock(x.shape(), std::move(moved))) != y) {
        best = dist;
        found = dist;
        break;
      }
    }
  }
  return found;
}

}  // namespace detail

/// EBD with caller-supplied directions per sample (`directions(i)` returns the
/// unit vectors for sample i).
template <ModelOracle M, class DirFn>
BoundaryResult ebd_with(const M& model, const LabeledSet& set, double step, double max_dist, std::size_t m,
                        DirFn&& directions) {
  set.validate();
  require(step > 0.0 && std::isfinite(step), Errc::invalid_argument, "EBD step must be > 0");
  require(max_dist >= step, Errc::invalid_argument, "EBD max distance must be at least one step");
  const std::size_t n = set.size();
  std::vector<char> correct(n);
  std::vector<double> dist(n);
  std::vector<char> capped(n);
  for_each_sample(model, n, [&](std::size_t i) {
    const auto& x = set.inputs[i];
    correct[i] = predicted_class(model, x) == set.labels[i];
    if (!correct[i]) return;
    const double root = std::sqrt(static_cast<double>(x.size()));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : directions(i)) {
      require(v.size() == x.size(), Errc::shape_mismatch, "EBD direction length differs from input size");
      if (auto d = detail::first_flip(model, x, set.labels[i], v, step, max_dist, best)) best = *d;
    }
    capped[i] = !std::isfinite(best);
    dist[i] = (capped[i] ? max_dist : best) / root;
  });

  BoundaryResult r;
  r.step = step;
  r.max_dist = max_dist;
  r.directions = m;
  CompensatedSum sum;
  for (std::size_t i = 0; i < n; ++i) {
    if (!correct[i]) {
      r.skipped.push_back(set.ids[i]);
      continue;
    }
    r.sample_ids.push_back(set.ids[i]);
    r.distances.push_back(dist[i]);
    r.capped.push_back(capped[i] != 0);
    r.capped_count += capped[i] ? 1 : 0;
    sum.add(dist[i]);
  }
  require(!r.distances.empty(), Errc::empty_input, "no correctly classified samples for EBD");
  r.ebd = sum.value() / static_cast<double>(r.distances.size());
  return r;
}

template <ModelOracle M>
BoundaryResult ebd(const M& model, const LabeledSet& set, const EbdConfig& cfg = {}) {
  set.validate();
  require(!set.inputs.empty(), Errc::empty_input, "EBD needs at least one sample");
  const std::size_t dim = set.inputs.front().size();
  require(cfg.directions >= 1 && cfg.directions <= dim, Errc::invalid_argument,
          "direction count " + std::to_string(cfg.directions) + " must be in 1.." + std::to_string(dim));
  return ebd_with(model, set, cfg.step, cfg.resolved_max_dist(dim), cfg.directions, [&](std::size_t i) {
    auto rng = sample_rng(cfg.seed, i, 0x656264u);
    return orthonormal_directions(dim, cfg.directions, rng);
  });
}

// ---------------------------------------------------------------------------
// EBD-2: iterations of an unbounded sign-gradient attack
// ---------------------------------------------------------------------------

inline constexpr double kDefaultEbd2Alpha = 0.0005;
inline constexpr std::size_t kDefaultEbd2Cap = 2000;

struct Ebd2Result {
  std::map<std::size_t, double> per_class;  // mean steps by true class
  double mean_steps = 0.0;                  // mean of the per-class means
  std::vector<std::string> sample_ids;
  std::vector<std::size_t> steps;
  std::size_t capped_count = 0;
  std::vector<std::string> skipped;  // misclassified when clean
  double alpha = 0.0;
  std::size_t cap = 0;

  bool operator==(const Ebd2Result&) const = default;
};

/// Steps of x <- clip01(x + alpha * sign(grad)) until the prediction leaves y;
/// nullopt when it never does within `cap` steps.
template <ModelOracle M>
std::optional<std::size_t> ebd2_steps(const M& model, const TensorBlock& x, std::size_t y, double alpha,
                                      std::size_t cap) {
  const float a = static_cast<float>(alpha);
  TensorBlock cur = x;
  for (std::size_t s = 1; s <= cap; ++s) {
    const TensorBlock g = model.input_grad(cur, y);
    std::vector<float> next(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) next[i] = detail::clip01(cur[i] + a * detail::sign_of(g[i]));
    cur = TensorBlock(x.shape(), std::move(next));
    if (predicted_class(model, cur) != y) return s;
  }
  return std::nullopt;
}

template <ModelOracle M>
Ebd2Result ebd2(const M& model, const LabeledSet& set, double alpha = kDefaultEbd2Alpha,
                std::size_t cap = kDefaultEbd2Cap) {
  set.validate();
  require(std::isfinite(alpha) && alpha > 0.0, Errc::invalid_argument, "EBD-2 alpha must be > 0");
  require(cap >= 1, Errc::invalid_argument, "EBD-2 cap must be >= 1");
  const std::size_t n = set.size();
  std::vector<char> correct(n);
  std::vector<std::size_t> steps(n, 0);
  std::vector<char> capped(n);
  for_each_sample(model, n, [&](std::size_t i) {
    correct[i] = predicted_class(model, set.inputs[i]) == set.labels[i];
    if (!correct[i]) return;
    const auto s = ebd2_steps(model, set.inputs[i], set.labels[i], alpha, cap);
    capped[i] = !s.has_value();
    steps[i] = s.value_or(cap);
  });

  Ebd2Result r;
  r.alpha = alpha;
  r.cap = cap;
  std::map<std::size_t, CompensatedSum> sums;
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    if (!correct[i]) {
      r.skipped.push_back(set.ids[i]);
      continue;
    }
    r.sample_ids.push_back(set.ids[i]);
    r.steps.push_back(steps[i]);
    r.capped_count += capped[i] ? 1 : 0;
    sums[set.labels[i]].add(static_cast<double>(steps[i]));
    ++counts[set.labels[i]];
  }
  require(!r.steps.empty(), Errc::empty_input, "no correctly classified samples for EBD-2");
  CompensatedSum total;
  for (const auto& [c, s] : sums) {
    r.per_class[c] = s.value() / static_cast<double>(counts[c]);
    total.add(r.per_class[c]);
  }
  r.mean_steps = total.value() / static_cast<double>(r.per_class.size());
  return r;
}

// ---------------------------------------------------------------------------
// Empirical noise insensitivity
// ---------------------------------------------------------------------------

inline constexpr double kEniDistanceGuard = 1e-8;

struct EniResult {
  double eni = 0.0;
  std::size_t used = 0;
  std::vector<std::string> skipped;  // pairs closer than the division guard
  double epsilon = 0.0;
};

/// Mean |loss(x) - loss(mu)| / ||x - mu||_inf over every pair of the set.
template <ModelOracle M>
EniResult eni(const M& model, const SamplePairSet& pairs, double epsilon) {
  require(std::isfinite(epsilon) && epsilon > 0.0, Errc::invalid_argument, "ENI epsilon must be > 0");
  require(pairs.size() > 0, Errc::empty_input, "ENI needs at least one pair");
  const auto ordered = pairs.ordered();
  std::vector<double> ratio(ordered.size());
  std::vector<char> skip(ordered.size());
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    const auto& p = *ordered[k];
    const double d = lp_distance<float>(p.clean.data(), p.perturbed.data(), Norm::linf);
    require(d <= epsilon + kBudgetTolerance, Errc::budget_violation,
            "pair '" + p.sample_id + "' exceeds the l-inf budget " + number_text(epsilon));
    skip[k] = d < kEniDistanceGuard;
  }
  for_each_sample(model, ordered.size(), [&](std::size_t k) {
    if (skip[k]) return;
    const auto& p = *ordered[k];
    const double d = lp_distance<float>(p.clean.data(), p.perturbed.data(), Norm::linf);
    ratio[k] = std::abs(model.loss(p.clean, p.label) - model.loss(p.perturbed, p.label)) / d;
  });
  EniResult r;
  r.epsilon = epsilon;
  CompensatedSum sum;
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    if (skip[k]) {
      r.skipped.push_back(ordered[k]->sample_id);
      continue;
    }
    sum.add(ratio[k]);
    ++r.used;
  }
  require(r.used > 0, Errc::empty_input, "every ENI pair was skipped by the distance guard");
  r.eni = sum.value() / static_cast<double>(r.used);
  return r;
}

// ---------------------------------------------------------------------------
// Neuron sensitivity and uncertainty
// ---------------------------------------------------------------------------

struct LayerNeuronValues {
  std::string name;
  std::vector<double> per_neuron;
  double mean = 0.0;
  bool scalar_fallback = false;  // uncertainty only: variance taken across samples
};

struct NeuronMetric {
  std::vector<LayerNeuronValues> layers;
  double mean = 0.0;  // over all neurons of all layers
  std::size_t samples = 0;
};

namespace detail {

inline void finish_metric(NeuronMetric& out) {
  CompensatedSum all;
  std::size_t count = 0;
  for (auto& l : out.layers) {
    CompensatedSum s;
    for (double v : l.per_neuron) {
      s.add(v);
      all.add(v);
    }
    l.mean = l.per_neuron.empty() ? 0.0 : s.value() / static_cast<double>(l.per_neuron.size());
    count += l.per_neuron.size();
  }
  out.mean = count == 0 ? 0.0 : all.value() / static_cast<double>(count);
}

}  // namespace detail

/// Mean over aligned samples of the per-element l1 deviation between the clean
/// and perturbed outputs of each neuron.
inline NeuronMetric neuron_sensitivity(const ActivationTrace& clean, const ActivationTrace& adv) {
  require(clean.same_geometry(adv), Errc::geometry_mismatch, "sensitivity traces differ in layer geometry");
  const auto al = align(clean.sample_ids(), adv.sample_ids());
  NeuronMetric out;
  out.samples = al.ids.size();
  for (std::size_t l = 0; l < clean.layer_count(); ++l) {
    const auto& g = clean.layers()[l];
    LayerNeuronValues lv{g.name, std::vector<double>(g.neurons, 0.0)};
    parallel_for(g.neurons, [&](std::size_t n) {
      CompensatedSum s;
      for (std::size_t k = 0; k < al.ids.size(); ++k) {
        const auto a = clean.neuron_elements(l, al.positions[0][k], n);
        const auto b = adv.neuron_elements(l, al.positions[1][k], n);
        double d = 0.0;
        for (std::size_t e = 0; e < a.size(); ++e) d += std::abs(static_cast<double>(a[e]) - b[e]);
        s.add(d / static_cast<double>(a.size()));
      }
      lv.per_neuron[n] = s.value() / static_cast<double>(al.ids.size());
    });
    out.layers.push_back(std::move(lv));
  }
  detail::finish_metric(out);
  return out;
}

/// Multi-element neurons: mean over samples of the population variance of the
/// neuron's elements. Scalar neurons: population variance across samples.
inline NeuronMetric neuron_uncertainty(const ActivationTrace& trace) {
  require(!trace.empty(), Errc::empty_input, "neuron uncertainty needs at least one sample");
  NeuronMetric out;
  out.samples = trace.sample_count();
  const double ns = static_cast<double>(trace.sample_count());
  for (std::size_t l = 0; l < trace.layer_count(); ++l) {
    const auto& g = trace.layers()[l];
    LayerNeuronValues lv{g.name, std::vector<double>(g.neurons, 0.0), 0.0, g.elements_per_neuron == 1};
    parallel_for(g.neurons, [&](std::size_t n) {
      if (lv.scalar_fallback) {
        CompensatedSum mean;
        for (std::size_t s = 0; s < trace.sample_count(); ++s) mean.add(trace.neuron_value(l, s, n));
        const double mu = mean.value() / ns;
        CompensatedSum var;
        for (std::size_t s = 0; s < trace.sample_count(); ++s) {
          const double d = trace.neuron_value(l, s, n) - mu;
          var.add(d * d);
        }
        lv.per_neuron[n] = var.value() / ns;
        return;
      }
      CompensatedSum acc;
      for (std::size_t s = 0; s < trace.sample_count(); ++s) {
        const auto el = trace.neuron_elements(l, s, n);
        const double ne = static_cast<double>(el.size());
        double mu = 0.0;
        for (float v : el) mu += v;
        mu /= ne;
        double var = 0.0;
        for (float v : el) var += (v - mu) * (v - mu);
        acc.add(var / ne);
      }
      lv.per_neuron[n] = acc.value() / ns;
    });
    out.layers.push_back(std::move(lv));
  }
  detail::finish_metric(out);
  return out;
}

}  // namespace robusteval
