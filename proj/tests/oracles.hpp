#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "robusteval/robusteval.hpp"

namespace rt {

using namespace robusteval;

// ---------------------------------------------------------------------------
// Coverage: enumerate every section interval of every neuron.
// ---------------------------------------------------------------------------

struct CoverageOracle {
  double kmn = 0.0, nb = 0.0, sna = 0.0;
};

/// One layer whose values are drawn from a small grid, so section boundaries
/// are hit exactly.
inline ActivationTrace grid_trace(std::size_t samples, std::size_t neurons, std::size_t elements,
                                  const std::vector<float>& grid, std::mt19937_64& rng, const std::string& prefix) {
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  std::vector<std::string> ids;
  std::vector<float> v(samples * neurons * elements);
  for (float& x : v) x = grid[pick(rng)];
  for (std::size_t s = 0; s < samples; ++s) ids.push_back(prefix + std::to_string(s));
  return ActivationTrace({{"layer", neurons, elements}}, ids, {v});
}

inline CoverageOracle coverage_brute(const ActivationTrace& t, const NeuronProfile& p) {
  std::size_t covered = 0, upper = 0, lower = 0, idx = 0;
  const std::size_t k = p.k();
  for (std::size_t l = 0; l < t.layer_count(); ++l) {
    for (std::size_t n = 0; n < t.layers()[l].neurons; ++n, ++idx) {
      const auto b = p.bounds()[idx];
      const double d = (b.high - b.low) / static_cast<double>(k);
      for (std::size_t i = 0; i < k; ++i) {
        const double a = b.low + static_cast<double>(i) * d;
        const bool last = i + 1 == k;
        const double z = last ? b.high : b.low + static_cast<double>(i + 1) * d;
        bool hit = false;
        for (std::size_t s = 0; s < t.sample_count(); ++s) {
          const double v = t.neuron_value(l, s, n);
          hit = hit || (a <= v && (last ? v <= z : v < z));
        }
        covered += hit;
      }
      bool up = false, lo = false;
      for (std::size_t s = 0; s < t.sample_count(); ++s) {
        up = up || t.neuron_value(l, s, n) > b.high;
        lo = lo || t.neuron_value(l, s, n) < b.low;
      }
      upper += up;
      lower += lo;
    }
  }
  const double n = static_cast<double>(idx);
  return {static_cast<double>(covered) / (static_cast<double>(k) * n), static_cast<double>(upper + lower) / (2.0 * n),
          static_cast<double>(upper) / n};
}

// ---------------------------------------------------------------------------
// Central finite differences on a double-precision network.
// ---------------------------------------------------------------------------

struct GradCheck {
  std::size_t input_probes = 0;
  std::size_t param_probes = 0;
  std::size_t failures = 0;
  double worst_excess = 0.0;  // max of |a - n| - allowed
};

inline constexpr double kGradRelTol = 1e-4;
inline constexpr double kGradAbsTol = 1e-6;
inline constexpr double kGradStep = 1e-6;

/// Small networks, one per layer kind, each exercising that kind.
inline NetworkSpec gradcheck_spec(const std::string& kind, std::uint64_t seed) {
  if (kind == "dense") return {{6}, {DenseLayer{6, 5}, DenseLayer{5, 3}}, 3, seed};
  if (kind == "relu") return {{6}, {DenseLayer{6, 8}, ReluLayer{}, DenseLayer{8, 3}}, 3, seed};
  if (kind == "conv") return {{2, 5, 5}, {ConvLayer{3, 3}, FlattenLayer{}, DenseLayer{27, 3}}, 3, seed};
  if (kind == "flatten") return {{2, 3, 3}, {FlattenLayer{}, DenseLayer{18, 3}}, 3, seed};
  fail(Errc::invalid_argument, "unknown layer kind " + kind);
}

inline void gradcheck_record(GradCheck& r, double analytic, double numeric) {
  const double allowed = std::max(kGradAbsTol, kGradRelTol * std::max(std::abs(analytic), std::abs(numeric)));
  const double excess = std::abs(analytic - numeric) - allowed;
  r.worst_excess = std::max(r.worst_excess, excess);
  r.failures += excess > 0.0;
}

/// `probes` input-gradient and `probes` parameter-gradient checks at random
/// points, coordinates and labels.
inline GradCheck gradcheck(const std::string& kind, std::size_t probes, std::uint64_t seed) {
  Network<double> net(gradcheck_spec(kind, seed));
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& p : net.params()) {
    for (double& b : p.bias) b = 0.5 * u(rng);
  }
  std::vector<std::pair<std::size_t, std::size_t>> slots;  // (layer, flat index over weight then bias)
  for (std::size_t l = 0; l < net.params().size(); ++l) {
    const auto& p = net.params()[l];
    for (std::size_t j = 0; j < p.weight.size() + p.bias.size(); ++j) slots.emplace_back(l, j);
  }
  auto param = [&](std::size_t l, std::size_t j) -> double& {
    auto& p = net.params()[l];
    return j < p.weight.size() ? p.weight[j] : p.bias[j - p.weight.size()];
  };

  GradCheck r;
  const std::size_t dim = net.input_size();
  std::uniform_int_distribution<std::size_t> pick_in(0, dim - 1), pick_y(0, net.spec().classes - 1);
  for (std::size_t probe = 0; probe < probes; ++probe) {
    std::vector<double> x(dim);
    for (double& v : x) v = u(rng);
    const std::size_t y = pick_y(rng);
    const auto b = net.backward(x, y, true);
    auto loss_at = [&](const std::vector<double>& xs) { return net.backward(xs, y, false).loss; };

    const std::size_t i = pick_in(rng);
    auto xp = x, xm = x;
    xp[i] += kGradStep;
    xm[i] -= kGradStep;
    gradcheck_record(r, b.input_grad[i], (loss_at(xp) - loss_at(xm)) / (2.0 * kGradStep));
    ++r.input_probes;

    if (slots.empty()) continue;
    const auto [l, j] = slots[std::uniform_int_distribution<std::size_t>(0, slots.size() - 1)(rng)];
    const auto& pg = b.param_grads[l];
    const double analytic = j < pg.weight.size() ? pg.weight[j] : pg.bias[j - pg.weight.size()];
    const double saved = param(l, j);
    param(l, j) = saved + kGradStep;
    const double lp = loss_at(x);
    param(l, j) = saved - kGradStep;
    const double lm = loss_at(x);
    param(l, j) = saved;
    gradcheck_record(r, analytic, (lp - lm) / (2.0 * kGradStep));
    ++r.param_probes;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Projections onto norm balls.
// ---------------------------------------------------------------------------

/// Brute-force argmin ||y - v||_2 over ||y||_p <= eps. Outside the ball the
/// answer lies on the sphere ||y||_p = eps, reached by radially rescaling a unit
/// direction written in hyperspherical angles; the angles are grid-searched
/// with a window that zooms in around the best node.
inline std::vector<double> project_search(const std::vector<double>& v, Norm p, double eps) {
  const std::size_t d = v.size();
  if (lp_norm<double>(v, p) <= eps) return v;
  auto point = [&](const std::vector<double>& phi) {
    std::vector<double> u(d);
    double s = 1.0;
    for (std::size_t i = 0; i + 1 < d; ++i) {
      u[i] = s * std::cos(phi[i]);
      s *= std::sin(phi[i]);
    }
    u[d - 1] = s;
    const double n = lp_norm<double>(u, p);
    for (double& x : u) x *= eps / n;
    return u;
  };
  auto cost = [&](const std::vector<double>& y) {
    double c = 0.0;
    for (std::size_t i = 0; i < d; ++i) c += (y[i] - v[i]) * (y[i] - v[i]);
    return c;
  };
  if (d == 1) {
    const std::vector<double> a{eps}, b{-eps};
    return cost(a) <= cost(b) ? a : b;
  }
  const std::size_t k = d - 1, nodes = 11;
  const double pi = std::acos(-1.0);
  // One grid pass over the window centre +/- half; returns every node with its cost.
  auto sweep = [&](const std::vector<double>& centre, const std::vector<double>& half) {
    std::vector<std::pair<double, std::vector<double>>> out;
    std::vector<std::size_t> idx(k, 0);
    for (;;) {
      std::vector<double> phi(k);
      for (std::size_t j = 0; j < k; ++j) {
        phi[j] = centre[j] - half[j] + 2.0 * half[j] * static_cast<double>(idx[j]) / static_cast<double>(nodes - 1);
      }
      out.emplace_back(cost(point(phi)), phi);
      std::size_t j = 0;
      while (j < k && ++idx[j] == nodes) idx[j++] = 0;
      if (j == k) break;
    }
    return out;
  };
  std::vector<double> centre(k, pi / 2), half(k, pi / 2);
  centre[k - 1] = pi;
  half[k - 1] = pi;
  auto coarse = sweep(centre, half);
  std::sort(coarse.begin(), coarse.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  // Zoom in from several of the best coarse nodes; corners of the l1 sphere
  // can otherwise capture a single search.
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_phi;
  for (std::size_t start = 0; start < std::min<std::size_t>(8, coarse.size()); ++start) {
    std::vector<double> c = coarse[start].second, h = half;
    double c_cost = coarse[start].first;
    for (double& x : h) x *= 0.4;
    while (h[0] > 1e-9) {
      for (auto& [cc, phi] : sweep(c, h)) {
        if (cc < c_cost) {
          c_cost = cc;
          c = phi;
        }
      }
      for (double& x : h) x *= 0.4;
    }
    if (c_cost < best) {
      best = c_cost;
      best_phi = c;
    }
  }
  return point(best_phi);
}

/// Exact l1-ball projection by enumerating the faces: every support set S
/// (with the signs of v) and the closest point of the hyperplane face.
inline std::vector<double> project_l1_faces(const std::vector<double>& v, double eps) {
  const std::size_t d = v.size();
  if (lp_norm<double>(v, Norm::l1) <= eps) return v;
  std::vector<double> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 1; mask < (std::size_t{1} << d); ++mask) {
    double sum = 0.0, count = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      if (mask >> i & 1) {
        sum += std::abs(v[i]);
        count += 1.0;
      }
    }
    const double shift = (sum - eps) / count;
    std::vector<double> y(d, 0.0);
    bool feasible = true;
    for (std::size_t i = 0; i < d; ++i) {
      if (!(mask >> i & 1)) continue;
      const double mag = std::abs(v[i]) - shift;
      feasible = feasible && mag >= 0.0;
      y[i] = std::copysign(mag, v[i]);
    }
    if (!feasible) continue;
    double c = 0.0;
    for (std::size_t i = 0; i < d; ++i) c += (y[i] - v[i]) * (y[i] - v[i]);
    if (c < best_cost) {
      best_cost = c;
      best = y;
    }
  }
  return best;
}

inline constexpr double kBudgetSlack = 1e-5;

/// Pairs whose perturbation leaves the declared l_p ball (plus slack) or whose
/// perturbed tensor leaves the [0,1] box.
inline std::size_t budget_violations(const SamplePairSet& s, Norm p, double eps) {
  std::size_t bad = 0;
  for (const auto& pair : s.pairs()) {
    const double d = lp_distance<float>(pair.perturbed.data(), pair.clean.data(), p);
    bool ok = d <= eps + kBudgetSlack;
    for (float v : pair.perturbed.data()) ok = ok && v >= 0.0f && v <= 1.0f;
    bad += !ok;
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Linear boundary geometry.
// ---------------------------------------------------------------------------

/// For a single dense layer with two outputs: the decision score is
/// s(x) = w.x + b with w = W1 - W0, b = c1 - c0.
struct LinearBoundary {
  std::vector<double> w;
  double b = 0.0;

  explicit LinearBoundary(const Network<float>& net) {
    const auto& p = net.params().at(0);
    const std::size_t in = net.input_size();
    w.resize(in);
    for (std::size_t i = 0; i < in; ++i) w[i] = double(p.weight[in + i]) - double(p.weight[i]);
    b = double(p.bias[1]) - double(p.bias[0]);
  }

  double norm() const { return lp_norm<double>(w, Norm::l2); }

  /// |w.x + b| / (||w|| sqrt(dim)).
  double rms_margin(const TensorBlock& x) const {
    double s = b;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
    return std::abs(s) / (norm() * std::sqrt(static_cast<double>(w.size())));
  }

  std::vector<double> unit() const {
    std::vector<double> u = w;
    for (double& v : u) v /= norm();
    return u;
  }
};

}  // namespace rt
