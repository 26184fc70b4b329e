#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "robusteval/error.hpp"
#include "robusteval/numeric.hpp"
#include "robusteval/profile.hpp"
#include "robusteval/trace.hpp"

namespace robusteval {

struct NeuronCoverage {
  std::vector<bool> sections;  // k entries
  bool upper = false;          // some value > high
  bool lower = false;          // some value < low
};

struct CoverageResult {
  double kmncov = 0.0;
  double nbcov = 0.0;
  double snacov = 0.0;
  std::size_t k = 0;
  std::size_t neurons = 0;
  std::size_t covered_sections = 0;
  std::size_t upper_corner = 0;  // |UpperCornerNeuron|, shared by NBCov and SNACov
  std::size_t lower_corner = 0;
  std::vector<NeuronCoverage> per_neuron;
};

/// Section of [low, high] holding v, or nullopt when v lies in a corner region.
/// Sections are [low + i*d, low + (i+1)*d) with d = (high - low) / k; the last
/// one is closed at high. A degenerate range (low == high) maps its single
/// point to the last section.
inline std::optional<std::size_t> section_index(double v, const NeuronBounds& b, std::size_t k) {
  if (v < b.low || v > b.high) return std::nullopt;
  if (v == b.high) return k - 1;
  const double width = (b.high - b.low) / static_cast<double>(k);
  auto boundary = [&](std::size_t i) { return b.low + static_cast<double>(i) * width; };
  std::size_t idx = static_cast<std::size_t>(std::min(std::floor((v - b.low) / width), double(k - 1)));
  // Settle rounding so that boundary(idx) <= v < boundary(idx + 1).
  while (idx > 0 && v < boundary(idx)) --idx;
  while (idx + 1 < k && v >= boundary(idx + 1)) ++idx;
  return idx;
}

inline CoverageResult coverage(const ActivationTrace& test, const NeuronProfile& profile) {
  require(profile.matches(test), Errc::geometry_mismatch, "test trace geometry does not match the neuron profile");
  require(!test.empty(), Errc::empty_input, "test trace has no samples");
  const std::size_t k = profile.k();

  std::vector<std::pair<std::size_t, std::size_t>> neuron_index;  // (layer, neuron)
  for (std::size_t l = 0; l < test.layer_count(); ++l) {
    for (std::size_t n = 0; n < test.layers()[l].neurons; ++n) neuron_index.emplace_back(l, n);
  }

  CoverageResult r;
  r.k = k;
  r.neurons = neuron_index.size();
  r.per_neuron.resize(r.neurons);
  parallel_for(r.neurons, [&](std::size_t i) {
    const auto [l, n] = neuron_index[i];
    const auto& b = profile.bounds()[i];
    NeuronCoverage nc;
    nc.sections.assign(k, false);
    for (std::size_t s = 0; s < test.sample_count(); ++s) {
      const double v = test.neuron_value(l, s, n);
      if (v > b.high) nc.upper = true;
      if (v < b.low) nc.lower = true;
      if (auto idx = section_index(v, b, k)) nc.sections[*idx] = true;
    }
    r.per_neuron[i] = std::move(nc);
  });

  for (const auto& nc : r.per_neuron) {
    for (bool c : nc.sections) r.covered_sections += c ? 1 : 0;
    r.upper_corner += nc.upper ? 1 : 0;
    r.lower_corner += nc.lower ? 1 : 0;
  }
  const double n = static_cast<double>(r.neurons);
  r.kmncov = static_cast<double>(r.covered_sections) / (static_cast<double>(k) * n);
  r.nbcov = static_cast<double>(r.upper_corner + r.lower_corner) / (2.0 * n);
  r.snacov = static_cast<double>(r.upper_corner) / n;
  return r;
}

inline double kmn_cov(const ActivationTrace& test, const NeuronProfile& profile) {
  return coverage(test, profile).kmncov;
}

inline double nb_cov(const ActivationTrace& test, const NeuronProfile& profile) {
  return coverage(test, profile).nbcov;
}

inline double sna_cov(const ActivationTrace& test, const NeuronProfile& profile) {
  return coverage(test, profile).snacov;
}

}  // namespace robusteval
