#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "robusteval/error.hpp"
#include "robusteval/imperceptibility.hpp"
#include "robusteval/perturb.hpp"
#include "robusteval/tensor.hpp"

namespace robusteval {

enum class CorruptionKind { gaussian_noise, uniform_noise, blur, contrast, brightness };

inline constexpr std::array<CorruptionKind, 5> kAllCorruptions{
    CorruptionKind::gaussian_noise, CorruptionKind::uniform_noise, CorruptionKind::blur, CorruptionKind::contrast,
    CorruptionKind::brightness};

inline constexpr int kSeverityLevels = 5;

inline std::string to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::gaussian_noise: return "gaussian-noise";
    case CorruptionKind::uniform_noise: return "uniform-noise";
    case CorruptionKind::blur: return "blur";
    case CorruptionKind::contrast: return "contrast";
    case CorruptionKind::brightness: return "brightness";
  }
  return "?";
}

inline CorruptionKind parse_corruption(const std::string& s) {
  for (auto k : kAllCorruptions) {
    if (to_string(k) == s) return k;
  }
  fail(Errc::invalid_argument, "unknown corruption kind '" + s + "'");
}

// Severity ladders, index = severity - 1.
//   gaussian-noise: noise std
//   uniform-noise:  noise half-width
//   blur:           box-blur radius in pixels
//   contrast:       factor applied to deviations from the channel mean
//   brightness:     additive shift
inline constexpr std::array<double, 5> kGaussianSigma{0.02, 0.04, 0.08, 0.12, 0.18};
inline constexpr std::array<double, 5> kUniformHalfWidth{0.03, 0.06, 0.12, 0.18, 0.27};
inline constexpr std::array<double, 5> kBlurRadius{1, 2, 3, 4, 5};
inline constexpr std::array<double, 5> kContrastFactor{0.8, 0.65, 0.5, 0.35, 0.2};
inline constexpr std::array<double, 5> kBrightnessShift{0.05, 0.1, 0.15, 0.2, 0.3};

inline double severity_parameter(CorruptionKind k, int severity) {
  require(severity >= 1 && severity <= kSeverityLevels, Errc::invalid_argument,
          "severity must be in 1..5, got " + std::to_string(severity));
  const auto i = static_cast<std::size_t>(severity - 1);
  switch (k) {
    case CorruptionKind::gaussian_noise: return kGaussianSigma[i];
    case CorruptionKind::uniform_noise: return kUniformHalfWidth[i];
    case CorruptionKind::blur: return kBlurRadius[i];
    case CorruptionKind::contrast: return kContrastFactor[i];
    case CorruptionKind::brightness: return kBrightnessShift[i];
  }
  return 0.0;
}

struct CorruptionConfig {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  int severity = 1;
  std::uint64_t seed = 0;
};

/// Per-channel mean filter over a (2r+1)^2 window clipped at the border.
/// radius 0 is the identity.
inline TensorBlock box_blur(const TensorBlock& x, std::size_t radius) {
  if (radius == 0) return x;
  const auto g = ImageGeometry::of(x.shape());
  const auto r = static_cast<std::ptrdiff_t>(radius);
  const auto H = static_cast<std::ptrdiff_t>(g.height), W = static_cast<std::ptrdiff_t>(g.width);
  std::vector<float> out(x.size());
  for (std::size_t c = 0; c < g.channels; ++c) {
    const auto src = x.data().subspan(c * g.plane(), g.plane());
    for (std::ptrdiff_t i = 0; i < H; ++i) {
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        double sum = 0.0, cnt = 0.0;
        for (auto u = std::max<std::ptrdiff_t>(0, i - r); u <= std::min(H - 1, i + r); ++u) {
          for (auto v = std::max<std::ptrdiff_t>(0, j - r); v <= std::min(W - 1, j + r); ++v) {
            sum += src[static_cast<std::size_t>(u * W + v)];
            cnt += 1.0;
          }
        }
        out[c * g.plane() + static_cast<std::size_t>(i * W + j)] = static_cast<float>(sum / cnt);
      }
    }
  }
  return TensorBlock(x.shape(), std::move(out));
}

/// One corrupted copy of x. `sample_index` and `frame` select independent
/// noise streams under the same seed.
inline TensorBlock corrupt(const TensorBlock& x, const CorruptionConfig& cfg, std::uint64_t sample_index = 0,
                           std::uint64_t frame = 0) {
  const double param = severity_parameter(cfg.kind, cfg.severity);
  std::vector<float> out(x.values());
  switch (cfg.kind) {
    case CorruptionKind::gaussian_noise: {
      auto rng = sample_rng(cfg.seed, sample_index, frame + 1);
      std::normal_distribution<double> n(0.0, param);
      for (float& v : out) v = static_cast<float>(v + n(rng));
      break;
    }
    case CorruptionKind::uniform_noise: {
      auto rng = sample_rng(cfg.seed, sample_index, frame + 1);
      std::uniform_real_distribution<double> u(-param, param);
      for (float& v : out) v = static_cast<float>(v + u(rng));
      break;
    }
    case CorruptionKind::blur: {
      out = box_blur(x, static_cast<std::size_t>(param)).values();
      break;
    }
    case CorruptionKind::contrast: {
      const auto g = ImageGeometry::of(x.shape());
      for (std::size_t c = 0; c < g.channels; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < g.plane(); ++i) mean += x[c * g.plane() + i];
        mean /= static_cast<double>(g.plane());
        for (std::size_t i = 0; i < g.plane(); ++i) {
          float& v = out[c * g.plane() + i];
          v = static_cast<float>(mean + (v - mean) * param);
        }
      }
      break;
    }
    case CorruptionKind::brightness: {
      for (float& v : out) v = static_cast<float>(v + param);
      break;
    }
  }
  for (float& v : out) v = std::clamp(v, 0.0f, 1.0f);
  return TensorBlock(x.shape(), std::move(out));
}

/// Frames 1..n of a noise sequence: frame j re-seeds the noise stream with j.
inline std::vector<TensorBlock> corrupt_sequence(const TensorBlock& x, const CorruptionConfig& cfg, std::size_t frames,
                                                 std::uint64_t sample_index = 0) {
  require(frames >= 2, Errc::invalid_argument, "a frame sequence needs at least 2 frames");
  std::vector<TensorBlock> out;
  out.reserve(frames);
  for (std::size_t j = 0; j < frames; ++j) out.push_back(corrupt(x, cfg, sample_index, j));
  return out;
}

/// Corrupted copy of every sample; success flags as for adversarial pairs.
template <ModelOracle M>
SamplePairSet corrupt_pairs(const M& model, const LabeledSet& set, const CorruptionConfig& cfg,
                            const std::string& model_name = "f") {
  set.validate();
  std::vector<SamplePair> pairs(set.size());
  for_each_sample(model, set.size(), [&](std::size_t i) {
    TensorBlock xc = corrupt(set.inputs[i], cfg, i);
    const bool clean_ok = predicted_class(model, set.inputs[i]) == set.labels[i];
    const bool c_ok = predicted_class(model, xc) == set.labels[i];
    pairs[i] = {set.ids[i], set.labels[i], set.inputs[i], std::move(xc), clean_ok && !c_ok};
  });
  PerturbationMeta meta{to_string(cfg.kind) + ":" + std::to_string(cfg.severity), std::nullopt, std::nullopt,
                        model_name};
  return SamplePairSet(std::move(meta), std::move(pairs));
}

}  // namespace robusteval
