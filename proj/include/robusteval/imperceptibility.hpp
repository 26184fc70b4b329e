#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "robusteval/error.hpp"
#include "robusteval/numeric.hpp"
#include "robusteval/pairs.hpp"
#include "robusteval/tensor.hpp"

namespace robusteval {

inline constexpr double kSsimC1 = 0.01;
inline constexpr double kSsimC2 = 0.03;
inline constexpr double kPsdStdFloor = 1e-6;
inline constexpr std::size_t kDefaultPsdWindow = 3;

/// Channel/height/width reading of a sample tensor: [C,H,W], [H,W] or [W].
struct ImageGeometry {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  static ImageGeometry of(const Shape& s) {
    switch (s.size()) {
      case 0: return {1, 1, 1};
      case 1: return {1, 1, s[0]};
      case 2: return {1, s[0], s[1]};
      case 3: return {s[0], s[1], s[2]};
      default: fail(Errc::shape_mismatch, "image metrics accept rank <= 3 tensors, got " + shape_string(s));
    }
  }

  std::size_t plane() const noexcept { return height * width; }
};

struct ImperceptibilityResult {
  std::map<Norm, double> ald;
  double ass = 0.0;
  double psd = 0.0;
  std::size_t m = 0;
};

namespace detail {

inline std::vector<const SamplePair*> successful_or_throw(const SamplePairSet& pairs) {
  auto ok = pairs.successful();
  require(!ok.empty(), Errc::no_successful_samples, "no successful adversarial examples (m = 0)");
  return ok;
}

}  // namespace detail

/// Average normalized l_p distortion over successful pairs.
inline double ald_p(const SamplePairSet& pairs, Norm p) {
  CompensatedSum sum;
  const auto ok = detail::successful_or_throw(pairs);
  for (const auto* pair : ok) {
    const double base = lp_norm<float>(pair->clean.data(), p);
    require(base > 0.0, Errc::invalid_argument, "sample '" + pair->sample_id + "' has a zero-norm clean tensor");
    sum.add(lp_distance<float>(pair->perturbed.data(), pair->clean.data(), p) / base);
  }
  return sum.value() / static_cast<double>(ok.size());
}

/// Global-statistics SSIM; multi-channel inputs average the per-channel values.
inline double ssim(const TensorBlock& x, const TensorBlock& y) {
  require(x.shape() == y.shape(), Errc::shape_mismatch,
          "ssim shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(y.shape()));
  const auto g = ImageGeometry::of(x.shape());
  const double n = static_cast<double>(g.plane());
  CompensatedSum total;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const auto xs = x.data().subspan(c * g.plane(), g.plane());
    const auto ys = y.data().subspan(c * g.plane(), g.plane());
    CompensatedSum sx, sy;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx.add(xs[i]);
      sy.add(ys[i]);
    }
    const double mx = sx.value() / n;
    const double my = sy.value() / n;
    CompensatedSum vx, vy, cxy;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double dx = xs[i] - mx;
      const double dy = ys[i] - my;
      vx.add(dx * dx);
      vy.add(dy * dy);
      cxy.add(dx * dy);
    }
    const double var_x = vx.value() / n;
    const double var_y = vy.value() / n;
    const double cov = cxy.value() / n;
    total.add(((2.0 * mx * my + kSsimC1) * (2.0 * cov + kSsimC2)) /
              ((mx * mx + my * my + kSsimC1) * (var_x + var_y + kSsimC2)));
  }
  return total.value() / static_cast<double>(g.channels);
}

/// Mean SSIM(x_adv, x) over successful pairs.
inline double ass(const SamplePairSet& pairs) {
  CompensatedSum sum;
  const auto ok = detail::successful_or_throw(pairs);
  for (const auto* pair : ok) sum.add(ssim(pair->perturbed, pair->clean));
  return sum.value() / static_cast<double>(ok.size());
}

/// Sum over pixels of |delta| / std(window around the pixel in the clean
/// image). Windows are clipped at the image border; std is the population std,
/// floored at kPsdStdFloor.
inline double psd_single(const TensorBlock& clean, const TensorBlock& perturbed,
                         std::size_t window = kDefaultPsdWindow) {
  require(window % 2 == 1, Errc::invalid_argument, "PSD window side must be odd");
  require(clean.shape() == perturbed.shape(), Errc::shape_mismatch, "PSD shape mismatch");
  const auto g = ImageGeometry::of(clean.shape());
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(window / 2);
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  CompensatedSum total;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const auto xs = clean.data().subspan(c * g.plane(), g.plane());
    const auto ps = perturbed.data().subspan(c * g.plane(), g.plane());
    for (std::ptrdiff_t i = 0; i < H; ++i) {
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        const std::size_t at = static_cast<std::size_t>(i * W + j);
        const double delta = std::abs(static_cast<double>(ps[at]) - static_cast<double>(xs[at]));
        if (delta == 0.0) continue;
        const std::ptrdiff_t u0 = std::max<std::ptrdiff_t>(0, i - r), u1 = std::min(H - 1, i + r);
        const std::ptrdiff_t v0 = std::max<std::ptrdiff_t>(0, j - r), v1 = std::min(W - 1, j + r);
        auto at_uv = [&](std::ptrdiff_t u, std::ptrdiff_t v) {
          return static_cast<double>(xs[static_cast<std::size_t>(u * W + v)]);
        };
        double sum = 0.0;
        for (auto u = u0; u <= u1; ++u) {
          for (auto v = v0; v <= v1; ++v) sum += at_uv(u, v);
        }
        const double cnt = static_cast<double>((u1 - u0 + 1) * (v1 - v0 + 1));
        const double mean = sum / cnt;
        double sq = 0.0;
        for (auto u = u0; u <= u1; ++u) {
          for (auto v = v0; v <= v1; ++v) sq += (at_uv(u, v) - mean) * (at_uv(u, v) - mean);
        }
        total.add(delta / std::max(std::sqrt(sq / cnt), kPsdStdFloor));
      }
    }
  }
  return total.value();
}

inline double psd(const SamplePairSet& pairs, std::size_t window = kDefaultPsdWindow) {
  require(window % 2 == 1, Errc::invalid_argument, "PSD window side must be odd");
  CompensatedSum sum;
  const auto ok = detail::successful_or_throw(pairs);
  for (const auto* pair : ok) sum.add(psd_single(pair->clean, pair->perturbed, window));
  return sum.value() / static_cast<double>(ok.size());
}

inline ImperceptibilityResult imperceptibility(const SamplePairSet& pairs, std::size_t window = kDefaultPsdWindow) {
  ImperceptibilityResult r;
  r.m = detail::successful_or_throw(pairs).size();
  for (Norm p : {Norm::l1, Norm::l2, Norm::linf}) r.ald[p] = ald_p(pairs, p);
  r.ass = ass(pairs);
  r.psd = psd(pairs, window);
  return r;
}

}  // namespace robusteval
