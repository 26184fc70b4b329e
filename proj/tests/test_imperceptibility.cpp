#include <gtest/gtest.h>

#include "support.hpp"

using namespace robusteval;

namespace {

SamplePairSet single(const Shape& shape, std::vector<float> clean, std::vector<float> adv) {
  std::vector<SamplePair> v{rt::shaped_pair("a", shape, std::move(clean), std::move(adv))};
  return SamplePairSet({"test", std::nullopt, std::nullopt, "f"}, std::move(v));
}

// Scans the whole image for window members instead of clipping index ranges.
double psd_oracle(const std::vector<float>& x, const std::vector<float>& y, int H, int W, int window) {
  const int r = window / 2;
  double total = 0.0;
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      const double d = std::abs(double(y[i * W + j]) - double(x[i * W + j]));
      if (d == 0.0) continue;
      double s = 0.0, s2 = 0.0, n = 0.0;
      for (int u = 0; u < H; ++u) {
        for (int v = 0; v < W; ++v) {
          if (std::abs(u - i) > r || std::abs(v - j) > r) continue;
          s += x[u * W + v];
          s2 += double(x[u * W + v]) * x[u * W + v];
          n += 1.0;
        }
      }
      const double var = std::max(0.0, s2 / n - (s / n) * (s / n));
      total += d / std::max(std::sqrt(var), 1e-6);
    }
  }
  return total;
}

}  // namespace

TEST(Ald, Examples) {
  EXPECT_EQ(ald_p(rt::make_pairs({{{3, 4}, {3, 4}}}), Norm::l2), 0.0);
  EXPECT_DOUBLE_EQ(ald_p(rt::make_pairs({{{3, 4}, {3, 7}}}), Norm::l2), 0.6);
  EXPECT_DOUBLE_EQ(ald_p(rt::make_pairs({{{1, 1}, {1.5f, 1}}}), Norm::linf), 0.5);
  // l1: |3| / 7
  EXPECT_DOUBLE_EQ(ald_p(rt::make_pairs({{{3, 4}, {3, 7}}}), Norm::l1), 3.0 / 7.0);
}

TEST(Ald, AveragesOnlySuccessfulPairs) {
  std::vector<SamplePair> v{rt::shaped_pair("a", {2}, {3, 4}, {3, 7}),
                            rt::shaped_pair("b", {2}, {3, 4}, {30, 40}, false),
                            rt::shaped_pair("c", {2}, {1, 1}, {1, 1})};
  const SamplePairSet s({"test", std::nullopt, std::nullopt, "f"}, v);
  EXPECT_DOUBLE_EQ(ald_p(s, Norm::l2), 0.3);
}

TEST(Ald, Errors) {
  EXPECT_EQ(rt::code_of([] { ald_p(rt::make_pairs({{{0, 0}, {1, 0}}}), Norm::l2); }), Errc::invalid_argument);
  std::vector<SamplePair> v{rt::shaped_pair("a", {2}, {3, 4}, {3, 7}, false)};
  const SamplePairSet none({"test", std::nullopt, std::nullopt, "f"}, v);
  EXPECT_EQ(rt::code_of([&] { ald_p(none, Norm::l2); }), Errc::no_successful_samples);
  EXPECT_EQ(rt::code_of([&] { ass(none); }), Errc::no_successful_samples);
  EXPECT_EQ(rt::code_of([&] { psd(none); }), Errc::no_successful_samples);
}

TEST(Ald, ScaleInvariantAndMonotone) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = rt::random_block({5}, rng, 0.1, 1.0);
    const auto d = rt::random_block({5}, rng, -0.1, 0.1);
    std::vector<float> small(5), big(5), xs(5), ss(5);
    for (std::size_t i = 0; i < 5; ++i) {
      small[i] = x[i] + d[i];
      big[i] = x[i] + 2.0f * d[i];
      xs[i] = 4.0f * x[i];
      ss[i] = 4.0f * small[i];
    }
    for (Norm p : {Norm::l1, Norm::l2, Norm::linf}) {
      const double a = ald_p(rt::make_pairs({{x.values(), small}}), p);
      EXPECT_EQ(a, ald_p(rt::make_pairs({{xs, ss}}), p));
      EXPECT_LT(a, ald_p(rt::make_pairs({{x.values(), big}}), p));
    }
  }
}

TEST(Ssim, Examples) {
  std::mt19937_64 rng(4);
  const auto x = rt::random_block({4, 4}, rng);
  EXPECT_DOUBLE_EQ(ssim(x, x), 1.0);
  EXPECT_NEAR(ssim(TensorBlock({3, 3}, std::vector<float>(9, 1.0f)), TensorBlock({3, 3})), 0.01 / 1.01, 1e-15);
  for (float a : {0.0f, 0.3f, 1.0f}) {
    const TensorBlock c({2, 2}, std::vector<float>(4, a));
    EXPECT_DOUBLE_EQ(ssim(c, c), 1.0);
  }
}

TEST(Ssim, ChannelsAverage) {
  std::vector<float> x(8, 1.0f), y(8, 1.0f);
  for (std::size_t i = 4; i < 8; ++i) y[i] = 0.0f;
  EXPECT_NEAR(ssim(TensorBlock({2, 2, 2}, x), TensorBlock({2, 2, 2}, y)), (1.0 + 0.01 / 1.01) / 2.0, 1e-15);
}

TEST(Ssim, SymmetricAndBounded) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = rt::random_block({3, 5}, rng);
    const auto y = rt::random_block({3, 5}, rng);
    const double s = ssim(x, y);
    EXPECT_DOUBLE_EQ(s, ssim(y, x));
    EXPECT_LE(s, 1.0 + 1e-12);
    EXPECT_GE(s, -1.0);
  }
}

TEST(Ssim, ShapeErrors) {
  EXPECT_EQ(rt::code_of([] { ssim(TensorBlock({2, 2}), TensorBlock({4})); }), Errc::shape_mismatch);
  EXPECT_EQ(rt::code_of([] { ssim(TensorBlock({1, 1, 1, 1}), TensorBlock({1, 1, 1, 1})); }), Errc::shape_mismatch);
}

TEST(Ass, Examples) {
  std::vector<float> half{0, 0, 1, 1};
  std::vector<SamplePair> v{rt::shaped_pair("a", {2, 2}, {0, 1, 0, 1}, {0, 1, 0, 1}),
                            rt::shaped_pair("b", {2, 2}, {0, 1, 0, 1}, half)};
  const SamplePairSet s({"test", std::nullopt, std::nullopt, "f"}, v);
  const double second = ssim(TensorBlock({2, 2}, half), TensorBlock({2, 2}, {0, 1, 0, 1}));
  EXPECT_DOUBLE_EQ(ass(s), (1.0 + second) / 2.0);
  EXPECT_DOUBLE_EQ(ass(single({2, 2}, {0, 1, 0, 1}, half)), second);
  EXPECT_DOUBLE_EQ(ass(single({2, 2}, half, half)), 1.0);
}

TEST(Psd, Examples) {
  EXPECT_EQ(psd(single({3, 3}, std::vector<float>(9, 0.5f), std::vector<float>(9, 0.5f))), 0.0);
  std::vector<float> adv(9, 0.5f);
  adv[4] = 0.6f;
  const double delta = double(0.6f) - double(0.5f);
  EXPECT_NEAR(psd(single({3, 3}, std::vector<float>(9, 0.5f), adv)), delta * 1e6, 1e-6);
  EXPECT_NEAR(psd(single({3, 3}, std::vector<float>(9, 0.5f), adv)), 1e5, 0.1);
}

TEST(Psd, CheckerboardMatchesOracle) {
  std::vector<float> board(16);
  for (int i = 0; i < 16; ++i) board[i] = ((i / 4 + i % 4) % 2) ? 1.0f : 0.0f;
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = rt::random_block({4, 4}, rng, -0.2, 0.2);
    std::vector<float> adv(16);
    for (int i = 0; i < 16; ++i) adv[i] = board[i] + d[i];
    for (int w : {1, 3, 5}) {
      const double want = psd_oracle(board, adv, 4, 4, w);
      EXPECT_NEAR(psd_single(TensorBlock({4, 4}, board), TensorBlock({4, 4}, adv), w), want, 1e-9 * want);
    }
  }
}

TEST(Psd, RandomImagesMatchOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = rt::random_block({5, 6}, rng);
    const auto d = rt::random_block({5, 6}, rng, -0.05, 0.05);
    std::vector<float> adv(30);
    for (int i = 0; i < 30; ++i) adv[i] = x[i] + d[i];
    const double want = psd_oracle(x.values(), adv, 5, 6, 3);
    EXPECT_NEAR(psd(single({5, 6}, x.values(), adv), 3), want, 1e-9 * want);
  }
}

TEST(Psd, ScalesWithPerturbation) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = rt::random_block({4, 4}, rng);
    const auto d = rt::random_block({4, 4}, rng, -0.01, 0.01);
    std::vector<float> a(16), b(16);
    for (int i = 0; i < 16; ++i) {
      a[i] = x[i] + d[i];
      b[i] = x[i] + 2.0f * d[i];
    }
    const double pa = psd(single({4, 4}, x.values(), a));
    EXPECT_GT(pa, 0.0);
    EXPECT_NEAR(psd(single({4, 4}, x.values(), b)) / pa, 2.0, 1e-4);
  }
}

TEST(Psd, WindowErrors) {
  const auto s = single({3, 3}, std::vector<float>(9, 0.5f), std::vector<float>(9, 0.6f));
  EXPECT_EQ(rt::code_of([&] { psd(s, 2); }), Errc::invalid_argument);
  EXPECT_EQ(rt::code_of([&] { psd(s, 0); }), Errc::invalid_argument);
}

TEST(Imperceptibility, BundlesAllMetrics) {
  const auto s = rt::make_pairs({{{3, 4}, {3, 7}}, {{1, 1}, {1.5f, 1}}});
  const auto r = imperceptibility(s);
  EXPECT_EQ(r.m, 2u);
  EXPECT_DOUBLE_EQ(r.ald.at(Norm::l2), ald_p(s, Norm::l2));
  EXPECT_DOUBLE_EQ(r.ald.at(Norm::linf), ald_p(s, Norm::linf));
  EXPECT_DOUBLE_EQ(r.ass, ass(s));
  EXPECT_DOUBLE_EQ(r.psd, psd(s));
}
