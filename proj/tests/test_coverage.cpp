#include <gtest/gtest.h>

#include "oracles.hpp"
#include "support.hpp"

using namespace robusteval;

namespace {

NeuronProfile unit_profile(std::size_t k, std::size_t neurons = 1) {
  return NeuronProfile({{"layer", neurons}}, std::vector<NeuronBounds>(neurons, {0.0, 1.0}), k);
}


}  // namespace

TEST(Kmncov, Examples) {
  EXPECT_DOUBLE_EQ(kmn_cov(rt::scalar_trace({{0.25f}}), unit_profile(2)), 0.5);
  EXPECT_DOUBLE_EQ(kmn_cov(rt::scalar_trace({{0.25f}, {0.75f}}), unit_profile(2)), 1.0);
  EXPECT_DOUBLE_EQ(kmn_cov(rt::scalar_trace({{-0.5f}, {1.5f}}), unit_profile(2)), 0.0);
}

TEST(Kmncov, HighLandsInLastSectionAndBoundariesAreHalfOpen) {
  const auto p = unit_profile(4);
  EXPECT_EQ(section_index(1.0, p.bounds()[0], 4), 3u);
  EXPECT_EQ(section_index(0.0, p.bounds()[0], 4), 0u);
  EXPECT_EQ(section_index(0.25, p.bounds()[0], 4), 1u);
  EXPECT_EQ(section_index(0.5, p.bounds()[0], 4), 2u);
  EXPECT_FALSE(section_index(1.0000001, p.bounds()[0], 4).has_value());
  EXPECT_FALSE(section_index(-1e-12, p.bounds()[0], 4).has_value());
}

TEST(Kmncov, DegenerateRangeCoversOnlyThePoint) {
  const NeuronProfile p({{"layer", 1}}, {{0.5, 0.5}}, 3);
  const auto r = coverage(rt::scalar_trace({{0.5f}, {0.6f}, {0.4f}}), p);
  EXPECT_DOUBLE_EQ(r.kmncov, 1.0 / 3.0);
  EXPECT_TRUE(r.per_neuron[0].sections[2]);
  EXPECT_TRUE(r.per_neuron[0].upper);
  EXPECT_TRUE(r.per_neuron[0].lower);
}

TEST(Nbcov, Examples) {
  EXPECT_DOUBLE_EQ(nb_cov(rt::scalar_trace({{1.5f}}), unit_profile(2)), 0.5);
  EXPECT_DOUBLE_EQ(nb_cov(rt::scalar_trace({{1.5f}, {-0.5f}}), unit_profile(2)), 1.0);
}

TEST(Snacov, Examples) {
  EXPECT_DOUBLE_EQ(sna_cov(rt::scalar_trace({{1.5f}}), unit_profile(2)), 1.0);
  EXPECT_DOUBLE_EQ(sna_cov(rt::scalar_trace({{-0.5f}}), unit_profile(2)), 0.0);
}

TEST(Coverage, SharedUpperTally) {
  const auto r = coverage(rt::scalar_trace({{1.5f, 0.5f, -1.0f}}), unit_profile(2, 3));
  EXPECT_EQ(r.upper_corner, 1u);
  EXPECT_EQ(r.lower_corner, 1u);
  EXPECT_DOUBLE_EQ(r.snacov, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.nbcov, 2.0 / 6.0);
}

TEST(Coverage, GeometryMismatchIsError) {
  EXPECT_THROW(coverage(rt::scalar_trace({{0.5f, 0.5f}}), unit_profile(2)), Error);
  const NeuronProfile renamed({{"other", 1}}, {{0.0, 1.0}}, 2);
  EXPECT_THROW(coverage(rt::scalar_trace({{0.5f}}), renamed), Error);
}

TEST(Coverage, MultiElementNeuronUsesMean) {
  // elements {0.1, 0.3} -> 0.2 -> section 0 of [0,1] with k=2
  const ActivationTrace t({{"conv", 1, 2}}, {"a"}, {{0.1f, 0.3f}});
  const auto r = coverage(t, NeuronProfile({{"conv", 1}}, {{0.0, 1.0}}, 2));
  EXPECT_TRUE(r.per_neuron[0].sections[0]);
  EXPECT_FALSE(r.per_neuron[0].sections[1]);
}

TEST(CoverageOracle, EnumeratedGridCasesMatchExactly) {
  std::mt19937_64 rng(2024);
  const std::vector<float> ref_grid{0.0f, 0.25f, 0.5f, 0.75f, 1.0f};
  const std::vector<float> test_grid{-0.5f, -0.125f, 0.0f, 0.125f, 1.0f / 3.0f, 0.25f, 0.5f, 0.625f,
                                     0.75f, 0.875f,  1.0f,  1.25f};
  std::size_t cases = 0;
  for (std::size_t neurons = 1; neurons <= 5; ++neurons) {
    for (std::size_t samples = 1; samples <= 10; ++samples) {
      for (std::size_t k = 1; k <= 4; ++k) {
        for (std::size_t elements : {1, 2}) {
          for (int rep = 0; rep < 3; ++rep, ++cases) {
            const auto ref = rt::grid_trace(samples, neurons, elements, ref_grid, rng, "r");
            const auto test = rt::grid_trace(samples, neurons, elements, test_grid, rng, "t");
            const auto p = build_neuron_profile(ref, k);
            const auto r = coverage(test, p);
            const auto b = rt::coverage_brute(test, p);
            ASSERT_EQ(r.kmncov, b.kmn) << neurons << "/" << samples << "/" << k;
            ASSERT_EQ(r.nbcov, b.nb);
            ASSERT_EQ(r.snacov, b.sna);
          }
        }
      }
    }
  }
  EXPECT_EQ(cases, 5u * 10u * 4u * 2u * 3u);
}

TEST(CoverageOracle, ContinuousValuesMatchExactly) {
  std::mt19937_64 rng(77);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t neurons = 1 + trial % 5, samples = 1 + trial % 10, k = 1 + trial % 4;
    std::vector<std::vector<float>> a(samples, std::vector<float>(neurons)), b = a;
    for (auto& r : a) for (auto& v : r) v = n(rng);
    for (auto& r : b) for (auto& v : r) v = 1.3f * n(rng);
    const auto p = build_neuron_profile(rt::scalar_trace(a, "a"), k);
    const auto t = rt::scalar_trace(b, "b");
    const auto r = coverage(t, p);
    const auto o = rt::coverage_brute(t, p);
    ASSERT_EQ(r.kmncov, o.kmn);
    ASSERT_EQ(r.nbcov, o.nb);
    ASSERT_EQ(r.snacov, o.sna);
  }
}

TEST(CoverageProperties, SelfCoverageHasNoCorners) {
  std::mt19937_64 rng(8);
  std::normal_distribution<float> n(0.0f, 2.0f);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<float>> a(1 + trial % 10, std::vector<float>(1 + trial % 5));
    for (auto& r : a) for (auto& v : r) v = n(rng);
    const auto t = rt::scalar_trace(a);
    const auto r = coverage(t, build_neuron_profile(t, 1 + trial % 4));
    EXPECT_EQ(r.nbcov, 0.0);
    EXPECT_EQ(r.snacov, 0.0);
  }
}

TEST(CoverageProperties, MonotoneInAddedSamples) {
  std::mt19937_64 rng(9);
  std::normal_distribution<float> n(0.0f, 1.5f);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<float>> ref(6, std::vector<float>(3)), a(4, std::vector<float>(3)), b(3, a[0]);
    for (auto* m : {&ref, &a, &b}) for (auto& r : *m) for (auto& v : r) v = n(rng);
    const auto p = build_neuron_profile(rt::scalar_trace(ref, "r"), 4);
    const auto ta = rt::scalar_trace(a, "a");
    const auto small = coverage(ta, p);
    const auto big = coverage(ta.append(rt::scalar_trace(b, "b")), p);
    EXPECT_LE(small.kmncov, big.kmncov);
    EXPECT_LE(small.nbcov, big.nbcov);
    EXPECT_LE(small.snacov, big.snacov);
  }
}

TEST(CoverageProperties, KEqualsOneIsInRangeFraction) {
  std::mt19937_64 rng(10);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<float>> ref(5, std::vector<float>(4)), test(3, std::vector<float>(4));
    for (auto* m : {&ref, &test}) for (auto& r : *m) for (auto& v : r) v = n(rng);
    const auto p = build_neuron_profile(rt::scalar_trace(ref, "r"), 1);
    std::size_t in_range = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      bool any = false;
      for (const auto& r : test) any = any || (r[j] >= p.bounds()[j].low && r[j] <= p.bounds()[j].high);
      in_range += any;
    }
    EXPECT_DOUBLE_EQ(kmn_cov(rt::scalar_trace(test, "t"), p), in_range / 4.0);
  }
}

TEST(CoverageProperties, RatiosInUnitInterval) {
  std::mt19937_64 rng(12);
  std::normal_distribution<float> n(0.0f, 3.0f);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<float>> ref(4, std::vector<float>(3)), test(6, std::vector<float>(3));
    for (auto* m : {&ref, &test}) for (auto& r : *m) for (auto& v : r) v = n(rng);
    const auto r = coverage(rt::scalar_trace(test, "t"), build_neuron_profile(rt::scalar_trace(ref, "r"), 3));
    for (double v : {r.kmncov, r.nbcov, r.snacov}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}
