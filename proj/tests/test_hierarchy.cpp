#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "hicomp/hierarchy.hpp"
#include "oracles.hpp"

using namespace hicomp;

namespace {

MaskMap pixel_mask(float v) { return MaskMap(1, 1, std::vector<float>{v}); }
Image pixel_image(float v) { return Image(1, 1, 1, std::vector<float>{v}); }

std::vector<MaskMap> random_soft_masks(std::mt19937_64& rng, std::size_t m, int h, int w) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<MaskMap> masks;
  for (std::size_t j = 0; j < m; ++j) {
    MaskMap mk(h, w);
    for (auto& v : mk.data()) v = u(rng);
    masks.push_back(std::move(mk));
  }
  return masks;
}

std::vector<Image> random_images(std::mt19937_64& rng, std::size_t m, int h, int w, int c) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<Image> out;
  for (std::size_t j = 0; j < m; ++j) {
    Image img(h, w, c);
    for (auto& v : img.data()) v = u(rng);
    out.push_back(std::move(img));
  }
  return out;
}

HierarchyWeights random_simplex(std::mt19937_64& rng, std::size_t m) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(factorial(m));
  double s = 0;
  for (double& v : w) s += (v = e(rng));
  for (double& v : w) v /= s;
  return HierarchyWeights(std::move(w));
}

}  // namespace

TEST(EnumerateOrders, SmallCases) {
  const auto one = enumerate_orders(1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].priority, std::vector<int>{0});

  const auto three = enumerate_orders(3);
  const std::vector<std::vector<int>> expected{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  ASSERT_EQ(three.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(three[i].priority, expected[i]);

  EXPECT_EQ(enumerate_orders(4).size(), 24u);
}

TEST(EnumerateOrders, CapIsEnforced) {
  EXPECT_EQ(enumerate_orders(6).size(), 720u);
  try {
    enumerate_orders(7);
    FAIL() << "expected FactorialBlowup";
  } catch (const FactorialBlowup& e) {
    EXPECT_EQ(e.cap(), 6u);
    EXPECT_NE(std::string(e.what()).find("cap of 6"), std::string::npos);
  }
  EXPECT_EQ(enumerate_orders(7, {7}).size(), 5040u);
  EXPECT_THROW(enumerate_orders(0), InvalidArgument);
}

TEST(OrderIndex, InvertsEnumeration) {
  for (std::size_t m = 1; m <= 5; ++m) {
    const auto orders = enumerate_orders(m);
    for (std::size_t i = 0; i < orders.size(); ++i) EXPECT_EQ(order_index(orders[i]), i);
  }
  EXPECT_THROW(order_index({{0, 0, 1}}), InvalidArgument);
}

TEST(VisibleMasks, HandExamples) {
  const std::vector<MaskMap> one{pixel_mask(0.3f)};
  EXPECT_EQ(visible_masks<float>(one, {{0}})[0], one[0]);

  const std::vector<MaskMap> full{pixel_mask(1.0f), pixel_mask(1.0f)};
  const auto v = visible_masks<float>(full, {{0, 1}});
  EXPECT_EQ(v[0].at(0, 0), 1.0f);
  EXPECT_EQ(v[1].at(0, 0), 0.0f);

  const std::vector<MaskMap> soft{pixel_mask(0.5f), pixel_mask(0.8f)};
  const auto s = visible_masks<float>(soft, {{0, 1}});
  EXPECT_FLOAT_EQ(s[0].at(0, 0), 0.5f);
  EXPECT_FLOAT_EQ(s[1].at(0, 0), 0.4f);
}

TEST(VisibleMasks, DimensionMismatch) {
  const std::vector<MaskMap> masks{MaskMap(2, 2), MaskMap(3, 2)};
  EXPECT_THROW(visible_masks<float>(masks, {{0, 1}}), DimensionMismatch);
}

TEST(VisibleMasks, MatchesBooleanSetAlgebra) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<MaskMap> masks;
    std::vector<oracle::BoolGrid> grids;
    for (int j = 0; j < 3; ++j) {
      MaskMap mk(4, 4);
      oracle::BoolGrid g(16);
      for (int px = 0; px < 16; ++px) {
        g[px] = rng() % 2;
        mk.data()[px] = g[px] ? 1.0f : 0.0f;
      }
      masks.push_back(mk);
      grids.push_back(g);
    }
    for (const auto& order : enumerate_orders(3)) {
      const auto got = visible_masks<float>(masks, order);
      const auto want = oracle::visible_sets(grids, order.priority);
      for (int j = 0; j < 3; ++j)
        for (int px = 0; px < 16; ++px) EXPECT_EQ(got[j].data()[px], want[j][px] ? 1.0f : 0.0f);
    }
  }
}

TEST(ComposeHierarchy, SingleForegroundIsAlphaComposite) {
  const std::vector<Image> fgs{pixel_image(1.0f)};
  const std::vector<MaskMap> masks{pixel_mask(0.5f)};
  const auto c = compose_hierarchy<float>(pixel_image(0.2f), fgs, masks, HierarchyWeights({1.0}));
  EXPECT_FLOAT_EQ(c.image.at(0, 0), 0.6f);
  EXPECT_FLOAT_EQ(c.combined_mask.at(0, 0), 0.5f);
}

TEST(ComposeHierarchy, WinnerTakesOverlap) {
  const std::vector<Image> fgs{pixel_image(1.0f), pixel_image(0.5f)};
  const std::vector<MaskMap> masks{pixel_mask(1.0f), pixel_mask(1.0f)};
  const auto c = compose_hierarchy<float>(pixel_image(0.0f), fgs, masks, HierarchyWeights::one_hot(2, 0));
  EXPECT_EQ(c.image.at(0, 0), 1.0f);
  const auto d = compose_hierarchy<float>(pixel_image(0.0f), fgs, masks, HierarchyWeights::one_hot(2, 1));
  EXPECT_EQ(d.image.at(0, 0), 0.5f);
}

TEST(ComposeHierarchy, OneHotMatchesSetAlgebraOracle) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<MaskMap> masks;
    std::vector<oracle::BoolGrid> grids;
    for (int j = 0; j < 3; ++j) {
      MaskMap mk(5, 5);
      oracle::BoolGrid g(25);
      for (int px = 0; px < 25; ++px) mk.data()[px] = (g[px] = rng() % 2) ? 1.0f : 0.0f;
      masks.push_back(mk);
      grids.push_back(g);
    }
    const auto fgs = random_images(rng, 3, 5, 5, 1);
    const auto bg = random_images(rng, 1, 5, 5, 1)[0];
    std::vector<std::vector<double>> fg_d;
    for (const auto& f : fgs) fg_d.emplace_back(f.data().begin(), f.data().end());
    const std::vector<double> bg_d(bg.data().begin(), bg.data().end());
    const auto orders = enumerate_orders(3);
    for (std::size_t i = 0; i < orders.size(); ++i) {
      const auto c = compose_hierarchy<float>(bg, fgs, masks, HierarchyWeights::one_hot(3, i));
      const auto want = oracle::compose_one_hot(bg_d, fg_d, grids, orders[i].priority);
      for (int px = 0; px < 25; ++px) EXPECT_EQ(c.image.data()[px], float(want[px]));
    }
  }
}

TEST(ComposeHierarchy, DisjointMasksIgnoreWeights) {
  MaskMap a(2, 2, std::vector<float>{1, 0.5f, 0, 0});
  MaskMap b(2, 2, std::vector<float>{0, 0, 0.7f, 1});
  std::mt19937_64 rng(23);
  const auto fgs = random_images(rng, 2, 2, 2, 3);
  const auto bg = random_images(rng, 1, 2, 2, 3)[0];
  const std::vector<MaskMap> masks{a, b};
  const auto ref = compose_hierarchy<float>(bg, fgs, masks, HierarchyWeights::one_hot(2, 0));
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = compose_hierarchy<float>(bg, fgs, masks, random_simplex(rng, 2));
    for (std::size_t i = 0; i < c.image.size(); ++i) EXPECT_NEAR(c.image.data()[i], ref.image.data()[i], 1e-6);
  }
}

TEST(ComposeHierarchy, InputErrors) {
  const std::vector<Image> fgs{pixel_image(1.0f), pixel_image(0.5f)};
  const std::vector<MaskMap> masks{pixel_mask(1.0f), pixel_mask(1.0f)};
  EXPECT_THROW(compose_hierarchy<float>(pixel_image(0.0f), fgs, masks, HierarchyWeights({1.0})), InvalidWeights);
  EXPECT_THROW(HierarchyWeights({0.5, 0.6}), InvalidWeights);
  EXPECT_THROW(HierarchyWeights({1.5, -0.5}), InvalidWeights);
  EXPECT_THROW(HierarchyWeights({0.2, 0.3, 0.5}), InvalidWeights);  // 3 is not a factorial
  const std::vector<MaskMap> wrong{pixel_mask(1.0f), MaskMap(2, 2)};
  EXPECT_THROW(compose_hierarchy<float>(pixel_image(0.0f), fgs, wrong, HierarchyWeights::uniform(2)),
               DimensionMismatch);
}

TEST(SoftmaxWeights, ClosedForms) {
  const auto u = softmax_weights(std::vector<double>(6, 0.0));
  for (double v : u.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 6.0);
  const auto w = softmax_weights(std::vector<double>{std::log(3.0), 0.0});
  EXPECT_NEAR(w[0], 0.75, 1e-15);
  EXPECT_NEAR(w[1], 0.25, 1e-15);
  const auto big = softmax_weights(std::vector<double>{1000.0, 0.0});
  EXPECT_EQ(big[0], 1.0);
  EXPECT_EQ(big[1], 0.0);
  EXPECT_THROW(softmax_weights(std::vector<double>{std::nan(""), 0.0}), NonFiniteValue);
}

// Sum of visible masks plus the background complement is 1 for every order.
TEST(HierarchyProperties, PartitionOfUnity) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 1 + trial % 4;
    const auto masks = random_soft_masks(rng, m, 3, 4);
    for (const auto& order : enumerate_orders(m)) {
      const auto vis = visible_masks<float>(masks, order);
      for (std::size_t px = 0; px < 12; ++px) {
        double s = 0.0, bg = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
          s += vis[j].data()[px];
          bg *= 1.0 - masks[j].data()[px];
        }
        EXPECT_NEAR(s + bg, 1.0, 1e-6);
      }
    }
    const auto coef = blend_coefficients<float>(masks, random_simplex(rng, m));
    for (std::size_t px = 0; px < 12; ++px) {
      double s = 0.0;
      for (const auto& p : coef) s += p.data[px];
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(HierarchyProperties, AffineInWeights) {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 2 + trial % 2;
    const auto masks = random_soft_masks(rng, m, 4, 4);
    const auto fgs = random_images(rng, m, 4, 4, 3);
    const auto bg = random_images(rng, 1, 4, 4, 3)[0];
    const auto w1 = random_simplex(rng, m), w2 = random_simplex(rng, m);
    const double lambda = u(rng);
    std::vector<double> mix(w1.size());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = lambda * w1[i] + (1 - lambda) * w2[i];
    const auto c1 = compose_hierarchy<float>(bg, fgs, masks, w1).image;
    const auto c2 = compose_hierarchy<float>(bg, fgs, masks, w2).image;
    const auto cm = compose_hierarchy<float>(bg, fgs, masks, HierarchyWeights(mix)).image;
    for (std::size_t i = 0; i < cm.size(); ++i)
      EXPECT_NEAR(cm.data()[i], lambda * c1.data()[i] + (1 - lambda) * c2.data()[i], 1e-6);
  }
}

TEST(HierarchyProperties, CombinedMaskIgnoresWeights) {
  std::mt19937_64 rng(26);
  const auto masks = random_soft_masks(rng, 3, 4, 4);
  const auto fgs = random_images(rng, 3, 4, 4, 1);
  const auto bg = random_images(rng, 1, 4, 4, 1)[0];
  const auto a = compose_hierarchy<float>(bg, fgs, masks, random_simplex(rng, 3));
  const auto b = compose_hierarchy<float>(bg, fgs, masks, random_simplex(rng, 3));
  for (std::size_t px = 0; px < 16; ++px) {
    double expect = 1.0;
    for (const auto& mk : masks) expect *= 1.0 - mk.data()[px];
    EXPECT_NEAR(a.combined_mask.data()[px], 1.0 - expect, 1e-6);
    EXPECT_EQ(a.combined_mask.data()[px], b.combined_mask.data()[px]);
  }
}

TEST(PermuteWeights, RelabelsOrders) {
  // old weights one-hot on (1 > 0 > 2); new foreground k is old perm[k]
  const std::vector<int> perm{2, 0, 1};
  const auto w = HierarchyWeights::one_hot(3, order_index({{1, 0, 2}}));
  const auto p = permute_weights(w, perm);
  // old 1 is new 2, old 0 is new 1, old 2 is new 0: order (2 > 1 > 0)
  EXPECT_EQ(p.argmax(), order_index({{2, 1, 0}}));
  EXPECT_EQ(p[p.argmax()], 1.0);
}

TEST(HierarchyProperties, PermutationEquivariance) {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 2 + trial % 3;
    const auto masks = random_soft_masks(rng, m, 3, 3);
    const auto fgs = random_images(rng, m, 3, 3, 3);
    const auto bg = random_images(rng, 1, 3, 3, 3)[0];
    const auto w = random_simplex(rng, m);
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Image> pf;
    std::vector<MaskMap> pm;
    for (int k : perm) {
      pf.push_back(fgs[k]);
      pm.push_back(masks[k]);
    }
    const auto a = compose_hierarchy<float>(bg, fgs, masks, w).image;
    const auto b = compose_hierarchy<float>(bg, pf, pm, permute_weights(w, perm)).image;
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-6);
  }
}
