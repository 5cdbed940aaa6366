#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "occhmm/tracker_sim.hpp"

using namespace occhmm;
using namespace occhmm::tracker;

namespace {

Frame noise_frame(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Frame f(w, h);
  for (double& p : f.pixels) p = u(rng);
  return f;
}

// Pastes `src` (box-sized) into `dst` at (x, y).
void paste(Frame& dst, const Frame& src, int x, int y) {
  for (int i = 0; i < src.height; ++i) {
    for (int j = 0; j < src.width; ++j) dst.at(y + i, x + j) = src.at(i, j);
  }
}

TrackerModel random_model(std::size_t m, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> v(1e-6, 5.0);
  TrackerModel t;
  for (std::size_t i = 0; i < m; ++i) {
    t.pos_mean.push_back(g(rng));
    t.neg_mean.push_back(g(rng));
    t.pos_var.push_back(v(rng));
    t.neg_var.push_back(v(rng));
  }
  t.lambda = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return t;
}

}  // namespace

TEST(Extractor, DeterministicAndSparse) {
  const SparseFeatureExtractor a(50, 8, 8, 42);
  const SparseFeatureExtractor b(50, 8, 8, 42);
  const SparseFeatureExtractor c(50, 8, 8, 43);
  ASSERT_EQ(a.num_features(), 50U);
  bool differs = false;
  for (std::size_t k = 0; k < 50; ++k) {
    const auto& e = a.entries()[k];
    EXPECT_GE(e.size(), 2U);
    EXPECT_LE(e.size(), 4U);
    ASSERT_EQ(e.size(), b.entries()[k].size());
    for (std::size_t j = 0; j < e.size(); ++j) {
      EXPECT_EQ(e[j].pixel, b.entries()[k][j].pixel);
      EXPECT_EQ(e[j].weight, b.entries()[k][j].weight);
      EXPECT_LT(e[j].pixel, 64U);
      EXPECT_NEAR(std::abs(e[j].weight), 1.0 / std::sqrt(double(e.size())), 1e-15);
    }
    if (c.entries()[k].size() != e.size() ||
        c.entries()[k][0].pixel != e[0].pixel) {
      differs = true;
    }
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(SparseFeatureExtractor(0, 8, 8, 1), std::invalid_argument);
}

TEST(Extract, ZeroFrameAndLinearity) {
  const SparseFeatureExtractor fx(20, 4, 4, 3);
  const Frame zero(10, 10);
  for (double v : extract(fx, zero, {1, 2, 6, 5})) EXPECT_EQ(v, 0.0);

  Frame f = noise_frame(10, 10, 5);
  Frame f2 = f;
  for (double& p : f2.pixels) p *= 2.0;
  const auto a = extract(fx, f, {2, 1, 7, 8});
  const auto b = extract(fx, f2, {2, 1, 7, 8});
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(b[i], 2.0 * a[i]);
  EXPECT_THROW(extract(fx, f, {5, 5, 6, 6}), std::out_of_range);
}

TEST(Extract, MatchesDirectSummationOnFixture) {
  // 8x8 fixture frame with pixel (y, x) = y * 8 + x, box = whole frame, patch
  // 8x8 so resampling is the identity.
  Frame f(8, 8);
  for (int i = 0; i < 64; ++i) f.pixels[static_cast<std::size_t>(i)] = i;
  const SparseFeatureExtractor fx(16, 8, 8, 99);
  const auto got = extract(fx, f, {0, 0, 8, 8});
  for (std::size_t k = 0; k < 16; ++k) {
    double expect = 0.0;
    for (const auto& e : fx.entries()[k]) expect += e.weight * double(e.pixel);
    EXPECT_DOUBLE_EQ(got[k], expect);
  }
}

TEST(Resample, NearestNeighbour) {
  Frame f(4, 4);
  for (int i = 0; i < 16; ++i) f.pixels[static_cast<std::size_t>(i)] = i;
  const auto p = resample(f, {0, 0, 4, 4}, 2, 2);
  EXPECT_EQ(p, (std::vector<double>{0, 2, 8, 10}));
  const auto up = resample(f, {1, 1, 2, 2}, 4, 4);
  EXPECT_EQ(up[0], 5.0);
  EXPECT_EQ(up[1], 5.0);
  EXPECT_EQ(up[2], 6.0);
  EXPECT_EQ(up[15], 10.0);
}

TEST(Classify, SpecExamples) {
  std::mt19937_64 rng(1);
  TrackerModel same = random_model(6, rng);
  same.neg_mean = same.pos_mean;
  same.neg_var = same.pos_var;
  const std::vector<double> f{0.3, -1.0, 2.0, 0.0, 5.0, -3.0};
  EXPECT_DOUBLE_EQ(classify(same, f), 0.0);

  TrackerModel m;
  m.pos_mean = {1.0, 2.0};
  m.neg_mean = {3.0, 0.0};
  m.pos_var = {1.0, 1.0};
  m.neg_var = {1.0, 1.0};
  EXPECT_GT(classify(m, m.pos_mean), 0.0);
  EXPECT_THROW(classify(m, f), std::invalid_argument);
}

TEST(Classify, ClosedFormFixture) {
  TrackerModel m;
  m.pos_mean = {0.5, -1.0, 2.0};
  m.pos_var = {0.25, 1.0, 4.0};
  m.neg_mean = {0.0, 1.0, 1.0};
  m.neg_var = {1.0, 0.5, 2.0};
  const std::vector<double> f{1.0, 0.0, 3.0};
  double expect = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    auto lp = [&](double mu, double var) {
      return -0.5 * std::log(2 * std::numbers::pi * var) -
             (f[i] - mu) * (f[i] - mu) / (2 * var);
    };
    expect += lp(m.pos_mean[i], m.pos_var[i]) - lp(m.neg_mean[i], m.neg_var[i]);
  }
  EXPECT_NEAR(classify(m, f), expect, 1e-14);
}

TEST(Search, RadiusZeroAndConstantFrame) {
  const SparseFeatureExtractor fx(30, 6, 6, 4);
  Frame f = noise_frame(30, 30, 8);
  const BoundingBox prev{10, 10, 6, 6};
  const auto model = init_model(fx, f, prev, 0.85);
  EXPECT_EQ(search(model, fx, f, prev, 0), prev);

  const Frame flat(30, 30, 0.5);
  EXPECT_EQ(search(model, fx, flat, prev, 4), prev);
  EXPECT_THROW(search(model, fx, f, prev, -1), std::invalid_argument);
}

TEST(Search, FollowsPlantedTarget) {
  const SparseFeatureExtractor fx(60, 8, 8, 12);
  const Frame target = noise_frame(8, 8, 77);
  Frame before(40, 40, 0.0);
  paste(before, target, 12, 15);
  const BoundingBox box{12, 15, 8, 8};
  const auto model = init_model(fx, before, box, 0.85);

  Frame after(40, 40, 0.0);
  paste(after, target, 15, 17);
  EXPECT_EQ(search(model, fx, after, box, 5), box.shifted(3, 2));
}

TEST(Search, TranslationConsistent) {
  const SparseFeatureExtractor fx(40, 6, 6, 2);
  const Frame base = noise_frame(30, 30, 3);
  const BoundingBox prev{8, 9, 6, 6};
  const auto model = init_model(fx, noise_frame(30, 30, 4), prev, 0.85);
  const auto r0 = search(model, fx, base, prev, 3);

  const int dx = 4, dy = 2;
  Frame moved(30, 30, 0.0);
  for (int y = 0; y + dy < 30; ++y) {
    for (int x = 0; x + dx < 30; ++x) moved.at(y + dy, x + dx) = base.at(y, x);
  }
  const auto r1 = search(model, fx, moved, prev.shifted(dx, dy), 3);
  EXPECT_EQ(r1, r0.shifted(dx, dy));
}

TEST(NegativeRing, EightBoxesAwayFromEdges) {
  const Frame f(50, 50);
  const BoundingBox b{20, 20, 8, 6};
  const auto ring = negative_ring(f, b);
  ASSERT_EQ(ring.size(), 8U);
  for (const auto& n : ring) {
    EXPECT_TRUE(std::abs(n.x - b.x) >= 4 || std::abs(n.y - b.y) >= 3);
    EXPECT_EQ(n.w, b.w);
    EXPECT_EQ(n.h, b.h);
  }
  EXPECT_EQ(negative_ring(f, {0, 0, 8, 6}).size(), 3U);
}

TEST(UpdateModel, SpecExamples) {
  TrackerModel m;
  m.pos_mean = {10.0};
  m.pos_var = {1.0};
  m.neg_mean = {0.0};
  m.neg_var = {1.0};
  const std::vector<double> pos{20.0};
  const std::vector<Features> negs{{2.0}, {4.0}};

  const auto u = update_model(m, pos, negs, 0.85);
  EXPECT_NEAR(u.pos_mean[0], 11.5, 1e-12);
  EXPECT_NEAR(u.pos_var[0], 0.85 * 1.0 + 0.15 * (20.0 - 11.5) * (20.0 - 11.5), 1e-12);
  EXPECT_NEAR(u.neg_mean[0], 0.15 * 3.0, 1e-12);

  const auto z = update_model(m, pos, negs, 0.0);
  EXPECT_EQ(z.pos_mean[0], 20.0);
  EXPECT_EQ(z.pos_var[0], kVarFloor);

  const auto none = update_model(m, pos, {}, 0.5);
  EXPECT_EQ(none.neg_mean, m.neg_mean);
  EXPECT_EQ(none.neg_var, m.neg_var);

  EXPECT_THROW(update_model(m, pos, negs, 1.1), std::invalid_argument);
}

TEST(UpdateModel, LambdaOneIsFixedPoint) {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_model(10, rng);
    std::vector<double> pos(10);
    for (double& v : pos) v = g(rng);
    std::vector<Features> negs(3, Features(10));
    for (auto& n : negs) for (double& v : n) v = g(rng);
    EXPECT_TRUE(update_model(m, pos, negs, 1.0) == m);
  }
}

TEST(UpdateModel, ContractionTowardSample) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_model(5, rng);
    std::vector<double> pos(5);
    for (double& v : pos) v = 3.0 * g(rng);
    const double lambda = u(rng);
    const auto n = update_model(m, pos, {}, lambda);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(std::abs(n.pos_mean[i] - pos[i]),
                  lambda * std::abs(m.pos_mean[i] - pos[i]), 1e-12);
      EXPECT_GE(n.pos_var[i], kVarFloor);
    }
  }
}

TEST(Tracker, LearnWithLambdaOneKeepsModel) {
  const SparseFeatureExtractor fx(20, 6, 6, 1);
  const Frame f = noise_frame(30, 30, 2);
  Tracker t(fx, f, {10, 10, 6, 6}, 2, 0.85);
  const auto before = t.model();
  t.learn(noise_frame(30, 30, 3), 1.0);
  EXPECT_TRUE(t.model() == before);
  t.learn(noise_frame(30, 30, 3), 0.85);
  EXPECT_FALSE(t.model() == before);
}

TEST(Iou, Basics) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 4, 4}, {0, 0, 4, 4}), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 4, 4}, {4, 0, 4, 4}), 0.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 4, 4}, {2, 0, 4, 4}), 8.0 / 24.0);
}
