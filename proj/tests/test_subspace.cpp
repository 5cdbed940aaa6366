#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "occhmm/diagnostics.hpp"
#include "occhmm/subspace_model.hpp"

using namespace occhmm::subspace;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct PlaneData {
  VectorXd mean;
  MatrixXd basis;  // orthonormal
};

PlaneData random_plane(Eigen::Index d, Eigen::Index r, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatrixXd a(d, r);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  VectorXd m(d);
  for (Eigen::Index i = 0; i < d; ++i) m[i] = g(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  return {m, qr.householderQ() * MatrixXd::Identity(d, r)};
}

VectorXd sample(const PlaneData& p, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g;
  VectorXd c(p.basis.cols());
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = scale * g(rng);
  return p.mean + p.basis * c;
}

VectorXd random_vec(Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = g(rng);
  return v;
}

// Silences expected warnings for the lifetime of the object.
struct QuietWarnings {
  occhmm::WarningSink prev = occhmm::set_warning_sink([](std::string_view) {});
  ~QuietWarnings() { occhmm::set_warning_sink(std::move(prev)); }
};

}  // namespace

TEST(InitFromBatch, RepeatedPatch) {
  const VectorXd p = (VectorXd(3) << 1.0, -2.0, 0.5).finished();
  const std::vector<VectorXd> batch{p, p, p};
  const auto s = init_from_batch(batch, 1);
  EXPECT_TRUE(s.mean.isApprox(p));
  EXPECT_EQ(s.rank(), 0);
  const VectorXd y = (VectorXd(3) << 0.0, 0.0, 0.0).finished();
  EXPECT_NEAR(residual_distance(s, y), (y - p).norm(), 1e-12);
}

TEST(InitFromBatch, CollinearPoints) {
  std::vector<VectorXd> pts;
  for (int i = 0; i < 4; ++i) pts.push_back((VectorXd(2) << i, 0.0).finished());
  const auto s = init_from_batch(pts, 1);
  EXPECT_NEAR(s.mean[0], 1.5, 1e-15);
  EXPECT_NEAR(s.mean[1], 0.0, 1e-15);
  ASSERT_EQ(s.rank(), 1);
  EXPECT_NEAR(std::abs(s.basis(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(s.basis(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(s.effective_count, 4.0, 0.0);
}

TEST(InitFromBatch, RandomRankTwoInPlane) {
  std::mt19937_64 rng(3);
  const auto plane = random_plane(10, 2, rng);
  std::vector<VectorXd> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(sample(plane, rng));
  const auto s = init_from_batch(pts, 2);
  for (int i = 0; i < 20; ++i) {
    EXPECT_LE(residual_distance(s, sample(plane, rng)), 1e-9);
  }
  EXPECT_LE(s.orthonormality_error(), 1e-12);
}

TEST(InitFromBatch, Errors) {
  const std::vector<VectorXd> one{VectorXd::Zero(3)};
  EXPECT_THROW(init_from_batch(one, 1), InsufficientData);
  const std::vector<VectorXd> mixed{VectorXd::Zero(3), VectorXd::Zero(4)};
  EXPECT_THROW(init_from_batch(mixed, 1), std::invalid_argument);

  QuietWarnings quiet;
  std::mt19937_64 rng(1);
  const std::vector<VectorXd> three{random_vec(5, rng), random_vec(5, rng),
                                    random_vec(5, rng)};
  EXPECT_EQ(init_from_batch(three, 4).rank(), 2);  // clipped to count - 1
}

TEST(Residual, SpecExamples) {
  std::mt19937_64 rng(8);
  const auto plane = random_plane(6, 2, rng);
  std::vector<VectorXd> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(sample(plane, rng));
  const auto s = init_from_batch(pts, 2);
  EXPECT_NEAR(residual_distance(s, s.mean), 0.0, 1e-15);
  EXPECT_NEAR(residual_distance(s, s.mean + s.basis.col(1)), 0.0, 1e-12);

  VectorXd u = random_vec(6, rng);
  u -= s.basis * (s.basis.transpose() * u);
  u.normalize();
  EXPECT_NEAR(residual_distance(s, s.mean + u), 1.0, 1e-12);
  EXPECT_NEAR(prediction_error(s, s.mean + u), 1.0 / std::sqrt(6.0), 1e-12);
  EXPECT_THROW(residual_distance(s, VectorXd::Zero(5)), std::invalid_argument);
}

TEST(Residual, NonincreasingInRank) {
  std::mt19937_64 rng(21);
  std::vector<VectorXd> pts;
  for (int i = 0; i < 12; ++i) pts.push_back(random_vec(8, rng));
  const auto full = init_from_batch(pts, 6);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd y = random_vec(8, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r <= full.rank(); ++r) {
      AffineSubspace s = full;
      s.basis = full.basis.leftCols(r);
      s.weights = full.weights.head(r);
      const double d = residual_distance(s, y);
      EXPECT_LE(d, prev + 1e-12);
      prev = d;
    }
  }
}

TEST(Update, MeanPointOnlyChangesCount) {
  std::mt19937_64 rng(4);
  const auto plane = random_plane(5, 2, rng);
  std::vector<VectorXd> pts;
  for (int i = 0; i < 6; ++i) pts.push_back(sample(plane, rng));
  const auto s = init_from_batch(pts, 2);
  const auto u = update(s, s.mean, 0.9, 2);
  EXPECT_EQ(u.mean, s.mean);
  EXPECT_EQ(u.basis, s.basis);
  EXPECT_DOUBLE_EQ(u.effective_count, 0.9 * s.effective_count + 1.0);
}

TEST(Update, FullRankMatchesWeightedBatch) {
  // With rank_cap = d nothing is truncated, so the incremental scatter equals
  // the batch scatter of the same points.
  std::mt19937_64 rng(9);
  const Eigen::Index d = 4;
  std::vector<VectorXd> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(random_vec(d, rng));
  AffineSubspace s = init_from_batch(std::span(pts.data(), 2), d);
  for (std::size_t i = 2; i < pts.size(); ++i) s = update(s, pts[i], 1.0, d);
  const auto batch = init_from_batch(pts, d);
  EXPECT_TRUE(s.mean.isApprox(batch.mean, 1e-12));
  EXPECT_NEAR(s.effective_count, 30.0, 1e-12);
  for (Eigen::Index k = 0; k < d; ++k) {
    EXPECT_NEAR(s.weights[k], batch.weights[k], 1e-9);
  }
  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd y = random_vec(d, rng);
    for (Eigen::Index r = 1; r < d; ++r) {
      AffineSubspace a = s;
      a.basis = s.basis.leftCols(r);
      AffineSubspace b = batch;
      b.basis = batch.basis.leftCols(r);
      EXPECT_NEAR(residual_distance(a, y), residual_distance(b, y), 1e-9);
    }
  }
}

TEST(Update, RecoversNewRegimeWithForgetting) {
  std::mt19937_64 rng(17);
  const auto old_plane = random_plane(12, 2, rng);
  const auto new_plane = random_plane(12, 2, rng);
  std::vector<VectorXd> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(sample(old_plane, rng));
  AffineSubspace s = init_from_batch(pts, 2);
  for (int i = 0; i < 50; ++i) s = update(s, sample(old_plane, rng), 0.9, 2);

  std::vector<VectorXd> probe;
  for (int i = 0; i < 50; ++i) probe.push_back(sample(new_plane, rng));
  auto mean_residual = [&](const AffineSubspace& sp) {
    double sum = 0.0;
    for (const auto& y : probe) sum += residual_distance(sp, y);
    return sum / static_cast<double>(probe.size());
  };
  const double start = mean_residual(s);
  // Averages over consecutive blocks of five updates must fall.
  std::vector<double> blocks(4, 0.0);
  for (int i = 0; i < 20; ++i) {
    s = update(s, sample(new_plane, rng), 0.9, 2);
    blocks[i / 5] += mean_residual(s) / 5.0;
  }
  EXPECT_LT(blocks[0], start);
  for (std::size_t b = 1; b < blocks.size(); ++b) {
    EXPECT_LT(blocks[b], blocks[b - 1]);
  }
  EXPECT_LT(mean_residual(s), 0.25 * start);
}

TEST(Update, OrthonormalityOverManyUpdates) {
  std::mt19937_64 rng(33);
  std::vector<VectorXd> pts{random_vec(16, rng), random_vec(16, rng)};
  AffineSubspace s = init_from_batch(pts, 1);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    s = update(s, random_vec(16, rng), 0.97, 5);
    worst = std::max(worst, s.orthonormality_error());
  }
  EXPECT_LE(worst, 1e-9);
  EXPECT_EQ(s.rank(), 5);
}

TEST(Update, TranslationEquivariance) {
  std::mt19937_64 rng(12);
  const VectorXd c = 5.0 * random_vec(6, rng);
  std::vector<VectorXd> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(random_vec(6, rng));
  std::vector<VectorXd> shifted;
  for (const auto& p : pts) shifted.push_back(p + c);

  AffineSubspace a = init_from_batch(std::span(pts.data(), 3), 2);
  AffineSubspace b = init_from_batch(std::span(shifted.data(), 3), 2);
  for (std::size_t i = 3; i < pts.size(); ++i) {
    a = update(a, pts[i], 0.95, 3);
    b = update(b, shifted[i], 0.95, 3);
  }
  EXPECT_TRUE((b.mean - a.mean - c).norm() < 1e-9);
  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd y = random_vec(6, rng);
    EXPECT_NEAR(residual_distance(a, y), residual_distance(b, y + c), 1e-9);
  }
}

TEST(Update, InvalidArguments) {
  std::mt19937_64 rng(2);
  const std::vector<VectorXd> pts{random_vec(3, rng), random_vec(3, rng)};
  const auto s = init_from_batch(pts, 1);
  EXPECT_THROW(update(s, random_vec(3, rng), 0.0, 2), std::invalid_argument);
  EXPECT_THROW(update(s, random_vec(3, rng), 1.5, 2), std::invalid_argument);
  EXPECT_THROW(update(s, random_vec(4, rng), 0.9, 2), std::invalid_argument);
}

TEST(GatedUpdate, ThresholdRule) {
  std::mt19937_64 rng(6);
  std::vector<VectorXd> pts;
  for (int i = 0; i < 5; ++i) pts.push_back(random_vec(4, rng));
  const auto s = init_from_batch(pts, 2);
  const VectorXd y = random_vec(4, rng);
  EXPECT_TRUE(gated_update(s, y, 0.98, 1.0, 3) == s);
  EXPECT_TRUE(gated_update(s, y, 0.98, 0.6, 3) == s);
  EXPECT_TRUE(gated_update(s, y, 0.98, 0.0, 3) == update(s, y, 0.98, 3));
  EXPECT_TRUE(gated_update(s, y, 0.98, 0.5, 3) == update(s, y, 0.98, 3));
  EXPECT_THROW(gated_update(s, y, 0.98, 1.5, 3), std::invalid_argument);
}

TEST(Snapshot, RoundTripExact) {
  std::mt19937_64 rng(10);
  std::vector<VectorXd> pts;
  for (int i = 0; i < 7; ++i) pts.push_back(random_vec(5, rng));
  auto s = init_from_batch(pts, 3);
  s = update(s, random_vec(5, rng), 0.93, 3);
  std::stringstream ss;
  write_snapshot(ss, s);
  const auto back = read_snapshot(ss);
  EXPECT_TRUE(back == s);

  std::istringstream bad("format_version=2 dim=1 rank=0 effective_count=1\n");
  EXPECT_THROW(read_snapshot(bad), std::runtime_error);
}

TEST(CameraModel, InitializesAfterWindowAndGates) {
  ModelConfig cfg;
  cfg.init_window = 3;
  cfg.rank_cap = 2;
  CameraModel m(cfg);
  std::mt19937_64 rng(1);
  const auto plane = random_plane(8, 2, rng);
  EXPECT_EQ(m.score(sample(plane, rng)), 0.0);
  for (int i = 0; i < 3; ++i) {
    EXPECT_FALSE(m.initialized());
    m.observe(sample(plane, rng), 0.0);
  }
  EXPECT_TRUE(m.initialized());
  for (int i = 0; i < 20; ++i) m.observe(sample(plane, rng), 0.0);
  EXPECT_LT(m.score(sample(plane, rng)), 1e-4);

  const auto before = m.space();
  m.observe(random_vec(8, rng), 0.9);
  EXPECT_TRUE(m.space() == before);
  EXPECT_GT(m.score(sample(plane, rng) + random_vec(8, rng)), 0.1);
}

TEST(CameraModel, WindowModeTracksRecentSamples) {
  ModelConfig cfg;
  cfg.mode = UpdateMode::kWindow;
  cfg.window = 10;
  cfg.init_window = 3;
  cfg.rank_cap = 2;
  CameraModel m(cfg);
  std::mt19937_64 rng(2);
  const auto a = random_plane(8, 2, rng);
  const auto b = random_plane(8, 2, rng);
  for (int i = 0; i < 20; ++i) m.observe(sample(a, rng), 0.0);
  for (int i = 0; i < 10; ++i) m.observe(sample(b, rng), 0.0);
  EXPECT_LT(m.score(sample(b, rng)), 1e-4);
}
