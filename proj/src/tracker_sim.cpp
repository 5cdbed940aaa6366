#include "occhmm/tracker_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>

#include "occhmm/random.hpp"

namespace occhmm::tracker {

namespace {

void check_box(const Frame& frame, const BoundingBox& box) {
  if (!box.inside(frame)) {
    throw std::out_of_range("box (" + std::to_string(box.x) + "," +
                            std::to_string(box.y) + "," +
                            std::to_string(box.w) + "," +
                            std::to_string(box.h) + ") outside " +
                            std::to_string(frame.width) + "x" +
                            std::to_string(frame.height) + " frame");
  }
}

double log_normal_pdf(double f, double mean, double var) {
  const double d = f - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
}

void blend(std::vector<double>& mean, std::vector<double>& var,
           std::span<const double> f, double lambda) {
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double m = lambda * mean[i] + (1.0 - lambda) * f[i];
    const double d = f[i] - m;
    var[i] = std::max(lambda * var[i] + (1.0 - lambda) * d * d, kVarFloor);
    mean[i] = m;
  }
}

}  // namespace

SparseFeatureExtractor::SparseFeatureExtractor(std::size_t num_features,
                                               int patch_height,
                                               int patch_width,
                                               std::uint64_t seed)
    : patch_height_(patch_height), patch_width_(patch_width), seed_(seed) {
  if (num_features == 0) throw std::invalid_argument("need at least 1 feature");
  if (patch_height < 1 || patch_width < 1) {
    throw std::invalid_argument("patch dimensions must be positive");
  }
  const auto pixels =
      static_cast<std::uint64_t>(patch_height) * static_cast<std::uint64_t>(patch_width);
  Rng rng(seed);
  entries_.resize(num_features);
  for (auto& feature : entries_) {
    const std::size_t k = 2 + rng.index(3);
    const double w = 1.0 / std::sqrt(static_cast<double>(k));
    feature.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
      const auto pixel = static_cast<std::size_t>(rng.index(pixels));
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      feature.push_back({pixel, sign * w});
    }
  }
}

std::vector<double> resample(const Frame& frame, const BoundingBox& box,
                             int patch_height, int patch_width) {
  check_box(frame, box);
  std::vector<double> patch(static_cast<std::size_t>(patch_height) *
                            static_cast<std::size_t>(patch_width));
  for (int i = 0; i < patch_height; ++i) {
    const int sy = box.y + (i * box.h) / patch_height;
    for (int j = 0; j < patch_width; ++j) {
      const int sx = box.x + (j * box.w) / patch_width;
      patch[static_cast<std::size_t>(i) * static_cast<std::size_t>(patch_width) +
            static_cast<std::size_t>(j)] = frame.at(sy, sx);
    }
  }
  return patch;
}

Features extract(const SparseFeatureExtractor& fx, const Frame& frame,
                 const BoundingBox& box) {
  check_box(frame, box);
  const int ph = fx.patch_height();
  const int pw = fx.patch_width();
  Features out(fx.num_features(), 0.0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double acc = 0.0;
    for (const auto& e : fx.entries()[k]) {
      const int i = static_cast<int>(e.pixel / static_cast<std::size_t>(pw));
      const int j = static_cast<int>(e.pixel % static_cast<std::size_t>(pw));
      acc += e.weight * frame.at(box.y + (i * box.h) / ph,
                                 box.x + (j * box.w) / pw);
    }
    out[k] = acc;
  }
  return out;
}

double classify(const TrackerModel& model, std::span<const double> features) {
  if (features.size() != model.size()) {
    throw std::invalid_argument("feature dimension does not match model");
  }
  double score = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    score += log_normal_pdf(features[i], model.pos_mean[i], model.pos_var[i]) -
             log_normal_pdf(features[i], model.neg_mean[i], model.neg_var[i]);
  }
  return score;
}

BoundingBox search(const TrackerModel& model, const SparseFeatureExtractor& fx,
                   const Frame& frame, const BoundingBox& prev, int radius,
                   double* best_score) {
  if (radius < 0) throw std::invalid_argument("search radius must be >= 0");
  // Visiting in tie-break order means the first maximum wins.
  std::vector<std::tuple<int, int, int>> offsets;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      offsets.emplace_back(std::max(std::abs(dy), std::abs(dx)), dy, dx);
    }
  }
  std::sort(offsets.begin(), offsets.end());

  BoundingBox best = prev;
  bool found = false;
  double best_value = 0.0;
  for (const auto& [ring, dy, dx] : offsets) {
    const BoundingBox candidate = prev.shifted(dx, dy);
    if (!candidate.inside(frame)) continue;
    const double value = classify(model, extract(fx, frame, candidate));
    if (!found || value > best_value) {
      best = candidate;
      best_value = value;
      found = true;
    }
  }
  if (best_score) *best_score = found ? best_value : 0.0;
  return best;
}

std::vector<BoundingBox> negative_ring(const Frame& frame,
                                       const BoundingBox& box) {
  const int ox = (box.w + 1) / 2;
  const int oy = (box.h + 1) / 2;
  std::vector<BoundingBox> out;
  for (int sy = -1; sy <= 1; ++sy) {
    for (int sx = -1; sx <= 1; ++sx) {
      if (sx == 0 && sy == 0) continue;
      const BoundingBox b = box.shifted(sx * ox, sy * oy);
      if (b.inside(frame)) out.push_back(b);
    }
  }
  return out;
}

TrackerModel update_model(const TrackerModel& model,
                          std::span<const double> pos_features,
                          std::span<const Features> neg_features,
                          double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("lambda must be in [0, 1]");
  }
  if (pos_features.size() != model.size()) {
    throw std::invalid_argument("feature dimension does not match model");
  }
  if (lambda == 1.0) return model;

  TrackerModel out = model;
  out.lambda = lambda;
  blend(out.pos_mean, out.pos_var, pos_features, lambda);
  if (!neg_features.empty()) {
    std::vector<double> neg_avg(model.size(), 0.0);
    for (const auto& f : neg_features) {
      if (f.size() != model.size()) {
        throw std::invalid_argument("negative feature dimension mismatch");
      }
      for (std::size_t i = 0; i < f.size(); ++i) neg_avg[i] += f[i];
    }
    for (double& v : neg_avg) v /= static_cast<double>(neg_features.size());
    blend(out.neg_mean, out.neg_var, neg_avg, lambda);
  }
  return out;
}

TrackerModel init_model(const SparseFeatureExtractor& fx, const Frame& frame,
                        const BoundingBox& box, double lambda) {
  const Features pos = extract(fx, frame, box);
  std::vector<Features> negs;
  for (const auto& b : negative_ring(frame, box)) {
    negs.push_back(extract(fx, frame, b));
  }
  const std::size_t m = fx.num_features();
  TrackerModel model;
  model.lambda = lambda;
  model.pos_mean = pos;
  model.neg_mean.assign(m, 0.0);
  model.neg_var.assign(m, 1.0);
  if (!negs.empty()) {
    for (const auto& f : negs) {
      for (std::size_t i = 0; i < m; ++i) model.neg_mean[i] += f[i];
    }
    for (double& v : model.neg_mean) v /= static_cast<double>(negs.size());
    for (std::size_t i = 0; i < m; ++i) {
      double ss = 0.0;
      for (const auto& f : negs) {
        const double d = f[i] - model.neg_mean[i];
        ss += d * d;
      }
      model.neg_var[i] =
          std::max(ss / static_cast<double>(negs.size()), kVarFloor);
    }
  }
  model.pos_var = model.neg_var;
  return model;
}

Tracker::Tracker(SparseFeatureExtractor fx, const Frame& first_frame,
                 const BoundingBox& box, int radius, double lambda)
    : fx_(std::move(fx)),
      model_(init_model(fx_, first_frame, box, lambda)),
      box_(box),
      radius_(radius) {
  if (radius < 0) throw std::invalid_argument("search radius must be >= 0");
}

Tracker::Result Tracker::locate(const Frame& frame) {
  Result r;
  box_ = search(model_, fx_, frame, box_, radius_, &r.score);
  r.box = box_;
  return r;
}

void Tracker::learn(const Frame& frame, double lambda) {
  if (lambda == 1.0) return;
  const Features pos = extract(fx_, frame, box_);
  std::vector<Features> negs;
  for (const auto& b : negative_ring(frame, box_)) {
    negs.push_back(extract(fx_, frame, b));
  }
  model_ = update_model(model_, pos, negs, lambda);
}

}  // namespace occhmm::tracker
