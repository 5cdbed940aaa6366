#include "occhmm/subspace_model.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "occhmm/diagnostics.hpp"
#include "occhmm/format.hpp"

namespace occhmm::subspace {

namespace {

// Singular values below this fraction of the largest are treated as zero.
constexpr double kRelativeRankTolerance = 1e-10;

void check_dim(const AffineSubspace& space, const PatchVector& y) {
  if (y.size() != space.dim()) {
    throw std::invalid_argument("patch dimension " + std::to_string(y.size()) +
                                " does not match subspace dimension " +
                                std::to_string(space.dim()));
  }
}

Eigen::Index numerical_rank(const Eigen::VectorXd& sigma, Eigen::Index cap) {
  if (sigma.size() == 0) return 0;
  const double cutoff = kRelativeRankTolerance * sigma(0);
  Eigen::Index r = 0;
  while (r < sigma.size() && r < cap && sigma(r) > cutoff && sigma(r) > 0.0) {
    ++r;
  }
  return r;
}

// Thin Q of a QR factorization, with column signs matching the input.
Eigen::MatrixXd reorthonormalize(const Eigen::MatrixXd& basis) {
  if (basis.cols() == 0) return basis;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(basis.rows(), basis.cols());
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (q.col(j).dot(basis.col(j)) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

double AffineSubspace::orthonormality_error() const {
  if (basis.cols() == 0) return 0.0;
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  return (gram - Eigen::MatrixXd::Identity(basis.cols(), basis.cols()))
      .cwiseAbs()
      .maxCoeff();
}

bool operator==(const AffineSubspace& a, const AffineSubspace& b) {
  return a.effective_count == b.effective_count &&
         a.mean.size() == b.mean.size() && a.mean == b.mean &&
         a.basis.rows() == b.basis.rows() && a.basis.cols() == b.basis.cols() &&
         a.basis == b.basis && a.weights.size() == b.weights.size() &&
         a.weights == b.weights;
}

AffineSubspace init_from_batch(std::span<const PatchVector> patches,
                               Eigen::Index rank) {
  if (patches.size() < 2) {
    throw InsufficientData("subspace initialization needs at least 2 patches, got " +
                           std::to_string(patches.size()));
  }
  const Eigen::Index d = patches.front().size();
  if (d < 1) throw std::invalid_argument("patch dimension must be >= 1");
  const auto count = static_cast<Eigen::Index>(patches.size());

  Eigen::MatrixXd data(d, count);
  for (Eigen::Index i = 0; i < count; ++i) {
    if (patches[i].size() != d) {
      throw std::invalid_argument("patches in a batch must share a dimension");
    }
    data.col(i) = patches[i];
  }

  const Eigen::Index max_rank = std::min<Eigen::Index>(d, count - 1);
  if (rank > max_rank) {
    warn("subspace rank " + std::to_string(rank) + " clipped to " +
         std::to_string(max_rank));
    rank = max_rank;
  }
  if (rank < 0) rank = 0;

  AffineSubspace space;
  space.mean = data.rowwise().mean();
  space.effective_count = static_cast<double>(count);
  data.colwise() -= space.mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinU);
  const Eigen::Index r = numerical_rank(svd.singularValues(), rank);
  space.basis = svd.matrixU().leftCols(r);
  space.weights = svd.singularValues().head(r);
  space.basis = reorthonormalize(space.basis);
  return space;
}

double residual_distance(const AffineSubspace& space, const PatchVector& y) {
  check_dim(space, y);
  const Eigen::VectorXd centered = y - space.mean;
  if (space.rank() == 0) return centered.norm();
  const Eigen::VectorXd coeffs = space.basis.transpose() * centered;
  return (centered - space.basis * coeffs).norm();
}

double prediction_error(const AffineSubspace& space, const PatchVector& y) {
  return residual_distance(space, y) /
         std::sqrt(static_cast<double>(space.dim()));
}

AffineSubspace update(const AffineSubspace& space, const PatchVector& y,
                      double forgetting, Eigen::Index rank_cap) {
  check_dim(space, y);
  if (!(forgetting > 0.0 && forgetting <= 1.0)) {
    throw std::invalid_argument("forgetting factor must be in (0, 1]");
  }
  if (rank_cap < 0) rank_cap = 0;

  const double decayed = forgetting * space.effective_count;
  const double count = decayed + 1.0;
  const Eigen::VectorXd diff = y - space.mean;

  AffineSubspace out;
  out.effective_count = count;
  out.mean = space.mean + diff / count;

  // The new sample contributes scatter decayed/(decayed+1) * diff diff^T
  // about the updated mean.
  const Eigen::VectorXd shift = std::sqrt(decayed / count) * diff;
  const double shift_norm = shift.norm();
  if (shift_norm == 0.0) {
    out.basis = space.basis;
    out.weights = space.weights;
    return out;
  }

  const Eigen::Index r = space.rank();
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(r);
  Eigen::VectorXd residual = shift;
  if (r > 0) {
    coeffs = space.basis.transpose() * shift;
    residual -= space.basis * coeffs;
    // second projection pass for orthogonality of the new direction
    const Eigen::VectorXd again = space.basis.transpose() * residual;
    residual -= space.basis * again;
    coeffs += again;
  }
  const double residual_norm = residual.norm();
  const bool new_direction = residual_norm > 1e-10 * shift_norm;

  const Eigen::Index rows = r + (new_direction ? 1 : 0);
  Eigen::MatrixXd core = Eigen::MatrixXd::Zero(rows, r + 1);
  const double scale = std::sqrt(forgetting);
  for (Eigen::Index i = 0; i < r; ++i) core(i, i) = scale * space.weights(i);
  core.col(r).head(r) = coeffs;
  if (new_direction) core(r, r) = residual_norm;

  Eigen::MatrixXd extended(space.dim(), rows);
  if (r > 0) extended.leftCols(r) = space.basis;
  if (new_direction) extended.col(r) = residual / residual_norm;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(core, Eigen::ComputeFullU);
  const Eigen::Index keep = numerical_rank(svd.singularValues(), rank_cap);
  out.basis = reorthonormalize(extended * svd.matrixU().leftCols(keep));
  out.weights = svd.singularValues().head(keep);
  return out;
}

AffineSubspace gated_update(const AffineSubspace& space, const PatchVector& y,
                            double base_forgetting, double p_occlusion,
                            Eigen::Index rank_cap, double gate_threshold) {
  if (!(p_occlusion >= 0.0 && p_occlusion <= 1.0)) {
    throw std::invalid_argument("p_occlusion must be in [0, 1]");
  }
  if (p_occlusion > gate_threshold) return space;
  return update(space, y, base_forgetting, rank_cap);
}

void write_snapshot(std::ostream& os, const AffineSubspace& space) {
  os << "format_version=1 dim=" << space.dim() << " rank=" << space.rank()
     << " effective_count=" << format_double(space.effective_count) << '\n';
  os << "mean";
  for (Eigen::Index i = 0; i < space.dim(); ++i) {
    os << ' ' << format_double(space.mean(i));
  }
  os << "\nweights";
  for (Eigen::Index i = 0; i < space.rank(); ++i) {
    os << ' ' << format_double(space.weights(i));
  }
  os << '\n';
  for (Eigen::Index j = 0; j < space.rank(); ++j) {
    os << "basis";
    for (Eigen::Index i = 0; i < space.dim(); ++i) {
      os << ' ' << format_double(space.basis(i, j));
    }
    os << '\n';
  }
}

namespace {

std::vector<double> read_row(std::istream& is, const std::string& tag) {
  std::string line;
  if (!std::getline(is, line)) {
    throw std::runtime_error("snapshot truncated before '" + tag + "' row");
  }
  std::istringstream row(line);
  std::string head;
  row >> head;
  if (head != tag) {
    throw std::runtime_error("snapshot expected '" + tag + "' row, got '" +
                             head + "'");
  }
  std::vector<double> values;
  std::string token;
  while (row >> token) values.push_back(std::stod(token));
  return values;
}

}  // namespace

AffineSubspace read_snapshot(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw std::runtime_error("empty snapshot");
  std::istringstream hs(header);
  std::string field;
  long version = -1;
  Eigen::Index dim = -1;
  Eigen::Index rank = -1;
  double count = 0.0;
  while (hs >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("bad snapshot header field '" + field + "'");
    }
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "format_version") version = std::stol(value);
    else if (key == "dim") dim = std::stol(value);
    else if (key == "rank") rank = std::stol(value);
    else if (key == "effective_count") count = std::stod(value);
    else throw std::runtime_error("unknown snapshot header key '" + key + "'");
  }
  if (version != 1) throw std::runtime_error("unsupported snapshot version");
  if (dim < 1 || rank < 0 || rank > dim) {
    throw std::runtime_error("bad snapshot dimensions");
  }

  AffineSubspace space;
  space.effective_count = count;
  const auto mean = read_row(is, "mean");
  const auto weights = read_row(is, "weights");
  if (static_cast<Eigen::Index>(mean.size()) != dim ||
      static_cast<Eigen::Index>(weights.size()) != rank) {
    throw std::runtime_error("snapshot row length mismatch");
  }
  space.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), dim);
  space.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), rank);
  space.basis.resize(dim, rank);
  for (Eigen::Index j = 0; j < rank; ++j) {
    const auto col = read_row(is, "basis");
    if (static_cast<Eigen::Index>(col.size()) != dim) {
      throw std::runtime_error("snapshot basis row length mismatch");
    }
    space.basis.col(j) = Eigen::Map<const Eigen::VectorXd>(col.data(), dim);
  }
  return space;
}

CameraModel::CameraModel(ModelConfig config) : config_(config) {
  if (config_.init_window < 2) {
    throw std::invalid_argument("subspace init window must be >= 2");
  }
  if (config_.mode == UpdateMode::kWindow &&
      config_.window < config_.init_window) {
    throw std::invalid_argument("subspace window must be >= init window");
  }
  if (!(config_.forgetting > 0.0 && config_.forgetting <= 1.0)) {
    throw std::invalid_argument("forgetting factor must be in (0, 1]");
  }
}

double CameraModel::score(const PatchVector& y) const {
  if (initialized_) return prediction_error(space_, y);
  if (history_.empty()) return 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(history_.front().size());
  for (const auto& p : history_) mean += p;
  mean /= static_cast<double>(history_.size());
  if (y.size() != mean.size()) {
    throw std::invalid_argument("patch dimension changed mid-stream");
  }
  return (y - mean).norm() / std::sqrt(static_cast<double>(y.size()));
}

void CameraModel::observe(const PatchVector& y, double p_occlusion) {
  if (p_occlusion > config_.gate_threshold) return;
  if (!initialized_) {
    history_.push_back(y);
    if (history_.size() >= config_.init_window) initialize();
    return;
  }
  if (config_.mode == UpdateMode::kIncremental) {
    space_ = update(space_, y, config_.forgetting, config_.rank_cap);
    return;
  }
  history_.push_back(y);
  while (history_.size() > config_.window) history_.pop_front();
  std::vector<PatchVector> batch(history_.begin(), history_.end());
  space_ = init_from_batch(
      batch, std::min<Eigen::Index>(config_.rank_cap,
                                    static_cast<Eigen::Index>(batch.size()) - 1));
}

void CameraModel::initialize() {
  std::mt19937_64 rng(config_.seed + jitter_calls_++);
  std::normal_distribution<double> jitter(0.0, config_.init_jitter);
  std::vector<PatchVector> batch;
  batch.reserve(history_.size());
  for (const auto& p : history_) {
    PatchVector q = p;
    if (config_.init_jitter > 0.0) {
      for (Eigen::Index i = 0; i < q.size(); ++i) q(i) += jitter(rng);
    }
    batch.push_back(std::move(q));
  }
  const auto max_rank = static_cast<Eigen::Index>(batch.size()) - 1;
  space_ = init_from_batch(batch, std::min(config_.rank_cap, max_rank));
  initialized_ = true;
  if (config_.mode == UpdateMode::kIncremental) history_.clear();
}

}  // namespace occhmm::subspace
