#include "dfl/loss.hpp"

#include <cmath>
#include <string>

#include "dfl/linalg.hpp"

namespace dfl {

namespace {

// log(1 + exp(-z)) without overflow.
double softplus_neg(double z) {
  return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_weight(double weight) {
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw ConfigError("loss weight must be positive and finite, got " + std::to_string(weight));
  }
}

}  // namespace

LossModel LossModel::quadratic(Matrix a, Vector center, double weight) {
  check_weight(weight);
  if (a.rows() != a.cols() || a.rows() != center.size() || center.size() < 1) {
    throw ShapeError("quadratic loss: A must be d x d with d = dim(center) >= 1");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ConfigError("quadratic loss: A must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw ConfigError("quadratic loss: A must be positive semidefinite");
  }

  LossModel m;
  m.kind_ = LossKind::quadratic;
  m.dimension_ = center.size();
  m.weight_ = weight;
  m.a_ = std::move(a);
  m.center_ = std::move(center);
  m.lipschitz_ = largest_eigenvalue(m.a_);
  return m;
}

LossModel LossModel::from_data(LossKind kind, Dataset data, double weight) {
  check_weight(weight);
  if (kind == LossKind::quadratic) {
    throw ConfigError("quadratic losses are built from (A, c), not from a dataset");
  }
  data.validate();
  if (kind != LossKind::least_squares && !data.classification) {
    throw ConfigError(std::string(to_string(kind)) + " loss needs +-1 labels");
  }

  LossModel m;
  m.kind_ = kind;
  m.dimension_ = data.d();
  m.weight_ = weight;
  const auto n = static_cast<double>(data.n());
  switch (kind) {
    case LossKind::least_squares:
      m.lipschitz_ = largest_eigenvalue(data.features.transpose() * data.features) / n;
      break;
    case LossKind::logistic:
      m.lipschitz_ = largest_eigenvalue(data.features.transpose() * data.features) / (4.0 * n);
      break;
    case LossKind::sigmoid_nonconvex:
      m.lipschitz_ = data.features.rowwise().squaredNorm().maxCoeff() * kSigmoidCurvatureBound;
      break;
    case LossKind::quadratic:
      break;
  }
  m.data_ = std::move(data);
  return m;
}

LossModel LossModel::with_weight(double weight) const {
  check_weight(weight);
  LossModel m = *this;
  m.weight_ = weight;
  return m;
}

void LossModel::check(const Vector& w) const {
  if (w.size() != dimension_) {
    throw ShapeError("loss: parameter dimension " + std::to_string(w.size()) +
                     " does not match model dimension " + std::to_string(dimension_));
  }
}

double LossModel::value(const Vector& w) const {
  check(w);
  switch (kind_) {
    case LossKind::quadratic: {
      const Vector diff = w - center_;
      return 0.5 * diff.dot(a_ * diff);
    }
    case LossKind::least_squares:
      return 0.5 * (data_.features * w - data_.labels).squaredNorm() / static_cast<double>(data_.n());
    case LossKind::logistic: {
      const Vector margins = (data_.features * w).cwiseProduct(data_.labels);
      double sum = 0.0;
      for (Index i = 0; i < margins.size(); ++i) sum += softplus_neg(margins(i));
      return sum / static_cast<double>(data_.n());
    }
    case LossKind::sigmoid_nonconvex: {
      const Vector margins = (data_.features * w).cwiseProduct(data_.labels);
      double sum = 0.0;
      for (Index i = 0; i < margins.size(); ++i) sum += sigmoid(-margins(i));
      return sum / static_cast<double>(data_.n());
    }
  }
  return 0.0;
}

Vector LossModel::gradient(const Vector& w) const {
  check(w);
  const auto n = static_cast<double>(data_.n());
  switch (kind_) {
    case LossKind::quadratic:
      return a_ * (w - center_);
    case LossKind::least_squares:
      return data_.features.transpose() * (data_.features * w - data_.labels) / n;
    case LossKind::logistic: {
      const Vector margins = (data_.features * w).cwiseProduct(data_.labels);
      Vector coeff(margins.size());
      for (Index i = 0; i < margins.size(); ++i) coeff(i) = -data_.labels(i) * sigmoid(-margins(i));
      return data_.features.transpose() * coeff / n;
    }
    case LossKind::sigmoid_nonconvex: {
      const Vector margins = (data_.features * w).cwiseProduct(data_.labels);
      Vector coeff(margins.size());
      for (Index i = 0; i < margins.size(); ++i) {
        const double s = sigmoid(-margins(i));
        coeff(i) = -data_.labels(i) * s * (1.0 - s);
      }
      return data_.features.transpose() * coeff / n;
    }
  }
  return Vector::Zero(dimension_);
}

namespace {

void check_weights(std::span<const LossModel> models) {
  if (models.empty()) throw ConfigError("global objective: no client models");
  double total = 0.0;
  for (const auto& m : models) total += m.weight();
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("global objective: client weights sum to " + std::to_string(total) +
                      ", expected 1");
  }
}

}  // namespace

double weighted_global_objective(std::span<const LossModel> models, const Vector& w) {
  check_weights(models);
  double sum = 0.0;
  for (const auto& m : models) sum += m.weighted_value(w);
  return sum;
}

Vector weighted_global_gradient(std::span<const LossModel> models, const Vector& w) {
  check_weights(models);
  Vector g = Vector::Zero(w.size());
  for (const auto& m : models) g += m.weighted_gradient(w);
  return g;
}

}  // namespace dfl
