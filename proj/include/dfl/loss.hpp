#pragma once

#include <span>

#include "dfl/dataset.hpp"
#include "dfl/types.hpp"

namespace dfl {

/// Bound on |sigmoid''|, attained at z = +-ln(2 + sqrt 3).
inline constexpr double kSigmoidCurvatureBound = 0.096225044864937627;  // 1 / (6 sqrt 3)

/// A client's smooth local objective F_k together with its data weight |D_k|/|D|.
///
/// `value`/`gradient`/`lipschitz_constant` describe the unweighted F_k. The
/// consensus engine minimizes G_k = weight * F_k, exposed through the
/// `weighted_*` accessors.
///
/// Kinds:
///   quadratic          F(w) = 1/2 (w-c)^T A (w-c), A symmetric PSD
///   least-squares      F(w) = 1/(2n) ||Xw - y||^2
///   logistic           F(w) = 1/n sum log(1 + exp(-y_i <x_i, w>))
///   sigmoid-nonconvex  F(w) = 1/n sum sigmoid(-y_i <x_i, w>)
///
/// Instances are immutable; the Lipschitz constant is computed once at construction.
class LossModel {
 public:
  static LossModel quadratic(Matrix a, Vector center, double weight = 1.0);
  static LossModel from_data(LossKind kind, Dataset data, double weight = 1.0);

  LossKind kind() const noexcept { return kind_; }
  Index dimension() const noexcept { return dimension_; }
  double weight() const noexcept { return weight_; }
  /// |D_k| for data-backed kinds, 0 for quadratics.
  Index samples() const noexcept { return data_.n(); }

  const Matrix& hessian_matrix() const noexcept { return a_; }
  const Vector& center() const noexcept { return center_; }
  const Dataset& data() const noexcept { return data_; }

  double value(const Vector& w) const;
  Vector gradient(const Vector& w) const;
  /// Quadratic: lambda_max(A). Least-squares: lambda_max(X^T X)/n.
  /// Logistic: lambda_max(X^T X)/(4n). Sigmoid: max_i ||x_i||^2 / (6 sqrt 3).
  double lipschitz_constant() const noexcept { return lipschitz_; }

  double weighted_value(const Vector& w) const { return weight_ * value(w); }
  Vector weighted_gradient(const Vector& w) const { return weight_ * gradient(w); }
  double weighted_lipschitz() const noexcept { return weight_ * lipschitz_; }

  LossModel with_weight(double weight) const;

 private:
  LossModel() = default;
  void check(const Vector& w) const;

  LossKind kind_ = LossKind::quadratic;
  Index dimension_ = 0;
  double weight_ = 1.0;
  double lipschitz_ = 0.0;
  Matrix a_;
  Vector center_;
  Dataset data_;
};

/// sum_k weight_k F_k(w). Weights must sum to 1 within 1e-12.
double weighted_global_objective(std::span<const LossModel> models, const Vector& w);

/// sum_k weight_k grad F_k(w).
Vector weighted_global_gradient(std::span<const LossModel> models, const Vector& w);

}  // namespace dfl
