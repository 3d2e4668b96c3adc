#include "dfl/linalg.hpp"

#include <cmath>

namespace dfl {

double largest_eigenvalue(const Matrix& symmetric, double rel_tol, int max_iter) {
  if (symmetric.rows() != symmetric.cols()) {
    throw ShapeError("largest_eigenvalue: matrix is not square");
  }
  const Index d = symmetric.rows();
  if (d == 0) return 0.0;
  if (symmetric.isZero(0.0)) return 0.0;

  // Fixed pseudo-random start so the iterate is almost surely not orthogonal
  // to the dominant eigenvector.
  Rng rng(0x5eed1e55ull);
  Vector v = random_normal_vector(d, rng);
  v.normalize();

  double rho = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector av = symmetric * v;
    rho = v.dot(av);
    const double residual = (av - rho * v).norm();
    const double norm = av.norm();
    if (norm == 0.0) return 0.0;
    if (residual <= rel_tol * std::abs(rho)) break;
    v = av / norm;
  }
  return rho;
}

Vector project_to_ball(const Vector& v, double radius) {
  const double norm = v.norm();
  if (norm <= radius) return v;
  return v * (radius / norm);
}

Matrix random_orthogonal(Index d, Rng& rng) {
  Matrix g(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

Vector random_normal_vector(Index d, Rng& rng) {
  Vector v(d);
  for (Index i = 0; i < d; ++i) v(i) = rng.normal();
  return v;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace dfl
