#pragma once

#include "dfl/rng.hpp"
#include "dfl/types.hpp"

namespace dfl {

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.
///
/// Iterates until the eigen-residual ||Av - rho v|| falls below
/// `rel_tol * rho` (or `max_iter` is hit) and returns the Rayleigh quotient.
double largest_eigenvalue(const Matrix& symmetric, double rel_tol = 1e-13, int max_iter = 100000);

/// Euclidean projection onto the closed ball of the given radius centered at the origin.
Vector project_to_ball(const Vector& v, double radius);

/// Haar-ish random orthogonal matrix (QR of a Gaussian matrix with sign fix).
Matrix random_orthogonal(Index d, Rng& rng);

Vector random_normal_vector(Index d, Rng& rng);

bool all_finite(const Vector& v);

}  // namespace dfl
