#pragma once

#include "gaugeatlas/types.hpp"

#include <cstdint>
#include <random>

namespace gaugeatlas {

/// Orthogonal factor U V^T of the polar decomposition, from a Jacobi SVD.
/// Well defined (though not unique) for singular inputs.
Matrix polar_factor(const Matrix& m);

double min_singular_value(const Matrix& m);

/// ||M^T M - I||_max.
double orthonormality_error(const Matrix& m);

/// Haar-distributed d x k matrix with orthonormal columns.
Matrix haar_orthonormal(std::size_t d, std::size_t k, std::mt19937_64& rng);

/// 2D rotation by `angle` radians.
Matrix rotation2d(double angle);

/// Top-`k` eigenvectors of a symmetric matrix, ordered by decreasing eigenvalue,
/// each column sign-normalised so its largest-magnitude entry is positive.
Matrix top_eigenvectors(const Matrix& symmetric, std::size_t k);

/// Sign convention shared by every basis the engine fits: the entry of
/// largest magnitude in each column is made positive (lower row wins ties).
void normalize_column_signs(Matrix& basis);

/// Deterministic 64-bit seed mixing (splitmix64 finaliser chain).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace gaugeatlas
