#pragma once

#include <vector>

#include "regtune/instances.hpp"

namespace regtune::linalg {

/// Eigenpairs of a symmetric matrix: G = E diag(eigvals) E^T, eigvals ascending.
struct SpectralDecomp
{
    Vector eigvals;
    Matrix eigvecs;

    Matrix reconstruct() const;
};

/// Cholesky solve. Throws NotSPD when the factorization breaks down or a pivot
/// collapses below 1e-12 of the diagonal scale.
Vector spd_solve(const Matrix& A, const Vector& b);

/// Throws NotSymmetric if |G - G^T| exceeds 1e-10 (relative to max |G|).
SpectralDecomp sym_eig(const Matrix& G);

/// (A^T A + lambda I)^{-1} built from the eigenpairs of A^T A.
Matrix gram_shift_inverse(const Matrix& A, double lambda);
Matrix gram_shift_inverse(const SpectralDecomp& gram, double lambda);

/// Polynomial with coefficients in increasing degree order.
struct Polynomial
{
    std::vector<double> coeffs;

    double operator()(double x) const;
    int degree(double tol) const;
    double leading() const { return coeffs.empty() ? 0.0 : coeffs.back(); }
};

/// Entries of (A^T A + lambda I)^{-1} as P_ij(lambda) / Q(lambda).
/// Q = prod_i (Lambda_i + lambda) comes from the spectrum; each P_ij is recovered
/// by interpolating Q(lambda) * B(lambda)_ij at s+1 nodes, so P_ij carries up to
/// degree s and the structure (degree s-1, monic diagonal) is left for callers to check.
struct RationalGramInverse
{
    Polynomial Q;
    std::vector<std::vector<Polynomial>> P;  // s x s

    double eval(Eigen::Index i, Eigen::Index j, double lambda) const
    {
        return P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](lambda) / Q(lambda);
    }
};

RationalGramInverse interpolate_gram_inverse(const Matrix& A, const std::vector<double>& nodes);

/// Monic polynomial with the given roots.
Polynomial from_roots(const std::vector<double>& roots);

/// Vandermonde interpolation through (x_k, v_k).
Polynomial interpolate(const std::vector<double>& x, const std::vector<double>& v);

} // namespace regtune::linalg
