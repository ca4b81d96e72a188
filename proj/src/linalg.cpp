#include "regtune/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "regtune/error.hpp"

namespace regtune::linalg {

namespace {

constexpr double symmetry_tol = 1e-10;
constexpr double pivot_tol = 1e-12;

bool is_symmetric(const Matrix& G)
{
    if (G.rows() != G.cols()) return false;
    const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
    return (G - G.transpose()).cwiseAbs().maxCoeff() <= symmetry_tol * scale;
}

} // namespace

Matrix SpectralDecomp::reconstruct() const
{
    return eigvecs * eigvals.asDiagonal() * eigvecs.transpose();
}

Vector spd_solve(const Matrix& A, const Vector& b)
{
    if (A.rows() != A.cols() || A.rows() != b.size())
        throw Error(ErrorKind::dimension_mismatch, "spd_solve: shape mismatch");
    if (A.rows() == 0) return Vector(0);
    if (!is_symmetric(A)) throw Error(ErrorKind::not_spd, "matrix is not symmetric");

    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::not_spd, "Cholesky factorization failed");
    // LLT only fails on non-positive pivots; near-singular systems slip through with tiny ones.
    const Vector pivots = llt.matrixL().toDenseMatrix().diagonal().cwiseAbs2();
    const double scale = A.diagonal().cwiseAbs().maxCoeff();
    if (pivots.minCoeff() <= pivot_tol * scale)
        throw Error(ErrorKind::not_spd, "Cholesky pivot collapsed (rank deficient)");
    return llt.solve(b);
}

SpectralDecomp sym_eig(const Matrix& G)
{
    if (!is_symmetric(G)) throw Error(ErrorKind::not_symmetric, "sym_eig needs a symmetric matrix");
    // Householder tridiagonalization followed by implicit symmetric QR; eigenvalues ascending.
    Eigen::SelfAdjointEigenSolver<Matrix> solver(G);
    if (solver.info() != Eigen::Success) throw Error(ErrorKind::no_convergence, "eigensolver did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

Matrix gram_shift_inverse(const SpectralDecomp& gram, double lambda)
{
    if (!(lambda > 0.0)) throw Error(ErrorKind::invalid_config, "gram_shift_inverse needs lambda > 0");
    // Gram spectra are >= 0; roundoff can push the smallest slightly negative.
    const Vector inv = gram.eigvals.unaryExpr([lambda](double v) { return 1.0 / (std::max(v, 0.0) + lambda); });
    return gram.eigvecs * inv.asDiagonal() * gram.eigvecs.transpose();
}

Matrix gram_shift_inverse(const Matrix& A, double lambda)
{
    return gram_shift_inverse(sym_eig(A.transpose() * A), lambda);
}

double Polynomial::operator()(double x) const
{
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
    return acc;
}

int Polynomial::degree(double tol) const
{
    for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k)
        if (std::abs(coeffs[static_cast<std::size_t>(k)]) > tol) return k;
    return -1;
}

Polynomial from_roots(const std::vector<double>& roots)
{
    Polynomial p{{1.0}};
    for (double r : roots) {
        std::vector<double> next(p.coeffs.size() + 1, 0.0);
        for (std::size_t k = 0; k < p.coeffs.size(); ++k) {
            next[k + 1] += p.coeffs[k];
            next[k] -= r * p.coeffs[k];
        }
        p.coeffs = std::move(next);
    }
    return p;
}

Polynomial interpolate(const std::vector<double>& x, const std::vector<double>& v)
{
    const auto n = static_cast<Eigen::Index>(x.size());
    Matrix V(n, n);
    Vector rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double pw = 1.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            V(i, k) = pw;
            pw *= x[static_cast<std::size_t>(i)];
        }
        rhs(i) = v[static_cast<std::size_t>(i)];
    }
    const Vector c = V.fullPivLu().solve(rhs);
    return {std::vector<double>(c.data(), c.data() + c.size())};
}

RationalGramInverse interpolate_gram_inverse(const Matrix& A, const std::vector<double>& nodes)
{
    const auto s = A.cols();
    if (static_cast<Eigen::Index>(nodes.size()) != s + 1)
        throw Error(ErrorKind::invalid_config, "need s+1 interpolation nodes");
    const SpectralDecomp gram = sym_eig(A.transpose() * A);

    std::vector<double> roots;
    for (Eigen::Index i = 0; i < s; ++i) roots.push_back(-std::max(gram.eigvals(i), 0.0));
    RationalGramInverse out{from_roots(roots), {}};

    std::vector<Matrix> samples;
    for (double node : nodes) samples.push_back(out.Q(node) * gram_shift_inverse(gram, node));

    out.P.assign(static_cast<std::size_t>(s), std::vector<Polynomial>(static_cast<std::size_t>(s)));
    for (Eigen::Index i = 0; i < s; ++i) {
        for (Eigen::Index j = 0; j < s; ++j) {
            std::vector<double> vals;
            for (const auto& M : samples) vals.push_back(M(i, j));
            out.P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = interpolate(nodes, vals);
        }
    }
    return out;
}

} // namespace regtune::linalg
