#include "regtune/solvers.hpp"

#include <algorithm>
#include <cmath>

#include "regtune/error.hpp"
#include "regtune/linalg.hpp"

namespace regtune {

namespace {

// Coefficients this small are treated as zero by kkt_check, so knot evaluations of a
// leaving coordinate (exactly zero up to roundoff) are not read as a sign flip.
constexpr double kkt_zero_tol = 1e-12;

double soft_threshold(double z, double t)
{
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

} // namespace

void ENParams::validate() const
{
    if (!(lambda1 > 0.0) || !std::isfinite(lambda1))
        throw Error(ErrorKind::invalid_config, "lambda1 must be positive");
    if (!(lambda2 >= 0.0) || !std::isfinite(lambda2))
        throw Error(ErrorKind::invalid_config, "lambda2 must be non-negative");
}

void SignedSupport::validate() const
{
    if (indices.size() != signs.size()) throw Error(ErrorKind::invalid_config, "support/sign length mismatch");
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (k > 0 && indices[k] <= indices[k - 1])
            throw Error(ErrorKind::invalid_config, "support indices must be strictly increasing");
        if (signs[k] != 1 && signs[k] != -1) throw Error(ErrorKind::invalid_config, "signs must be +1 or -1");
    }
}

SignedSupport SignedSupport::of(const Vector& beta, double zero_tol)
{
    SignedSupport s;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (std::abs(beta(j)) > zero_tol) {
            s.indices.push_back(j);
            s.signs.push_back(beta(j) > 0 ? 1 : -1);
        }
    }
    return s;
}

Eigen::Index Coefs::l0(double zero_tol) const
{
    return (beta.array().abs() > zero_tol).count();
}

double en_objective(const Dataset& ds, const Vector& beta, const ENParams& p)
{
    return 0.5 * (ds.y - ds.X * beta).squaredNorm() + p.lambda1 * beta.lpNorm<1>() +
           0.5 * p.lambda2 * beta.squaredNorm();
}

Coefs ridge_fit(const Dataset& ds, double lambda2)
{
    if (!(lambda2 > 0.0)) throw Error(ErrorKind::invalid_config, "ridge_fit needs lambda2 > 0");
    return {linalg::gram_shift_inverse(ds.X, lambda2) * (ds.X.transpose() * ds.y)};
}

Coefs en_fit_cd(const Dataset& ds, const ENParams& p, const CDOptions& opts)
{
    if (!(opts.tol > 0.0)) throw Error(ErrorKind::invalid_config, "tol must be positive");
    if (!(p.lambda1 >= 0.0) || !(p.lambda2 >= 0.0)) throw Error(ErrorKind::invalid_config, "negative penalty");
    const auto n = ds.features();
    Vector beta = opts.start ? *opts.start : Vector::Zero(n);
    if (beta.size() != n) throw Error(ErrorKind::dimension_mismatch, "warm start length differs from p");
    const Vector col_sq = ds.X.colwise().squaredNorm();
    Vector resid = ds.y - ds.X * beta;

    for (long sweep = 0; sweep < opts.max_iter; ++sweep) {
        double max_move = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double denom = col_sq(j) + p.lambda2;
            if (denom <= 0.0) continue;  // all-zero column with no ridge term: coordinate stays 0
            const double old = beta(j);
            const double z = ds.X.col(j).dot(resid) + col_sq(j) * old;
            const double next = soft_threshold(z, p.lambda1) / denom;
            if (next != old) {
                resid.noalias() -= (next - old) * ds.X.col(j);
                beta(j) = next;
                max_move = std::max(max_move, std::abs(next - old));
            }
        }
        if (max_move <= opts.tol) return {beta};
    }
    throw Error(ErrorKind::no_convergence, "coordinate descent exceeded max_iter sweeps");
}

Coefs en_fit_support(const Dataset& ds, const ENParams& p, const SignedSupport& supp)
{
    supp.validate();
    Vector beta = Vector::Zero(ds.features());
    if (supp.empty()) return {beta};
    const auto s = static_cast<Eigen::Index>(supp.size());
    Matrix XE(ds.rows(), s);
    Vector sign(s);
    for (Eigen::Index k = 0; k < s; ++k) {
        XE.col(k) = ds.X.col(supp.indices[static_cast<std::size_t>(k)]);
        sign(k) = supp.signs[static_cast<std::size_t>(k)];
    }
    Matrix G = XE.transpose() * XE;
    G.diagonal().array() += p.lambda2;
    Vector bE;
    try {
        bE = linalg::spd_solve(G, XE.transpose() * ds.y - p.lambda1 * sign);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::not_spd)
            throw Error(ErrorKind::general_position_violated, "X_E is rank deficient");
        throw;
    }
    for (Eigen::Index k = 0; k < s; ++k) beta(supp.indices[static_cast<std::size_t>(k)]) = bE(k);
    return {beta};
}

KKTReport kkt_check(const Dataset& ds, const Coefs& c, const ENParams& p, double tol)
{
    const Vector corr = ds.X.transpose() * (ds.y - ds.X * c.beta) - p.lambda2 * c.beta;
    KKTReport r;
    for (Eigen::Index j = 0; j < corr.size(); ++j) {
        const double b = c.beta(j);
        if (std::abs(b) > kkt_zero_tol) {
            const double target = b > 0 ? p.lambda1 : -p.lambda1;
            r.max_active_violation = std::max(r.max_active_violation, std::abs(corr(j) - target));
        } else {
            r.max_inactive_excess = std::max(r.max_inactive_excess, std::abs(corr(j)) - p.lambda1);
        }
    }
    r.max_inactive_excess = std::max(r.max_inactive_excess, 0.0);
    r.passed = r.max_active_violation <= tol && r.max_inactive_excess <= tol;
    return r;
}

Dataset augment(const Dataset& ds, double lambda2)
{
    if (!(lambda2 >= 0.0)) throw Error(ErrorKind::invalid_config, "augment needs lambda2 >= 0");
    const auto m = ds.rows();
    const auto n = ds.features();
    Dataset out{Matrix::Zero(m + n, n), Vector::Zero(m + n)};
    out.X.topRows(m) = ds.X;
    out.X.bottomRows(n).diagonal().setConstant(std::sqrt(lambda2));
    out.y.head(m) = ds.y;
    return out;
}

Vector predict(const Coefs& c, const Matrix& X)
{
    if (X.cols() != c.beta.size()) throw Error(ErrorKind::dimension_mismatch, "predict: feature count mismatch");
    return X * c.beta;
}

double val_loss(const Coefs& c, const Dataset& val)
{
    if (val.features() != c.beta.size() || val.rows() != val.y.size())
        throw Error(ErrorKind::dimension_mismatch, "val_loss: shape mismatch");
    if (val.rows() == 0) throw Error(ErrorKind::dimension_mismatch, "val_loss: empty validation set");
    return (val.y - val.X * c.beta).squaredNorm() / static_cast<double>(val.rows());
}

} // namespace regtune
