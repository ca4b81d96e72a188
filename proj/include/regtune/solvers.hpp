#pragma once

#include <vector>

#include "regtune/instances.hpp"

namespace regtune {

// All solvers minimize
//     f(beta) = 1/2 ||y - X beta||^2 + lambda1 ||beta||_1 + lambda2/2 ||beta||^2,
// the halved convention under which the equicorrelation closed form
//     beta_E = (X_E^T X_E + lambda2 I)^{-1} (X_E^T y - lambda1 s)
// holds exactly.

struct ENParams
{
    double lambda1 = 1.0;
    double lambda2 = 0.0;

    void validate() const;
};

struct SignedSupport
{
    std::vector<Eigen::Index> indices;  // strictly increasing
    std::vector<int> signs;             // +1 / -1, aligned with indices

    std::size_t size() const { return indices.size(); }
    bool empty() const { return indices.empty(); }
    void validate() const;

    /// Nonzero pattern of beta (entries with |beta_j| > zero_tol).
    static SignedSupport of(const Vector& beta, double zero_tol = 0.0);

    friend bool operator==(const SignedSupport&, const SignedSupport&) = default;
};

struct Coefs
{
    Vector beta;

    Eigen::Index l0(double zero_tol = 0.0) const;
    double l1() const { return beta.lpNorm<1>(); }
    double l2sq() const { return beta.squaredNorm(); }
};

struct KKTReport
{
    double max_active_violation = 0.0;
    double max_inactive_excess = 0.0;
    bool passed = true;
};

struct CDOptions
{
    double tol = 1e-10;
    long max_iter = 100000;
    /// Optional warm start; zero otherwise.
    const Vector* start = nullptr;
};

double en_objective(const Dataset& ds, const Vector& beta, const ENParams& p);

Coefs ridge_fit(const Dataset& ds, double lambda2);

/// Cyclic coordinate descent; stops once the largest coordinate move in a sweep is <= tol.
Coefs en_fit_cd(const Dataset& ds, const ENParams& p, const CDOptions& opts = {});

/// Closed form on a fixed signed support; zero elsewhere.
Coefs en_fit_support(const Dataset& ds, const ENParams& p, const SignedSupport& supp);

/// Stationarity on the nonzero coordinates and the subgradient bound elsewhere, using the
/// augmented correlations x_j^T (y - X beta) - lambda2 beta_j.
KKTReport kkt_check(const Dataset& ds, const Coefs& c, const ENParams& p, double tol);

/// X~ = [X; sqrt(lambda2) I], y~ = [y; 0]: ElasticNet(ds, l1, l2) == LASSO(augment(ds, l2), l1).
Dataset augment(const Dataset& ds, double lambda2);

Vector predict(const Coefs& c, const Matrix& X);

/// (1/m') ||y' - X' beta||^2.
double val_loss(const Coefs& c, const Dataset& val);

} // namespace regtune
