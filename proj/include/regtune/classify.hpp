#pragma once

#include <optional>
#include <vector>

#include "regtune/online.hpp"

namespace regtune {

/// Entry j is 1 iff <x'_j, beta> >= tau.
Eigen::VectorXi threshold_predict(const Coefs& c, const Matrix& Xv, double tau);

/// Fraction of mismatches between 0/1 predictions and 0/1 labels.
double zero_one_loss(const Eigen::VectorXi& pred, const Vector& y);

/// Throws InvalidConfig unless every entry is exactly 0 or 1.
void require_binary(const Vector& y);

enum class BreakAxis { lambda1, lambda2, tau };

/// Piecewise-constant 0-1 loss along one axis of [lo, hi].
/// Piece k covers [points[k-1], points[k]) (closed on the left).
struct BreakpointSet
{
    BreakAxis axis = BreakAxis::lambda1;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> points;
    std::vector<double> piece_losses;  // points.size() + 1 values

    double value_at(double x) const;
    PiecewiseQuadratic as_curve() const;
};

/// lambda2 values in box where some validation score mu_j(lambda2) equals tau
/// (log-grid scan of scan_n points, then bisection to tol).
BreakpointSet ridge_breakpoints(const ProblemInstance& inst, double tau, const Box& box, int scan_n = 512,
                                double tol = 1e-10);

/// lambda1 values in box where an affine per-segment score u_j - lambda1 v_j equals tau.
BreakpointSet lasso_breakpoints(const RegPath& path, const Dataset& val, double tau, const Box& box);

struct ClassifyOptions
{
    TuneMode mode = TuneMode::lasso;
    Box box;                          // lambda box (lambda1 for lasso/en, lambda2 for ridge; en uses it for both)
    std::optional<double> tau_lo;     // default -tau_bound
    std::optional<double> tau_hi;     // default +tau_bound
    int slices = 16;                  // lambda2 slices in en mode
    int scan_n = 512;                 // ridge root isolation

    void validate() const;
};

struct ClassifyResult
{
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double tau = 0.0;
    double loss = 0.0;
    TuneMode mode = TuneMode::lasso;
    std::size_t n_instances = 0;
    std::size_t lambda_intervals = 0;  // constant-order intervals examined
    double tau_lo = 0.0;
    double tau_hi = 0.0;
};

/// R * p * B, where R bounds the validation features and B the largest coefficient norm over the box
/// (l1 at the smallest lambda1 for lasso/en, l2 at the smallest lambda2 for ridge).
double default_tau_bound(const std::vector<ProblemInstance>& insts, const ClassifyOptions& opts);

/// Exact minimization of the average 0-1 loss over (lambda, tau): lambda is split at every point
/// where two validation scores cross or a path knot occurs; inside each interval the best tau
/// comes from a sweep over the sorted scores.
ClassifyResult classify_tune(const std::vector<ProblemInstance>& insts, const ClassifyOptions& opts);

/// Average 0-1 loss of the fit at (lambda1, lambda2) thresholded at tau (lambda1 = 0 means Ridge).
double direct_classify_loss(const std::vector<ProblemInstance>& insts, double lambda1, double lambda2, double tau);

struct ClassifyOnlineOptions
{
    ClassifyOptions tune;  // mode, lambda box, tau box
    int tau_grid = 16;
    int lambda2_slices = 8;  // en mode only
    std::optional<double> zeta;
    bool doubling = false;
    std::uint64_t seed = 0;
    std::vector<double> epsilons;
};

/// Exponential weights over (lambda, tau): exact piecewise-constant losses in lambda on a tau grid.
RegretReport classify_online(const std::vector<ProblemInstance>& stream, const ClassifyOnlineOptions& opts);

} // namespace regtune
