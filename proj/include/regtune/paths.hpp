#pragma once

#include <optional>
#include <vector>

#include "regtune/solvers.hpp"

namespace regtune {

/// One linear piece of the homotopy: beta_E(lambda1) = c1 - lambda1 * c2 on [lo, hi].
struct PathSegment
{
    double lo = 0.0;
    double hi = 0.0;
    SignedSupport support;
    Vector c1;
    Vector c2;

    /// Full-length coefficient vector at lambda1 (no range check).
    Vector beta_at(double lambda1, Eigen::Index p) const;
};

enum class EventKind { join, leave };

struct PathEvent
{
    double lambda1 = 0.0;
    EventKind kind = EventKind::join;
    Eigen::Index feature = 0;
    int sign = 1;
};

struct RegPath
{
    double lambda2 = 0.0;
    double lambda_max = 0.0;  // max_j |x~_j^T y~|; beta = 0 at and above it
    double lambda_min = 0.0;
    Eigen::Index num_features = 0;
    Eigen::Index num_rows = 0;  // rows of the original (un-augmented) training set
    std::vector<PathSegment> segments;  // decreasing lambda1; segments[0].hi == lambda_max
    std::vector<PathEvent> events;

    /// Interior knots in increasing order (segment boundaries strictly between lambda_min and lambda_max).
    std::vector<double> knots() const;
};

struct PathOptions
{
    /// Events closer than this (relative to max(1, lambda)) are processed as one batch.
    double tie_tol = 1e-10;
    /// Maximum number of join/leave events; 0 selects 50 * (m + p).
    long budget = 0;
};

/// Exact LARS-LASSO homotopy from lambda_max down to lambda_min.
RegPath lars_path(const Dataset& ds, double lambda_min, const PathOptions& opts = {});

/// ElasticNet path in lambda1 at fixed lambda2, via the LASSO on augment(ds, lambda2).
RegPath en_path(const Dataset& ds, double lambda2, double lambda_min, const PathOptions& opts = {});

/// lambda_min defaults to 1e-6 * lambda_max.
RegPath en_path(const Dataset& ds, double lambda2);

/// Throws OutOfRange below the path's lambda_min; returns zero at or above lambda_max.
Coefs path_eval(const RegPath& path, double lambda1);

/// Index of the segment containing lambda1, or -1 when lambda1 >= lambda_max.
std::ptrdiff_t find_segment(const RegPath& path, double lambda1);

struct PieceStats
{
    std::size_t count = 0;
    std::size_t max_support = 0;
    bool bound_3p_ok = true;
    bool overparam_bound_ok = true;  // max_support <= m - 1 whenever p > m (LASSO paths only)
};

PieceStats piece_stats(const RegPath& path);

} // namespace regtune
