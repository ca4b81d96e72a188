#pragma once

#include <optional>
#include <string>
#include <vector>

#include "regtune/paths.hpp"

namespace regtune {

enum class ObjectiveKind { val, aic, bic };
enum class TuneMode { ridge, lasso, en };

const char* to_string(ObjectiveKind k);
const char* to_string(TuneMode m);
ObjectiveKind parse_objective(const std::string& s);
TuneMode parse_mode(const std::string& s);

/// loss(lambda1) = a lambda1^2 + b lambda1 + c on [lo, hi].
struct QuadPiece
{
    double lo = 0.0;
    double hi = 0.0;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    int support_size = -1;  // -1 once curves have been summed

    double operator()(double x) const { return (a * x + b) * x + c; }
};

struct PiecewiseQuadratic
{
    std::vector<QuadPiece> pieces;  // ascending, tiling [lo(), hi()]
    ObjectiveKind kind = ObjectiveKind::val;

    double lo() const { return pieces.front().lo; }
    double hi() const { return pieces.back().hi; }
    bool empty() const { return pieces.empty(); }

    /// Piece containing x; at a knot the left piece wins (closed on the right).
    std::size_t locate(double x) const;
    double operator()(double x) const { return pieces[locate(x)](x); }

    /// Interior piece boundaries.
    std::vector<double> knots() const;
};

struct Minimum
{
    double arg = 0.0;
    double value = 0.0;
};

/// Per-segment expansion of (1/m') sum_j (y'_j - u_j + lambda1 v_j)^2.
/// With `upper` above lambda_max a constant zero-coefficient piece extends the curve;
/// below it the curve is truncated. Without `upper` the curve ends at lambda_max.
PiecewiseQuadratic val_loss_curve(const RegPath& path, const Dataset& val, std::optional<double> upper = {});

/// Adds 2|E| (AIC) or 2|E| ln m (BIC) to each piece's constant term.
PiecewiseQuadratic penalize(const PiecewiseQuadratic& curve, ObjectiveKind kind, Eigen::Index m);

/// Endpoints plus interior vertices; ties go to the smaller lambda1.
Minimum minimize_pw(const PiecewiseQuadratic& curve);

/// Largest value over the domain.
double maximize_pw(const PiecewiseQuadratic& curve);

/// Pointwise average over the merged breakpoint set.
PiecewiseQuadratic sum_curves(const std::vector<PiecewiseQuadratic>& curves);

/// Pointwise weighted sum sum_k w_k curve_k over the merged breakpoint set.
PiecewiseQuadratic combine_curves(const std::vector<const PiecewiseQuadratic*>& curves,
                                  const std::vector<double>& weights);

/// Restriction to [lo, hi] (must lie inside the domain).
PiecewiseQuadratic restrict_curve(const PiecewiseQuadratic& curve, double lo, double hi);

/// min(curve, cap), kept exact by splitting pieces where they cross the cap.
/// `clamped_fraction` receives the fraction of the domain length where the cap binds.
PiecewiseQuadratic clamp_curve(const PiecewiseQuadratic& curve, double cap, double* clamped_fraction = nullptr);

/// Ridge validation loss in closed spectral form:
///   loss(l2) = (1/m') sum_j (y'_j - sum_i a_ji / (Lambda_i + l2))^2.
struct RidgeLossEvaluator
{
    Vector eigvals;    // Lambda, ascending, clamped to >= 0
    Matrix coef;       // a_ji: rows = validation rows, cols = eigen-index
    Vector val_y;

    double loss(double lambda2) const;
    double derivative(double lambda2) const;
    /// Validation predictions at lambda2.
    Vector predictions(double lambda2) const;
};

RidgeLossEvaluator ridge_loss_evaluator(const ProblemInstance& inst);

struct Box
{
    double lo = 1e-3;
    double hi = 10.0;

    void validate() const;
};

/// Log-spaced grid of n points spanning [lo, hi].
std::vector<double> log_grid(double lo, double hi, int n);

/// Average of the evaluators minimized over box by derivative-sign scan plus bisection.
Minimum ridge_minimize(const std::vector<RidgeLossEvaluator>& evals, const Box& box, int grid_n = 512,
                       double tol = 1e-12);

double ridge_average_loss(const std::vector<RidgeLossEvaluator>& evals, double lambda2);

struct SliceGrid2D
{
    std::vector<double> lambda2_values;
    std::vector<PiecewiseQuadratic> slices;
    std::vector<std::vector<SignedSupport>> support_fingerprints;

    /// Adjacent slice pairs whose fingerprints differ (a boundary curve crosses between them).
    std::size_t boundary_crossings() const;
    /// Value at (lambda1, lambda2_values[k]).
    double eval(std::size_t k, double lambda1) const { return slices[k](lambda1); }
};

/// Averaged exact lambda1 curve at one lambda2 over [box.lo, box.hi].
PiecewiseQuadratic en_slice(const std::vector<ProblemInstance>& insts, double lambda2, const Box& box,
                            ObjectiveKind kind = ObjectiveKind::val,
                            std::vector<SignedSupport>* fingerprint = nullptr);

/// One slice per log-spaced lambda2 in box; both axes share the box.
SliceGrid2D en_surface(const std::vector<ProblemInstance>& insts, const Box& box, int lambda2_grid_n,
                       ObjectiveKind kind = ObjectiveKind::val);

struct TuneOptions
{
    TuneMode mode = TuneMode::en;
    ObjectiveKind objective = ObjectiveKind::val;
    Box box;
    int slices = 64;
    int refine_iters = 20;
    int ridge_grid = 512;
};

struct TuningResult
{
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double loss = 0.0;
    TuneMode mode = TuneMode::en;
    ObjectiveKind objective = ObjectiveKind::val;
    std::size_t n_instances = 0;
    std::size_t evaluated_slices = 0;
    std::size_t total_breakpoints = 0;
    std::size_t boundary_crossings = 0;
};

/// Exact in lambda1 per slice; lambda2 by slice grid plus golden-section refinement.
TuningResult erm_tune(const std::vector<ProblemInstance>& insts, const TuneOptions& opts);

/// Value of the tuning objective at (lambda1, lambda2) by direct solves (lambda1 = 0 means Ridge).
double direct_objective(const std::vector<ProblemInstance>& insts, double lambda1, double lambda2,
                        ObjectiveKind kind);

} // namespace regtune
