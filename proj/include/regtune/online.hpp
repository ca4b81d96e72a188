#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "regtune/piecewise.hpp"

namespace regtune {

/// Continuous exponential weights over a family of 1-D slices.
/// A slice is a copy of the domain [lo, hi] tagged with a fixed second coordinate
/// (lambda2 for ElasticNet, tau for classification; one untagged slice in 1-D).
/// w(x, s) = exp(zeta * sum_t (1 - l_t(x, s) / H)), proportional to exp(-zeta * L_s(x) / H).
struct OnlineState
{
    Box domain;
    std::vector<double> slice_values;          // tag per slice
    std::vector<PiecewiseQuadratic> cum_loss;  // sum of clamped round curves, per slice
    double zeta = 1.0;
    double H = 0.0;  // 0 until fixed (at the first update when left automatic)
    std::uint64_t seed = 0;
    std::mt19937_64 rng;
    std::size_t round = 0;
    double clamp_sum = 0.0;  // sum over rounds of clamped domain fraction (averaged over slices)
};

/// `H` empty: set at the first update to 4x the largest value of the first round's curves.
OnlineState ew_init(const Box& domain, double zeta, std::optional<double> H, std::uint64_t seed,
                    std::vector<double> slice_values = {0.0});

struct OnlineDraw
{
    std::size_t slice = 0;
    double x = 0.0;
};

/// Unnormalized mass per piece of every slice (shared constant exp(-zeta min L / H) removed).
std::vector<std::vector<double>> ew_piece_masses(const OnlineState& state);

/// Slice and piece by mass, then inverse-CDF bisection inside the piece.
OnlineDraw ew_sample(OnlineState& state);

/// Adds min(curve_s, H) to every slice. Returns the clamped fraction of the domain (mean over slices).
double ew_update(OnlineState& state, const std::vector<PiecewiseQuadratic>& curves);

/// Adaptive Simpson integral of exp(-k (q(x) - shift)) over [lo, hi] for one quadratic piece.
double piece_mass(const QuadPiece& piece, double k, double shift, double rel_tol = 1e-8);

/// Default step size sqrt(ln T / T), with ln T floored at 1 so that T = 1, 2 stay valid; capped at 1.
double default_zeta(std::size_t T);

struct OnlineParams
{
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double tau = 0.0;
};

struct RoundRecord
{
    OnlineParams params;
    double loss = 0.0;
};

struct RegretReport
{
    std::string mode;
    std::size_t T = 0;
    std::vector<RoundRecord> rounds;
    OnlineParams hindsight_params;
    double hindsight_total = 0.0;
    double online_total = 0.0;
    double regret = 0.0;
    double avg_regret = 0.0;
    double zeta = 0.0;
    double H = 0.0;
    bool doubling = false;
    double clamp_rate = 0.0;
    std::map<double, std::size_t> dispersion_counts;
    std::vector<std::vector<std::vector<double>>> breakpoints;  // [round][slice] -> sorted knots
};

struct OnlineOptions
{
    TuneMode mode = TuneMode::lasso;
    Box domain;
    std::optional<double> zeta;  // default_zeta(T) when empty
    bool doubling = false;       // restart weights on epochs of length 1, 2, 4, ...
    std::optional<double> H;
    std::uint64_t seed = 0;
    int slices = 32;       // lambda2 slices in en mode
    int ridge_grid = 257;  // interpolation nodes for ridge round curves
    std::vector<double> epsilons;  // dispersion windows; default {T^-1/2}
    bool keep_breakpoints = false;

    void validate() const;
};

/// Everything the generic loop needs about one round, produced after the draw.
struct RoundData
{
    std::vector<PiecewiseQuadratic> curves;          // per slice, over the domain
    std::vector<std::vector<double>> breakpoints;    // per slice, discontinuity/knot locations
    std::function<double(std::size_t slice, double x)> loss;  // exact loss of playing (slice, x)
};

struct Hindsight
{
    std::size_t slice = 0;
    double x = 0.0;
    double total = 0.0;
};

struct LoopConfig
{
    Box domain;
    std::vector<double> slice_values{0.0};
    std::optional<double> zeta;
    bool doubling = false;
    std::optional<double> H;
    std::uint64_t seed = 0;
    std::vector<double> epsilons;
    bool keep_breakpoints = false;
};

/// Shared online loop. `hindsight` receives the per-slice sums of raw round curves;
/// when empty the best fixed parameter is the minimum over slices of those sums.
RegretReport run_slices(std::size_t T, const LoopConfig& cfg, const std::function<RoundData(std::size_t)>& round,
                        const std::function<Hindsight(const std::vector<PiecewiseQuadratic>&)>& hindsight,
                        const std::function<OnlineParams(std::size_t slice, double x)>& to_params);

/// Regression validation loss as the online loss.
RegretReport run_online(const std::vector<ProblemInstance>& stream, const OnlineOptions& opts);

/// Max over slices and windows of length eps of the pooled breakpoint count (closed windows).
std::map<double, std::size_t> dispersion_probe(const std::vector<std::vector<double>>& breakpoint_sets,
                                               const std::vector<double>& epsilons);

} // namespace regtune
