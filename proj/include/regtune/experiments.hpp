#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "regtune/online.hpp"

namespace regtune {

enum class CvKind { loocv, mccv };

const char* to_string(CvKind k);
CvKind parse_cv(const std::string& s);

struct SampleComplexityConfig
{
    Dataset data;
    TuneMode mode = TuneMode::lasso;
    ObjectiveKind objective = ObjectiveKind::val;
    std::vector<int> n_values{1, 2, 4, 9, 18, 36};
    int trials = 10;
    CvKind cv = CvKind::loocv;
    double val_fraction = 0.2;  // mccv only
    Box box;
    int slices = 16;        // en mode
    int refine_iters = 8;   // en mode
    int heldout_factor = 10;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SampleComplexityRow
{
    int n = 0;
    int trial = 0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double heldout_loss = 0.0;
    double excess = 0.0;  // (heldout_loss - heldout optimum) / normalizer
};

struct SampleComplexitySummary
{
    int n = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double median = 0.0;
};

struct SampleComplexityResult
{
    std::vector<SampleComplexityRow> rows;
    std::vector<SampleComplexitySummary> summary;  // one per n, ascending
    double normalizer = 1.0;                       // mean y^2 of the dataset
    double heldout_best = 0.0;
    std::size_t heldout_size = 0;
};

/// ERM on n CV draws per trial, scored on a held-out collection of heldout_factor * max(n) draws.
SampleComplexityResult experiment_sample_complexity(const SampleComplexityConfig& cfg);

/// Instance t of the stream for `seed`: gen_synthetic with the base beta* fixed and a derived seed.
std::vector<ProblemInstance> synthetic_stream(const GeneratorConfig& gen, std::uint64_t seed, std::size_t T,
                                              bool classification = false);

struct RegretExperimentConfig
{
    GeneratorConfig gen;
    TuneMode mode = TuneMode::lasso;
    std::vector<std::size_t> T_values{100, 200, 400, 800, 1600, 3200};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    Box domain;
    int slices = 32;
    bool doubling = false;
    std::optional<double> zeta;

    void validate() const;
};

struct RegretRow
{
    std::size_t T = 0;
    std::uint64_t seed = 0;
    double regret = 0.0;
    double avg_regret = 0.0;
    double clamp_rate = 0.0;
    double zeta = 0.0;
    std::size_t dispersion_count = 0;  // window T^-1/2
    double dispersion_ratio = 0.0;     // count / (eps T)
};

struct RegretSummary
{
    std::size_t T = 0;
    double median_regret = 0.0;
    double median_avg_regret = 0.0;
    double median_dispersion_ratio = 0.0;
};

struct RegretExperimentResult
{
    std::vector<RegretRow> rows;  // ordered by (T, seed)
    std::vector<RegretSummary> summary;
    double slope = 0.0;  // least-squares slope of log median R_T on log T
};

RegretExperimentResult experiment_regret(const RegretExperimentConfig& cfg);

/// Least-squares slope of log y on log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Per-round breakpoints of the regression loss curves (path knots inside the box; per slice in en mode).
std::vector<std::vector<std::vector<double>>> stream_breakpoints(const std::vector<ProblemInstance>& stream,
                                                                 TuneMode mode, const Box& box, int slices = 32);

struct DispersionRow
{
    std::size_t T = 0;
    std::uint64_t seed = 0;
    double epsilon = 0.0;
    std::size_t max_count = 0;
    double ratio = 0.0;  // max_count / (epsilon T)
};

/// Dispersion probe on synthetic streams with epsilon = T^-1/2 (plus any extra windows).
std::vector<DispersionRow> experiment_dispersion(const GeneratorConfig& gen, TuneMode mode, const Box& box,
                                                 const std::vector<std::size_t>& T_values,
                                                 const std::vector<std::uint64_t>& seeds, int slices = 32);

void write_sample_complexity_csv(const SampleComplexityResult& r, const std::filesystem::path& path);
void write_regret_csv(const RegretExperimentResult& r, const std::filesystem::path& path);
void write_dispersion_csv(const std::vector<DispersionRow>& rows, const std::filesystem::path& path);

} // namespace regtune
