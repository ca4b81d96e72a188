#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace regtune {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Design matrix X (rows = examples, columns = features) and targets y.
struct Dataset
{
    Matrix X;
    Vector y;

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index features() const { return X.cols(); }

    /// Throws DimensionMismatch / ParseError when the shape or finiteness contract fails.
    /// A positive `bound` additionally checks max |entry| <= bound.
    void validate(double bound = 0.0) const;

    /// Largest absolute entry across X and y.
    double max_abs() const;
};

/// One training set and one validation set over the same feature space.
struct ProblemInstance
{
    Dataset train;
    Dataset val;

    Eigen::Index features() const { return train.features(); }
    void validate(double bound = 0.0) const;
};

struct GeneratorConfig
{
    int m = 10;           // training rows
    int p = 3;            // features
    int m_val = 5;        // validation rows
    double R = 1.0;       // entry bound
    double kappa_jitter = 0.05;  // half-width of uniform label noise
    std::optional<Vector> beta_star;
    std::uint64_t seed = 0;

    /// Density bound of the label noise, 1 / (2 kappa_jitter).
    double kappa() const { return 1.0 / (2.0 * kappa_jitter); }
    void validate() const;
};

/// X uniform on [-R, R]; y = X beta* + U[-kappa_jitter, kappa_jitter], clamped to [-R, R].
/// beta* (given or drawn) is rescaled so that |X beta*| <= R - kappa_jitter always holds.
ProblemInstance gen_synthetic(const GeneratorConfig& cfg);

/// Same generator with the labels of both splits replaced by 1{y >= 0}.
ProblemInstance gen_classification(const GeneratorConfig& cfg);

/// The coefficient vector gen_synthetic actually uses for `cfg` (after rescaling).
Vector effective_beta_star(const GeneratorConfig& cfg);

/// Leave-one-out draw: one row (uniform) becomes the validation set.
ProblemInstance loocv_draw(const Dataset& full, std::uint64_t seed);

/// Monte-Carlo CV draw: round(val_fraction * m) rows sampled without replacement for validation.
ProblemInstance mccv_draw(const Dataset& full, double val_fraction, std::uint64_t seed);

Dataset select_rows(const Dataset& ds, const std::vector<Eigen::Index>& rows);

/// Centers every column of X and y (the unit-feature / intercept convention).
Dataset center(const Dataset& ds);

enum class InstanceFormat { csv_pair, json_bundle };

/// csv-pair: `path` is a directory holding train_X.csv, train_y.csv, val_X.csv, val_y.csv.
/// json-bundle: `path` is a file {"train":{"X":[[..]],"y":[..]},"val":{...}}.
ProblemInstance load_instance(const std::filesystem::path& path, InstanceFormat format);
void save_instance(const ProblemInstance& inst, const std::filesystem::path& path, InstanceFormat format);

/// A stream file is {"instances": [bundle, bundle, ...]}.
std::vector<ProblemInstance> load_stream(const std::filesystem::path& path);
void save_stream(const std::vector<ProblemInstance>& stream, const std::filesystem::path& path);

Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const Matrix& M, const std::filesystem::path& path);

} // namespace regtune
