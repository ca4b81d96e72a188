#include "regtune/instances.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "regtune/error.hpp"
#include "regtune/json.hpp"

namespace regtune {

namespace {

bool all_finite(const Matrix& M) { return M.allFinite(); }

Vector draw_beta(const GeneratorConfig& cfg, std::mt19937_64& rng)
{
    const double limit = (cfg.R - cfg.kappa_jitter) / cfg.R;
    Vector beta;
    bool drawn = false;
    if (cfg.beta_star) {
        beta = *cfg.beta_star;
    } else {
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        beta.resize(cfg.p);
        for (int j = 0; j < cfg.p; ++j) beta(j) = unit(rng);
        drawn = true;
    }
    // |x . beta| <= R ||beta||_1, so ||beta||_1 <= limit keeps X beta inside R - kappa_jitter.
    const double l1 = beta.lpNorm<1>();
    if (l1 > 0.0 && (drawn || l1 > limit)) beta *= limit / l1;
    return beta;
}

Dataset draw_split(const GeneratorConfig& cfg, int rows, const Vector& beta, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> entry(-cfg.R, cfg.R);
    Dataset ds{Matrix(rows, cfg.p), Vector(rows)};
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cfg.p; ++j) ds.X(i, j) = entry(rng);
    std::uniform_real_distribution<double> noise(-cfg.kappa_jitter, cfg.kappa_jitter);
    for (int i = 0; i < rows; ++i) {
        const double e = cfg.kappa_jitter > 0.0 ? noise(rng) : 0.0;
        ds.y(i) = std::clamp(ds.X.row(i).dot(beta) + e, -cfg.R, cfg.R);
    }
    return ds;
}

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

void Dataset::validate(double bound) const
{
    if (X.rows() != y.size())
        throw Error(ErrorKind::dimension_mismatch,
                    "X has " + std::to_string(X.rows()) + " rows but y has " + std::to_string(y.size()));
    if (!all_finite(X) || !y.allFinite()) throw Error(ErrorKind::parse_error, "non-finite entry");
    if (bound > 0.0 && max_abs() > bound)
        throw Error(ErrorKind::invalid_config, "entry exceeds declared bound R");
}

double Dataset::max_abs() const
{
    double r = 0.0;
    if (X.size() > 0) r = X.cwiseAbs().maxCoeff();
    if (y.size() > 0) r = std::max(r, y.cwiseAbs().maxCoeff());
    return r;
}

void ProblemInstance::validate(double bound) const
{
    train.validate(bound);
    val.validate(bound);
    if (train.features() != val.features())
        throw Error(ErrorKind::dimension_mismatch,
                    "train has p=" + std::to_string(train.features()) + ", val has p=" +
                        std::to_string(val.features()));
}

void GeneratorConfig::validate() const
{
    if (m < 1 || p < 1 || m_val < 1) throw Error(ErrorKind::invalid_config, "m, p, m_val must be >= 1");
    if (!(R > 0.0)) throw Error(ErrorKind::invalid_config, "R must be positive");
    if (!(kappa_jitter >= 0.0) || kappa_jitter >= R)
        throw Error(ErrorKind::invalid_config, "kappa_jitter must lie in [0, R)");
    if (beta_star && beta_star->size() != p)
        throw Error(ErrorKind::invalid_config, "beta_star length differs from p");
}

Vector effective_beta_star(const GeneratorConfig& cfg)
{
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    return draw_beta(cfg, rng);
}

ProblemInstance gen_synthetic(const GeneratorConfig& cfg)
{
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const Vector beta = draw_beta(cfg, rng);
    ProblemInstance inst;
    inst.train = draw_split(cfg, cfg.m, beta, rng);
    inst.val = draw_split(cfg, cfg.m_val, beta, rng);
    return inst;
}

ProblemInstance gen_classification(const GeneratorConfig& cfg)
{
    ProblemInstance inst = gen_synthetic(cfg);
    for (Dataset* ds : {&inst.train, &inst.val})
        ds->y = ds->y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : 0.0; });
    return inst;
}

Dataset select_rows(const Dataset& ds, const std::vector<Eigen::Index>& rows)
{
    Dataset out{Matrix(static_cast<Eigen::Index>(rows.size()), ds.features()),
                Vector(static_cast<Eigen::Index>(rows.size()))};
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.X.row(static_cast<Eigen::Index>(k)) = ds.X.row(rows[k]);
        out.y(static_cast<Eigen::Index>(k)) = ds.y(rows[k]);
    }
    return out;
}

Dataset center(const Dataset& ds)
{
    Dataset out = ds;
    if (ds.rows() == 0) return out;
    out.X.rowwise() -= ds.X.colwise().mean();
    out.y.array() -= ds.y.mean();
    return out;
}

ProblemInstance loocv_draw(const Dataset& full, std::uint64_t seed)
{
    if (full.rows() < 2) throw Error(ErrorKind::too_few_rows, "LOOCV needs at least 2 rows");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, full.rows() - 1);
    const Eigen::Index held = pick(rng);
    std::vector<Eigen::Index> rest;
    rest.reserve(static_cast<std::size_t>(full.rows() - 1));
    for (Eigen::Index i = 0; i < full.rows(); ++i)
        if (i != held) rest.push_back(i);
    return {select_rows(full, rest), select_rows(full, {held})};
}

ProblemInstance mccv_draw(const Dataset& full, double val_fraction, std::uint64_t seed)
{
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw Error(ErrorKind::invalid_config, "val_fraction must lie in (0, 1)");
    const auto m = full.rows();
    const auto n_val = static_cast<Eigen::Index>(std::lround(val_fraction * static_cast<double>(m)));
    if (n_val < 1 || m - n_val < 1)
        throw Error(ErrorKind::too_few_rows, "split leaves an empty train or validation set");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<Eigen::Index> val(idx.begin(), idx.begin() + n_val);
    std::vector<Eigen::Index> train(idx.begin() + n_val, idx.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    return {select_rows(full, train), select_rows(full, val)};
}

Matrix read_csv_matrix(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::parse_error, "cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const std::string t = trim(cell);
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
            if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
                throw Error(ErrorKind::parse_error,
                            path.string() + ":" + std::to_string(lineno) + ": bad value '" + t + "'");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw Error(ErrorKind::parse_error, path.string() + ":" + std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error(ErrorKind::parse_error, path.string() + ": empty file");
    Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return M;
}

void write_csv_matrix(const Matrix& M, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::parse_error, "cannot write " + path.string());
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (j) out << ',';
            out << M(i, j);
        }
        out << '\n';
    }
}

namespace {

Dataset read_csv_dataset(const std::filesystem::path& dir, const std::string& prefix)
{
    Dataset ds;
    ds.X = read_csv_matrix(dir / (prefix + "_X.csv"));
    const Matrix y = read_csv_matrix(dir / (prefix + "_y.csv"));
    if (y.cols() != 1) throw Error(ErrorKind::parse_error, prefix + "_y.csv must be a single column");
    ds.y = y.col(0);
    return ds;
}

json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::parse_error, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse_error, path.string() + ": " + e.what());
    }
}

} // namespace

ProblemInstance load_instance(const std::filesystem::path& path, InstanceFormat format)
{
    ProblemInstance inst;
    if (format == InstanceFormat::csv_pair) {
        inst.train = read_csv_dataset(path, "train");
        inst.val = read_csv_dataset(path, "val");
    } else {
        inst = instance_from_json(read_json_file(path));
    }
    inst.validate();
    return inst;
}

void save_instance(const ProblemInstance& inst, const std::filesystem::path& path, InstanceFormat format)
{
    if (format == InstanceFormat::csv_pair) {
        std::filesystem::create_directories(path);
        write_csv_matrix(inst.train.X, path / "train_X.csv");
        write_csv_matrix(inst.train.y, path / "train_y.csv");
        write_csv_matrix(inst.val.X, path / "val_X.csv");
        write_csv_matrix(inst.val.y, path / "val_y.csv");
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::parse_error, "cannot write " + path.string());
    out << to_json(inst).dump() << '\n';
}

std::vector<ProblemInstance> load_stream(const std::filesystem::path& path)
{
    const json j = read_json_file(path);
    if (!j.is_object() || !j.contains("instances") || !j["instances"].is_array())
        throw Error(ErrorKind::parse_error, path.string() + ": expected {\"instances\": [...]}");
    std::vector<ProblemInstance> out;
    for (const auto& item : j["instances"]) {
        out.push_back(instance_from_json(item));
        out.back().validate();
    }
    return out;
}

void save_stream(const std::vector<ProblemInstance>& stream, const std::filesystem::path& path)
{
    json arr = json::array();
    for (const auto& inst : stream) arr.push_back(to_json(inst));
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::parse_error, "cannot write " + path.string());
    out << json{{"instances", arr}}.dump() << '\n';
}

// --- json ---------------------------------------------------------------

json to_json_matrix(const Matrix& M)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json_vector(const Vector& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Matrix matrix_from_json(const json& j)
{
    if (!j.is_array() || j.empty()) throw Error(ErrorKind::parse_error, "matrix must be a non-empty array of rows");
    const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
    Matrix M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw Error(ErrorKind::parse_error, "ragged matrix row");
        for (std::size_t k = 0; k < cols; ++k) {
            if (!j[i][k].is_number()) throw Error(ErrorKind::parse_error, "matrix entry is not a number");
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
        }
    }
    return M;
}

Vector vector_from_json(const json& j)
{
    if (!j.is_array()) throw Error(ErrorKind::parse_error, "vector must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw Error(ErrorKind::parse_error, "vector entry is not a number");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

json to_json(const Dataset& ds) { return {{"X", to_json_matrix(ds.X)}, {"y", to_json_vector(ds.y)}}; }

json to_json(const ProblemInstance& inst) { return {{"train", to_json(inst.train)}, {"val", to_json(inst.val)}}; }

Dataset dataset_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("X") || !j.contains("y"))
        throw Error(ErrorKind::parse_error, "dataset needs X and y");
    return {matrix_from_json(j["X"]), vector_from_json(j["y"])};
}

ProblemInstance instance_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("train") || !j.contains("val"))
        throw Error(ErrorKind::parse_error, "bundle needs train and val");
    return {dataset_from_json(j["train"]), dataset_from_json(j["val"])};
}

} // namespace regtune
