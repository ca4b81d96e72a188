#include "regtune/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "regtune/error.hpp"
#include "regtune/parallel.hpp"

namespace regtune {

namespace {

double median(std::vector<double> v)
{
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::ofstream open_csv(const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::invalid_config, "cannot write " + path.string());
    out << std::setprecision(17);
    return out;
}

std::vector<ProblemInstance> cv_draws(const Dataset& data, CvKind cv, double frac, std::size_t n, std::uint64_t seed)
{
    std::vector<ProblemInstance> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto s = derive_seed(seed, k);
        out.push_back(cv == CvKind::loocv ? loocv_draw(data, s) : mccv_draw(data, frac, s));
    }
    return out;
}

TuningResult tune(const std::vector<ProblemInstance>& insts, const SampleComplexityConfig& cfg)
{
    TuneOptions o;
    o.mode = cfg.mode;
    o.objective = cfg.objective;
    o.box = cfg.box;
    o.slices = cfg.slices;
    o.refine_iters = cfg.refine_iters;
    return erm_tune(insts, o);
}

} // namespace

const char* to_string(CvKind k) { return k == CvKind::loocv ? "loocv" : "mccv"; }

CvKind parse_cv(const std::string& s)
{
    if (s == "loocv") return CvKind::loocv;
    if (s == "mccv") return CvKind::mccv;
    throw Error(ErrorKind::invalid_config, "unknown cv kind '" + s + "'");
}

void SampleComplexityConfig::validate() const
{
    data.validate();
    box.validate();
    if (data.rows() < 3) throw Error(ErrorKind::too_few_rows, "sample-complexity dataset needs >= 3 rows");
    if (n_values.empty()) throw Error(ErrorKind::invalid_config, "n_values is empty");
    for (int n : n_values)
        if (n < 1) throw Error(ErrorKind::invalid_config, "n values must be >= 1");
    if (trials < 1) throw Error(ErrorKind::invalid_config, "trials must be >= 1");
    if (heldout_factor < 1) throw Error(ErrorKind::invalid_config, "heldout_factor must be >= 1");
    if (cv == CvKind::mccv && !(val_fraction > 0.0 && val_fraction < 1.0))
        throw Error(ErrorKind::invalid_config, "val_fraction must lie in (0, 1)");
}

SampleComplexityResult experiment_sample_complexity(const SampleComplexityConfig& cfg)
{
    cfg.validate();
    SampleComplexityResult res;
    res.normalizer = cfg.data.y.squaredNorm() / static_cast<double>(cfg.data.rows());
    if (!(res.normalizer > 0.0)) res.normalizer = 1.0;

    const int max_n = *std::max_element(cfg.n_values.begin(), cfg.n_values.end());
    const auto heldout = cv_draws(cfg.data, cfg.cv, cfg.val_fraction,
                                  static_cast<std::size_t>(cfg.heldout_factor) * static_cast<std::size_t>(max_n),
                                  derive_seed(cfg.seed, 0xfeed));
    res.heldout_size = heldout.size();
    const TuningResult best = tune(heldout, cfg);
    const double lambda2_best = cfg.mode == TuneMode::lasso ? 0.0 : best.lambda2;
    res.heldout_best = direct_objective(heldout, best.lambda1, lambda2_best, cfg.objective);

    std::vector<std::pair<int, int>> cells;
    for (int n : cfg.n_values)
        for (int t = 0; t < cfg.trials; ++t) cells.emplace_back(n, t);
    res.rows.resize(cells.size());
    parallel_for(cells.size(), [&](std::size_t c) {
        const auto [n, t] = cells[c];
        const auto draws = cv_draws(cfg.data, cfg.cv, cfg.val_fraction, static_cast<std::size_t>(n),
                                    derive_seed(cfg.seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(t)));
        const TuningResult r = tune(draws, cfg);
        SampleComplexityRow row;
        row.n = n;
        row.trial = t;
        row.lambda1 = r.lambda1;
        row.lambda2 = cfg.mode == TuneMode::lasso ? 0.0 : r.lambda2;
        row.heldout_loss = direct_objective(heldout, row.lambda1, row.lambda2, cfg.objective);
        row.excess = (row.heldout_loss - res.heldout_best) / res.normalizer;
        res.rows[c] = row;
    });

    std::vector<int> ns = cfg.n_values;
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    for (int n : ns) {
        std::vector<double> ex;
        for (const auto& r : res.rows)
            if (r.n == n) ex.push_back(r.excess);
        SampleComplexitySummary s;
        s.n = n;
        s.mean = std::accumulate(ex.begin(), ex.end(), 0.0) / static_cast<double>(ex.size());
        double var = 0.0;
        for (double e : ex) var += (e - s.mean) * (e - s.mean);
        s.stddev = ex.size() > 1 ? std::sqrt(var / static_cast<double>(ex.size() - 1)) : 0.0;
        s.median = median(ex);
        res.summary.push_back(s);
    }
    return res;
}

std::vector<ProblemInstance> synthetic_stream(const GeneratorConfig& gen, std::uint64_t seed, std::size_t T,
                                              bool classification)
{
    GeneratorConfig base = gen;
    base.validate();
    base.beta_star = effective_beta_star(gen);
    std::vector<ProblemInstance> out;
    out.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        GeneratorConfig c = base;
        c.seed = derive_seed(gen.seed, seed, t);
        out.push_back(classification ? gen_classification(c) : gen_synthetic(c));
    }
    return out;
}

void RegretExperimentConfig::validate() const
{
    gen.validate();
    domain.validate();
    if (T_values.empty() || seeds.empty()) throw Error(ErrorKind::invalid_config, "need T values and seeds");
    for (auto T : T_values)
        if (T < 1) throw Error(ErrorKind::invalid_config, "T must be >= 1");
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::invalid_config, "slope needs >= 2 points");
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]) / n;
        my += std::log(std::max(y[i], 1e-300)) / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(std::max(y[i], 1e-300)) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

RegretExperimentResult experiment_regret(const RegretExperimentConfig& cfg)
{
    cfg.validate();
    RegretExperimentResult res;
    std::vector<std::pair<std::size_t, std::uint64_t>> cells;
    for (auto T : cfg.T_values)
        for (auto s : cfg.seeds) cells.emplace_back(T, s);
    res.rows.resize(cells.size());
    parallel_for(cells.size(), [&](std::size_t c) {
        const auto [T, seed] = cells[c];
        const auto stream = synthetic_stream(cfg.gen, seed, T);
        OnlineOptions o;
        o.mode = cfg.mode;
        o.domain = cfg.domain;
        o.zeta = cfg.zeta;
        o.doubling = cfg.doubling;
        o.seed = derive_seed(seed, 0x5eed);
        o.slices = cfg.slices;
        const RegretReport r = run_online(stream, o);
        RegretRow row;
        row.T = T;
        row.seed = seed;
        row.regret = r.regret;
        row.avg_regret = r.avg_regret;
        row.clamp_rate = r.clamp_rate;
        row.zeta = r.zeta;
        const double eps = 1.0 / std::sqrt(static_cast<double>(T));
        row.dispersion_count = r.dispersion_counts.begin()->second;
        row.dispersion_ratio = static_cast<double>(row.dispersion_count) / (eps * static_cast<double>(T));
        res.rows[c] = row;
    });

    std::vector<std::size_t> Ts = cfg.T_values;
    std::sort(Ts.begin(), Ts.end());
    Ts.erase(std::unique(Ts.begin(), Ts.end()), Ts.end());
    std::vector<double> xs, ys;
    for (auto T : Ts) {
        std::vector<double> r, a, d;
        for (const auto& row : res.rows)
            if (row.T == T) {
                r.push_back(row.regret);
                a.push_back(row.avg_regret);
                d.push_back(row.dispersion_ratio);
            }
        res.summary.push_back({T, median(r), median(a), median(d)});
        xs.push_back(static_cast<double>(T));
        ys.push_back(res.summary.back().median_regret);
    }
    res.slope = xs.size() >= 2 ? loglog_slope(xs, ys) : 0.0;
    return res;
}

std::vector<std::vector<std::vector<double>>> stream_breakpoints(const std::vector<ProblemInstance>& stream,
                                                                 TuneMode mode, const Box& box, int slices)
{
    const std::vector<double> l2s = mode == TuneMode::en ? log_grid(box.lo, box.hi, slices) : std::vector<double>{0.0};
    std::vector<std::vector<std::vector<double>>> out(stream.size());
    if (mode == TuneMode::ridge) {
        // Ridge losses are smooth in lambda2: no breakpoints.
        for (auto& r : out) r.assign(1, {});
        return out;
    }
    for (std::size_t t = 0; t < stream.size(); ++t) {
        for (double l2 : l2s) {
            const RegPath path = en_path(stream[t].train, l2, box.lo);
            std::vector<double> k;
            for (const auto& seg : path.segments)
                if (seg.lo > box.lo && seg.lo < box.hi) k.push_back(seg.lo);
            if (path.lambda_max > box.lo && path.lambda_max < box.hi) k.push_back(path.lambda_max);
            std::sort(k.begin(), k.end());
            out[t].push_back(std::move(k));
        }
    }
    return out;
}

std::vector<DispersionRow> experiment_dispersion(const GeneratorConfig& gen, TuneMode mode, const Box& box,
                                                 const std::vector<std::size_t>& T_values,
                                                 const std::vector<std::uint64_t>& seeds, int slices)
{
    box.validate();
    std::vector<std::pair<std::size_t, std::uint64_t>> cells;
    for (auto T : T_values)
        for (auto s : seeds) cells.emplace_back(T, s);
    std::vector<DispersionRow> rows(cells.size());
    parallel_for(cells.size(), [&](std::size_t c) {
        const auto [T, seed] = cells[c];
        const auto bps = stream_breakpoints(synthetic_stream(gen, seed, T), mode, box, slices);
        const double eps = 1.0 / std::sqrt(static_cast<double>(T));
        std::size_t worst = 0;
        const std::size_t S = bps.empty() ? 0 : bps.front().size();
        for (std::size_t s = 0; s < S; ++s) {
            std::vector<std::vector<double>> sets;
            for (const auto& r : bps) sets.push_back(r[s]);
            worst = std::max(worst, dispersion_probe(sets, {eps}).at(eps));
        }
        rows[c] = {T, seed, eps, worst, static_cast<double>(worst) / (eps * static_cast<double>(T))};
    });
    return rows;
}

void write_sample_complexity_csv(const SampleComplexityResult& r, const std::filesystem::path& path)
{
    auto out = open_csv(path);
    out << "n,trials,mean_excess,stddev_excess,median_excess\n";
    for (const auto& s : r.summary) {
        const auto trials = std::count_if(r.rows.begin(), r.rows.end(), [&](const auto& row) { return row.n == s.n; });
        out << s.n << ',' << trials << ',' << s.mean << ',' << s.stddev << ',' << s.median << '\n';
    }
}

void write_regret_csv(const RegretExperimentResult& r, const std::filesystem::path& path)
{
    auto out = open_csv(path);
    out << "T,seed,R_T,avg_regret,clamp_rate,zeta,dispersion_count,dispersion_ratio,slope\n";
    for (const auto& row : r.rows)
        out << row.T << ',' << row.seed << ',' << row.regret << ',' << row.avg_regret << ',' << row.clamp_rate << ','
            << row.zeta << ',' << row.dispersion_count << ',' << row.dispersion_ratio << ',' << r.slope << '\n';
}

void write_dispersion_csv(const std::vector<DispersionRow>& rows, const std::filesystem::path& path)
{
    auto out = open_csv(path);
    out << "T,seed,epsilon,max_count,ratio\n";
    for (const auto& row : rows)
        out << row.T << ',' << row.seed << ',' << row.epsilon << ',' << row.max_count << ',' << row.ratio << '\n';
}

} // namespace regtune
