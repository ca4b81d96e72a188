#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "regtune/classify.hpp"
#include "regtune/error.hpp"
#include "regtune/experiments.hpp"
#include "regtune/json.hpp"
#include "regtune/online.hpp"
#include "regtune/paths.hpp"
#include "regtune/piecewise.hpp"

namespace regtune::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

// --- input plumbing -------------------------------------------------------

struct InputOpts
{
    std::vector<std::string> instances;
    std::string stream;
    std::string format = "auto";
};

void add_input(CLI::App* c, InputOpts& in)
{
    c->add_option("--instance", in.instances, "Instance: JSON bundle file or csv-pair directory (repeatable)");
    c->add_option("--stream", in.stream, "Stream file {\"instances\": [...]}");
    c->add_option("--format", in.format, "Instance format")
        ->check(CLI::IsMember({"auto", "json", "csv"}))
        ->capture_default_str();
}

ProblemInstance load_one(const std::string& path, const std::string& format)
{
    InstanceFormat f = InstanceFormat::json_bundle;
    if (format == "csv" || (format == "auto" && fs::is_directory(path))) f = InstanceFormat::csv_pair;
    return load_instance(path, f);
}

bool has_input(const InputOpts& in) { return !in.instances.empty() || !in.stream.empty(); }

std::vector<ProblemInstance> collect(const InputOpts& in)
{
    std::vector<ProblemInstance> out;
    if (!in.stream.empty()) out = load_stream(in.stream);
    for (const auto& p : in.instances) out.push_back(load_one(p, in.format));
    if (out.empty()) throw Error(ErrorKind::invalid_config, "no input: pass --instance or --stream");
    return out;
}

ProblemInstance single(const InputOpts& in)
{
    auto all = collect(in);
    if (all.size() != 1) throw Error(ErrorKind::invalid_config, "expected exactly one instance");
    return std::move(all.front());
}

struct GenOpts
{
    GeneratorConfig cfg;
};

void add_gen(CLI::App* c, GenOpts& g, const std::string& seed_flag)
{
    c->add_option("--m", g.cfg.m, "Training rows")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--p", g.cfg.p, "Features")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--m-val", g.cfg.m_val, "Validation rows")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--R", g.cfg.R, "Entry bound")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--jitter", g.cfg.kappa_jitter, "Half-width of uniform label noise")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option(seed_flag, g.cfg.seed, "Generator seed")->capture_default_str();
}

Box to_box(const std::vector<double>& v)
{
    if (v.size() != 2) throw Error(ErrorKind::invalid_config, "box needs LO,HI");
    Box b{v[0], v[1]};
    b.validate();
    return b;
}

CLI::Option* add_box(CLI::App* c, const std::string& name, std::vector<double>& v, const std::string& help)
{
    return c->add_option(name, v, help)->delimiter(',')->expected(2)->capture_default_str();
}

// --- output plumbing ------------------------------------------------------

void emit_json(const json& j, const std::string& path, std::ostream& out)
{
    if (path.empty() || path == "-") {
        out << j.dump(2) << '\n';
        return;
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump(2) << '\n';
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.precision(17);
    return f;
}

// Parses a CLI11 string value back into a typed JSON value.
json typed(const std::string& s)
{
    if (s == "true") return true;
    if (s == "false") return false;
    if (s.empty()) return nullptr;
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (end && *end == '\0') {
        if (s.find_first_of(".eEnN") == std::string::npos) {
            try {
                return json(std::stoll(s));
            } catch (const std::exception&) {
                return d;
            }
        }
        return d;
    }
    return s;
}

// Every option of the subcommand, with its default when not given.
json echo_config(const CLI::App* sub, const std::string& command)
{
    json cfg = json::object();
    cfg["command"] = command;
    cfg["version"] = kVersion;
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help") continue;
        const bool flag = opt->get_expected_max() == 0;
        if (flag) {
            cfg[name] = opt->count() > 0;
            continue;
        }
        std::vector<std::string> vals;
        if (opt->count() > 0) {
            vals = opt->results();
        } else if (!opt->get_default_str().empty()) {
            std::string d = opt->get_default_str();
            if (d.size() >= 2 && d.front() == '[' && d.back() == ']') d = d.substr(1, d.size() - 2);
            std::stringstream ss(d);
            for (std::string tok; std::getline(ss, tok, ',');) vals.push_back(tok);
        }
        const bool vector_like = opt->get_expected_max() > 1 || opt->get_items_expected_max() > 1;
        if (vals.empty()) {
            cfg[name] = vector_like ? json::array() : json(nullptr);
        } else if (vector_like) {
            json arr = json::array();
            for (const auto& v : vals) arr.push_back(typed(v));
            cfg[name] = arr;
        } else {
            cfg[name] = typed(vals.back());
        }
    }
    if (const char* env = std::getenv("REGTUNE_THREADS")) cfg["threads_env"] = env;
    return cfg;
}

json support_json(const SignedSupport& s)
{
    return {{"indices", s.indices}, {"signs", s.signs}};
}

json curve_json(const PiecewiseQuadratic& c)
{
    json pieces = json::array();
    for (const auto& q : c.pieces)
        pieces.push_back({{"lo", q.lo}, {"hi", q.hi}, {"a", q.a}, {"b", q.b}, {"c", q.c}, {"support_size", q.support_size}});
    return {{"objective", to_string(c.kind)}, {"pieces", pieces}};
}

json params_json(const OnlineParams& p) { return {{"lambda1", p.lambda1}, {"lambda2", p.lambda2}, {"tau", p.tau}}; }

json report_json(const RegretReport& r)
{
    json rounds = json::array();
    for (std::size_t t = 0; t < r.rounds.size(); ++t) {
        json row = params_json(r.rounds[t].params);
        row["t"] = t + 1;
        row["loss"] = r.rounds[t].loss;
        rounds.push_back(row);
    }
    json disp = json::array();
    for (const auto& [eps, count] : r.dispersion_counts)
        disp.push_back({{"epsilon", eps}, {"max_count", count}});
    json h = params_json(r.hindsight_params);
    h["total"] = r.hindsight_total;
    return {{"mode", r.mode},
            {"T", r.T},
            {"zeta", r.zeta},
            {"H", r.H},
            {"doubling", r.doubling},
            {"online_total", r.online_total},
            {"hindsight", h},
            {"regret", r.regret},
            {"avg_regret", r.avg_regret},
            {"clamp_rate", r.clamp_rate},
            {"dispersion", disp},
            {"rounds", rounds}};
}

void write_rounds_csv(const RegretReport& r, const std::string& path)
{
    auto f = open_out(path);
    f << "t,lambda1,lambda2,tau,loss\n";
    for (std::size_t t = 0; t < r.rounds.size(); ++t) {
        const auto& rr = r.rounds[t];
        f << t + 1 << ',' << rr.params.lambda1 << ',' << rr.params.lambda2 << ',' << rr.params.tau << ',' << rr.loss
          << '\n';
    }
}

// Cumulative online loss against the final hindsight parameter evaluated round by round.
void write_regret_curve_csv(const RegretReport& r, const std::vector<double>& hindsight_losses,
                            const std::string& path)
{
    auto f = open_out(path);
    f << "t,online_cum,hindsight_cum,regret\n";
    double on = 0.0, hs = 0.0;
    for (std::size_t t = 0; t < r.rounds.size(); ++t) {
        on += r.rounds[t].loss;
        hs += hindsight_losses[t];
        f << t + 1 << ',' << on << ',' << hs << ',' << on - hs << '\n';
    }
}

double regression_loss(const ProblemInstance& inst, const OnlineParams& p)
{
    if (p.lambda1 <= 0.0) return val_loss(ridge_fit(inst.train, p.lambda2), inst.val);
    return val_loss(en_fit_cd(inst.train, {p.lambda1, p.lambda2}), inst.val);
}

std::vector<ProblemInstance> online_stream(const InputOpts& in, const GenOpts& g, std::uint64_t stream_seed,
                                           std::optional<std::size_t> horizon, bool classification)
{
    std::vector<ProblemInstance> s;
    if (has_input(in)) {
        s = collect(in);
        if (horizon) {
            if (*horizon > s.size())
                throw Error(ErrorKind::invalid_config, "horizon exceeds the number of stream instances");
            s.resize(*horizon);
        }
    } else {
        if (!horizon) throw Error(ErrorKind::invalid_config, "without --stream/--instance, --horizon is required");
        s = synthetic_stream(g.cfg, stream_seed, *horizon, classification);
    }
    if (s.empty()) throw Error(ErrorKind::invalid_config, "empty stream");
    return s;
}

bool is_validation(ErrorKind k)
{
    switch (k) {
    case ErrorKind::parse_error:
    case ErrorKind::dimension_mismatch:
    case ErrorKind::invalid_config:
    case ErrorKind::too_few_rows:
    case ErrorKind::not_symmetric:
    case ErrorKind::out_of_range:
    case ErrorKind::domain_mismatch:
        return true;
    default:
        return false;
    }
}

} // namespace

int cmd_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Regularization tuning for Ridge / LASSO / ElasticNet"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    // solve
    auto* solve = app.add_subcommand("solve", "Fit ElasticNet coefficients at fixed (lambda1, lambda2)");
    InputOpts solve_in;
    add_input(solve, solve_in);
    double solve_l1 = 1.0, solve_l2 = 0.0, solve_tol = 1e-10, solve_kkt = 1e-6;
    long solve_iter = 100000;
    std::string solve_method = "cd", solve_out;
    solve->add_option("--lambda1", solve_l1, "L1 weight")->check(CLI::NonNegativeNumber)->capture_default_str();
    solve->add_option("--lambda2", solve_l2, "L2 weight")->check(CLI::NonNegativeNumber)->capture_default_str();
    solve->add_option("--method", solve_method, "Solver")
        ->check(CLI::IsMember({"cd", "path"}))
        ->capture_default_str();
    solve->add_option("--tol", solve_tol, "Coordinate-descent tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    solve->add_option("--max-iter", solve_iter, "Coordinate-descent sweeps")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    solve->add_option("--kkt-tol", solve_kkt, "KKT check tolerance")->check(CLI::PositiveNumber)->capture_default_str();
    solve->add_option("-o,--output", solve_out, "Output JSON (stdout when omitted)");

    // path
    auto* pathc = app.add_subcommand("path", "Exact LASSO/ElasticNet path in lambda1");
    InputOpts path_in;
    add_input(pathc, path_in);
    double path_l2 = 0.0;
    std::optional<double> path_lmin;
    long path_budget = 0;
    std::string path_out;
    pathc->add_option("--lambda2", path_l2, "Fixed L2 weight")->check(CLI::NonNegativeNumber)->capture_default_str();
    pathc->add_option("--lambda-min", path_lmin, "Path end (default 1e-6 * lambda_max)")->check(CLI::PositiveNumber);
    pathc->add_option("--budget", path_budget, "Max events (0: 50 (m + p))")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    pathc->add_option("-o,--output", path_out, "Output JSON");

    // tune-erm
    auto* erm = app.add_subcommand("tune-erm", "Exact ERM tuning over a collection of instances");
    InputOpts erm_in;
    add_input(erm, erm_in);
    std::string erm_mode = "en", erm_obj = "val", erm_out;
    std::vector<double> erm_box{1e-3, 10.0};
    int erm_slices = 64, erm_refine = 20, erm_rgrid = 512;
    erm->add_option("--mode", erm_mode)->check(CLI::IsMember({"ridge", "lasso", "en"}))->capture_default_str();
    erm->add_option("--objective", erm_obj)->check(CLI::IsMember({"val", "aic", "bic"}))->capture_default_str();
    add_box(erm, "--box", erm_box, "Lambda box LO,HI");
    erm->add_option("--slices", erm_slices, "lambda2 slices (en)")->check(CLI::PositiveNumber)->capture_default_str();
    erm->add_option("--refine", erm_refine, "Golden-section steps (en)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    erm->add_option("--ridge-grid", erm_rgrid, "Ridge scan points")->check(CLI::PositiveNumber)->capture_default_str();
    erm->add_option("-o,--output", erm_out, "Output JSON");

    // tune-online
    auto* onl = app.add_subcommand("tune-online", "Continuous exponential weights over a stream");
    InputOpts onl_in;
    add_input(onl, onl_in);
    GenOpts onl_gen;
    add_gen(onl, onl_gen, "--gen-seed");
    std::string onl_mode = "lasso", onl_out, onl_rounds, onl_curve;
    std::optional<double> onl_zeta, onl_H;
    std::optional<std::size_t> onl_T;
    std::vector<double> onl_domain{1e-3, 10.0}, onl_eps;
    std::uint64_t onl_seed = 0, onl_sseed = 0;
    bool onl_doubling = false;
    int onl_slices = 32, onl_rgrid = 257;
    onl->add_option("--mode", onl_mode)->check(CLI::IsMember({"ridge", "lasso", "en"}))->capture_default_str();
    onl->add_option("--zeta", onl_zeta, "Step size (default sqrt(ln T / T))")->check(CLI::PositiveNumber);
    onl->add_option("--horizon", onl_T, "Rounds T")->check(CLI::PositiveNumber);
    add_box(onl, "--domain", onl_domain, "Parameter domain LO,HI");
    onl->add_option("--seed", onl_seed, "Sampler seed")->capture_default_str();
    onl->add_option("--stream-seed", onl_sseed, "Synthetic stream seed")->capture_default_str();
    onl->add_option("--H", onl_H, "Loss scale (default 4x first-round max)")->check(CLI::PositiveNumber);
    onl->add_flag("--doubling", onl_doubling, "Anytime mode (doubling epochs)");
    onl->add_option("--slices", onl_slices, "lambda2 slices (en)")->check(CLI::PositiveNumber)->capture_default_str();
    onl->add_option("--ridge-grid", onl_rgrid, "Interpolation nodes (ridge)")
        ->check(CLI::Range(2, 1 << 20))
        ->capture_default_str();
    onl->add_option("--eps", onl_eps, "Dispersion windows (default T^-1/2)")->delimiter(',');
    onl->add_option("-o,--output", onl_out, "Report JSON");
    onl->add_option("--rounds-csv", onl_rounds, "Per-round parameters and losses");
    onl->add_option("--regret-csv", onl_curve, "Cumulative regret curve");

    // classify-tune
    auto* ct = app.add_subcommand("classify-tune", "Exact ERM tuning of (lambda, tau) for thresholded 0-1 loss");
    InputOpts ct_in;
    add_input(ct, ct_in);
    std::string ct_mode = "lasso", ct_out;
    std::vector<double> ct_box{1e-3, 10.0}, ct_tau;
    int ct_slices = 16, ct_scan = 512;
    ct->add_option("--mode", ct_mode)->check(CLI::IsMember({"ridge", "lasso", "en"}))->capture_default_str();
    add_box(ct, "--box", ct_box, "Lambda box LO,HI");
    ct->add_option("--tau", ct_tau, "Threshold box LO,HI (default from data bounds)")->delimiter(',')->expected(2);
    ct->add_option("--slices", ct_slices, "lambda2 slices (en)")->check(CLI::PositiveNumber)->capture_default_str();
    ct->add_option("--scan", ct_scan, "Ridge root-isolation scan")->check(CLI::PositiveNumber)->capture_default_str();
    ct->add_option("-o,--output", ct_out, "Output JSON");

    // classify-online
    auto* co = app.add_subcommand("classify-online", "Online tuning of (lambda, tau) for thresholded 0-1 loss");
    InputOpts co_in;
    add_input(co, co_in);
    GenOpts co_gen;
    add_gen(co, co_gen, "--gen-seed");
    std::string co_mode = "lasso", co_out, co_rounds, co_curve;
    std::vector<double> co_box{1e-3, 10.0}, co_tau, co_eps;
    std::optional<double> co_zeta;
    std::optional<std::size_t> co_T;
    std::uint64_t co_seed = 0, co_sseed = 0;
    bool co_doubling = false;
    int co_taugrid = 16, co_l2slices = 8;
    co->add_option("--mode", co_mode)->check(CLI::IsMember({"ridge", "lasso", "en"}))->capture_default_str();
    add_box(co, "--domain", co_box, "Lambda domain LO,HI");
    co->add_option("--tau", co_tau, "Threshold domain LO,HI (default from first instance)")->delimiter(',')->expected(2);
    co->add_option("--zeta", co_zeta, "Step size")->check(CLI::PositiveNumber);
    co->add_option("--horizon", co_T, "Rounds T")->check(CLI::PositiveNumber);
    co->add_option("--seed", co_seed, "Sampler seed")->capture_default_str();
    co->add_option("--stream-seed", co_sseed, "Synthetic stream seed")->capture_default_str();
    co->add_flag("--doubling", co_doubling, "Anytime mode");
    co->add_option("--tau-grid", co_taugrid, "tau slices")->check(CLI::PositiveNumber)->capture_default_str();
    co->add_option("--lambda2-slices", co_l2slices, "lambda2 slices (en)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    co->add_option("--eps", co_eps, "Dispersion windows")->delimiter(',');
    co->add_option("-o,--output", co_out, "Report JSON");
    co->add_option("--rounds-csv", co_rounds, "Per-round parameters and losses");
    co->add_option("--regret-csv", co_curve, "Cumulative regret curve");

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic instance or stream");
    GenOpts gen_g;
    add_gen(gen, gen_g, "--seed");
    std::string gen_format = "json", gen_out;
    bool gen_cls = false;
    std::size_t gen_stream = 0;
    gen->add_option("--format", gen_format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    gen->add_flag("--classification", gen_cls, "Binary labels 1{y >= 0}");
    gen->add_option("--stream", gen_stream, "Write a stream of this many instances instead")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    gen->add_option("-o,--output", gen_out, "Output file (json) or directory (csv)")->required();

    // diagnose-dispersion
    auto* dd = app.add_subcommand("diagnose-dispersion", "Breakpoint dispersion of a stream's loss curves");
    InputOpts dd_in;
    add_input(dd, dd_in);
    GenOpts dd_gen;
    add_gen(dd, dd_gen, "--gen-seed");
    std::string dd_mode = "lasso", dd_out, dd_bps;
    std::vector<double> dd_domain{1e-3, 10.0}, dd_eps;
    std::optional<std::size_t> dd_T;
    std::uint64_t dd_sseed = 0;
    int dd_slices = 32;
    dd->add_option("--mode", dd_mode)->check(CLI::IsMember({"ridge", "lasso", "en"}))->capture_default_str();
    add_box(dd, "--domain", dd_domain, "Domain LO,HI");
    dd->add_option("--horizon", dd_T, "Rounds T")->check(CLI::PositiveNumber);
    dd->add_option("--stream-seed", dd_sseed, "Synthetic stream seed")->capture_default_str();
    dd->add_option("--slices", dd_slices, "lambda2 slices (en)")->check(CLI::PositiveNumber)->capture_default_str();
    dd->add_option("--eps", dd_eps, "Windows (default T^-1/2)")->delimiter(',');
    dd->add_option("-o,--output", dd_out, "Output JSON");
    dd->add_option("--breakpoints-csv", dd_bps, "All breakpoints (round, slice, lambda)");

    // experiment
    auto* ex = app.add_subcommand("experiment", "Experiment drivers (CSV outputs)");
    ex->require_subcommand(1);

    auto* sc = ex->add_subcommand("sample-complexity", "Excess held-out loss vs number of CV draws");
    InputOpts sc_in;
    add_input(sc, sc_in);
    GenOpts sc_gen;
    sc_gen.cfg.m = 12;
    sc_gen.cfg.m_val = 1;
    sc_gen.cfg.kappa_jitter = 0.3;
    add_gen(sc, sc_gen, "--gen-seed");
    SampleComplexityConfig sc_cfg;
    std::string sc_mode = "lasso", sc_obj = "val", sc_cv = "loocv", sc_out, sc_summary;
    std::vector<double> sc_box{1e-3, 10.0};
    sc->add_option("--mode", sc_mode)->check(CLI::IsMember({"ridge", "lasso", "en"}))->capture_default_str();
    sc->add_option("--objective", sc_obj)->check(CLI::IsMember({"val", "aic", "bic"}))->capture_default_str();
    sc->add_option("--n-values", sc_cfg.n_values, "CV draws per ERM")->delimiter(',')->capture_default_str();
    sc->add_option("--trials", sc_cfg.trials)->check(CLI::PositiveNumber)->capture_default_str();
    sc->add_option("--cv", sc_cv)->check(CLI::IsMember({"loocv", "mccv"}))->capture_default_str();
    sc->add_option("--val-fraction", sc_cfg.val_fraction, "MCCV validation share")->capture_default_str();
    add_box(sc, "--box", sc_box, "Lambda box LO,HI");
    sc->add_option("--slices", sc_cfg.slices)->check(CLI::PositiveNumber)->capture_default_str();
    sc->add_option("--refine", sc_cfg.refine_iters)->check(CLI::NonNegativeNumber)->capture_default_str();
    sc->add_option("--heldout-factor", sc_cfg.heldout_factor)->check(CLI::PositiveNumber)->capture_default_str();
    sc->add_option("--seed", sc_cfg.seed, "Experiment seed")->capture_default_str();
    sc->add_option("-o,--output", sc_out, "CSV output")->required();
    sc->add_option("--summary", sc_summary, "Summary JSON (stdout when omitted)");

    auto* rg = ex->add_subcommand("regret", "Regret vs horizon on synthetic streams");
    GenOpts rg_gen;
    add_gen(rg, rg_gen, "--gen-seed");
    RegretExperimentConfig rg_cfg;
    std::string rg_mode = "lasso", rg_out, rg_summary;
    std::vector<double> rg_domain{1e-3, 10.0};
    std::optional<double> rg_zeta;
    rg->add_option("--mode", rg_mode)->check(CLI::IsMember({"ridge", "lasso", "en"}))->capture_default_str();
    rg->add_option("--T-values", rg_cfg.T_values)->delimiter(',')->capture_default_str();
    rg->add_option("--seeds", rg_cfg.seeds)->delimiter(',')->capture_default_str();
    add_box(rg, "--domain", rg_domain, "Domain LO,HI");
    rg->add_option("--slices", rg_cfg.slices)->check(CLI::PositiveNumber)->capture_default_str();
    rg->add_flag("--doubling", rg_cfg.doubling);
    rg->add_option("--zeta", rg_zeta)->check(CLI::PositiveNumber);
    rg->add_option("-o,--output", rg_out, "CSV output")->required();
    rg->add_option("--summary", rg_summary, "Summary JSON (stdout when omitted)");

    auto* dx = ex->add_subcommand("dispersion", "Dispersion counts vs horizon on synthetic streams");
    GenOpts dx_gen;
    add_gen(dx, dx_gen, "--gen-seed");
    std::string dx_mode = "lasso", dx_out, dx_summary;
    std::vector<double> dx_domain{1e-3, 10.0};
    std::vector<std::size_t> dx_T{100, 200, 400, 800, 1600, 3200};
    std::vector<std::uint64_t> dx_seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    int dx_slices = 32;
    dx->add_option("--mode", dx_mode)->check(CLI::IsMember({"ridge", "lasso", "en"}))->capture_default_str();
    dx->add_option("--T-values", dx_T)->delimiter(',')->capture_default_str();
    dx->add_option("--seeds", dx_seeds)->delimiter(',')->capture_default_str();
    add_box(dx, "--domain", dx_domain, "Domain LO,HI");
    dx->add_option("--slices", dx_slices)->check(CLI::PositiveNumber)->capture_default_str();
    dx->add_option("-o,--output", dx_out, "CSV output")->required();
    dx->add_option("--summary", dx_summary, "Summary JSON (stdout when omitted)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (solve->parsed()) {
            const auto inst = single(solve_in);
            const ENParams prm{solve_l1, solve_l2};
            prm.validate();
            Coefs c;
            if (solve_method == "path") {
                if (!(solve_l1 > 0.0)) throw Error(ErrorKind::invalid_config, "path method needs lambda1 > 0");
                const RegPath path = en_path(inst.train, solve_l2, 0.5 * solve_l1);
                c = path_eval(path, solve_l1);
            } else if (solve_l1 == 0.0) {
                c = ridge_fit(inst.train, solve_l2);
            } else {
                CDOptions o;
                o.tol = solve_tol;
                o.max_iter = solve_iter;
                c = en_fit_cd(inst.train, prm, o);
            }
            const KKTReport k = kkt_check(inst.train, c, prm, solve_kkt);
            json j{{"config", echo_config(solve, "solve")},
                   {"lambda1", solve_l1},
                   {"lambda2", solve_l2},
                   {"beta", to_json_vector(c.beta)},
                   {"support", support_json(SignedSupport::of(c.beta))},
                   {"objective", en_objective(inst.train, c.beta, prm)},
                   {"val_loss", val_loss(c, inst.val)},
                   {"kkt",
                    {{"max_active_violation", k.max_active_violation},
                     {"max_inactive_excess", k.max_inactive_excess},
                     {"passed", k.passed}}}};
            emit_json(j, solve_out, out);
            return 0;
        }

        if (pathc->parsed()) {
            const auto inst = single(path_in);
            PathOptions po;
            po.budget = path_budget;
            RegPath path;
            if (path_lmin) {
                path = en_path(inst.train, path_l2, *path_lmin, po);
            } else {
                const RegPath probe = en_path(inst.train, path_l2, std::numeric_limits<double>::max(), po);
                path = en_path(inst.train, path_l2, 1e-6 * std::max(probe.lambda_max, 1e-300), po);
            }
            json segs = json::array();
            for (const auto& s : path.segments)
                segs.push_back({{"lo", s.lo},
                                {"hi", s.hi},
                                {"support", support_json(s.support)},
                                {"c1", to_json_vector(s.c1)},
                                {"c2", to_json_vector(s.c2)}});
            json evs = json::array();
            for (const auto& e : path.events)
                evs.push_back({{"lambda1", e.lambda1},
                               {"kind", e.kind == EventKind::join ? "join" : "leave"},
                               {"feature", e.feature},
                               {"sign", e.sign}});
            const PieceStats st = piece_stats(path);
            json j{{"config", echo_config(pathc, "path")},
                   {"lambda2", path.lambda2},
                   {"lambda_max", path.lambda_max},
                   {"lambda_min", path.lambda_min},
                   {"num_features", path.num_features},
                   {"num_rows", path.num_rows},
                   {"segments", segs},
                   {"events", evs},
                   {"knots", path.knots()},
                   {"stats",
                    {{"count", st.count},
                     {"max_support", st.max_support},
                     {"bound_3p_ok", st.bound_3p_ok},
                     {"overparam_bound_ok", st.overparam_bound_ok}}},
                   {"val_curve", curve_json(val_loss_curve(path, inst.val))}};
            emit_json(j, path_out, out);
            return 0;
        }

        if (erm->parsed()) {
            const auto insts = collect(erm_in);
            TuneOptions o;
            o.mode = parse_mode(erm_mode);
            o.objective = parse_objective(erm_obj);
            o.box = to_box(erm_box);
            o.slices = erm_slices;
            o.refine_iters = erm_refine;
            o.ridge_grid = erm_rgrid;
            const TuningResult r = erm_tune(insts, o);
            json j{{"config", echo_config(erm, "tune-erm")},
                   {"lambda1", r.lambda1},
                   {"lambda2", r.lambda2},
                   {"loss", r.loss},
                   {"mode", to_string(r.mode)},
                   {"objective", to_string(r.objective)},
                   {"n_instances", r.n_instances},
                   {"diagnostics",
                    {{"evaluated_slices", r.evaluated_slices},
                     {"total_breakpoints", r.total_breakpoints},
                     {"boundary_crossings", r.boundary_crossings}}}};
            emit_json(j, erm_out, out);
            return 0;
        }

        if (onl->parsed()) {
            const auto stream = online_stream(onl_in, onl_gen, onl_sseed, onl_T, false);
            OnlineOptions o;
            o.mode = parse_mode(onl_mode);
            o.domain = to_box(onl_domain);
            o.zeta = onl_zeta;
            o.doubling = onl_doubling;
            o.H = onl_H;
            o.seed = onl_seed;
            o.slices = onl_slices;
            o.ridge_grid = onl_rgrid;
            o.epsilons = onl_eps;
            const RegretReport r = run_online(stream, o);
            json j = report_json(r);
            j["config"] = echo_config(onl, "tune-online");
            emit_json(j, onl_out, out);
            if (!onl_rounds.empty()) write_rounds_csv(r, onl_rounds);
            if (!onl_curve.empty()) {
                std::vector<double> hl;
                for (const auto& inst : stream) hl.push_back(regression_loss(inst, r.hindsight_params));
                write_regret_curve_csv(r, hl, onl_curve);
            }
            return 0;
        }

        if (ct->parsed()) {
            const auto insts = collect(ct_in);
            ClassifyOptions o;
            o.mode = parse_mode(ct_mode);
            o.box = to_box(ct_box);
            if (!ct_tau.empty()) {
                o.tau_lo = ct_tau.at(0);
                o.tau_hi = ct_tau.at(1);
            }
            o.slices = ct_slices;
            o.scan_n = ct_scan;
            const ClassifyResult r = classify_tune(insts, o);
            json j{{"config", echo_config(ct, "classify-tune")},
                   {"lambda1", r.lambda1},
                   {"lambda2", r.lambda2},
                   {"tau", r.tau},
                   {"loss", r.loss},
                   {"mode", to_string(r.mode)},
                   {"n_instances", r.n_instances},
                   {"lambda_intervals", r.lambda_intervals},
                   {"tau_lo", r.tau_lo},
                   {"tau_hi", r.tau_hi}};
            emit_json(j, ct_out, out);
            return 0;
        }

        if (co->parsed()) {
            const auto stream = online_stream(co_in, co_gen, co_sseed, co_T, true);
            ClassifyOnlineOptions o;
            o.tune.mode = parse_mode(co_mode);
            o.tune.box = to_box(co_box);
            if (!co_tau.empty()) {
                o.tune.tau_lo = co_tau.at(0);
                o.tune.tau_hi = co_tau.at(1);
            }
            o.tau_grid = co_taugrid;
            o.lambda2_slices = co_l2slices;
            o.zeta = co_zeta;
            o.doubling = co_doubling;
            o.seed = co_seed;
            o.epsilons = co_eps;
            const RegretReport r = classify_online(stream, o);
            json j = report_json(r);
            j["config"] = echo_config(co, "classify-online");
            emit_json(j, co_out, out);
            if (!co_rounds.empty()) write_rounds_csv(r, co_rounds);
            if (!co_curve.empty()) {
                std::vector<double> hl;
                const auto& hp = r.hindsight_params;
                for (const auto& inst : stream)
                    hl.push_back(direct_classify_loss({inst}, hp.lambda1, hp.lambda2, hp.tau));
                write_regret_curve_csv(r, hl, co_curve);
            }
            return 0;
        }

        if (gen->parsed()) {
            gen_g.cfg.validate();
            if (gen_stream > 0) {
                save_stream(synthetic_stream(gen_g.cfg, 0, gen_stream, gen_cls), gen_out);
            } else {
                const ProblemInstance inst = gen_cls ? gen_classification(gen_g.cfg) : gen_synthetic(gen_g.cfg);
                save_instance(inst, gen_out,
                              gen_format == "csv" ? InstanceFormat::csv_pair : InstanceFormat::json_bundle);
            }
            return 0;
        }

        if (dd->parsed()) {
            const auto stream = online_stream(dd_in, dd_gen, dd_sseed, dd_T, false);
            const Box box = to_box(dd_domain);
            const TuneMode mode = parse_mode(dd_mode);
            const auto bps = stream_breakpoints(stream, mode, box, dd_slices);
            const double T = static_cast<double>(stream.size());
            std::vector<double> eps = dd_eps.empty() ? std::vector<double>{1.0 / std::sqrt(T)} : dd_eps;
            for (double e : eps)
                if (!(e > 0.0)) throw Error(ErrorKind::invalid_config, "windows must be positive");
            std::map<double, std::size_t> worst;
            std::size_t total = 0;
            const std::size_t S = bps.front().size();
            for (std::size_t s = 0; s < S; ++s) {
                std::vector<std::vector<double>> sets;
                for (const auto& r : bps) {
                    sets.push_back(r[s]);
                    total += r[s].size();
                }
                for (const auto& [e, n] : dispersion_probe(sets, eps)) worst[e] = std::max(worst[e], n);
            }
            json win = json::array();
            for (const auto& [e, n] : worst)
                win.push_back({{"epsilon", e}, {"max_count", n}, {"ratio", static_cast<double>(n) / (e * T)}});
            json j{{"config", echo_config(dd, "diagnose-dispersion")},
                   {"mode", to_string(mode)},
                   {"T", stream.size()},
                   {"slices", S},
                   {"total_breakpoints", total},
                   {"windows", win}};
            emit_json(j, dd_out, out);
            if (!dd_bps.empty()) {
                auto f = open_out(dd_bps);
                f << "round,slice,lambda\n";
                for (std::size_t t = 0; t < bps.size(); ++t)
                    for (std::size_t s = 0; s < bps[t].size(); ++s)
                        for (double x : bps[t][s]) f << t + 1 << ',' << s << ',' << x << '\n';
            }
            return 0;
        }

        if (sc->parsed()) {
            if (has_input(sc_in)) {
                const auto inst = single(sc_in);
                Dataset d;
                d.X.resize(inst.train.rows() + inst.val.rows(), inst.features());
                d.X << inst.train.X, inst.val.X;
                d.y.resize(d.X.rows());
                d.y << inst.train.y, inst.val.y;
                sc_cfg.data = std::move(d);
            } else {
                sc_cfg.data = gen_synthetic(sc_gen.cfg).train;
            }
            sc_cfg.mode = parse_mode(sc_mode);
            sc_cfg.objective = parse_objective(sc_obj);
            sc_cfg.cv = parse_cv(sc_cv);
            sc_cfg.box = to_box(sc_box);
            const auto r = experiment_sample_complexity(sc_cfg);
            write_sample_complexity_csv(r, sc_out);
            json rows = json::array();
            for (const auto& s : r.summary)
                rows.push_back({{"n", s.n}, {"mean", s.mean}, {"stddev", s.stddev}, {"median", s.median}});
            json j{{"config", echo_config(sc, "experiment sample-complexity")},
                   {"experiment", "sample-complexity"},
                   {"csv", sc_out},
                   {"normalizer", r.normalizer},
                   {"heldout_best", r.heldout_best},
                   {"heldout_size", r.heldout_size},
                   {"summary", rows}};
            emit_json(j, sc_summary, out);
            return 0;
        }

        if (rg->parsed()) {
            rg_cfg.gen = rg_gen.cfg;
            rg_cfg.mode = parse_mode(rg_mode);
            rg_cfg.domain = to_box(rg_domain);
            rg_cfg.zeta = rg_zeta;
            const auto r = experiment_regret(rg_cfg);
            write_regret_csv(r, rg_out);
            json rows = json::array();
            for (const auto& s : r.summary)
                rows.push_back({{"T", s.T},
                                {"median_regret", s.median_regret},
                                {"median_avg_regret", s.median_avg_regret},
                                {"median_dispersion_ratio", s.median_dispersion_ratio}});
            json j{{"config", echo_config(rg, "experiment regret")},
                   {"experiment", "regret"},
                   {"csv", rg_out},
                   {"slope", r.slope},
                   {"summary", rows}};
            emit_json(j, rg_summary, out);
            return 0;
        }

        if (dx->parsed()) {
            const auto rows = experiment_dispersion(dx_gen.cfg, parse_mode(dx_mode), to_box(dx_domain), dx_T,
                                                    dx_seeds, dx_slices);
            write_dispersion_csv(rows, dx_out);
            std::map<std::size_t, double> worst;
            for (const auto& r : rows) worst[r.T] = std::max(worst[r.T], r.ratio);
            json summ = json::array();
            for (const auto& [T, ratio] : worst) summ.push_back({{"T", T}, {"max_ratio", ratio}});
            json j{{"config", echo_config(dx, "experiment dispersion")},
                   {"experiment", "dispersion"},
                   {"csv", dx_out},
                   {"summary", summ}};
            emit_json(j, dx_summary, out);
            return 0;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return is_validation(e.kind()) ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << "error: no command\n";
    return 2;
}

int cmd_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cmd_dispatch(args, out, err);
}

} // namespace regtune::cli
