#include "regtune/online.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "regtune/error.hpp"

namespace regtune {

namespace {

// Exponents below this are treated as zero mass.
constexpr double underflow_exponent = 700.0;

PiecewiseQuadratic zero_curve(const Box& box)
{
    PiecewiseQuadratic c;
    c.pieces.push_back({box.lo, box.hi, 0.0, 0.0, 0.0, -1});
    return c;
}

struct Density
{
    const QuadPiece& piece;
    double k;
    double shift;

    double operator()(double x) const { return std::exp(-k * (piece(x) - shift)); }
};

double simpson_rec(const Density& f, double a, double b, double fa, double fm, double fb, double whole, double eps,
                   int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

double simpson(const Density& f, double a, double b, double rel_tol)
{
    if (!(b > a)) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double scale = std::max(whole, (b - a) * std::max({fa, fm, fb}));
    return simpson_rec(f, a, b, fa, fm, fb, whole, rel_tol * scale, 40);
}

double min_on(const QuadPiece& p, double lo, double hi)
{
    double v = std::min(p(lo), p(hi));
    if (p.a > 0.0) {
        const double vertex = -p.b / (2.0 * p.a);
        if (vertex > lo && vertex < hi) v = std::min(v, p(vertex));
    }
    return v;
}

double mass_between(const QuadPiece& piece, double lo, double hi, double k, double shift, double rel_tol)
{
    if (!(hi > lo)) return 0.0;
    if (k == 0.0) return hi - lo;
    if (k * (min_on(piece, lo, hi) - shift) > underflow_exponent) return 0.0;
    const Density f{piece, k, shift};
    // Split at an interior vertex so each half is monotone.
    if (piece.a != 0.0) {
        const double vertex = -piece.b / (2.0 * piece.a);
        if (vertex > lo && vertex < hi) return simpson(f, lo, vertex, rel_tol) + simpson(f, vertex, hi, rel_tol);
    }
    return simpson(f, lo, hi, rel_tol);
}

double global_min(const std::vector<PiecewiseQuadratic>& curves)
{
    double m = std::numeric_limits<double>::infinity();
    for (const auto& c : curves) m = std::min(m, minimize_pw(c).value);
    return m;
}

double exponent_scale(const OnlineState& s) { return s.H > 0.0 ? s.zeta / s.H : 0.0; }

} // namespace

double piece_mass(const QuadPiece& piece, double k, double shift, double rel_tol)
{
    return mass_between(piece, piece.lo, piece.hi, k, shift, rel_tol);
}

double default_zeta(std::size_t T)
{
    const double t = static_cast<double>(std::max<std::size_t>(T, 1));
    return std::min(1.0, std::sqrt(std::max(std::log(t), 1.0) / t));
}

OnlineState ew_init(const Box& domain, double zeta, std::optional<double> H, std::uint64_t seed,
                    std::vector<double> slice_values)
{
    domain.validate();
    if (!(zeta > 0.0) || zeta > 1.0) throw Error(ErrorKind::invalid_config, "zeta must lie in (0, 1]");
    if (H && !(*H > 0.0 && std::isfinite(*H))) throw Error(ErrorKind::invalid_config, "H must be positive");
    if (slice_values.empty()) throw Error(ErrorKind::invalid_config, "need at least one slice");
    OnlineState s;
    s.domain = domain;
    s.slice_values = std::move(slice_values);
    s.cum_loss.assign(s.slice_values.size(), zero_curve(domain));
    s.zeta = zeta;
    s.H = H ? *H : 0.0;
    s.seed = seed;
    s.rng.seed(seed);
    return s;
}

std::vector<std::vector<double>> ew_piece_masses(const OnlineState& state)
{
    const double k = exponent_scale(state);
    const double shift = k > 0.0 ? global_min(state.cum_loss) : 0.0;
    std::vector<std::vector<double>> out(state.cum_loss.size());
    for (std::size_t s = 0; s < state.cum_loss.size(); ++s) {
        out[s].reserve(state.cum_loss[s].pieces.size());
        for (const auto& p : state.cum_loss[s].pieces) out[s].push_back(piece_mass(p, k, shift));
    }
    return out;
}

OnlineDraw ew_sample(OnlineState& state)
{
    const double k = exponent_scale(state);
    const double shift = k > 0.0 ? global_min(state.cum_loss) : 0.0;
    const auto masses = ew_piece_masses(state);
    double total = 0.0;
    for (const auto& ms : masses)
        for (double m : ms) total += m;

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double target = u01(state.rng) * total;
    const double inner = u01(state.rng);

    // Categorical draw over (slice, piece); falls back to the last positive piece on round-off.
    std::size_t slice = 0, piece = 0;
    bool found = false;
    double acc = 0.0;
    for (std::size_t s = 0; s < masses.size() && !found; ++s) {
        for (std::size_t j = 0; j < masses[s].size(); ++j) {
            if (masses[s][j] <= 0.0) continue;
            slice = s;
            piece = j;
            acc += masses[s][j];
            if (acc >= target) {
                found = true;
                break;
            }
        }
    }

    const QuadPiece& p = state.cum_loss[slice].pieces[piece];
    const double want = inner * masses[slice][piece];
    double a = p.lo, b = p.hi;
    const double tol = 1e-10 * (p.hi - p.lo);
    while (b - a > tol) {
        const double mid = 0.5 * (a + b);
        if (mass_between(p, p.lo, mid, k, shift, 1e-10) < want)
            a = mid;
        else
            b = mid;
    }
    return {slice, 0.5 * (a + b)};
}

double ew_update(OnlineState& state, const std::vector<PiecewiseQuadratic>& curves)
{
    if (curves.size() != state.cum_loss.size())
        throw Error(ErrorKind::domain_mismatch, "one round curve per slice expected");
    if (state.H <= 0.0) {
        double top = 0.0;
        for (const auto& c : curves) top = std::max(top, maximize_pw(c));
        state.H = top > 0.0 ? 4.0 * top : 1.0;
    }
    double clamped = 0.0;
    for (std::size_t s = 0; s < curves.size(); ++s) {
        double frac = 0.0;
        const PiecewiseQuadratic capped = clamp_curve(curves[s], state.H, &frac);
        clamped += frac;
        state.cum_loss[s] = combine_curves({&state.cum_loss[s], &capped}, {1.0, 1.0});
    }
    clamped /= static_cast<double>(curves.size());
    state.clamp_sum += clamped;
    ++state.round;
    return clamped;
}

std::map<double, std::size_t> dispersion_probe(const std::vector<std::vector<double>>& breakpoint_sets,
                                               const std::vector<double>& epsilons)
{
    std::vector<double> pooled;
    for (const auto& s : breakpoint_sets) pooled.insert(pooled.end(), s.begin(), s.end());
    std::sort(pooled.begin(), pooled.end());
    std::map<double, std::size_t> out;
    for (double eps : epsilons) {
        std::size_t best = 0;
        for (std::size_t i = 0, j = 0; i < pooled.size(); ++i) {
            if (j < i) j = i;
            while (j < pooled.size() && pooled[j] <= pooled[i] + eps) ++j;
            best = std::max(best, j - i);
        }
        out[eps] = best;
    }
    return out;
}

void OnlineOptions::validate() const
{
    domain.validate();
    if (zeta && (!(*zeta > 0.0) || *zeta > 1.0)) throw Error(ErrorKind::invalid_config, "zeta must lie in (0, 1]");
    if (H && !(*H > 0.0)) throw Error(ErrorKind::invalid_config, "H must be positive");
    if (mode == TuneMode::en && slices < 2) throw Error(ErrorKind::invalid_config, "en mode needs >= 2 slices");
    if (mode == TuneMode::ridge && ridge_grid < 2) throw Error(ErrorKind::invalid_config, "ridge_grid must be >= 2");
    for (double e : epsilons)
        if (!(e > 0.0)) throw Error(ErrorKind::invalid_config, "dispersion windows must be positive");
}

RegretReport run_slices(std::size_t T, const LoopConfig& cfg, const std::function<RoundData(std::size_t)>& round,
                        const std::function<Hindsight(const std::vector<PiecewiseQuadratic>&)>& hindsight,
                        const std::function<OnlineParams(std::size_t, double)>& to_params)
{
    if (T == 0) throw Error(ErrorKind::invalid_config, "empty stream");
    const std::size_t S = cfg.slice_values.size();
    RegretReport rep;
    rep.T = T;
    rep.doubling = cfg.doubling;

    std::size_t epoch_len = cfg.doubling ? 1 : T;
    std::size_t epoch_end = epoch_len;
    const double zeta0 = cfg.zeta ? *cfg.zeta : default_zeta(epoch_len);
    OnlineState state = ew_init(cfg.domain, zeta0, cfg.H, cfg.seed, cfg.slice_values);
    rep.zeta = zeta0;

    std::vector<PiecewiseQuadratic> raw(S, zero_curve(cfg.domain));
    std::vector<std::vector<double>> pooled(S);
    double clamp_sum = 0.0;

    for (std::size_t t = 0; t < T; ++t) {
        if (t == epoch_end) {
            epoch_len *= 2;
            epoch_end = t + epoch_len;
            const double z = cfg.zeta ? *cfg.zeta : default_zeta(epoch_len);
            const double H = state.H;
            const auto rng = state.rng;
            state = ew_init(cfg.domain, z, H > 0.0 ? std::optional<double>(H) : cfg.H, cfg.seed, cfg.slice_values);
            state.rng = rng;
        }
        const OnlineDraw draw = ew_sample(state);  // before the round's data is seen
        RoundData data = round(t);
        if (data.curves.size() != S) throw Error(ErrorKind::domain_mismatch, "round produced wrong slice count");
        const double loss = data.loss(draw.slice, draw.x);
        rep.rounds.push_back({to_params(draw.slice, draw.x), loss});
        rep.online_total += loss;
        clamp_sum += ew_update(state, data.curves);
        for (std::size_t s = 0; s < S; ++s) raw[s] = combine_curves({&raw[s], &data.curves[s]}, {1.0, 1.0});
        if (!data.breakpoints.empty()) {
            for (std::size_t s = 0; s < S; ++s)
                pooled[s].insert(pooled[s].end(), data.breakpoints[s].begin(), data.breakpoints[s].end());
            if (cfg.keep_breakpoints) rep.breakpoints.push_back(std::move(data.breakpoints));
        }
    }

    Hindsight best;
    if (hindsight) {
        best = hindsight(raw);
    } else {
        best.total = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < S; ++s) {
            const Minimum m = minimize_pw(raw[s]);
            if (m.value < best.total) best = {s, m.arg, m.value};
        }
    }
    rep.hindsight_params = to_params(best.slice, best.x);
    rep.hindsight_total = best.total;
    rep.regret = rep.online_total - best.total;
    rep.avg_regret = rep.regret / static_cast<double>(T);
    rep.H = state.H;
    rep.clamp_rate = clamp_sum / static_cast<double>(T);

    const std::vector<double> eps =
        cfg.epsilons.empty() ? std::vector<double>{1.0 / std::sqrt(static_cast<double>(T))} : cfg.epsilons;
    for (double e : eps) rep.dispersion_counts[e] = 0;
    for (std::size_t s = 0; s < S; ++s) {
        for (const auto& [e, n] : dispersion_probe({pooled[s]}, eps))
            rep.dispersion_counts[e] = std::max(rep.dispersion_counts[e], n);
    }
    return rep;
}

RegretReport run_online(const std::vector<ProblemInstance>& stream, const OnlineOptions& opts)
{
    opts.validate();
    if (stream.empty()) throw Error(ErrorKind::invalid_config, "empty stream");
    const Box box = opts.domain;

    LoopConfig cfg;
    cfg.domain = box;
    cfg.zeta = opts.zeta;
    cfg.doubling = opts.doubling;
    cfg.H = opts.H;
    cfg.seed = opts.seed;
    cfg.epsilons = opts.epsilons;
    cfg.keep_breakpoints = opts.keep_breakpoints;

    RegretReport rep;
    if (opts.mode == TuneMode::lasso || opts.mode == TuneMode::en) {
        const bool en = opts.mode == TuneMode::en;
        cfg.slice_values = en ? log_grid(box.lo, box.hi, opts.slices) : std::vector<double>{0.0};
        auto round = [&](std::size_t t) {
            const auto& inst = stream[t];
            auto paths = std::make_shared<std::vector<RegPath>>();
            RoundData d;
            for (double l2 : cfg.slice_values) {
                paths->push_back(en_path(inst.train, l2, box.lo));
                d.curves.push_back(val_loss_curve(paths->back(), inst.val, box.hi));
                d.breakpoints.push_back(d.curves.back().knots());
            }
            const Dataset* val = &inst.val;
            d.loss = [paths, val](std::size_t s, double x) { return val_loss(path_eval((*paths)[s], x), *val); };
            return d;
        };
        const auto slices = cfg.slice_values;
        rep = run_slices(stream.size(), cfg, round, {}, [en, slices](std::size_t s, double x) {
            return OnlineParams{x, en ? slices[s] : 0.0, 0.0};
        });
    } else {
        cfg.slice_values = {0.0};
        const auto nodes = log_grid(box.lo, box.hi, opts.ridge_grid);
        std::vector<RidgeLossEvaluator> evals;
        evals.reserve(stream.size());
        for (const auto& inst : stream) evals.push_back(ridge_loss_evaluator(inst));
        auto round = [&](std::size_t t) {
            const RidgeLossEvaluator* ev = &evals[t];
            RoundData d;
            // Piecewise-linear interpolant on the log grid; the played loss stays exact.
            PiecewiseQuadratic c;
            double prev = ev->loss(nodes.front());
            for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
                const double next = ev->loss(nodes[k + 1]);
                const double slope = (next - prev) / (nodes[k + 1] - nodes[k]);
                c.pieces.push_back({nodes[k], nodes[k + 1], 0.0, slope, prev - slope * nodes[k], -1});
                prev = next;
            }
            d.curves.push_back(std::move(c));
            d.loss = [ev](std::size_t, double x) { return ev->loss(x); };
            return d;
        };
        auto hind = [&](const std::vector<PiecewiseQuadratic>&) {
            const Minimum m = ridge_minimize(evals, box);
            return Hindsight{0, m.arg, m.value * static_cast<double>(evals.size())};
        };
        rep = run_slices(stream.size(), cfg, round, hind,
                         [](std::size_t, double x) { return OnlineParams{0.0, x, 0.0}; });
    }
    rep.mode = to_string(opts.mode);
    return rep;
}

} // namespace regtune
