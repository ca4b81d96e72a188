#include "regtune/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "regtune/error.hpp"

namespace regtune {

namespace {

void dedupe(std::vector<double>& v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [](double a, double b) {
                return std::abs(a - b) <= 1e-14 * std::max(1.0, std::abs(a));
            }),
            v.end());
}

double mismatch_fraction(const Vector& scores, double tau, const Vector& y)
{
    Eigen::Index bad = 0;
    for (Eigen::Index j = 0; j < scores.size(); ++j) bad += (scores(j) >= tau ? 1 : 0) != static_cast<int>(y(j));
    return static_cast<double>(bad) / static_cast<double>(scores.size());
}

// Fills piece_losses by evaluating `loss` at the midpoint of every piece.
template <class F>
void fill_losses(BreakpointSet& bs, F&& loss)
{
    std::vector<double> edges{bs.lo};
    edges.insert(edges.end(), bs.points.begin(), bs.points.end());
    edges.push_back(bs.hi);
    bs.piece_losses.clear();
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) bs.piece_losses.push_back(loss(0.5 * (edges[k] + edges[k + 1])));
}

BreakpointSet ridge_breakpoints_ev(const RidgeLossEvaluator& ev, double tau, const Box& box, int scan_n, double tol)
{
    BreakpointSet bs;
    bs.axis = BreakAxis::lambda2;
    bs.lo = box.lo;
    bs.hi = box.hi;
    const auto grid = log_grid(box.lo, box.hi, scan_n);
    Matrix S(ev.coef.rows(), static_cast<Eigen::Index>(grid.size()));
    for (std::size_t k = 0; k < grid.size(); ++k) S.col(static_cast<Eigen::Index>(k)) = ev.predictions(grid[k]);
    for (Eigen::Index j = 0; j < S.rows(); ++j) {
        auto mu = [&](double l) { return ev.coef.row(j).dot((ev.eigvals.array() + l).inverse().matrix()) - tau; };
        for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
            const double f0 = S(j, static_cast<Eigen::Index>(k)) - tau;
            const double f1 = S(j, static_cast<Eigen::Index>(k + 1)) - tau;
            if (f0 == 0.0 && k > 0) bs.points.push_back(grid[k]);
            if (!(f0 * f1 < 0.0)) continue;
            double a = grid[k], b = grid[k + 1];
            const bool rising = f0 < 0.0;
            while (b - a > tol * std::max(1.0, a)) {
                const double mid = 0.5 * (a + b);
                if (mid <= a || mid >= b) break;
                if ((mu(mid) < 0.0) == rising) a = mid;
                else b = mid;
            }
            bs.points.push_back(0.5 * (a + b));
        }
    }
    dedupe(bs.points);
    return bs;
}

struct LossUnits
{
    // Average over instances of mism_i / m'_i, kept as an integer multiple of 1 / (n * L).
    std::vector<long long> per_row;  // L / m'_i per instance
    long long denom = 1;
    bool exact = true;

    explicit LossUnits(const std::vector<ProblemInstance>& insts)
    {
        long long L = 1;
        for (const auto& inst : insts) {
            L = std::lcm(L, static_cast<long long>(inst.val.rows()));
            if (L > (1LL << 40)) {
                exact = false;
                break;
            }
        }
        if (!exact) return;
        for (const auto& inst : insts) per_row.push_back(L / static_cast<long long>(inst.val.rows()));
        denom = L * static_cast<long long>(insts.size());
    }
};

struct ScoredRow
{
    double score;
    int label;
    std::size_t inst;
};

struct TauPick
{
    double tau = 0.0;
    double loss = std::numeric_limits<double>::infinity();
};

// Exact best tau in [tlo, thi] for fixed scores: labels only change when tau passes a score.
TauPick sweep_tau(std::vector<ScoredRow>& rows, const std::vector<ProblemInstance>& insts, const LossUnits& units,
                  double tlo, double thi)
{
    std::sort(rows.begin(), rows.end(), [](const ScoredRow& a, const ScoredRow& b) { return a.score < b.score; });
    auto weight = [&](std::size_t i) {
        return units.exact ? static_cast<double>(units.per_row[i])
                           : 1.0 / static_cast<double>(insts[i].val.rows());
    };
    // Threshold below every score: everything predicted 1.
    double cost = 0.0;
    for (const auto& r : rows) cost += r.label == 0 ? weight(r.inst) : 0.0;
    const double norm = units.exact ? static_cast<double>(units.denom) : static_cast<double>(insts.size());

    TauPick best;
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t N = rows.size();
    for (std::size_t k = 0; k <= N; ++k) {
        // Candidate interval (s_{k-1}, s_k]: rows k.. predicted 1.
        if (k > 0) cost += rows[k - 1].label == 1 ? weight(rows[k - 1].inst) : -weight(rows[k - 1].inst);
        if (k > 0 && k < N && rows[k - 1].score == rows[k].score) continue;
        const double below = k == 0 ? -inf : rows[k - 1].score;
        const double above = k == N ? inf : rows[k].score;
        const double a = std::max(below, tlo), b = std::min(above, thi);
        if (!(below < thi) || !(above >= tlo) || a > b) continue;
        const double tau = a == b ? b : 0.5 * (a + b);
        const double value = cost / norm;
        if (value < best.loss - 1e-15) best = {tau, value};
    }
    return best;
}

struct Candidate
{
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double tau = 0.0;
    double loss = std::numeric_limits<double>::infinity();

    void offer(double l1, double l2, const TauPick& t)
    {
        const bool smaller = l2 < lambda2 || (l2 == lambda2 && (l1 < lambda1 || (l1 == lambda1 && t.tau < tau)));
        if (t.loss < loss - 1e-15 || (t.loss <= loss + 1e-15 && smaller) || !std::isfinite(loss))
            *this = {l1, l2, t.tau, t.loss};
    }
};

// Affine score coefficients (u, v) of every validation row on a lambda1 interval: score = u - lambda1 v.
void affine_scores(const RegPath& path, const Dataset& val, double mid, Vector& u, Vector& v)
{
    u = Vector::Zero(val.rows());
    v = Vector::Zero(val.rows());
    const auto k = find_segment(path, mid);
    if (k < 0) return;
    const auto& seg = path.segments[static_cast<std::size_t>(k)];
    for (std::size_t a = 0; a < seg.support.size(); ++a) {
        const auto col = val.X.col(seg.support.indices[a]);
        u += seg.c1(static_cast<Eigen::Index>(a)) * col;
        v += seg.c2(static_cast<Eigen::Index>(a)) * col;
    }
}

// Exact search along lambda1 for one lambda2 (0 = LASSO).
std::size_t tune_lambda1(const std::vector<ProblemInstance>& insts, double lambda2, const Box& box, double tlo,
                         double thi, const LossUnits& units, Candidate& best)
{
    std::vector<RegPath> paths;
    std::vector<double> knots{box.lo, box.hi};
    for (const auto& inst : insts) {
        paths.push_back(en_path(inst.train, lambda2, box.lo));
        for (const auto& seg : paths.back().segments) {
            if (seg.lo > box.lo && seg.lo < box.hi) knots.push_back(seg.lo);
        }
        if (paths.back().lambda_max > box.lo && paths.back().lambda_max < box.hi)
            knots.push_back(paths.back().lambda_max);
    }
    dedupe(knots);

    std::size_t intervals = 0;
    std::vector<Vector> U(insts.size()), V(insts.size());
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double lo = knots[k], hi = knots[k + 1];
        if (!(hi > lo)) continue;
        const double mid = 0.5 * (lo + hi);
        std::vector<double> us, vs;
        for (std::size_t i = 0; i < insts.size(); ++i) {
            affine_scores(paths[i], insts[i].val, mid, U[i], V[i]);
            us.insert(us.end(), U[i].data(), U[i].data() + U[i].size());
            vs.insert(vs.end(), V[i].data(), V[i].data() + V[i].size());
        }
        // Split where two scores cross or a score meets a tau box edge.
        std::vector<double> cuts{lo, hi};
        auto add = [&](double x) {
            if (x > lo && x < hi) cuts.push_back(x);
        };
        for (std::size_t a = 0; a < us.size(); ++a) {
            if (vs[a] != 0.0) {
                add((us[a] - tlo) / vs[a]);
                add((us[a] - thi) / vs[a]);
            }
            for (std::size_t b = a + 1; b < us.size(); ++b)
                if (vs[a] != vs[b]) add((us[a] - us[b]) / (vs[a] - vs[b]));
        }
        dedupe(cuts);
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            if (!(cuts[c + 1] > cuts[c])) continue;
            const double x = 0.5 * (cuts[c] + cuts[c + 1]);
            std::vector<ScoredRow> rows;
            for (std::size_t i = 0; i < insts.size(); ++i)
                for (Eigen::Index j = 0; j < U[i].size(); ++j)
                    rows.push_back({U[i](j) - x * V[i](j), static_cast<int>(insts[i].val.y(j)), i});
            best.offer(x, lambda2, sweep_tau(rows, insts, units, tlo, thi));
            ++intervals;
        }
    }
    return intervals;
}

std::size_t tune_ridge(const std::vector<ProblemInstance>& insts, const ClassifyOptions& opts, double tlo, double thi,
                       const LossUnits& units, Candidate& best)
{
    std::vector<RidgeLossEvaluator> evs;
    for (const auto& inst : insts) evs.push_back(ridge_loss_evaluator(inst));
    const auto grid = log_grid(opts.box.lo, opts.box.hi, opts.scan_n);
    auto scores = [&](double l) {
        std::vector<double> out;
        for (const auto& ev : evs) {
            const Vector p = ev.predictions(l);
            out.insert(out.end(), p.data(), p.data() + p.size());
        }
        return out;
    };
    std::vector<std::vector<double>> S;
    for (double l : grid) S.push_back(scores(l));
    const std::size_t N = S.front().size();

    std::vector<double> cuts{opts.box.lo, opts.box.hi};
    auto bisect = [&](auto&& f, double a, double b) {
        const bool rising = f(a) < 0.0;
        while (b - a > 1e-12 * std::max(1.0, a)) {
            const double mid = 0.5 * (a + b);
            if (mid <= a || mid >= b) break;
            if ((f(mid) < 0.0) == rising) a = mid;
            else b = mid;
        }
        cuts.push_back(0.5 * (a + b));
    };
    // Score of global row r at lambda2.
    std::vector<std::pair<std::size_t, Eigen::Index>> where;
    for (std::size_t i = 0; i < evs.size(); ++i)
        for (Eigen::Index j = 0; j < evs[i].coef.rows(); ++j) where.emplace_back(i, j);
    auto score = [&](std::size_t r, double l) {
        const auto& ev = evs[where[r].first];
        return ev.coef.row(where[r].second).dot((ev.eigvals.array() + l).inverse().matrix());
    };
    for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
        for (std::size_t a = 0; a < N; ++a) {
            for (double edge : {tlo, thi}) {
                if ((S[g][a] - edge) * (S[g + 1][a] - edge) < 0.0)
                    bisect([&](double l) { return score(a, l) - edge; }, grid[g], grid[g + 1]);
            }
            for (std::size_t b = a + 1; b < N; ++b) {
                if ((S[g][a] - S[g][b]) * (S[g + 1][a] - S[g + 1][b]) < 0.0)
                    bisect([&](double l) { return score(a, l) - score(b, l); }, grid[g], grid[g + 1]);
            }
        }
    }
    dedupe(cuts);
    std::size_t intervals = 0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        if (!(cuts[c + 1] > cuts[c])) continue;
        const double x = 0.5 * (cuts[c] + cuts[c + 1]);
        const auto s = scores(x);
        std::vector<ScoredRow> rows;
        for (std::size_t r = 0; r < N; ++r)
            rows.push_back({s[r], static_cast<int>(insts[where[r].first].val.y(where[r].second)), where[r].first});
        TauPick pick = sweep_tau(rows, insts, units, tlo, thi);
        // lambda1 = 0 encodes Ridge; lambda2 carries the parameter.
        best.offer(0.0, x, pick);
        ++intervals;
    }
    return intervals;
}

} // namespace

Eigen::VectorXi threshold_predict(const Coefs& c, const Matrix& Xv, double tau)
{
    if (Xv.cols() != c.beta.size()) throw Error(ErrorKind::dimension_mismatch, "feature count differs from beta");
    const Vector s = Xv * c.beta;
    return (s.array() >= tau).cast<int>();
}

double zero_one_loss(const Eigen::VectorXi& pred, const Vector& y)
{
    if (pred.size() != y.size()) throw Error(ErrorKind::dimension_mismatch, "prediction/label length mismatch");
    if (y.size() == 0) throw Error(ErrorKind::dimension_mismatch, "empty label vector");
    Eigen::Index bad = 0;
    for (Eigen::Index j = 0; j < y.size(); ++j) bad += pred(j) != static_cast<int>(y(j));
    return static_cast<double>(bad) / static_cast<double>(y.size());
}

void require_binary(const Vector& y)
{
    for (Eigen::Index j = 0; j < y.size(); ++j)
        if (y(j) != 0.0 && y(j) != 1.0) throw Error(ErrorKind::invalid_config, "labels must be 0 or 1");
}

double BreakpointSet::value_at(double x) const
{
    const auto k = std::upper_bound(points.begin(), points.end(), x) - points.begin();
    return piece_losses[static_cast<std::size_t>(k)];
}

PiecewiseQuadratic BreakpointSet::as_curve() const
{
    PiecewiseQuadratic c;
    std::vector<double> edges{lo};
    edges.insert(edges.end(), points.begin(), points.end());
    edges.push_back(hi);
    for (std::size_t k = 0; k + 1 < edges.size(); ++k)
        c.pieces.push_back({edges[k], edges[k + 1], 0.0, 0.0, piece_losses[k], -1});
    return c;
}

BreakpointSet ridge_breakpoints(const ProblemInstance& inst, double tau, const Box& box, int scan_n, double tol)
{
    box.validate();
    require_binary(inst.val.y);
    if (scan_n < 2) throw Error(ErrorKind::invalid_config, "scan_n must be >= 2");
    const auto ev = ridge_loss_evaluator(inst);
    BreakpointSet bs = ridge_breakpoints_ev(ev, tau, box, scan_n, tol);
    fill_losses(bs, [&](double l) { return mismatch_fraction(ev.predictions(l), tau, inst.val.y); });
    return bs;
}

BreakpointSet lasso_breakpoints(const RegPath& path, const Dataset& val, double tau, const Box& box)
{
    box.validate();
    require_binary(val.y);
    if (val.features() != path.num_features)
        throw Error(ErrorKind::dimension_mismatch, "validation feature count differs from path");
    BreakpointSet bs;
    bs.axis = BreakAxis::lambda1;
    bs.lo = box.lo;
    bs.hi = box.hi;
    for (const auto& seg : path.segments) {
        const double lo = std::max(seg.lo, box.lo), hi = std::min(seg.hi, box.hi);
        if (!(hi > lo)) continue;
        Vector u, v;
        affine_scores(path, val, 0.5 * (lo + hi), u, v);
        for (Eigen::Index j = 0; j < val.rows(); ++j) {
            if (v(j) == 0.0) continue;
            const double x = (u(j) - tau) / v(j);
            if (x >= lo && x <= hi && x > box.lo && x < box.hi) bs.points.push_back(x);
        }
    }
    dedupe(bs.points);
    fill_losses(bs, [&](double l) { return mismatch_fraction(val.X * path_eval(path, l).beta, tau, val.y); });
    return bs;
}

void ClassifyOptions::validate() const
{
    box.validate();
    if (tau_lo && tau_hi && !(*tau_lo < *tau_hi)) throw Error(ErrorKind::invalid_config, "tau box needs lo < hi");
    if (mode == TuneMode::en && slices < 1) throw Error(ErrorKind::invalid_config, "en mode needs >= 1 slice");
    if (scan_n < 2) throw Error(ErrorKind::invalid_config, "scan_n must be >= 2");
}

double default_tau_bound(const std::vector<ProblemInstance>& insts, const ClassifyOptions& opts)
{
    double R = 0.0, B = 0.0;
    Eigen::Index p = 1;
    for (const auto& inst : insts) {
        if (inst.val.X.size() > 0) R = std::max(R, inst.val.X.cwiseAbs().maxCoeff());
        p = std::max(p, inst.features());
        if (opts.mode == TuneMode::ridge) {
            B = std::max(B, ridge_fit(inst.train, opts.box.lo).beta.norm());
        } else if (opts.mode == TuneMode::lasso) {
            B = std::max(B, path_eval(en_path(inst.train, 0.0, opts.box.lo), opts.box.lo).beta.lpNorm<1>());
        } else {
            for (double l2 : log_grid(opts.box.lo, opts.box.hi, opts.slices))
                B = std::max(B, path_eval(en_path(inst.train, l2, opts.box.lo), opts.box.lo).beta.lpNorm<1>());
        }
    }
    const double bound = R * static_cast<double>(p) * B;
    return bound > 0.0 ? bound : 1.0;
}

ClassifyResult classify_tune(const std::vector<ProblemInstance>& insts, const ClassifyOptions& opts)
{
    opts.validate();
    if (insts.empty()) throw Error(ErrorKind::invalid_config, "classify_tune needs at least one instance");
    for (const auto& inst : insts) {
        inst.validate();
        require_binary(inst.val.y);
    }
    ClassifyResult res;
    res.mode = opts.mode;
    res.n_instances = insts.size();
    const double bound = (opts.tau_lo && opts.tau_hi) ? 0.0 : default_tau_bound(insts, opts);
    res.tau_lo = opts.tau_lo ? *opts.tau_lo : -bound;
    res.tau_hi = opts.tau_hi ? *opts.tau_hi : bound;
    if (!(res.tau_lo < res.tau_hi)) throw Error(ErrorKind::invalid_config, "tau box needs lo < hi");

    const LossUnits units(insts);
    Candidate best;
    if (opts.mode == TuneMode::ridge) {
        res.lambda_intervals = tune_ridge(insts, opts, res.tau_lo, res.tau_hi, units, best);
    } else if (opts.mode == TuneMode::lasso) {
        res.lambda_intervals = tune_lambda1(insts, 0.0, opts.box, res.tau_lo, res.tau_hi, units, best);
    } else {
        for (double l2 : log_grid(opts.box.lo, opts.box.hi, opts.slices))
            res.lambda_intervals += tune_lambda1(insts, l2, opts.box, res.tau_lo, res.tau_hi, units, best);
    }
    res.lambda1 = best.lambda1;
    res.lambda2 = best.lambda2;
    res.tau = best.tau;
    res.loss = best.loss;
    return res;
}

double direct_classify_loss(const std::vector<ProblemInstance>& insts, double lambda1, double lambda2, double tau)
{
    const LossUnits units(insts);
    double total = 0.0;
    for (std::size_t i = 0; i < insts.size(); ++i) {
        const auto& inst = insts[i];
        const Coefs c = lambda1 > 0.0 ? en_fit_cd(inst.train, {lambda1, lambda2}) : ridge_fit(inst.train, lambda2);
        const double frac = zero_one_loss(threshold_predict(c, inst.val.X, tau), inst.val.y);
        total += units.exact ? std::round(frac * static_cast<double>(inst.val.rows())) * static_cast<double>(units.per_row[i])
                             : frac;
    }
    return total / (units.exact ? static_cast<double>(units.denom) : static_cast<double>(insts.size()));
}

RegretReport classify_online(const std::vector<ProblemInstance>& stream, const ClassifyOnlineOptions& opts)
{
    opts.tune.validate();
    if (stream.empty()) throw Error(ErrorKind::invalid_config, "empty stream");
    if (opts.tau_grid < 1) throw Error(ErrorKind::invalid_config, "tau_grid must be >= 1");
    for (const auto& inst : stream) require_binary(inst.val.y);
    const Box box = opts.tune.box;
    const TuneMode mode = opts.tune.mode;

    // The tau domain is fixed before play from the first instance's data bound.
    double tlo = 0.0, thi = 0.0;
    if (opts.tune.tau_lo && opts.tune.tau_hi) {
        tlo = *opts.tune.tau_lo;
        thi = *opts.tune.tau_hi;
    } else {
        const double b = default_tau_bound({stream.front()}, opts.tune);
        tlo = opts.tune.tau_lo ? *opts.tune.tau_lo : -b;
        thi = opts.tune.tau_hi ? *opts.tune.tau_hi : b;
    }
    const std::vector<double> taus = opts.tau_grid == 1 ? std::vector<double>{0.5 * (tlo + thi)}
                                                        : [&] {
                                                              std::vector<double> t;
                                                              for (int k = 0; k < opts.tau_grid; ++k)
                                                                  t.push_back(tlo + (thi - tlo) * k / (opts.tau_grid - 1));
                                                              return t;
                                                          }();
    const std::vector<double> l2s =
        mode == TuneMode::en ? log_grid(box.lo, box.hi, opts.lambda2_slices) : std::vector<double>{0.0};
    const std::size_t nt = taus.size();

    LoopConfig cfg;
    cfg.domain = box;
    cfg.slice_values.assign(l2s.size() * nt, 0.0);
    cfg.zeta = opts.zeta;
    cfg.doubling = opts.doubling;
    cfg.H = 1.0;
    cfg.seed = opts.seed;
    cfg.epsilons = opts.epsilons;

    auto round = [&](std::size_t t) {
        const auto& inst = stream[t];
        RoundData d;
        if (mode == TuneMode::ridge) {
            auto ev = std::make_shared<RidgeLossEvaluator>(ridge_loss_evaluator(inst));
            for (double tau : taus) {
                BreakpointSet bs = ridge_breakpoints_ev(*ev, tau, box, opts.tune.scan_n, 1e-10);
                fill_losses(bs, [&](double l) { return mismatch_fraction(ev->predictions(l), tau, inst.val.y); });
                d.curves.push_back(bs.as_curve());
                d.breakpoints.push_back(bs.points);
            }
            const Vector* y = &inst.val.y;
            d.loss = [ev, y, taus](std::size_t s, double x) { return mismatch_fraction(ev->predictions(x), taus[s], *y); };
        } else {
            auto paths = std::make_shared<std::vector<RegPath>>();
            for (double l2 : l2s) {
                paths->push_back(en_path(inst.train, l2, box.lo));
                for (double tau : taus) {
                    const BreakpointSet bs = lasso_breakpoints(paths->back(), inst.val, tau, box);
                    d.curves.push_back(bs.as_curve());
                    d.breakpoints.push_back(bs.points);
                }
            }
            const Dataset* val = &inst.val;
            d.loss = [paths, val, taus, nt](std::size_t s, double x) {
                return mismatch_fraction(val->X * path_eval((*paths)[s / nt], x).beta, taus[s % nt], val->y);
            };
        }
        return d;
    };
    auto to_params = [&](std::size_t s, double x) {
        OnlineParams p;
        p.tau = taus[s % nt];
        if (mode == TuneMode::ridge) p.lambda2 = x;
        else {
            p.lambda1 = x;
            p.lambda2 = l2s[s / nt];
        }
        return p;
    };
    RegretReport rep = run_slices(stream.size(), cfg, round, {}, to_params);
    rep.mode = std::string("classify-") + to_string(mode);
    return rep;
}

} // namespace regtune
