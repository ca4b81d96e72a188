#include "regtune/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "regtune/error.hpp"
#include "regtune/linalg.hpp"

namespace regtune {

namespace {

constexpr double knot_merge_tol = 1e-13;
constexpr double tie_tol = 1e-12;

bool near(double x, double y, double rel)
{
    return std::abs(x - y) <= rel * std::max({1.0, std::abs(x), std::abs(y)});
}

// Strictly better, or equally good (within tie_tol) at a lexicographically smaller key.
bool better(double value, double best, bool smaller_key)
{
    const double tol = tie_tol * (1.0 + std::abs(best));
    if (value < best - tol) return true;
    return value <= best + tol && smaller_key;
}

QuadPiece constant_piece(double lo, double hi, double value, int support)
{
    return {lo, hi, 0.0, 0.0, value, support};
}

} // namespace

const char* to_string(ObjectiveKind k)
{
    switch (k) {
        case ObjectiveKind::val: return "val";
        case ObjectiveKind::aic: return "aic";
        case ObjectiveKind::bic: return "bic";
    }
    return "val";
}

const char* to_string(TuneMode m)
{
    switch (m) {
        case TuneMode::ridge: return "ridge";
        case TuneMode::lasso: return "lasso";
        case TuneMode::en: return "en";
    }
    return "en";
}

ObjectiveKind parse_objective(const std::string& s)
{
    if (s == "val") return ObjectiveKind::val;
    if (s == "aic") return ObjectiveKind::aic;
    if (s == "bic") return ObjectiveKind::bic;
    throw Error(ErrorKind::invalid_config, "unknown objective '" + s + "'");
}

TuneMode parse_mode(const std::string& s)
{
    if (s == "ridge") return TuneMode::ridge;
    if (s == "lasso") return TuneMode::lasso;
    if (s == "en") return TuneMode::en;
    throw Error(ErrorKind::invalid_config, "unknown mode '" + s + "'");
}

std::size_t PiecewiseQuadratic::locate(double x) const
{
    auto it = std::lower_bound(pieces.begin(), pieces.end(), x,
                               [](const QuadPiece& p, double v) { return p.hi < v; });
    if (it == pieces.end()) --it;
    return static_cast<std::size_t>(it - pieces.begin());
}

std::vector<double> PiecewiseQuadratic::knots() const
{
    std::vector<double> out;
    for (std::size_t k = 1; k < pieces.size(); ++k) out.push_back(pieces[k].lo);
    return out;
}

PiecewiseQuadratic val_loss_curve(const RegPath& path, const Dataset& val, std::optional<double> upper)
{
    if (val.features() != path.num_features)
        throw Error(ErrorKind::dimension_mismatch, "validation feature count differs from path");
    if (val.rows() == 0) throw Error(ErrorKind::dimension_mismatch, "empty validation set");
    const double inv_m = 1.0 / static_cast<double>(val.rows());
    const double zero_loss = val.y.squaredNorm() * inv_m;

    PiecewiseQuadratic curve;
    for (auto it = path.segments.rbegin(); it != path.segments.rend(); ++it) {
        const auto& seg = *it;
        const auto s = static_cast<Eigen::Index>(seg.support.size());
        Vector u = Vector::Zero(val.rows()), v = Vector::Zero(val.rows());
        for (Eigen::Index k = 0; k < s; ++k) {
            const auto col = val.X.col(seg.support.indices[static_cast<std::size_t>(k)]);
            u += seg.c1(k) * col;
            v += seg.c2(k) * col;
        }
        const Vector d = val.y - u;  // residual = d + lambda1 v
        curve.pieces.push_back({seg.lo, seg.hi, v.squaredNorm() * inv_m, 2.0 * d.dot(v) * inv_m,
                                d.squaredNorm() * inv_m, static_cast<int>(s)});
    }
    const double top = path.segments.empty() ? path.lambda_min : path.lambda_max;
    if (upper && *upper > top) curve.pieces.push_back(constant_piece(top, *upper, zero_loss, 0));
    if (curve.pieces.empty()) curve.pieces.push_back(constant_piece(top, top, zero_loss, 0));
    if (upper && *upper < curve.hi()) curve = restrict_curve(curve, curve.lo(), *upper);
    return curve;
}

PiecewiseQuadratic penalize(const PiecewiseQuadratic& curve, ObjectiveKind kind, Eigen::Index m)
{
    PiecewiseQuadratic out = curve;
    out.kind = kind;
    if (kind == ObjectiveKind::val) return out;
    const double per_feature = kind == ObjectiveKind::aic ? 2.0 : 2.0 * std::log(static_cast<double>(m));
    for (auto& piece : out.pieces) {
        if (piece.support_size < 0)
            throw Error(ErrorKind::invalid_config, "penalize needs per-piece support sizes");
        piece.c += per_feature * piece.support_size;
    }
    return out;
}

Minimum minimize_pw(const PiecewiseQuadratic& curve)
{
    if (curve.empty()) throw Error(ErrorKind::invalid_config, "minimize_pw on an empty curve");
    Minimum best{curve.lo(), curve.pieces.front()(curve.lo())};
    auto consider = [&](double x, double v) {
        if (better(v, best.value, x < best.arg)) best = {x, v};
    };
    for (const auto& piece : curve.pieces) {
        consider(piece.lo, piece(piece.lo));
        if (piece.a > 0.0) {
            const double vertex = -piece.b / (2.0 * piece.a);
            if (vertex > piece.lo && vertex < piece.hi) consider(vertex, piece(vertex));
        }
        consider(piece.hi, piece(piece.hi));
    }
    return best;
}

double maximize_pw(const PiecewiseQuadratic& curve)
{
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& piece : curve.pieces) {
        best = std::max({best, piece(piece.lo), piece(piece.hi)});
        if (piece.a < 0.0) {
            const double vertex = -piece.b / (2.0 * piece.a);
            if (vertex > piece.lo && vertex < piece.hi) best = std::max(best, piece(vertex));
        }
    }
    return best;
}

PiecewiseQuadratic combine_curves(const std::vector<const PiecewiseQuadratic*>& curves,
                                  const std::vector<double>& weights)
{
    if (curves.empty()) throw Error(ErrorKind::invalid_config, "no curves to combine");
    if (weights.size() != curves.size()) throw Error(ErrorKind::invalid_config, "weight count mismatch");
    const double lo = curves.front()->lo();
    const double hi = curves.front()->hi();
    std::vector<double> knots{lo, hi};
    std::size_t total = 0;
    for (const auto* c : curves) {
        if (c->empty() || !near(c->lo(), lo, 1e-12) || !near(c->hi(), hi, 1e-12))
            throw Error(ErrorKind::domain_mismatch, "curves do not share a domain");
        total += c->pieces.size();
    }
    knots.reserve(total + 2);
    for (const auto* c : curves)
        for (std::size_t k = 1; k < c->pieces.size(); ++k) knots.push_back(c->pieces[k].lo);
    std::sort(knots.begin(), knots.end());
    std::vector<double> merged;
    merged.reserve(knots.size());
    for (double x : knots)
        if (merged.empty() || !near(x, merged.back(), knot_merge_tol)) merged.push_back(x);
    if (merged.size() == 1) merged.push_back(merged.front());
    merged.front() = lo;
    merged.back() = hi;

    PiecewiseQuadratic out;
    out.kind = curves.front()->kind;
    out.pieces.reserve(merged.size() - 1);
    std::vector<std::size_t> cursor(curves.size(), 0);
    for (std::size_t k = 0; k + 1 < merged.size(); ++k) {
        const double mid = 0.5 * (merged[k] + merged[k + 1]);
        QuadPiece piece{merged[k], merged[k + 1], 0.0, 0.0, 0.0, -1};
        for (std::size_t c = 0; c < curves.size(); ++c) {
            const auto& ps = curves[c]->pieces;
            while (cursor[c] + 1 < ps.size() && ps[cursor[c]].hi < mid) ++cursor[c];
            const auto& src = ps[cursor[c]];
            piece.a += weights[c] * src.a;
            piece.b += weights[c] * src.b;
            piece.c += weights[c] * src.c;
        }
        out.pieces.push_back(piece);
    }
    if (curves.size() == 1 && curves.front()->pieces.size() == out.pieces.size())
        for (std::size_t k = 0; k < out.pieces.size(); ++k)
            out.pieces[k].support_size = curves.front()->pieces[k].support_size;
    return out;
}

PiecewiseQuadratic sum_curves(const std::vector<PiecewiseQuadratic>& curves)
{
    std::vector<const PiecewiseQuadratic*> ptrs;
    for (const auto& c : curves) ptrs.push_back(&c);
    const std::vector<double> w(curves.size(), curves.empty() ? 0.0 : 1.0 / static_cast<double>(curves.size()));
    PiecewiseQuadratic out = combine_curves(ptrs, w);
    for (auto& p : out.pieces) p.support_size = -1;
    return out;
}

PiecewiseQuadratic restrict_curve(const PiecewiseQuadratic& curve, double lo, double hi)
{
    if (lo > hi || lo < curve.lo() - 1e-12 * std::max(1.0, std::abs(lo)) ||
        hi > curve.hi() + 1e-12 * std::max(1.0, std::abs(hi)))
        throw Error(ErrorKind::domain_mismatch, "restriction outside curve domain");
    PiecewiseQuadratic out;
    out.kind = curve.kind;
    for (const auto& piece : curve.pieces) {
        if (piece.hi <= lo || piece.lo >= hi) continue;
        QuadPiece p = piece;
        p.lo = std::max(p.lo, lo);
        p.hi = std::min(p.hi, hi);
        out.pieces.push_back(p);
    }
    if (out.pieces.empty()) {
        QuadPiece p = curve.pieces[curve.locate(lo)];
        p.lo = lo;
        p.hi = hi;
        out.pieces.push_back(p);
    }
    return out;
}

PiecewiseQuadratic clamp_curve(const PiecewiseQuadratic& curve, double cap, double* clamped_fraction)
{
    PiecewiseQuadratic out;
    out.kind = curve.kind;
    double clamped = 0.0;
    for (const auto& piece : curve.pieces) {
        std::vector<double> cuts{piece.lo};
        // Roots of a x^2 + b x + (c - cap) strictly inside the piece.
        const double c0 = piece.c - cap;
        std::vector<double> roots;
        if (piece.a != 0.0) {
            const double disc = piece.b * piece.b - 4.0 * piece.a * c0;
            if (disc > 0.0) {
                const double qq = -0.5 * (piece.b + std::copysign(std::sqrt(disc), piece.b));
                roots.push_back(qq / piece.a);
                if (qq != 0.0) roots.push_back(c0 / qq);
            }
        } else if (piece.b != 0.0) {
            roots.push_back(-c0 / piece.b);
        }
        std::sort(roots.begin(), roots.end());
        for (double r : roots)
            if (r > piece.lo && r < piece.hi) cuts.push_back(r);
        cuts.push_back(piece.hi);
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            QuadPiece sub = piece;
            sub.lo = cuts[k];
            sub.hi = cuts[k + 1];
            const double mid = 0.5 * (sub.lo + sub.hi);
            if (sub(mid) > cap || (sub.lo == sub.hi && sub(sub.lo) > cap)) {
                sub.a = sub.b = 0.0;
                sub.c = cap;
                clamped += sub.hi - sub.lo;
            }
            out.pieces.push_back(sub);
        }
    }
    if (clamped_fraction) {
        const double width = curve.hi() - curve.lo();
        *clamped_fraction = width > 0.0 ? clamped / width : 0.0;
    }
    return out;
}

// --- Ridge --------------------------------------------------------------

Vector RidgeLossEvaluator::predictions(double lambda2) const
{
    const Vector inv = (eigvals.array() + lambda2).inverse().matrix();
    return coef * inv;
}

double RidgeLossEvaluator::loss(double lambda2) const
{
    return (val_y - predictions(lambda2)).squaredNorm() / static_cast<double>(val_y.size());
}

double RidgeLossEvaluator::derivative(double lambda2) const
{
    const Vector inv = (eigvals.array() + lambda2).inverse().matrix();
    const Vector resid = val_y - coef * inv;
    const Vector dpred = coef * inv.cwiseAbs2();  // -d(prediction)/d(lambda2)
    return 2.0 * resid.dot(dpred) / static_cast<double>(val_y.size());
}

RidgeLossEvaluator ridge_loss_evaluator(const ProblemInstance& inst)
{
    if (inst.train.features() != inst.val.features())
        throw Error(ErrorKind::dimension_mismatch, "train/val feature count mismatch");
    const auto spec = linalg::sym_eig(inst.train.X.transpose() * inst.train.X);
    RidgeLossEvaluator ev;
    ev.eigvals = spec.eigvals.cwiseMax(0.0);
    const Vector w = spec.eigvecs.transpose() * (inst.train.X.transpose() * inst.train.y);
    ev.coef = (inst.val.X * spec.eigvecs) * w.asDiagonal();
    ev.val_y = inst.val.y;
    return ev;
}

void Box::validate() const
{
    if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi))
        throw Error(ErrorKind::invalid_config, "box needs 0 < lo < hi < inf");
}

std::vector<double> log_grid(double lo, double hi, int n)
{
    if (n < 1) return {};
    if (n == 1) return {lo};
    std::vector<double> g(static_cast<std::size_t>(n));
    const double a = std::log(lo), b = std::log(hi);
    for (int k = 0; k < n; ++k) g[static_cast<std::size_t>(k)] = std::exp(a + (b - a) * k / (n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

double ridge_average_loss(const std::vector<RidgeLossEvaluator>& evals, double lambda2)
{
    double s = 0.0;
    for (const auto& e : evals) s += e.loss(lambda2);
    return s / static_cast<double>(evals.size());
}

Minimum ridge_minimize(const std::vector<RidgeLossEvaluator>& evals, const Box& box, int grid_n, double tol)
{
    box.validate();
    if (grid_n < 16) throw Error(ErrorKind::invalid_config, "ridge_minimize needs grid_n >= 16");
    if (evals.empty()) throw Error(ErrorKind::invalid_config, "no evaluators");
    auto deriv = [&](double l) {
        double s = 0.0;
        for (const auto& e : evals) s += e.derivative(l);
        return s;
    };
    const auto grid = log_grid(box.lo, box.hi, grid_n);
    std::vector<double> d(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) d[k] = deriv(grid[k]);

    std::vector<double> candidates{box.lo, box.hi};
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        if (d[k] == 0.0) candidates.push_back(grid[k]);
        if (!(d[k] < 0.0 && d[k + 1] > 0.0)) continue;
        double a = grid[k], b = grid[k + 1];
        while (b - a > tol * std::max(1.0, a)) {
            const double mid = std::sqrt(a * b);
            if (mid <= a || mid >= b) break;
            if (deriv(mid) < 0.0) a = mid;
            else b = mid;
        }
        candidates.push_back(0.5 * (a + b));
    }
    std::sort(candidates.begin(), candidates.end());
    Minimum best{candidates.front(), ridge_average_loss(evals, candidates.front())};
    for (double c : candidates) {
        const double v = ridge_average_loss(evals, c);
        if (better(v, best.value, c < best.arg)) best = {c, v};
    }
    return best;
}

// --- ElasticNet surfaces ------------------------------------------------

PiecewiseQuadratic en_slice(const std::vector<ProblemInstance>& insts, double lambda2, const Box& box,
                            ObjectiveKind kind, std::vector<SignedSupport>* fingerprint)
{
    if (insts.empty()) throw Error(ErrorKind::invalid_config, "no instances");
    std::vector<PiecewiseQuadratic> curves;
    curves.reserve(insts.size());
    for (std::size_t i = 0; i < insts.size(); ++i) {
        const RegPath path = en_path(insts[i].train, lambda2, box.lo);
        PiecewiseQuadratic c = val_loss_curve(path, insts[i].val, box.hi);
        if (fingerprint && i == 0) {
            fingerprint->clear();
            for (auto it = path.segments.rbegin(); it != path.segments.rend(); ++it)
                if (it->lo < box.hi) fingerprint->push_back(it->support);
            if (path.lambda_max < box.hi || path.segments.empty()) fingerprint->push_back({});
        }
        curves.push_back(penalize(c, kind, insts[i].train.rows()));
    }
    if (curves.size() == 1) return curves.front();
    return sum_curves(curves);
}

std::size_t SliceGrid2D::boundary_crossings() const
{
    std::size_t n = 0;
    for (std::size_t k = 0; k + 1 < support_fingerprints.size(); ++k)
        if (support_fingerprints[k] != support_fingerprints[k + 1]) ++n;
    return n;
}

SliceGrid2D en_surface(const std::vector<ProblemInstance>& insts, const Box& box, int lambda2_grid_n,
                       ObjectiveKind kind)
{
    box.validate();
    if (lambda2_grid_n < 2) throw Error(ErrorKind::invalid_config, "need at least 2 lambda2 slices");
    SliceGrid2D grid;
    grid.lambda2_values = log_grid(box.lo, box.hi, lambda2_grid_n);
    for (double l2 : grid.lambda2_values) {
        std::vector<SignedSupport> fp;
        grid.slices.push_back(en_slice(insts, l2, box, kind, &fp));
        grid.support_fingerprints.push_back(std::move(fp));
    }
    return grid;
}

namespace {

struct Best
{
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double value = std::numeric_limits<double>::infinity();

    void offer(double l1, double l2, double v)
    {
        const bool smaller = l2 < lambda2 || (l2 == lambda2 && l1 < lambda1);
        if (!std::isfinite(value) || better(v, value, smaller)) *this = {l1, l2, v};
    }
};

} // namespace

TuningResult erm_tune(const std::vector<ProblemInstance>& insts, const TuneOptions& opts)
{
    if (insts.empty()) throw Error(ErrorKind::invalid_config, "erm_tune needs at least one instance");
    opts.box.validate();
    TuningResult res;
    res.mode = opts.mode;
    res.objective = opts.objective;
    res.n_instances = insts.size();

    if (opts.mode == TuneMode::ridge) {
        std::vector<RidgeLossEvaluator> evals;
        double shift = 0.0;
        for (const auto& inst : insts) {
            evals.push_back(ridge_loss_evaluator(inst));
            // Ridge keeps every feature with a nonzero column; the penalty is a constant shift.
            const auto nnz = static_cast<double>((inst.train.X.colwise().squaredNorm().array() > 0.0).count());
            if (opts.objective == ObjectiveKind::aic) shift += 2.0 * nnz;
            if (opts.objective == ObjectiveKind::bic)
                shift += 2.0 * nnz * std::log(static_cast<double>(inst.train.rows()));
        }
        const Minimum m = ridge_minimize(evals, opts.box, opts.ridge_grid);
        res.lambda1 = 0.0;
        res.lambda2 = m.arg;
        res.loss = m.value + shift / static_cast<double>(insts.size());
        return res;
    }

    if (opts.mode == TuneMode::lasso) {
        std::vector<SignedSupport> fp;
        const PiecewiseQuadratic slice = en_slice(insts, 0.0, opts.box, opts.objective, &fp);
        const Minimum m = minimize_pw(slice);
        res.lambda1 = m.arg;
        res.lambda2 = 0.0;
        res.loss = m.value;
        res.evaluated_slices = 1;
        res.total_breakpoints = slice.knots().size();
        return res;
    }

    if (opts.slices < 2) throw Error(ErrorKind::invalid_config, "en mode needs at least 2 slices");
    const SliceGrid2D grid = en_surface(insts, opts.box, opts.slices, opts.objective);
    Best best;
    std::vector<double> envelope;
    for (std::size_t k = 0; k < grid.slices.size(); ++k) {
        const Minimum m = minimize_pw(grid.slices[k]);
        envelope.push_back(m.value);
        best.offer(m.arg, grid.lambda2_values[k], m.value);
        res.total_breakpoints += grid.slices[k].knots().size();
    }
    res.evaluated_slices = grid.slices.size();
    res.boundary_crossings = grid.boundary_crossings();

    // Golden-section (in log lambda2) around the best few local minima of the slice envelope.
    std::vector<std::size_t> local;
    for (std::size_t k = 0; k < envelope.size(); ++k) {
        const bool left = k == 0 || envelope[k] <= envelope[k - 1];
        const bool right = k + 1 == envelope.size() || envelope[k] <= envelope[k + 1];
        if (left && right) local.push_back(k);
    }
    std::sort(local.begin(), local.end(), [&](std::size_t a, std::size_t b) { return envelope[a] < envelope[b]; });
    if (local.size() > 3) local.resize(3);

    auto probe = [&](double log_l2) {
        const double l2 = std::exp(log_l2);
        const Minimum m = minimize_pw(en_slice(insts, l2, opts.box, opts.objective));
        ++res.evaluated_slices;
        best.offer(m.arg, l2, m.value);
        return m.value;
    };
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    for (std::size_t k : local) {
        if (opts.refine_iters <= 0) break;
        double a = std::log(grid.lambda2_values[k == 0 ? 0 : k - 1]);
        double b = std::log(grid.lambda2_values[std::min(k + 1, envelope.size() - 1)]);
        double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
        double f1 = probe(x1), f2 = probe(x2);
        for (int it = 2; it < opts.refine_iters; ++it) {
            if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - golden * (b - a);
                f1 = probe(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + golden * (b - a);
                f2 = probe(x2);
            }
        }
    }
    res.lambda1 = best.lambda1;
    res.lambda2 = best.lambda2;
    res.loss = best.value;
    return res;
}

double direct_objective(const std::vector<ProblemInstance>& insts, double lambda1, double lambda2,
                        ObjectiveKind kind)
{
    double total = 0.0;
    for (const auto& inst : insts) {
        const Coefs c = lambda1 > 0.0 ? en_fit_cd(inst.train, {lambda1, lambda2}) : ridge_fit(inst.train, lambda2);
        double v = val_loss(c, inst.val);
        const double nnz = static_cast<double>(c.l0());
        if (kind == ObjectiveKind::aic) v += 2.0 * nnz;
        if (kind == ObjectiveKind::bic) v += 2.0 * nnz * std::log(static_cast<double>(inst.train.rows()));
        total += v;
    }
    return total / static_cast<double>(insts.size());
}

} // namespace regtune
