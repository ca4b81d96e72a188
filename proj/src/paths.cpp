#include "regtune/paths.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "regtune/error.hpp"
#include "regtune/linalg.hpp"

namespace regtune {

namespace {

struct Candidate
{
    double lambda1;
    EventKind kind;
    Eigen::Index feature;
    int sign;
};

// Roots this close below the current lambda that belong to a feature touched by the
// previous event are that event itself re-detected through roundoff.
constexpr double reentry_gap = 1e-9;

} // namespace

Vector PathSegment::beta_at(double lambda1, Eigen::Index p) const
{
    Vector beta = Vector::Zero(p);
    for (std::size_t k = 0; k < support.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        beta(support.indices[k]) = c1(kk) - lambda1 * c2(kk);
    }
    return beta;
}

std::vector<double> RegPath::knots() const
{
    std::vector<double> out;
    for (std::size_t k = 1; k < segments.size(); ++k) out.push_back(segments[k].hi);
    std::reverse(out.begin(), out.end());
    return out;
}

RegPath lars_path(const Dataset& ds, double lambda_min, const PathOptions& opts)
{
    if (!(lambda_min > 0.0)) throw Error(ErrorKind::invalid_config, "lambda_min must be positive");
    const auto p = ds.features();
    const Matrix G = ds.X.transpose() * ds.X;
    const Vector q = ds.X.transpose() * ds.y;
    const long budget = opts.budget > 0 ? opts.budget : 50L * static_cast<long>(ds.rows() + p);

    RegPath path;
    path.num_features = p;
    path.num_rows = ds.rows();
    path.lambda_min = lambda_min;
    path.lambda_max = p > 0 ? q.cwiseAbs().maxCoeff() : 0.0;
    if (path.lambda_max <= lambda_min) return path;

    auto tie = [&](double lambda) { return opts.tie_tol * std::max(1.0, lambda); };

    // Active set kept as feature -> sign, ordered by feature index.
    std::map<Eigen::Index, int> active;
    double current = path.lambda_max;
    std::set<Eigen::Index> last_touched;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (std::abs(q(j)) >= path.lambda_max - tie(path.lambda_max)) {
            const int s = q(j) >= 0 ? 1 : -1;
            active.emplace(j, s);
            last_touched.insert(j);
            path.events.push_back({path.lambda_max, EventKind::join, j, s});
        }
    }
    long n_events = static_cast<long>(path.events.size());

    while (true) {
        SignedSupport supp;
        for (auto [j, s] : active) {
            supp.indices.push_back(j);
            supp.signs.push_back(s);
        }
        const auto n_act = static_cast<Eigen::Index>(supp.size());
        Matrix GE(n_act, n_act);
        Vector qE(n_act), sE(n_act);
        for (Eigen::Index a = 0; a < n_act; ++a) {
            for (Eigen::Index b = 0; b < n_act; ++b)
                GE(a, b) = G(supp.indices[static_cast<std::size_t>(a)], supp.indices[static_cast<std::size_t>(b)]);
            qE(a) = q(supp.indices[static_cast<std::size_t>(a)]);
            sE(a) = supp.signs[static_cast<std::size_t>(a)];
        }
        Vector c1(n_act), c2(n_act);
        if (n_act > 0) {
            try {
                c1 = linalg::spd_solve(GE, qE);
                c2 = linalg::spd_solve(GE, sE);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::not_spd)
                    throw Error(ErrorKind::general_position_violated,
                                "active Gram matrix singular at lambda1=" + std::to_string(current));
                throw;
            }
        }

        std::vector<Candidate> cands;
        auto admissible = [&](double lam, Eigen::Index j) {
            if (!(lam > 0.0) || !std::isfinite(lam)) return false;
            if (last_touched.count(j)) return lam < current * (1.0 - reentry_gap);
            return lam < current;
        };

        // Joins: corr_j(lambda) = a_j + lambda b_j reaches sigma * lambda.
        for (Eigen::Index j = 0; j < p; ++j) {
            if (active.count(j)) continue;
            double a = q(j), b = 0.0;
            for (Eigen::Index k = 0; k < n_act; ++k) {
                const double g = G(j, supp.indices[static_cast<std::size_t>(k)]);
                a -= g * c1(k);
                b += g * c2(k);
            }
            Candidate best{-1.0, EventKind::join, j, 0};
            for (int sigma : {1, -1}) {
                const double den = sigma - b;
                if (den == 0.0) continue;
                const double lam = a / den;
                if (admissible(lam, j) && lam > best.lambda1) best = {lam, EventKind::join, j, sigma};
            }
            if (best.sign != 0) cands.push_back(best);
        }
        // Leaves: (c1 - lambda c2)_k hits zero.
        for (Eigen::Index k = 0; k < n_act; ++k) {
            if (c2(k) == 0.0) continue;
            const double lam = c1(k) / c2(k);
            const auto j = supp.indices[static_cast<std::size_t>(k)];
            if (admissible(lam, j)) cands.push_back({lam, EventKind::leave, j, supp.signs[static_cast<std::size_t>(k)]});
        }

        double next = -std::numeric_limits<double>::infinity();
        for (const auto& c : cands) next = std::max(next, c.lambda1);

        if (cands.empty() || next <= lambda_min) {
            if (current > lambda_min) path.segments.push_back({lambda_min, current, supp, c1, c2});
            break;
        }
        if (next < current) path.segments.push_back({next, current, supp, c1, c2});

        std::vector<Candidate> batch;
        for (const auto& c : cands)
            if (c.lambda1 >= next - tie(next)) batch.push_back(c);
        // Leaves before joins keeps X_E full rank before the next solve.
        std::stable_sort(batch.begin(), batch.end(), [](const Candidate& x, const Candidate& y) {
            return x.kind == EventKind::leave && y.kind == EventKind::join;
        });
        last_touched.clear();
        for (const auto& c : batch) {
            if (c.kind == EventKind::leave)
                active.erase(c.feature);
            else
                active[c.feature] = c.sign;
            last_touched.insert(c.feature);
            path.events.push_back({next, c.kind, c.feature, c.sign});
        }
        n_events += static_cast<long>(batch.size());
        if (n_events > budget)
            throw Error(ErrorKind::path_budget_exceeded, "path exceeded " + std::to_string(budget) + " events");
        current = next;
    }
    return path;
}

RegPath en_path(const Dataset& ds, double lambda2, double lambda_min, const PathOptions& opts)
{
    RegPath path = lars_path(augment(ds, lambda2), lambda_min, opts);
    path.lambda2 = lambda2;
    path.num_rows = ds.rows();
    return path;
}

RegPath en_path(const Dataset& ds, double lambda2)
{
    const double lmax = (ds.X.transpose() * ds.y).cwiseAbs().maxCoeff();
    return en_path(ds, lambda2, lmax > 0.0 ? 1e-6 * lmax : 1e-12);
}

std::ptrdiff_t find_segment(const RegPath& path, double lambda1)
{
    if (path.segments.empty() || lambda1 >= path.lambda_max) return -1;
    // Segments descend in lambda; first one whose lo <= lambda1.
    auto it = std::partition_point(path.segments.begin(), path.segments.end(),
                                   [lambda1](const PathSegment& s) { return s.lo > lambda1; });
    if (it == path.segments.end()) --it;
    return it - path.segments.begin();
}

Coefs path_eval(const RegPath& path, double lambda1)
{
    if (lambda1 < path.lambda_min * (1.0 - 1e-12))
        throw Error(ErrorKind::out_of_range,
                    "lambda1=" + std::to_string(lambda1) + " below path lambda_min=" + std::to_string(path.lambda_min));
    const auto k = find_segment(path, lambda1);
    if (k < 0) return {Vector::Zero(path.num_features)};
    return {path.segments[static_cast<std::size_t>(k)].beta_at(lambda1, path.num_features)};
}

PieceStats piece_stats(const RegPath& path)
{
    PieceStats st;
    st.count = path.segments.size();
    for (const auto& s : path.segments) st.max_support = std::max(st.max_support, s.support.size());
    st.bound_3p_ok = static_cast<double>(st.count) <= std::pow(3.0, static_cast<double>(path.num_features));
    if (path.lambda2 == 0.0 && path.num_features > path.num_rows)
        st.overparam_bound_ok = static_cast<Eigen::Index>(st.max_support) <= path.num_rows - 1;
    return st;
}

} // namespace regtune
