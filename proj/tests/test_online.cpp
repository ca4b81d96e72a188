#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "regtune/error.hpp"
#include "regtune/online.hpp"
#include "test_util.hpp"

using namespace regtune;

namespace {

PiecewiseQuadratic step_curve(double lo, double mid, double hi, double left, double right)
{
    PiecewiseQuadratic c;
    c.pieces.push_back({lo, mid, 0, 0, left, -1});
    c.pieces.push_back({mid, hi, 0, 0, right, -1});
    return c;
}

double ks_uniform(std::vector<double> xs, double lo, double hi)
{
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double F = (xs[i] - lo) / (hi - lo);
        d = std::max({d, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
    }
    return d;
}

std::vector<ProblemInstance> synthetic_stream(std::size_t T, std::uint64_t seed)
{
    GeneratorConfig g;
    g.m = 10;
    g.p = 3;
    g.m_val = 5;
    g.seed = 99;
    g.beta_star = effective_beta_star(g);
    std::vector<ProblemInstance> s;
    for (std::size_t t = 0; t < T; ++t) {
        GeneratorConfig c = g;
        c.seed = seed * 1000003ULL + t;
        s.push_back(gen_synthetic(c));
    }
    return s;
}

} // namespace

TEST_CASE("ew_init contract")
{
    const Box box{0.0 + 1e-3, 1.0};
    const auto s = ew_init(box, 0.5, 2.0, 1);
    CHECK(s.round == 0);
    const auto masses = ew_piece_masses(s);
    double total = 0.0;
    for (double m : masses.front()) total += m;
    CHECK(total == doctest::Approx(box.hi - box.lo));

    for (double z : {0.0, -0.1, 1.5}) {
        try {
            ew_init(box, z, 1.0, 1);
            FAIL("expected InvalidConfig");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::invalid_config);
        }
    }
    CHECK_THROWS_AS(ew_init(box, 0.5, 0.0, 1), Error);
}

TEST_CASE("ew_sample is deterministic for a seed")
{
    const Box box{0.1, 2.0};
    auto a = ew_init(box, 0.5, 1.0, 42);
    auto b = ew_init(box, 0.5, 1.0, 42);
    for (int k = 0; k < 50; ++k) {
        const auto da = ew_sample(a), db = ew_sample(b);
        CHECK(da.x == db.x);
        CHECK(da.slice == db.slice);
    }
}

TEST_CASE("round zero draws are uniform")
{
    const Box box{1.0, 3.0};
    auto s = ew_init(box, 0.5, 1.0, 7);
    std::vector<double> xs;
    for (int k = 0; k < 10000; ++k) xs.push_back(ew_sample(s).x);
    CHECK(ks_uniform(xs, box.lo, box.hi) < 0.02);
}

TEST_CASE("step loss tilts the sampler by e^zeta")
{
    const Box box{1e-9, 1.0};
    const double zeta = 1.0, H = 1.0;
    auto s = ew_init(box, zeta, H, 11);
    ew_update(s, {step_curve(box.lo, 0.5, box.hi, 0.0, H)});
    int left = 0;
    for (int k = 0; k < 10000; ++k) left += ew_sample(s).x < 0.5;
    const double expect = std::exp(zeta) / (std::exp(zeta) + 1.0);
    CHECK(std::abs(left / 10000.0 - expect) <= 0.02);
}

TEST_CASE("constant and zero losses leave the sampler uniform")
{
    const Box box{0.5, 1.5};
    auto s = ew_init(box, 0.8, 1.0, 3);
    const auto before = ew_piece_masses(s);
    ew_update(s, {step_curve(box.lo, 1.0, box.hi, 0.0, 0.0)});
    const auto after = ew_piece_masses(s);
    double tb = 0.0, ta = 0.0;
    for (double m : before.front()) tb += m;
    for (double m : after.front()) ta += m;
    CHECK(ta == doctest::Approx(tb));

    for (int k = 0; k < 5; ++k) ew_update(s, {step_curve(box.lo, 1.0, box.hi, 0.3, 0.3)});
    std::vector<double> xs;
    for (int k = 0; k < 10000; ++k) xs.push_back(ew_sample(s).x);
    CHECK(ks_uniform(xs, box.lo, box.hi) < 0.02);
}

TEST_CASE("cumulative loss is the sum of round curves")
{
    std::mt19937_64 rng(5);
    const Box box{1e-3, 10.0};
    auto s = ew_init(box, 0.3, 1e6, 5);
    std::vector<PiecewiseQuadratic> curves;
    for (int t = 0; t < 12; ++t) {
        const auto inst = testing::random_instance(rng, 8, 3, 4);
        curves.push_back(val_loss_curve(lars_path(inst.train, box.lo), inst.val, box.hi));
        CHECK(ew_update(s, {curves.back()}) == 0.0);
    }
    CHECK(s.round == 12);
    for (int k = 0; k < 20; ++k) {
        const double x = testing::log_uniform(rng, box.lo, box.hi);
        double sum = 0.0;
        for (const auto& c : curves) sum += c(x);
        CHECK(std::abs(s.cum_loss.front()(x) - sum) <= 1e-8);
    }
}

TEST_CASE("clamping is reported")
{
    const Box box{1e-3, 2.0};
    auto s = ew_init(box, 0.5, 1.0, 1);
    PiecewiseQuadratic c;
    c.pieces.push_back({box.lo, box.hi, 1.0, 0.0, 0.0, -1});  // x^2 exceeds 1 past x = 1
    const double frac = ew_update(s, {c});
    CHECK(frac > 0.0);
    CHECK(frac == doctest::Approx((2.0 - 1.0) / (2.0 - 1e-3)));
    CHECK(s.cum_loss.front()(1.5) == doctest::Approx(1.0));
}

TEST_CASE("automatic H is four times the first curve maximum")
{
    const Box box{1e-3, 1.0};
    auto s = ew_init(box, 0.5, std::nullopt, 1);
    ew_update(s, {step_curve(box.lo, 0.5, box.hi, 0.25, 0.5)});
    CHECK(s.H == doctest::Approx(2.0));
}

// Piece masses against an independent adaptive Gauss-Kronrod quadrature, then a chi-square
// goodness-of-fit test of 10^4 draws against those masses.
TEST_CASE("sampler matches independent quadrature")
{
    std::mt19937_64 rng(8);
    const Box box{1e-3, 3.0};
    auto s = ew_init(box, 1.0, std::nullopt, 8);
    for (int t = 0; t < 6; ++t) {
        const auto inst = testing::random_instance(rng, 8, 3, 4);
        ew_update(s, {val_loss_curve(lars_path(inst.train, box.lo), inst.val, box.hi)});
    }
    const auto& cum = s.cum_loss.front();
    const double k = s.zeta / s.H;
    const double shift = minimize_pw(cum).value;
    const auto masses = ew_piece_masses(s).front();
    std::vector<double> oracle;
    for (const auto& p : cum.pieces) {
        auto f = [&](double x) { return std::exp(-k * (p(x) - shift)); };
        oracle.push_back(boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, p.lo, p.hi, 15, 1e-12));
    }
    for (std::size_t j = 0; j < masses.size(); ++j) CHECK(masses[j] == doctest::Approx(oracle[j]).epsilon(1e-7));

    // Equal-probability bins from the oracle CDF.
    const double total = std::accumulate(oracle.begin(), oracle.end(), 0.0);
    const int bins = 20;
    std::vector<double> edges;
    {
        double acc = 0.0;
        int next = 1;
        for (std::size_t j = 0; j < cum.pieces.size() && next < bins; ++j) {
            const auto& p = cum.pieces[j];
            while (next < bins && acc + oracle[j] >= total * next / bins) {
                const double want = total * next / bins - acc;
                auto f = [&](double x) { return std::exp(-k * (p(x) - shift)); };
                double a = p.lo, b = p.hi;
                for (int it = 0; it < 100; ++it) {
                    const double m = 0.5 * (a + b);
                    if (boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, p.lo, m, 15, 1e-12) < want)
                        a = m;
                    else
                        b = m;
                }
                edges.push_back(0.5 * (a + b));
                ++next;
            }
            acc += oracle[j];
        }
    }
    REQUIRE(edges.size() == static_cast<std::size_t>(bins - 1));
    std::vector<int> counts(bins, 0);
    const int n = 10000;
    for (int d = 0; d < n; ++d) {
        const double x = ew_sample(s).x;
        counts[static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin())]++;
    }
    double chi2 = 0.0;
    const double expect = static_cast<double>(n) / bins;
    for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
    const double pvalue = 1.0 - boost::math::cdf(boost::math::chi_squared(bins - 1), chi2);
    CHECK(pvalue > 0.01);
}

TEST_CASE("slices: mass split across tagged copies")
{
    const Box box{1e-3, 1.0};
    auto s = ew_init(box, 1.0, 1.0, 2, {0.1, 0.2});
    PiecewiseQuadratic zero, one;
    zero.pieces.push_back({box.lo, box.hi, 0, 0, 0, -1});
    one.pieces.push_back({box.lo, box.hi, 0, 0, 1, -1});
    ew_update(s, {zero, one});
    int first = 0;
    for (int k = 0; k < 10000; ++k) first += ew_sample(s).slice == 0;
    CHECK(std::abs(first / 10000.0 - std::exp(1.0) / (std::exp(1.0) + 1.0)) <= 0.02);
}

TEST_CASE("dispersion_probe examples")
{
    const auto r = dispersion_probe({{0.5}, {0.5}, {0.9}}, {0.1, 10.0});
    CHECK(r.at(0.1) == 2);
    CHECK(r.at(10.0) == 3);
    CHECK(dispersion_probe({}, {0.1}).at(0.1) == 0);
}

TEST_CASE("run_online: no lookahead and regret identity")
{
    const auto stream = synthetic_stream(40, 1);
    OnlineOptions o;
    o.zeta = 0.2;
    o.seed = 9;
    const auto full = run_online(stream, o);
    const auto part = run_online(std::vector<ProblemInstance>(stream.begin(), stream.begin() + 15), o);
    for (std::size_t t = 0; t < 15; ++t) CHECK(full.rounds[t].params.lambda1 == part.rounds[t].params.lambda1);

    // Recompute the hindsight optimum and the played losses from scratch.
    std::vector<PiecewiseQuadratic> curves;
    double played = 0.0;
    for (std::size_t t = 0; t < stream.size(); ++t) {
        const RegPath path = lars_path(stream[t].train, o.domain.lo);
        curves.push_back(val_loss_curve(path, stream[t].val, o.domain.hi));
        played += val_loss(en_fit_cd(stream[t].train, {full.rounds[t].params.lambda1, 0.0}), stream[t].val);
    }
    const auto total = sum_curves(curves);
    const double best = minimize_pw(total).value * static_cast<double>(stream.size());
    CHECK(full.hindsight_total == doctest::Approx(best).epsilon(1e-10));
    CHECK(std::abs(full.regret - (played - best)) <= 1e-6);
    CHECK(full.regret == doctest::Approx(full.online_total - full.hindsight_total));
    CHECK(full.avg_regret == doctest::Approx(full.regret / 40.0));
}

TEST_CASE("run_online reports the default zeta")
{
    const auto stream = synthetic_stream(50, 2);
    OnlineOptions o;
    const auto r = run_online(stream, o);
    CHECK(r.zeta == doctest::Approx(std::sqrt(std::log(50.0) / 50.0)));
    CHECK(r.T == 50);
    CHECK(r.rounds.size() == 50);
    CHECK(default_zeta(1) == 1.0);
}

TEST_CASE("identical instances: average regret shrinks with T")
{
    const ProblemInstance inst{testing::identity2(3, 1), {Matrix::Ones(1, 2), Vector::Constant(1, 2.0)}};
    std::vector<double> r50, r500;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        OnlineOptions o;
        o.seed = seed;
        r50.push_back(run_online(std::vector<ProblemInstance>(50, inst), o).avg_regret);
        r500.push_back(run_online(std::vector<ProblemInstance>(500, inst), o).avg_regret);
    }
    std::sort(r50.begin(), r50.end());
    std::sort(r500.begin(), r500.end());
    CHECK(r500[5] <= r50[5]);
}

TEST_CASE("ridge and elastic net online modes")
{
    const auto stream = synthetic_stream(60, 3);
    OnlineOptions o;
    o.mode = TuneMode::ridge;
    const auto r = run_online(stream, o);
    CHECK(r.mode == "ridge");
    CHECK(r.hindsight_params.lambda1 == 0.0);
    std::vector<RidgeLossEvaluator> evs;
    for (const auto& inst : stream) evs.push_back(ridge_loss_evaluator(inst));
    double played = 0.0;
    for (std::size_t t = 0; t < stream.size(); ++t)
        played += val_loss(ridge_fit(stream[t].train, r.rounds[t].params.lambda2), stream[t].val);
    CHECK(played == doctest::Approx(r.online_total).epsilon(1e-8));
    CHECK(r.hindsight_total == doctest::Approx(60.0 * ridge_minimize(evs, o.domain).value));

    o.mode = TuneMode::en;
    o.slices = 4;
    const auto e = run_online(stream, o);
    const auto slices = log_grid(o.domain.lo, o.domain.hi, 4);
    for (const auto& rd : e.rounds) CHECK(std::find(slices.begin(), slices.end(), rd.params.lambda2) != slices.end());
    for (std::size_t t = 0; t < stream.size(); t += 7) {
        const auto& p = e.rounds[t].params;
        CHECK(e.rounds[t].loss == doctest::Approx(val_loss(en_fit_cd(stream[t].train, {p.lambda1, p.lambda2}), stream[t].val)).epsilon(1e-6));
    }

    o.mode = TuneMode::lasso;
    o.doubling = true;
    const auto d = run_online(stream, o);
    CHECK(d.doubling);
    CHECK(d.rounds.size() == 60);
}
