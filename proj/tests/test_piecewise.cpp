#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "regtune/error.hpp"
#include "regtune/piecewise.hpp"
#include "test_util.hpp"

using namespace regtune;

namespace {

PiecewiseQuadratic single(double lo, double hi, double a, double b, double c, int support = -1)
{
    PiecewiseQuadratic pw;
    pw.pieces.push_back({lo, hi, a, b, c, support});
    return pw;
}

// Identity design X = I2, y = (3, 1), validated on x' = (1, 1), y' = 2.
ProblemInstance identity_instance()
{
    ProblemInstance inst{testing::identity2(3, 1), {Matrix::Ones(1, 2), Vector::Constant(1, 2.0)}};
    return inst;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

} // namespace

TEST_CASE("val_loss_curve identity example")
{
    const auto inst = identity_instance();
    const RegPath path = lars_path(inst.train, 0.01);
    const auto curve = val_loss_curve(path, inst.val, 5.0);
    REQUIRE(curve.pieces.size() == 3);
    const auto& p0 = curve.pieces[0];
    CHECK(p0.lo == doctest::Approx(0.01));
    CHECK(p0.hi == doctest::Approx(1.0));
    CHECK(p0.a == doctest::Approx(4.0));
    CHECK(p0.b == doctest::Approx(-8.0));
    CHECK(p0.c == doctest::Approx(4.0));
    CHECK(p0.support_size == 2);
    const auto& p1 = curve.pieces[1];
    CHECK(p1.hi == doctest::Approx(3.0));
    CHECK(p1.a == doctest::Approx(1.0));
    CHECK(p1.b == doctest::Approx(-2.0));
    CHECK(p1.c == doctest::Approx(1.0));
    CHECK(p1.support_size == 1);
    const auto& p2 = curve.pieces[2];
    CHECK(p2.hi == 5.0);
    CHECK(p2.a == 0.0);
    CHECK(p2.c == doctest::Approx(4.0));
    CHECK(p2.support_size == 0);

    const auto knots = curve.knots();
    REQUIRE(knots.size() == 2);
    CHECK(std::abs(knots[0] - 1.0) <= 1e-9);
    CHECK(std::abs(knots[1] - 3.0) <= 1e-9);
    const auto m = minimize_pw(curve);
    CHECK(std::abs(m.arg - 1.0) <= 1e-9);
    CHECK(std::abs(m.value) <= 1e-9);
}

TEST_CASE("val_loss_curve agrees with direct evaluation")
{
    std::mt19937_64 rng(1);
    for (int t = 0; t < 10; ++t) {
        const auto inst = testing::random_instance(rng, 12, 4, 6);
        for (double l2 : {0.0, 0.3}) {
            const RegPath path = en_path(inst.train, l2, 1e-3);
            const auto curve = val_loss_curve(path, inst.val, 2.0 * path.lambda_max);
            for (std::size_t k = 0; k + 1 < curve.pieces.size(); ++k) {
                const double x = curve.pieces[k].hi;
                CHECK(std::abs(curve.pieces[k](x) - curve.pieces[k + 1](x)) <= 1e-8);
            }
            for (int k = 0; k < 100; ++k) {
                const double lam = testing::log_uniform(rng, 1e-3, 2.0 * path.lambda_max);
                const double direct = val_loss(path_eval(path, lam), inst.val);
                CHECK(rel_err(curve(lam), direct) <= 1e-8);
            }
        }
    }
}

TEST_CASE("val_loss_curve on an interpolable instance tends to the least-squares residual")
{
    std::mt19937_64 rng(2);
    auto ds = testing::random_dataset(rng, 6, 3);
    Vector beta(3);
    beta << 0.5, -1.0, 0.25;
    ds.y = ds.X * beta;
    const RegPath path = lars_path(ds, 1e-9);
    const auto curve = val_loss_curve(path, ds);
    CHECK(curve(curve.lo()) <= 1e-12);
}

TEST_CASE("val_loss_curve rejects a feature mismatch")
{
    const auto inst = identity_instance();
    const RegPath path = lars_path(inst.train, 0.01);
    Dataset bad{Matrix::Ones(1, 3), Vector::Ones(1)};
    try {
        val_loss_curve(path, bad);
        FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::dimension_mismatch);
    }
}

TEST_CASE("penalize examples")
{
    const auto aic = penalize(single(0, 1, 1, 0, 0.5, 2), ObjectiveKind::aic, 10);
    CHECK(aic.pieces[0].c == doctest::Approx(4.5));
    CHECK(aic.kind == ObjectiveKind::aic);

    const auto bic = penalize(single(0, 1, 0, 0, 0, 3), ObjectiveKind::bic, 7);
    CHECK(bic.pieces[0].c == doctest::Approx(6.0 * std::log(7.0)));

    const auto none = penalize(single(0, 1, 1, 2, 3, 0), ObjectiveKind::bic, 7);
    CHECK(none.pieces[0].c == 3.0);
    CHECK(none.pieces[0].a == 1.0);
    CHECK(none.pieces[0].b == 2.0);
}

TEST_CASE("penalized curves jump by the support change")
{
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        const auto inst = testing::random_instance(rng, 10, 4, 5);
        const RegPath path = lars_path(inst.train, 1e-3);
        const auto base = val_loss_curve(path, inst.val);
        for (auto kind : {ObjectiveKind::aic, ObjectiveKind::bic}) {
            const auto pen = penalize(base, kind, 10);
            const double unit = kind == ObjectiveKind::aic ? 2.0 : 2.0 * std::log(10.0);
            for (std::size_t k = 0; k + 1 < pen.pieces.size(); ++k) {
                const double x = pen.pieces[k].hi;
                const int d = pen.pieces[k + 1].support_size - pen.pieces[k].support_size;
                const double jump = pen.pieces[k + 1](x) - pen.pieces[k](x);
                CHECK(std::abs(jump - unit * d) <= 1e-8);
            }
        }
    }
}

TEST_CASE("minimize_pw examples")
{
    const auto m = minimize_pw(single(0, 3, 1, -2, 1));
    CHECK(m.arg == doctest::Approx(1.0));
    CHECK(m.value == doctest::Approx(0.0));

    const auto flat = minimize_pw(single(0.5, 3, 0, 0, 2));
    CHECK(flat.arg == 0.5);
    CHECK(flat.value == 2.0);

    PiecewiseQuadratic two;
    two.pieces.push_back({0, 1, 0, 0, 1, -1});
    two.pieces.push_back({1, 2, 0, 0, 1, -1});
    CHECK(minimize_pw(two).arg == 0.0);
}

TEST_CASE("minimize_pw matches a dense scan on random curves")
{
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const auto inst = testing::random_instance(rng, 10, 3, 4);
        const RegPath path = en_path(inst.train, 0.2, 1e-3);
        const auto curve = val_loss_curve(path, inst.val, 10.0);
        const auto m = minimize_pw(curve);
        double scan = std::numeric_limits<double>::infinity();
        for (double x : log_grid(curve.lo(), curve.hi(), 20000)) scan = std::min(scan, curve(x));
        CHECK(m.value <= scan + 1e-12);
        CHECK(std::abs(curve(m.arg) - m.value) <= 1e-12);
    }
}

TEST_CASE("sum_curves examples")
{
    const auto a = single(0, 3, 1, -2, 1);
    const auto same = sum_curves({a, a});
    REQUIRE(same.pieces.size() == 1);
    CHECK(same.pieces[0].a == doctest::Approx(1.0));
    CHECK(same.pieces[0].b == doctest::Approx(-2.0));
    CHECK(same.pieces[0].c == doctest::Approx(1.0));
    CHECK(same.pieces[0].support_size == -1);

    PiecewiseQuadratic k1, k2;
    k1.pieces = {{0, 1, 0, 0, 1, 0}, {1, 3, 0, 1, 0, 0}};
    k2.pieces = {{0, 2, 1, 0, 0, 0}, {2, 3, 0, 0, 4, 0}};
    const auto merged = sum_curves({k1, k2});
    REQUIRE(merged.pieces.size() == 3);
    CHECK(merged.knots() == std::vector<double>{1.0, 2.0});

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int k = 0; k < 50; ++k) {
        const double x = u(rng);
        CHECK(std::abs(merged(x) - 0.5 * (k1(x) + k2(x))) <= 1e-10);
    }

    try {
        sum_curves({a, single(0, 4, 0, 0, 0)});
        FAIL("expected DomainMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::domain_mismatch);
    }
}

TEST_CASE("sum_curves is linear on real loss curves")
{
    std::mt19937_64 rng(6);
    std::vector<PiecewiseQuadratic> curves;
    for (int t = 0; t < 5; ++t) {
        const auto inst = testing::random_instance(rng, 8, 3, 4);
        curves.push_back(val_loss_curve(en_path(inst.train, 0.0, 1e-3), inst.val, 10.0));
    }
    const auto avg = sum_curves(curves);
    for (int k = 0; k < 200; ++k) {
        const double x = testing::log_uniform(rng, 1e-3, 10.0);
        double mean = 0.0;
        for (const auto& c : curves) mean += c(x);
        CHECK(std::abs(avg(x) - mean / 5.0) <= 1e-10);
    }
}

TEST_CASE("clamp_curve is exact")
{
    const auto c = single(0, 4, 1, -4, 4);  // (x-2)^2
    double frac = 0.0;
    const auto cl = clamp_curve(c, 1.0, &frac);
    CHECK(frac == doctest::Approx(0.5));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    for (int k = 0; k < 200; ++k) {
        const double x = u(rng);
        CHECK(std::abs(cl(x) - std::min(c(x), 1.0)) <= 1e-12);
    }
    CHECK(maximize_pw(cl) == doctest::Approx(1.0));
}

TEST_CASE("ridge evaluator scalar example and limits")
{
    ProblemInstance inst{{Matrix::Ones(1, 1), Vector::Constant(1, 2.0)}, {Matrix::Ones(1, 1), Vector::Ones(1)}};
    const auto ev = ridge_loss_evaluator(inst);
    for (double l : {0.1, 0.5, 1.0, 3.0, 20.0}) {
        const double r = 1.0 - 2.0 / (1.0 + l);
        CHECK(ev.loss(l) == doctest::Approx(r * r));
    }
    CHECK(ev.loss(1.0) <= 1e-15);
    CHECK(ev.loss(1e12) == doctest::Approx(1.0));

    const auto m = ridge_minimize({ev}, {1e-3, 1e3});
    CHECK(std::abs(m.arg - 1.0) <= 1e-6);
    CHECK(m.value <= 1e-6);
    CHECK_THROWS_AS(ridge_minimize({ev}, {1e-3, 1e3}, 8), Error);
}

TEST_CASE("ridge evaluator agrees with direct ridge solves")
{
    std::mt19937_64 rng(8);
    for (int t = 0; t < 10; ++t) {
        const auto inst = testing::random_instance(rng, 7, 4, 5);
        const auto ev = ridge_loss_evaluator(inst);
        for (int k = 0; k < 100; ++k) {
            const double l = testing::log_uniform(rng, 1e-3, 1e3);
            CHECK(rel_err(ev.loss(l), val_loss(ridge_fit(inst.train, l), inst.val)) <= 1e-8);
        }
        // Central-difference check of the analytic derivative.
        const double l = 0.7, h = 1e-6;
        CHECK(ev.derivative(l) == doctest::Approx((ev.loss(l + h) - ev.loss(l - h)) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("ridge_minimize against a dense grid")
{
    std::mt19937_64 rng(9);
    const Box box{1e-3, 1e3};
    const auto grid = log_grid(box.lo, box.hi, 100000);
    for (int t = 0; t < 20; ++t) {
        std::vector<RidgeLossEvaluator> evals;
        for (int k = 0; k < 3; ++k) evals.push_back(ridge_loss_evaluator(testing::random_instance(rng, 6, 4, 3)));
        const auto m = ridge_minimize(evals, box);
        double best = std::numeric_limits<double>::infinity();
        for (double l : grid) best = std::min(best, ridge_average_loss(evals, l));
        CHECK(m.value <= best + 1e-8);
    }

    // Zero validation targets: loss only shrinks with lambda2.
    auto inst = testing::random_instance(rng, 6, 3, 3);
    inst.val.y.setZero();
    const auto m = ridge_minimize({ridge_loss_evaluator(inst)}, box);
    CHECK(m.arg == box.hi);
}

TEST_CASE("en_surface slices are exact")
{
    const auto inst = identity_instance();
    const Box box{1e-3, 10.0};
    const auto grid = en_surface({inst}, box, 5);
    REQUIRE(grid.slices.size() == 5);
    CHECK(grid.support_fingerprints.size() == 5);

    // Knots of the lambda2 = 1 slice are the augmented path's event points.
    const auto slice = en_slice({inst}, 1.0, box);
    const RegPath aug = en_path(inst.train, 1.0, box.lo);
    std::vector<double> events;
    for (const auto& e : aug.events)
        if (e.lambda1 > box.lo && e.lambda1 < box.hi) events.push_back(e.lambda1);
    std::sort(events.begin(), events.end());
    const auto knots = slice.knots();
    REQUIRE(knots.size() == events.size());
    for (std::size_t k = 0; k < knots.size(); ++k) CHECK(knots[k] == doctest::Approx(events[k]));

    std::mt19937_64 rng(10);
    for (std::size_t k = 0; k < grid.slices.size(); ++k) {
        for (int t = 0; t < 100; ++t) {
            const double l1 = testing::log_uniform(rng, box.lo, box.hi);
            const double direct = direct_objective({inst}, l1, grid.lambda2_values[k], ObjectiveKind::val);
            CHECK(rel_err(grid.eval(k, l1), direct) <= 1e-6);
        }
    }

    const auto two = en_surface({inst}, box, 2);
    CHECK(two.lambda2_values.front() == box.lo);
    CHECK(two.lambda2_values.back() == box.hi);
    CHECK_THROWS_AS(en_surface({inst}, box, 1), Error);
}

TEST_CASE("en_surface on random collections and fingerprints")
{
    std::mt19937_64 rng(11);
    std::vector<ProblemInstance> insts;
    for (int k = 0; k < 3; ++k) insts.push_back(testing::random_instance(rng, 10, 4, 4));
    const Box box{1e-3, 10.0};
    const auto grid = en_surface(insts, box, 16);
    for (std::size_t k = 0; k < grid.slices.size(); ++k) {
        const auto& s = grid.slices[k];
        CHECK(s.lo() == box.lo);
        CHECK(s.hi() == box.hi);
        for (int t = 0; t < 10; ++t) {
            const double l1 = testing::log_uniform(rng, box.lo, box.hi);
            CHECK(rel_err(s(l1), direct_objective(insts, l1, grid.lambda2_values[k], ObjectiveKind::val)) <= 1e-6);
        }
    }
    std::size_t diff = 0;
    for (std::size_t k = 0; k + 1 < grid.support_fingerprints.size(); ++k)
        diff += grid.support_fingerprints[k] != grid.support_fingerprints[k + 1];
    CHECK(grid.boundary_crossings() == diff);
}

TEST_CASE("erm_tune LASSO identity example")
{
    TuneOptions opts;
    opts.mode = TuneMode::lasso;
    const auto r = erm_tune({identity_instance()}, opts);
    CHECK(std::abs(r.lambda1 - 1.0) <= 1e-9);
    CHECK(std::abs(r.loss) <= 1e-9);
    CHECK(r.lambda2 == 0.0);
    CHECK(r.mode == TuneMode::lasso);
}

TEST_CASE("erm_tune dominates a coarse direct-solve grid")
{
    std::mt19937_64 rng(12);
    const Box box{1e-3, 10.0};
    for (int t = 0; t < 2; ++t) {
        std::vector<ProblemInstance> insts;
        for (int k = 0; k < 5; ++k) insts.push_back(testing::random_instance(rng, 10, 3, 4));
        TuneOptions opts;
        opts.box = box;
        const auto r = erm_tune(insts, opts);
        const auto g = log_grid(box.lo, box.hi, 40);
        double best = std::numeric_limits<double>::infinity();
        for (double l2 : g)
            for (double l1 : g) best = std::min(best, direct_objective(insts, l1, l2, ObjectiveKind::val));
        CHECK(r.loss <= best + 1e-6);
        CHECK(rel_err(r.loss, direct_objective(insts, r.lambda1, r.lambda2, ObjectiveKind::val)) <= 1e-6);

        opts.mode = TuneMode::ridge;
        const auto rr = erm_tune(insts, opts);
        double rbest = std::numeric_limits<double>::infinity();
        for (double l2 : log_grid(box.lo, box.hi, 2000))
            rbest = std::min(rbest, direct_objective(insts, 0.0, l2, ObjectiveKind::val));
        CHECK(rr.loss <= rbest + 1e-8);
        CHECK(rr.lambda1 == 0.0);
    }
}

TEST_CASE("val = train tuning favours the smallest penalty")
{
    std::mt19937_64 rng(13);
    const auto ds = testing::random_dataset(rng, 12, 3);
    TuneOptions opts;
    opts.mode = TuneMode::lasso;
    const auto r = erm_tune({{ds, ds}}, opts);
    CHECK(r.lambda1 == doctest::Approx(opts.box.lo));
    const Vector ols = ds.X.colPivHouseholderQr().solve(ds.y);
    const double ols_loss = (ds.y - ds.X * ols).squaredNorm() / 12.0;
    CHECK(r.loss >= ols_loss - 1e-12);
    CHECK(r.loss <= ols_loss + 1e-2);
}

TEST_CASE("objective and mode parsing")
{
    CHECK(parse_objective("bic") == ObjectiveKind::bic);
    CHECK(parse_mode("ridge") == TuneMode::ridge);
    CHECK(std::string(to_string(TuneMode::en)) == "en");
    CHECK_THROWS_AS(parse_mode("lars"), Error);
}
