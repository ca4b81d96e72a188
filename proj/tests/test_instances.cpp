#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "regtune/error.hpp"
#include "regtune/instances.hpp"
#include "test_util.hpp"

using namespace regtune;

namespace {

std::filesystem::path scratch(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / "regtune_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

ErrorKind kind_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::parse_error;
}

} // namespace

TEST_CASE("json bundle loads with declared shape")
{
    const auto path = scratch("bundle.json");
    std::ofstream(path) << R"({"train":{"X":[[1,0],[0,1]],"y":[3,0.5]},"val":{"X":[[1,1]],"y":[2]}})";
    const auto inst = load_instance(path, InstanceFormat::json_bundle);
    CHECK(inst.train.rows() == 2);
    CHECK(inst.features() == 2);
    CHECK(inst.val.rows() == 1);
    CHECK(inst.train.y(1) == 0.5);
}

TEST_CASE("train/val feature mismatch is rejected")
{
    const auto path = scratch("mismatch.json");
    std::ofstream(path) << R"({"train":{"X":[[1,0],[0,1],[1,1]],"y":[1,2,3]},"val":{"X":[[1,1,1]],"y":[2]}})";
    CHECK(kind_of([&] { load_instance(path, InstanceFormat::json_bundle); }) == ErrorKind::dimension_mismatch);
}

TEST_CASE("csv with nan is a parse error")
{
    const auto dir = scratch("csv_nan");
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "train_X.csv") << "1,0\nnan,1\n";
    std::ofstream(dir / "train_y.csv") << "1\n2\n";
    std::ofstream(dir / "val_X.csv") << "1,1\n";
    std::ofstream(dir / "val_y.csv") << "2\n";
    CHECK(kind_of([&] { load_instance(dir, InstanceFormat::csv_pair); }) == ErrorKind::parse_error);
}

TEST_CASE("malformed json and ragged csv are parse errors")
{
    const auto path = scratch("bad.json");
    std::ofstream(path) << R"({"train":{"X":[[1,0],[0,1]],"y":[3,0.5]},)";
    CHECK(kind_of([&] { load_instance(path, InstanceFormat::json_bundle); }) == ErrorKind::parse_error);

    const auto csv = scratch("ragged.csv");
    std::ofstream(csv) << "1,2\n3\n";
    CHECK(kind_of([&] { read_csv_matrix(csv); }) == ErrorKind::parse_error);
}

TEST_CASE("csv and json round trip bit-exactly")
{
    GeneratorConfig cfg;
    cfg.seed = 11;
    const auto inst = gen_synthetic(cfg);
    for (auto fmt : {InstanceFormat::csv_pair, InstanceFormat::json_bundle}) {
        const auto path = scratch(fmt == InstanceFormat::csv_pair ? "rt_csv" : "rt.json");
        save_instance(inst, path, fmt);
        const auto back = load_instance(path, fmt);
        CHECK(back.train.X == inst.train.X);
        CHECK(back.train.y == inst.train.y);
        CHECK(back.val.X == inst.val.X);
        CHECK(back.val.y == inst.val.y);
    }
}

TEST_CASE("gen_synthetic respects shapes, bound and determinism")
{
    GeneratorConfig cfg;
    cfg.m = 10;
    cfg.p = 3;
    cfg.m_val = 5;
    cfg.R = 1.0;
    cfg.seed = 7;
    const auto a = gen_synthetic(cfg);
    CHECK(a.train.X.rows() == 10);
    CHECK(a.train.X.cols() == 3);
    CHECK(a.val.X.rows() == 5);
    CHECK(a.train.max_abs() <= 1.0);
    CHECK(a.val.max_abs() <= 1.0);
    const auto b = gen_synthetic(cfg);
    CHECK(a.train.X == b.train.X);
    CHECK(a.val.y == b.val.y);

    cfg.seed = 8;
    CHECK(gen_synthetic(cfg).train.X != a.train.X);
}

TEST_CASE("label noise is uniform with density 1/(2 kappa_jitter)")
{
    GeneratorConfig cfg;
    cfg.m = 20000;
    cfg.p = 2;
    cfg.m_val = 1;
    cfg.kappa_jitter = 0.05;
    cfg.seed = 3;
    CHECK(cfg.kappa() == doctest::Approx(10.0));
    const auto inst = gen_synthetic(cfg);
    const Vector resid = inst.train.y - inst.train.X * effective_beta_star(cfg);
    CHECK(resid.cwiseAbs().maxCoeff() <= 0.05 + 1e-15);
    // Histogram over 10 bins of width 0.01: each density estimate must stay near 10 (bounded by kappa).
    std::vector<int> bins(10, 0);
    for (Eigen::Index i = 0; i < resid.size(); ++i)
        ++bins[static_cast<std::size_t>(std::min(9.0, std::floor((resid(i) + 0.05) / 0.01)))];
    for (int count : bins) CHECK(count / (20000.0 * 0.01) <= 10.0 * 1.1);
}

TEST_CASE("gen_synthetic config validation")
{
    GeneratorConfig cfg;
    cfg.p = 0;
    CHECK(kind_of([&] { gen_synthetic(cfg); }) == ErrorKind::invalid_config);
    cfg.p = 2;
    cfg.kappa_jitter = 2.0;  // >= R
    CHECK(kind_of([&] { gen_synthetic(cfg); }) == ErrorKind::invalid_config);
}

TEST_CASE("loocv_draw partitions the rows")
{
    std::mt19937_64 rng(1);
    const auto full = testing::random_dataset(rng, 3, 2);
    const auto inst = loocv_draw(full, 5);
    CHECK(inst.train.rows() == 2);
    CHECK(inst.val.rows() == 1);
    std::multiset<double> src(full.y.data(), full.y.data() + 3), got(inst.train.y.data(), inst.train.y.data() + 2);
    got.insert(inst.val.y(0));
    CHECK(src == got);
}

TEST_CASE("loocv_draw picks each index uniformly")
{
    Dataset full{Matrix::Zero(4, 1), Vector(4)};
    full.y << 0, 1, 2, 3;
    std::map<double, int> freq;
    const int draws = 10000;
    for (int s = 0; s < draws; ++s) ++freq[loocv_draw(full, static_cast<std::uint64_t>(s)).val.y(0)];
    for (auto [k, v] : freq) CHECK(std::abs(v / double(draws) - 0.25) <= 0.02);
    CHECK(freq.size() == 4);
}

TEST_CASE("loocv_draw needs two rows")
{
    Dataset one{Matrix::Ones(1, 2), Vector::Ones(1)};
    CHECK(kind_of([&] { loocv_draw(one, 0); }) == ErrorKind::too_few_rows);
}

TEST_CASE("mccv_draw split arithmetic, disjointness, determinism")
{
    Dataset full{Matrix::Zero(10, 1), Vector(10)};
    for (int i = 0; i < 10; ++i) full.y(i) = i;
    const auto a = mccv_draw(full, 0.3, 9);
    CHECK(a.val.rows() == 3);
    CHECK(a.train.rows() == 7);
    std::set<double> seen;
    for (Eigen::Index i = 0; i < 7; ++i) seen.insert(a.train.y(i));
    for (Eigen::Index i = 0; i < 3; ++i) seen.insert(a.val.y(i));
    CHECK(seen.size() == 10);
    const auto b = mccv_draw(full, 0.3, 9);
    CHECK(a.val.y == b.val.y);

    Dataset two{Matrix::Zero(2, 1), Vector::Zero(2)};
    CHECK(kind_of([&] { mccv_draw(two, 0.999, 1); }) == ErrorKind::too_few_rows);
}
