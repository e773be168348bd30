#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "causalscore/dataset.hpp"
#include "causalscore/rng.hpp"

using namespace causalscore;

namespace {

std::string temp_csv(const std::string& name, const std::string& content) {
    const std::string path =
        (std::filesystem::temp_directory_path() / ("causalscore_" + name)).string();
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("load_csv parses a small file") {
    const auto path = temp_csv("small.csv",
                               "a,b,T,Y\n"
                               "0.5,1.0,1,2.5\n"
                               "1.5,2.0,0,1.0\n"
                               "-0.5,0.0,1,3.0\n"
                               "0.0,1.5,0,0.5\n");
    const CausalFrame frame = load_csv(path, ColumnSchema{});
    CHECK(frame.n_rows() == 4);
    CHECK(frame.n_cols() == 2);
    CHECK(frame.column_names == std::vector<std::string>{"a", "b"});
    CHECK(frame.treatment[0] == 1.0);
    CHECK(frame.outcome[3] == doctest::Approx(0.5));
    CHECK_FALSE(frame.instrument.has_value());
}

TEST_CASE("load_csv rejects a non-binary treatment with row context") {
    const auto path = temp_csv("badt.csv", "a,T,Y\n1.0,2,0.5\n");
    CHECK_THROWS_AS(load_csv(path, ColumnSchema{}), NonBinaryTreatment);
    try {
        load_csv(path, ColumnSchema{});
    } catch (const NonBinaryTreatment& e) {
        CHECK(std::string(e.what()).find("'T'") != std::string::npos);
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
}

TEST_CASE("load_csv reports the missing outcome column") {
    const auto path = temp_csv("noy.csv", "a,T\n1.0,1\n");
    CHECK_THROWS_AS(load_csv(path, ColumnSchema{}), MissingColumn);
    try {
        load_csv(path, ColumnSchema{});
    } catch (const MissingColumn& e) {
        CHECK(std::string(e.what()).find("'Y'") != std::string::npos);
    }
}

TEST_CASE("load_csv drops rows with missing referenced values") {
    const auto path = temp_csv("gaps.csv",
                               "a,T,Y\n1.0,1,2.0\n,0,1.0\n2.0,0,\n3.0,1,4.0\n");
    const CausalFrame frame = load_csv(path, ColumnSchema{});
    CHECK(frame.n_rows() == 2);
}

TEST_CASE("load_csv rejects textual non-finite values") {
    const auto path = temp_csv("inf.csv", "a,T,Y\nnan,1,2.0\n");
    CHECK_THROWS_AS(load_csv(path, ColumnSchema{}), NonFiniteValue);
}

TEST_CASE("csv round-trip preserves values") {
    Rng rng(7);
    CausalFrame frame;
    frame.covariates.resize(20, 3);
    for (Eigen::Index j = 0; j < 3; ++j)
        for (Eigen::Index i = 0; i < 20; ++i) frame.covariates(i, j) = rng.normal();
    frame.treatment.resize(20);
    frame.outcome.resize(20);
    for (Eigen::Index i = 0; i < 20; ++i) {
        frame.treatment[i] = rng.bernoulli(0.5);
        frame.outcome[i] = rng.normal(0.0, 3.0);
    }
    frame.column_names = {"x0", "x1", "x2"};
    frame.validate();

    const std::string path =
        (std::filesystem::temp_directory_path() / "causalscore_roundtrip.csv").string();
    write_csv(path, frame, ColumnSchema{}, "seed=7");
    const CausalFrame loaded = load_csv(path, ColumnSchema{});
    REQUIRE(loaded.n_rows() == frame.n_rows());
    CHECK((loaded.covariates - frame.covariates).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.outcome - frame.outcome).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("make_split is deterministic and sized by largest remainder") {
    const Split a = make_split(10, {0.6, 0.2, 0.2}, 7);
    const Split b = make_split(10, {0.6, 0.2, 0.2}, 7);
    CHECK(a.train_idx == b.train_idx);
    CHECK(a.valid_idx == b.valid_idx);
    CHECK(a.test_idx == b.test_idx);
    CHECK(a.train_idx.size() == 6);
    CHECK(a.valid_idx.size() == 2);
    CHECK(a.test_idx.size() == 2);

    const Split c = make_split(10, {0.6, 0.2, 0.2}, 8);
    CHECK(a.train_idx != c.train_idx);
}

TEST_CASE("make_split covers all rows disjointly") {
    const Split split = make_split(101, {0.5, 0.3, 0.2}, 3);
    std::vector<int> seen(101, 0);
    for (int i : split.train_idx) seen[static_cast<std::size_t>(i)] += 1;
    for (int i : split.valid_idx) seen[static_cast<std::size_t>(i)] += 1;
    for (int i : split.test_idx) seen[static_cast<std::size_t>(i)] += 1;
    for (int count : seen) CHECK(count == 1);
}

TEST_CASE("make_split forces size one per part at n=3") {
    const Split split = make_split(3, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 99);
    CHECK(split.train_idx.size() == 1);
    CHECK(split.valid_idx.size() == 1);
    CHECK(split.test_idx.size() == 1);
}

TEST_CASE("make_split rejects degenerate fractions") {
    CHECK_THROWS_AS(make_split(5, {0.9, 0.05, 0.05}, 1), DegenerateSplit);
    CHECK_THROWS_AS(make_split(2, {0.4, 0.3, 0.3}, 1), DegenerateSplit);
    CHECK_THROWS_AS(make_split(10, {0.5, 0.2, 0.2}, 1), DegenerateSplit);
}

TEST_CASE("standardize uses reference rows with population sd") {
    CausalFrame frame;
    frame.covariates.resize(3, 1);
    frame.covariates << 1.0, 2.0, 3.0;
    frame.treatment = Vector::Zero(3);
    frame.treatment[0] = 1.0;
    frame.outcome = Vector::Ones(3);
    frame.column_names = {"a"};

    const auto [standardized, stats] = standardize(frame, {0, 2});
    CHECK(stats.mean[0] == doctest::Approx(2.0));
    CHECK(stats.scale[0] == doctest::Approx(1.0));  // population sd of {1, 3}
    CHECK(standardized.covariates(0, 0) == doctest::Approx(-1.0));
    CHECK(standardized.covariates(1, 0) == doctest::Approx(0.0));
    CHECK(standardized.covariates(2, 0) == doctest::Approx(1.0));
    CHECK(standardized.outcome == frame.outcome);
}

TEST_CASE("standardize two-point symmetry") {
    CausalFrame frame;
    frame.covariates.resize(2, 1);
    frame.covariates << 0.0, 2.0;
    frame.treatment = Vector::Zero(2);
    frame.treatment[1] = 1.0;
    frame.outcome = Vector::Zero(2);
    frame.column_names = {"a"};
    const auto [standardized, stats] = standardize(frame, {0, 1});
    CHECK(standardized.covariates(0, 0) == doctest::Approx(-1.0));
    CHECK(standardized.covariates(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("standardize passes constant columns through with scale 1") {
    CausalFrame frame;
    frame.covariates.resize(3, 2);
    frame.covariates << 5.0, 1.0, 5.0, 2.0, 5.0, 3.0;
    frame.treatment = Vector::Zero(3);
    frame.treatment[0] = 1.0;
    frame.outcome = Vector::Zero(3);
    frame.column_names = {"c", "v"};
    const auto [standardized, stats] = standardize(frame, {0, 1, 2});
    CHECK(stats.constant[0]);
    CHECK_FALSE(stats.constant[1]);
    CHECK(stats.scale[0] == 1.0);
    CHECK(standardized.covariates.col(0) == frame.covariates.col(0));
}

TEST_CASE("standardize then invert recovers inputs") {
    Rng rng(11);
    CausalFrame frame;
    frame.covariates.resize(50, 4);
    for (Eigen::Index j = 0; j < 4; ++j)
        for (Eigen::Index i = 0; i < 50; ++i)
            frame.covariates(i, j) = rng.normal(3.0, 2.0 + static_cast<double>(j));
    frame.treatment = Vector::Zero(50);
    frame.treatment[0] = 1.0;
    frame.outcome = Vector::Zero(50);
    frame.column_names = {"a", "b", "c", "d"};

    IndexList reference;
    for (int i = 0; i < 30; ++i) reference.push_back(i);
    const auto [standardized, stats] = standardize(frame, reference);
    const Matrix recovered = stats.invert(standardized.covariates);
    const double rel =
        ((recovered - frame.covariates).cwiseAbs().array() /
         (frame.covariates.cwiseAbs().array() + 1.0))
            .maxCoeff();
    CHECK(rel < 1e-10);
}

TEST_CASE("frame validation catches bad propensity and instrument") {
    CausalFrame frame;
    frame.covariates = Matrix::Ones(2, 1);
    frame.treatment = Vector::Zero(2);
    frame.outcome = Vector::Zero(2);
    frame.column_names = {"a"};
    frame.propensity = Vector::Constant(2, 1.0);  // must be strictly inside (0,1)
    CHECK_THROWS_AS(frame.validate(), NonFiniteValue);
    frame.propensity.reset();
    frame.instrument = Vector::Constant(2, 0.5);
    CHECK_THROWS_AS(frame.validate(), NonBinaryTreatment);
}
