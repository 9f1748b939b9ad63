#include "doctest.h"

#include <Eigen/Dense>

#include "mmr/rng.hpp"
#include "mmr/shape.hpp"

using namespace mmr;

namespace {

TreatmentGrid unit_grid(int J, double step = 1.0, double origin = 0.0) {
    std::vector<double> v(J);
    for (int j = 0; j < J; ++j) v[j] = origin + step * j;
    return TreatmentGrid::make(v, {v.front(), v.back()});
}

ShapeSpec dec_convex_01() {
    ShapeSpec s;
    s.monotone = ShapeSpec::Monotone::Decreasing;
    s.curvature = ShapeSpec::Curvature::Convex;
    s.bounds = {0.0, 1.0};
    return s;
}

}  // namespace

TEST_CASE("increasing concave rows on a unit grid") {
    auto grid = unit_grid(4);
    ShapeSpec spec;
    spec.monotone = ShapeSpec::Monotone::Increasing;
    spec.curvature = ShapeSpec::Curvature::Concave;
    auto cs = build_constraints(grid, spec);

    Eigen::MatrixXd want(5, 4);
    want << 1, -1, 0, 0,
            0, 1, -1, 0,
            0, 0, 1, -1,
            1, -2, 1, 0,
            0, 1, -2, 1;
    REQUIRE(cs.S.rows() == 5);
    CHECK((cs.S - want).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(cs.r.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("decreasing convex bounded membership") {
    auto grid = unit_grid(3);
    auto cs = build_constraints(grid, dec_convex_01());
    Eigen::VectorXd ok(3), bad(3);
    ok << 1.0, 0.5, 0.0;
    bad << 1.0, 0.6, 0.0;  // second difference 1 - 1.2 + 0 < 0
    CHECK(is_feasible(cs, ok));
    CHECK(!is_feasible(cs, bad));
}

TEST_CASE("bounds-only system stacks plus-minus identity") {
    auto grid = unit_grid(3);
    ShapeSpec spec;
    spec.bounds = {0.0, 1.0};
    auto cs = build_constraints(grid, spec);
    REQUIRE(cs.S.rows() == 6);
    CHECK((cs.S.topRows(3) + Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cs.S.bottomRows(3) - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(cs.r.head(3).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cs.r.tail(3) - Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(cs.vacuous == false);
}

TEST_CASE("selection matrix has orthonormal unit rows") {
    auto grid = TreatmentGrid::make({0, 1, 2, 3}, {0, 3});
    auto cs = build_constraints(grid, dec_convex_01());
    REQUIRE(cs.F.rows() == 2);
    CHECK(cs.F(0, 0) == 1.0);
    CHECK(cs.F(1, 3) == 1.0);
    CHECK(cs.F.sum() == doctest::Approx(2.0));
    // F F' = I, so the pseudoinverse has unit operator norm.
    CHECK(((cs.F * cs.F.transpose()) - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("feasibility respects the tolerance argument") {
    auto grid = unit_grid(2);
    ShapeSpec spec;
    spec.bounds = {0.0, 1.0};
    auto cs = build_constraints(grid, spec);
    Eigen::VectorXd m(2);
    m << 1.0 + 1e-6, 0.5;
    CHECK(!is_feasible(cs, m, 1e-9));
    CHECK(is_feasible(cs, m, 1e-5));
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    CHECK(is_feasible(cs, zero));
}

TEST_CASE("boundary-of-convexity curve is feasible") {
    auto grid = unit_grid(4);
    ShapeSpec spec;
    spec.monotone = ShapeSpec::Monotone::Decreasing;
    spec.curvature = ShapeSpec::Curvature::Convex;
    auto cs = build_constraints(grid, spec);
    Eigen::VectorXd m(4);
    m << 0.9, 0.6, 0.3, 0.0;
    CHECK(is_feasible(cs, m));
    CHECK((cs.S * m - cs.r).cwiseAbs().minCoeff() == doctest::Approx(0.0));
}

TEST_CASE("convex combinations of feasible points stay feasible") {
    Rng rng(7781);
    auto grid = unit_grid(5, 0.7, 1.3);
    for (int t = 0; t < 50; ++t) {
        ShapeSpec spec = dec_convex_01();
        if (rng.bernoulli(0.5)) spec.lipschitz = rng.uniform(0.5, 2.0);
        auto cs = build_constraints(grid, spec);
        // Rejection-sample two feasible points from decreasing convex curves.
        auto sample = [&]() {
            Eigen::VectorXd m(5);
            double level = rng.uniform(0.5, 1.0);
            double slope = -rng.uniform(0.0, 0.2);
            m[0] = level;
            for (int j = 1; j < 5; ++j) {
                m[j] = std::max(0.0, m[j - 1] + slope * (grid.values[j] - grid.values[j - 1]));
                slope *= rng.uniform(0.3, 1.0);  // shrinking magnitude => convex
            }
            return m;
        };
        Eigen::VectorXd a = sample(), b = sample();
        if (!is_feasible(cs, a) || !is_feasible(cs, b)) continue;
        const double w = rng.uniform(0.0, 1.0);
        CHECK(is_feasible(cs, (w * a + (1 - w) * b).eval(), 1e-9));
    }
}

TEST_CASE("monotone feasible set is invariant to grid scaling") {
    Rng rng(5150);
    ShapeSpec spec;
    spec.monotone = ShapeSpec::Monotone::Decreasing;
    auto grid1 = unit_grid(4, 1.0);
    auto grid2 = unit_grid(4, 3.5);  // same grid scaled by lambda > 0
    auto cs1 = build_constraints(grid1, spec);
    auto cs2 = build_constraints(grid2, spec);
    for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd m(4);
        for (int j = 0; j < 4; ++j) m[j] = rng.uniform(-1.0, 1.0);
        CHECK(is_feasible(cs1, m) == is_feasible(cs2, m));
    }
}

TEST_CASE("empty spec warns and accepts everything") {
    auto grid = unit_grid(3);
    ShapeSpec spec;
    auto cs = build_constraints(grid, spec);
    CHECK(cs.vacuous);
    CHECK(cs.n_rows() == 0);
    Eigen::VectorXd m(3);
    m << 5.0, -3.0, 100.0;
    CHECK(is_feasible(cs, m));
}
