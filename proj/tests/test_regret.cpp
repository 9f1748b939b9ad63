#include "doctest.h"

#include <Eigen/Dense>

#include "mmr/regret.hpp"
#include "test_util.hpp"

using namespace mmr;
using namespace testutil;

namespace {

// Three-level demand instance: grid {0,1,2}, observed endpoints pinned at
// (1, 0), decreasing + convex + [0,1], b(d) = d, c = 0.
struct ThreeLevel {
    TreatmentGrid grid = TreatmentGrid::make({0, 1, 2}, {0, 2});
    ShapeSpec spec;
    ConstraintSystem cs;
    UtilitySpec u;
    ResponseEstimate est;
    CovariateTable table;

    ThreeLevel() {
        spec.monotone = ShapeSpec::Monotone::Decreasing;
        spec.curvature = ShapeSpec::Curvature::Convex;
        spec.bounds = {0.0, 1.0};
        cs = build_constraints(grid, spec);
        uhelper();
        Eigen::VectorXd q(2);
        q << 1.0, 0.0;
        est.m0 = {q};
        Eigen::VectorXd x(1);
        x << 0.0;
        table = CovariateTable::make({{0.0, 1.0, x}, {2.0, 0.0, x}}, grid);
    }
    void uhelper() {
        u.benefit.resize(1, 3);
        u.benefit << 0, 1, 2;
        u.cost = Eigen::MatrixXd::Zero(1, 3);
    }
};

}  // namespace

TEST_CASE("three-level gamma matches the grid oracle") {
    ThreeLevel t;
    // j = first level, k = middle level: the worst case puts m(1) = 0.5.
    auto g = gamma_jk(0, 0, 1, t.cs, t.est, t.u);
    const double oracle = oracle_gamma_jk(t.grid, t.cs, t.est.m0[0], t.u, 0, 0, 1);
    CHECK(g.value == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(g.value - oracle) <= 1e-8);
    CHECK(g.m_star[1] == doctest::Approx(0.5));
    CHECK(is_feasible(t.cs, g.m_star, 1e-7));

    Eigen::Vector3d expect(0.5, 0.0, 0.5);
    for (int j = 0; j < 3; ++j) {
        auto [value, cert] = gamma_j(0, j, t.cs, t.est, t.u);
        CHECK(std::abs(value - expect[j]) <= 1e-8);
        CHECK(std::abs(value - oracle_gamma_j(t.grid, t.cs, t.est.m0[0], t.u, 0, j)) <= 1e-8);
        CHECK(std::abs(cert.value - value) <= 1e-8);
        CHECK(is_feasible(t.cs, cert.m_star, 1e-7));
        if (cert.lambda.size() > 0) CHECK(cert.lambda.minCoeff() >= -1e-10);
    }
}

TEST_CASE("identical comparison has zero regret") {
    ThreeLevel t;
    for (int j = 0; j < 3; ++j) CHECK(gamma_jk(0, j, j, t.cs, t.est, t.u).value == doctest::Approx(0.0));
}

TEST_CASE("point identification when every level is observed") {
    auto grid = TreatmentGrid::make({0, 1, 2}, {0, 1, 2});
    ShapeSpec spec;
    spec.bounds = {0.0, 1.0};
    auto cs = build_constraints(grid, spec);
    UtilitySpec u;
    u.benefit.resize(1, 3);
    u.benefit << 1.0, 2.0, -1.0;
    u.cost.resize(1, 3);
    u.cost << 0.1, 0.0, 0.2;
    ResponseEstimate est;
    Eigen::VectorXd q(3);
    q << 0.9, 0.5, 0.3;
    est.m0 = {q};

    auto v = [&](int j) { return u.b(0, j) * q[j] - u.c(0, j); };
    for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k)
            CHECK(gamma_jk(0, j, k, cs, est, u).value == doctest::Approx(v(k) - v(j)));
        double best = -kInf;
        for (int k = 0; k < 3; ++k) best = std::max(best, v(k) - v(j));
        auto [value, cert] = gamma_j(0, j, cs, est, u);
        CHECK(value == doctest::Approx(best));
    }
    // The point-identified first best has zero worst-case regret.
    int jstar = 0;
    for (int j = 1; j < 3; ++j)
        if (v(j) > v(jstar)) jstar = j;
    CHECK(gamma_j(0, jstar, cs, est, u).first == doctest::Approx(0.0));
}

TEST_CASE("four-level envelopes match the two-variable oracle") {
    auto grid = TreatmentGrid::make({0, 1, 2, 3}, {0, 3});
    ShapeSpec spec;
    spec.monotone = ShapeSpec::Monotone::Decreasing;
    spec.curvature = ShapeSpec::Curvature::Convex;
    spec.bounds = {0.0, 1.0};
    auto cs = build_constraints(grid, spec);
    UtilitySpec u;
    u.benefit.resize(1, 4);
    u.benefit << 0, 1, 2, 3;
    u.cost = Eigen::MatrixXd::Zero(1, 4);
    ResponseEstimate est;
    Eigen::VectorXd q(2);
    q << 0.9, 0.0;
    est.m0 = {q};

    auto env = envelopes(0, cs, est, u);
    Eigen::Vector4d upper(0.9, 0.6, 0.3, 0.0), lower(0.9, 0.0, 0.0, 0.0);
    for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(env.m_max[j] - upper[j]) <= 1e-6);
        CHECK(std::abs(env.m_min[j] - lower[j]) <= 1e-6);
        auto scan = grid_scan(grid, cs, q, 0.0, 0.9, 0.005,
                              [&](const Eigen::VectorXd& m) { return m[j]; });
        CHECK(std::abs(env.m_max[j] - scan.best_max) <= 1e-6);
        CHECK(std::abs(env.m_min[j] - scan.best_min) <= 1e-6);
    }
    // Observed levels are pinned.
    CHECK(env.m_min[0] == doctest::Approx(env.m_max[0]));
    CHECK(env.m_min[3] == doctest::Approx(env.m_max[3]));
}

TEST_CASE("envelope utility bounds follow the sign of b") {
    ThreeLevel t;
    t.u.benefit(0, 1) = -1.0;  // negative benefit at the middle level
    auto env = envelopes(0, t.cs, t.est, t.u);
    CHECK(env.v_min[1] == doctest::Approx(-env.m_max[1]));
    CHECK(env.v_max[1] == doctest::Approx(-env.m_min[1]));
}

TEST_CASE("vacuous identification gives [0,1] envelopes at new levels") {
    auto grid = TreatmentGrid::make({0, 1, 2}, {0, 2});
    ShapeSpec spec;
    spec.bounds = {0.0, 1.0};
    auto cs = build_constraints(grid, spec);
    UtilitySpec u;
    u.benefit = Eigen::MatrixXd::Ones(1, 3);
    u.cost = Eigen::MatrixXd::Zero(1, 3);
    ResponseEstimate est;
    Eigen::VectorXd q(2);
    q << 0.7, 0.4;
    est.m0 = {q};
    auto env = envelopes(0, cs, est, u);
    CHECK(env.m_min[1] == doctest::Approx(0.0));
    CHECK(env.m_max[1] == doctest::Approx(1.0));
}

TEST_CASE("non-rectangularity: joint program beats pointwise bounds") {
    auto grid = TreatmentGrid::make({0, 1, 2, 3}, {0, 3});
    ShapeSpec spec;
    spec.monotone = ShapeSpec::Monotone::Decreasing;
    spec.curvature = ShapeSpec::Curvature::Convex;
    spec.bounds = {0.0, 1.0};
    auto cs = build_constraints(grid, spec);
    UtilitySpec u;
    u.benefit.resize(1, 4);
    u.benefit << 0, 1, 2, 3;
    u.cost = Eigen::MatrixXd::Zero(1, 4);
    ResponseEstimate est;
    Eigen::VectorXd q(2);
    q << 0.9, 0.0;
    est.m0 = {q};

    auto env = envelopes(0, cs, est, u);
    double max_gap = 0.0;
    for (int j = 0; j < 4; ++j) {
        for (int k = 0; k < 4; ++k) {
            const double joint = gamma_jk(0, j, k, cs, est, u).value;
            const double boxed = env.v_max[k] - env.v_min[j];
            CHECK(joint <= boxed + 1e-9);
            max_gap = std::max(max_gap, boxed - joint);
        }
    }
    CHECK(max_gap > 0.01);
}

TEST_CASE("dual single-LP gamma equals the primal maximum") {
    Rng rng(40610);
    for (int t = 0; t < 30; ++t) {
        auto ri = random_instance(rng);
        auto est = single_cell_estimate(ri.q);
        for (int j = 0; j < ri.grid.J(); ++j) {
            double best = -kInf;
            for (int k = 0; k < ri.grid.J(); ++k)
                best = std::max(best, gamma_jk(0, j, k, ri.cs, est, ri.utility).value);
            auto [value, cert] = gamma_j(0, j, ri.cs, est, ri.utility);
            CHECK(std::abs(value - best) <= 1e-8);
            CHECK(std::abs(cert.value - value) <= 1e-8);
            CHECK(is_feasible(ri.cs, cert.m_star, 1e-7));
        }
    }
}

TEST_CASE("gamma is Lipschitz in the first stage") {
    Rng rng(88771);
    InstanceOptions opt;
    opt.lipschitz_certified = true;
    int done = 0;
    while (done < 40) {
        auto ri = random_instance(rng, opt);
        auto est = single_cell_estimate(ri.q);
        const double delta = rng.bernoulli(0.5) ? 1e-3 : 1e-2;
        Eigen::VectorXd step(ri.q.size());
        for (int i = 0; i < step.size(); ++i) step[i] = rng.normal();
        step *= delta / step.norm();
        auto est2 = single_cell_estimate((ri.q + step).eval());

        const int j = static_cast<int>(rng.below(ri.grid.J()));
        const int k = static_cast<int>(rng.below(ri.grid.J()));
        double base, moved;
        try {
            base = gamma_jk(0, j, k, ri.cs, est, ri.utility).value;
            moved = gamma_jk(0, j, k, ri.cs, est2, ri.utility).value;
        } catch (const InfeasibleIdentifiedSet&) {
            continue;  // perturbation left the identified set empty
        }
        Eigen::VectorXd bjk = Eigen::VectorXd::Zero(ri.grid.J());
        bjk[k] += ri.utility.b(0, k);
        bjk[j] -= ri.utility.b(0, j);
        CHECK(std::abs(moved - base) <= bjk.norm() * step.norm() + 1e-9);
        ++done;
    }
}

TEST_CASE("curvature rows exert leverage above ||b_jk|| on the first stage") {
    // Convexity transfers slopes across gaps, so the map m0_hat -> Gamma_jk
    // can be steeper than ||b_jk||; these two pinned instances document why
    // the certified-constant tests exclude curvature rows.

    SUBCASE("extrapolation through an interior observed level") {
        // max m(d_1) - m(d_3) s.t. decreasing + convex + [0,1], m(d_2) = w:
        // the value is min(1, 2 - 2w), slope -2, while ||b_jk|| = sqrt(2).
        auto grid = TreatmentGrid::make({0, 1, 2}, {1});
        ShapeSpec spec;
        spec.monotone = ShapeSpec::Monotone::Decreasing;
        spec.curvature = ShapeSpec::Curvature::Convex;
        spec.bounds = {0.0, 1.0};
        auto cs = build_constraints(grid, spec);
        UtilitySpec u;
        u.benefit = Eigen::MatrixXd::Ones(1, 3);
        u.cost = Eigen::MatrixXd::Zero(1, 3);

        Eigen::VectorXd w1(1), w2(1);
        w1 << 0.80;
        w2 << 0.81;
        const double g1 = gamma_jk(0, 2, 0, cs, single_cell_estimate(w1), u).value;
        const double g2 = gamma_jk(0, 2, 0, cs, single_cell_estimate(w2), u).value;
        CHECK(g1 == doctest::Approx(0.40));
        CHECK(g2 == doctest::Approx(0.38));
        CHECK(std::abs(g2 - g1) > std::sqrt(2.0) * 0.01);
    }

    SUBCASE("slope transfer between observed levels") {
        // Observed {0,2,3} bracket the free level 1, yet min m(d_1) equals
        // 2 q(d_2) - q(d_3) via the convexity chain: gradient norm sqrt(5).
        auto grid = TreatmentGrid::make({0, 1, 2, 3}, {0, 2, 3});
        ShapeSpec spec;
        spec.monotone = ShapeSpec::Monotone::Decreasing;
        spec.curvature = ShapeSpec::Curvature::Convex;
        spec.bounds = {0.0, 1.0};
        auto cs = build_constraints(grid, spec);
        UtilitySpec u;
        u.benefit.resize(1, 4);
        u.benefit << 0.1, 1.0, 0.1, 0.1;
        u.cost = Eigen::MatrixXd::Zero(1, 4);

        Eigen::VectorXd q1(3), q2(3);
        q1 << 0.9, 0.4, 0.3;
        q2 << 0.9, 0.41, 0.3;  // perturb q(d_2) by 0.01
        const double g1 = gamma_jk(0, 1, 0, cs, single_cell_estimate(q1), u).value;
        const double g2 = gamma_jk(0, 1, 0, cs, single_cell_estimate(q2), u).value;
        // Gamma = 0.1 q(d_0) - min m(d_1) = 0.1 q0 - (2 q1 - q2).
        CHECK(g1 == doctest::Approx(0.1 * 0.9 - 0.5));
        CHECK(std::abs(g2 - g1) == doctest::Approx(0.02));
        const double bjk_norm = std::sqrt(1.0 + 0.01);
        CHECK(std::abs(g2 - g1) > bjk_norm * 0.01);
    }
}

TEST_CASE("dual eta is a supergradient of the concave value function") {
    // Gamma_jk as a function of the pinned values q is a concave LP value
    // function, so eta(q + step)' step <= Gamma(q + step) - Gamma(q)
    //                               <= eta(q)' step on every instance,
    // curvature rows included.  This is the sharp stability certificate.
    Rng rng(424401);
    int done = 0;
    while (done < 60) {
        auto ri = random_instance(rng);
        auto est = single_cell_estimate(ri.q);
        Eigen::VectorXd step(ri.q.size());
        for (int i = 0; i < step.size(); ++i) step[i] = rng.normal();
        step *= (rng.bernoulli(0.5) ? 1e-3 : 1e-2) / step.norm();
        auto est2 = single_cell_estimate((ri.q + step).eval());
        const int j = static_cast<int>(rng.below(ri.grid.J()));
        const int k = static_cast<int>(rng.below(ri.grid.J()));
        GammaValue base, moved;
        try {
            base = gamma_jk(0, j, k, ri.cs, est, ri.utility);
            moved = gamma_jk(0, j, k, ri.cs, est2, ri.utility);
        } catch (const InfeasibleIdentifiedSet&) {
            continue;
        }
        const double diff = moved.value - base.value;
        CHECK(diff <= base.eta.dot(step) + 1e-8);
        CHECK(diff >= moved.eta.dot(step) - 1e-8);
        ++done;
    }
}

TEST_CASE("adding a restriction never increases gamma") {
    Rng rng(66001);
    for (int t = 0; t < 20; ++t) {
        auto grid = TreatmentGrid::make({0, 1, 2, 3}, {0, 3});
        ShapeSpec weak;
        weak.monotone = ShapeSpec::Monotone::Decreasing;
        weak.bounds = {0.0, 1.0};
        ShapeSpec strong = weak;
        strong.curvature = ShapeSpec::Curvature::Convex;
        auto cs_weak = build_constraints(grid, weak);
        auto cs_strong = build_constraints(grid, strong);

        // A decreasing convex curve is feasible for both systems.
        auto m = sample_shaped_curve(rng, grid, strong);
        Eigen::VectorXd q = cs_strong.F * m;
        auto est = single_cell_estimate(q);
        UtilitySpec u;
        u.benefit.resize(1, 4);
        u.cost.resize(1, 4);
        for (int j = 0; j < 4; ++j) {
            u.benefit(0, j) = rng.uniform(-2.0, 2.0);
            u.cost(0, j) = rng.uniform(-1.0, 1.0);
        }
        for (int j = 0; j < 4; ++j) {
            CHECK(gamma_j(0, j, cs_strong, est, u).first <=
                  gamma_j(0, j, cs_weak, est, u).first + 1e-8);
        }
    }
}

TEST_CASE("regret matrix for the three-level instance") {
    ThreeLevel t;
    RegretOptions opts;
    opts.with_detail = true;
    opts.with_worst_response = true;
    auto rm = regret_matrix(t.table, t.grid, t.cs, t.est, t.u, opts);
    REQUIRE(rm.n_cells() == 1);
    CHECK(rm.gamma(0, 0) == doctest::Approx(0.5));
    CHECK(rm.gamma(0, 1) == doctest::Approx(0.0));
    CHECK(rm.gamma(0, 2) == doctest::Approx(0.5));
    CHECK(rm.gamma.minCoeff() >= 0.0);
    for (int j = 0; j < 3; ++j) {
        CHECK(rm.gamma(0, j) == doctest::Approx(rm.detail[0].row(j).maxCoeff()));
        CHECK(is_feasible(t.cs, rm.worst_response[0][j], 1e-7));
    }
}

TEST_CASE("maximin welfare ties all levels on the three-level instance") {
    ThreeLevel t;
    RegretOptions opts;
    opts.criterion = Criterion::MaximinWelfare;
    auto rm = regret_matrix(t.table, t.grid, t.cs, t.est, t.u, opts);
    for (int j = 0; j < 3; ++j) CHECK(rm.gamma(0, j) == doctest::Approx(0.0));
}

TEST_CASE("duplicate covariate rows collapse into one cell") {
    ThreeLevel t;
    Eigen::VectorXd x(1);
    x << 0.0;
    std::vector<Observation> rows;
    for (int i = 0; i < 10; ++i) rows.push_back({i % 2 == 0 ? 0.0 : 2.0, 0.0, x});
    auto table = CovariateTable::make(rows, t.grid);
    auto rm = regret_matrix(table, t.grid, t.cs, t.est, t.u, {});
    CHECK(rm.n_cells() == 1);
}

TEST_CASE("threaded regret matrix matches single-threaded") {
    Rng rng(424242);
    InstanceOptions opt;
    opt.max_levels = 6;
    auto ri = random_instance(rng, opt);
    const int n_cells = 5;
    ResponseEstimate est;
    CovariateTable table;
    std::vector<Observation> rows;
    for (int c = 0; c < n_cells; ++c) {
        auto m = sample_shaped_curve(rng, ri.grid, ri.spec);
        est.m0.push_back(ri.cs.F * m);
        Eigen::VectorXd x(1);
        x << static_cast<double>(c);
        Observation ob;
        ob.treatment = ri.grid.values[ri.grid.observed_indices()[0]];
        ob.outcome = 0.0;
        ob.x = x;
        rows.push_back(ob);
    }
    table = CovariateTable::make(rows, ri.grid);
    RegretOptions seq, par;
    par.threads = 4;
    auto a = regret_matrix(table, ri.grid, ri.cs, est, ri.utility, seq);
    auto b = regret_matrix(table, ri.grid, ri.cs, est, ri.utility, par);
    CHECK((a.gamma - b.gamma).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("empty identified set raises the dedicated error") {
    ThreeLevel t;
    Eigen::VectorXd bad(2);
    bad << 0.0, 1.0;  // increasing endpoints contradict decreasing shape
    ResponseEstimate est;
    est.m0 = {bad};
    CHECK_THROWS_AS(gamma_jk(0, 0, 1, t.cs, est, t.u), InfeasibleIdentifiedSet);
    CHECK_THROWS_AS(gamma_j(0, 0, t.cs, est, t.u), InfeasibleIdentifiedSet);
}
