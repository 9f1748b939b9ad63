#include "doctest.h"

#include <Eigen/Dense>

#include "mmr/simlab.hpp"
#include "test_util.hpp"

using namespace mmr;
using namespace testutil;

namespace {

UtilitySpec price_utility(const TreatmentGrid& grid) {
    return UtilitySpec::subsidy(grid.values.back(), grid.values.back(), grid);
}

SyntheticDGP three_level_dgp() {
    SyntheticDGP dgp;
    dgp.grid = TreatmentGrid::make({0, 1, 2}, {0, 2});
    dgp.shape.monotone = ShapeSpec::Monotone::Decreasing;
    dgp.shape.curvature = ShapeSpec::Curvature::Convex;
    dgp.shape.bounds = {0.0, 1.0};
    Eigen::VectorXd x(1);
    x << 0.0;
    dgp.cells = {x};
    dgp.cell_probs = {1.0};
    Eigen::VectorXd m(3);
    m << 1.0, 0.5, 0.0;
    dgp.m_true = {m};
    dgp.assign_probs = {0.5, 0.5};
    return dgp;
}

}  // namespace

TEST_CASE("default DGP satisfies its own declared shape") {
    auto dgp = SyntheticDGP::default_dgp();
    dgp.validate();
    CHECK(dgp.grid.J() == 5);
    CHECK(dgp.grid.J0() == 2);
    CHECK(dgp.cells.size() == 4);
}

TEST_CASE("three-level population gamma matches the oracle values") {
    auto dgp = three_level_dgp();
    auto cs = build_constraints(dgp.grid, dgp.shape);
    auto u = price_utility(dgp.grid);
    auto pop = population_gamma(dgp, cs, u);
    CHECK(pop.gamma(0, 0) == doctest::Approx(0.5));
    CHECK(pop.gamma(0, 1) == doctest::Approx(0.0));
    CHECK(pop.gamma(0, 2) == doctest::Approx(0.5));
    CHECK(population_regret(dgp, Policy::constant(1), cs, u) == doctest::Approx(0.0));
    CHECK(population_regret(dgp, Policy::constant(0), cs, u) == doctest::Approx(0.5));
}

TEST_CASE("population optimum is a fixed point of the solver") {
    auto dgp = SyntheticDGP::default_dgp();
    auto cs = build_constraints(dgp.grid, dgp.shape);
    auto u = price_utility(dgp.grid);
    auto pop = population_gamma(dgp, cs, u);
    auto star = solve_constant(pop, dgp.cell_probs);
    // Enumerating constant policies reproduces the solver's optimum.
    double best = kInf;
    for (int j = 0; j < dgp.grid.J(); ++j)
        best = std::min(best, population_regret(dgp, Policy::constant(j), cs, u));
    CHECK(star.objective == doctest::Approx(best));
    CHECK(population_regret(dgp, star.policy, cs, u) == doctest::Approx(star.objective));
}

TEST_CASE("first-best policy has zero regret under point identification") {
    SyntheticDGP dgp;
    dgp.grid = TreatmentGrid::make({0, 1, 2}, {0, 1, 2});
    dgp.shape.bounds = {0.0, 1.0};
    Eigen::VectorXd x0(1), x1(1);
    x0 << 0.2;
    x1 << 0.9;
    dgp.cells = {x0, x1};
    dgp.cell_probs = {0.6, 0.4};
    Eigen::VectorXd m0(3), m1(3);
    m0 << 0.9, 0.5, 0.1;   // v = (0, 0.5, 0.2): argmax level 2
    m1 << 0.9, 0.2, 0.45;  // v = (0, 0.2, 0.9): argmax level 3
    dgp.m_true = {m0, m1};
    dgp.assign_probs = {0.4, 0.3, 0.3};
    dgp.validate();
    auto cs = build_constraints(dgp.grid, dgp.shape);
    auto u = price_utility(dgp.grid);

    Eigen::VectorXd beta(1), cutoffs(2);
    beta << 1.0;
    cutoffs << 0.1, 0.5;  // x = 0.2 lands in (0.1, 0.5] -> index 1; x = 0.9 -> index 2
    auto first_best = Policy::linear_score(beta, cutoffs);
    CHECK(assign(first_best, x0, dgp.grid) == 1);
    CHECK(assign(first_best, x1, dgp.grid) == 2);
    CHECK(population_regret(dgp, first_best, cs, u) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("sampled tables follow the randomization design") {
    auto dgp = SyntheticDGP::default_dgp();
    Rng rng(17);
    auto table = sample(dgp, 4000, rng);
    CHECK(table.n_rows() == 4000);
    CHECK(table.n_cells() <= 4);
    table.validate(dgp.grid);
    // Roughly uniform cells and treatments.
    for (double w : table.cell_weights) CHECK(std::abs(w - 0.25) < 0.05);
}

TEST_CASE("noiseless surrogate recovers the population optimum exactly") {
    auto dgp = SyntheticDGP::default_dgp();
    auto cs = build_constraints(dgp.grid, dgp.shape);
    auto u = price_utility(dgp.grid);
    auto pop = population_gamma(dgp, cs, u);
    auto star = solve_constant(pop, dgp.cell_probs);

    // Feed the exact response restricted to the observed levels as m0_hat.
    ResponseEstimate exact;
    for (const auto& m : dgp.m_true) exact.m0.push_back(cs.F * m);
    std::vector<Observation> rows;
    for (int c = 0; c < 4; ++c) {
        Observation ob;
        ob.treatment = 0.0;
        ob.outcome = 0.0;
        ob.x = dgp.cells[c];
        rows.push_back(ob);
    }
    auto table = CovariateTable::make(rows, dgp.grid);
    auto proj = project_feasible(exact, cs);
    for (bool ch : proj.changed) CHECK(!ch);
    auto rm = regret_matrix(table, dgp.grid, cs, proj.projected, u, {});
    auto hat = solve_constant(rm, {0.25, 0.25, 0.25, 0.25});
    const double gap = population_regret(dgp, hat.policy, cs, u) - star.objective;
    CHECK(std::abs(gap) <= 1e-9);
}

TEST_CASE("every replication has nonnegative regret gap") {
    auto dgp = SyntheticDGP::default_dgp();
    dgp.seed = 31;
    auto cs = build_constraints(dgp.grid, dgp.shape);
    auto u = price_utility(dgp.grid);
    ExperimentSpec spec;
    spec.Ns = {200, 400};
    spec.reps = 15;
    spec.policy_class.kind = PolicyClassSpec::Kind::LinearScore;
    spec.policy_class.score_covariates = {0};
    auto res = convergence_experiment(dgp, cs, u, spec);
    REQUIRE(res.rows.size() == 30);
    for (const auto& r : res.rows) CHECK(r.regret_gap >= -1e-9);
}

TEST_CASE("fixed seed reproduces the table bit for bit, threads included") {
    auto dgp = SyntheticDGP::default_dgp();
    dgp.seed = 77;
    auto cs = build_constraints(dgp.grid, dgp.shape);
    auto u = price_utility(dgp.grid);
    ExperimentSpec spec;
    spec.Ns = {150, 300};
    spec.reps = 6;
    spec.policy_class.kind = PolicyClassSpec::Kind::Constant;
    auto a = convergence_experiment(dgp, cs, u, spec);
    auto b = convergence_experiment(dgp, cs, u, spec);
    spec.threads = 4;
    auto c = convergence_experiment(dgp, cs, u, spec);
    REQUIRE(a.rows.size() == b.rows.size());
    REQUIRE(a.rows.size() == c.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].regret_gap == b.rows[i].regret_gap);
        CHECK(a.rows[i].regret_gap == c.rows[i].regret_gap);
        CHECK(a.rows[i].N == c.rows[i].N);
        CHECK(a.rows[i].rep == c.rows[i].rep);
    }
}
