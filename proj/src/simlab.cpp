#include "mmr/simlab.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace mmr {

void SyntheticDGP::validate() const {
    grid.validate();
    const auto cs = build_constraints(grid, shape);
    if (cells.size() != cell_probs.size() || cells.size() != m_true.size() || cells.empty())
        throw ValidationError("cells, cell_probs, and m_true must align and be nonempty");
    double total = 0.0;
    for (double p : cell_probs) {
        if (p < 0.0) throw ValidationError("cell probabilities must be nonnegative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("cell probabilities must sum to 1");
    for (const auto& m : m_true) {
        if (m.size() != grid.J()) throw ValidationError("m_true must cover the full grid");
        if (!is_feasible(cs, m, 1e-9))
            throw ValidationError("m_true violates the declared shape restrictions");
        if (outcome == Outcome::Bernoulli)
            for (int j = 0; j < m.size(); ++j)
                if (m[j] < 0.0 || m[j] > 1.0)
                    throw ValidationError("Bernoulli outcomes need m_true in [0,1]");
    }
    if (static_cast<int>(assign_probs.size()) != grid.J0())
        throw ValidationError("assignment probabilities must cover the observed levels");
    total = 0.0;
    for (double p : assign_probs) {
        if (p <= 0.0) throw ValidationError("every observed level needs positive probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ValidationError("assignment probabilities must sum to 1");
    if (outcome == Outcome::Gaussian && sigma < 0.0)
        throw ValidationError("sigma must be nonnegative");
}

SyntheticDGP SyntheticDGP::default_dgp() {
    SyntheticDGP dgp;
    dgp.grid = TreatmentGrid::make({0.0, 0.5, 1.0, 1.5, 2.0}, {0.0, 2.0});
    dgp.shape.monotone = ShapeSpec::Monotone::Decreasing;
    dgp.shape.curvature = ShapeSpec::Curvature::Convex;
    dgp.shape.bounds = {0.0, 1.0};
    // The endpoint pairs give the cells population-optimal prices
    // (d_2, d_3, d_4, d_5) with runner-up regret gaps laddered as
    // (0.006, 0.008, 0.025, 0.056): one near-tie per sampling-noise scale,
    // so the Monte Carlo regret gap decays polynomially over desk-scale N.
    const std::vector<std::pair<double, double>> ends = {
        {0.95, 0.10}, {0.85, 0.15}, {0.75, 0.15}, {0.40, 0.15}};
    for (int c = 0; c < 4; ++c) {
        Eigen::VectorXd x(1);
        x << static_cast<double>(c) / 3.0;
        dgp.cells.push_back(x);
        const auto [a, b] = ends[c];
        Eigen::VectorXd m(5);
        for (int j = 0; j < 5; ++j) {
            const double t = dgp.grid.values[j] / 2.0;
            // Convex interpolation between the pinned endpoints.
            m[j] = a + (b - a) * (1.5 * t - 0.5 * t * t);
        }
        dgp.m_true.push_back(m);
    }
    dgp.cell_probs = {0.25, 0.25, 0.25, 0.25};
    dgp.assign_probs = {0.5, 0.5};
    dgp.outcome = Outcome::Bernoulli;
    return dgp;
}

RegretMatrix population_gamma(const SyntheticDGP& dgp, const ConstraintSystem& cs,
                              const UtilitySpec& u) {
    ResponseEstimate exact;
    for (const auto& m : dgp.m_true) exact.m0.push_back(cs.F * m);
    RegretMatrix rm;
    rm.gamma.resize(static_cast<int>(dgp.cells.size()), dgp.grid.J());
    for (int c = 0; c < static_cast<int>(dgp.cells.size()); ++c)
        for (int j = 0; j < dgp.grid.J(); ++j)
            rm.gamma(c, j) = std::max(gamma_j(c, j, cs, exact, u).first, 0.0);
    return rm;
}

double population_regret(const SyntheticDGP& dgp, const Policy& policy,
                         const ConstraintSystem& cs, const UtilitySpec& u) {
    const RegretMatrix gam = population_gamma(dgp, cs, u);
    double total = 0.0;
    for (int c = 0; c < static_cast<int>(dgp.cells.size()); ++c)
        total += dgp.cell_probs[c] * gam.gamma(c, assign(policy, dgp.cells[c], dgp.grid));
    return total;
}

CovariateTable sample(const SyntheticDGP& dgp, int N, Rng& rng) {
    const auto obs = dgp.grid.observed_indices();
    std::vector<Observation> rows(N);
    for (int i = 0; i < N; ++i) {
        const std::size_t c = rng.categorical(dgp.cell_probs);
        const std::size_t k = rng.categorical(dgp.assign_probs);
        const double mean = dgp.m_true[c][obs[k]];
        Observation& ob = rows[i];
        ob.treatment = dgp.grid.values[obs[k]];
        ob.x = dgp.cells[c];
        ob.outcome = dgp.outcome == SyntheticDGP::Outcome::Bernoulli
                         ? (rng.bernoulli(mean) ? 1.0 : 0.0)
                         : mean + dgp.sigma * rng.normal();
    }
    return CovariateTable::make(std::move(rows), dgp.grid);
}

namespace {

PolicySolution solve_class(const RegretMatrix& rm, const std::vector<Eigen::VectorXd>& cells,
                           const std::vector<double>& weights, const PolicyClassSpec& spec) {
    if (spec.kind == PolicyClassSpec::Kind::Constant) return solve_constant(rm, weights);
    return solve_linear_score(rm, cells, weights, spec);
}

}  // namespace

ConvergenceResult convergence_experiment(const SyntheticDGP& dgp, const ConstraintSystem& cs,
                                         const UtilitySpec& u, const ExperimentSpec& spec) {
    dgp.validate();
    if (spec.reps < 1) throw ValidationError("reps must be at least 1");

    const RegretMatrix pop = population_gamma(dgp, cs, u);
    const PolicySolution star = solve_class(pop, dgp.cells, dgp.cell_probs, spec.policy_class);

    ConvergenceResult out;
    out.seed = dgp.seed;
    out.rows.resize(spec.Ns.size() * static_cast<std::size_t>(spec.reps));

    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run_one = [&](std::size_t slot) {
        const int N = spec.Ns[slot / spec.reps];
        const int rep = static_cast<int>(slot % spec.reps);
        Rng rng = Rng::derive(dgp.seed, static_cast<std::uint64_t>(N),
                              static_cast<std::uint64_t>(rep));
        CovariateTable table = sample(dgp, N, rng);
        ResponseEstimate est = estimate(table, dgp.grid, spec.estimator);
        ProjectionResult proj = project_feasible(est, cs);
        RegretMatrix rm = regret_matrix(table, dgp.grid, cs, proj.projected, u, {});
        PolicySolution hat = solve_class(rm, table.cells, table.cell_weights, spec.policy_class);
        double attained = 0.0;
        for (int c = 0; c < static_cast<int>(dgp.cells.size()); ++c)
            attained += dgp.cell_probs[c] * pop.gamma(c, assign(hat.policy, dgp.cells[c], dgp.grid));
        out.rows[slot] = {N, rep, attained - star.objective};
    };

    const std::size_t n_slots = out.rows.size();
    if (spec.threads <= 1) {
        for (std::size_t s = 0; s < n_slots; ++s) run_one(s);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < spec.threads; ++t) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t s = next.fetch_add(1);
                    if (s >= n_slots) return;
                    try {
                        run_one(s);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }
    return out;
}

}  // namespace mmr
