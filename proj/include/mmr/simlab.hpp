#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mmr/core.hpp"
#include "mmr/firststage.hpp"
#include "mmr/policy.hpp"
#include "mmr/regret.hpp"
#include "mmr/rng.hpp"
#include "mmr/shape.hpp"

namespace mmr {

// Fully specified data-generating process for desk-scale Monte Carlo runs.
struct SyntheticDGP {
    enum class Outcome { Bernoulli, Gaussian };
    TreatmentGrid grid;
    ShapeSpec shape;
    std::vector<Eigen::VectorXd> cells;   // covariate value per cell
    std::vector<double> cell_probs;
    std::vector<Eigen::VectorXd> m_true;  // per cell, full response over the grid
    Outcome outcome = Outcome::Bernoulli;
    double sigma = 0.1;                   // Gaussian outcome noise
    std::vector<double> assign_probs;     // randomization over observed levels
    std::uint64_t seed = 0;

    void validate() const;

    // The documented validation design: four cells on the grid
    // {0, 0.5, 1, 1.5, 2} with endpoints observed, decreasing convex
    // responses, Bernoulli outcomes, uniform randomization, b(d) = d.
    static SyntheticDGP default_dgp();
};

// Exact population gamma matrix: the same LPs run on F m_true.
RegretMatrix population_gamma(const SyntheticDGP& dgp, const ConstraintSystem& cs,
                              const UtilitySpec& u);

// Population worst-case regret of a fixed policy,
//   sum_x P(x) Gamma_{pi(x),P}(x).
double population_regret(const SyntheticDGP& dgp, const Policy& policy,
                         const ConstraintSystem& cs, const UtilitySpec& u);

// One fresh sample of size N drawn with a reproducible stream.
CovariateTable sample(const SyntheticDGP& dgp, int N, Rng& rng);

struct ConvergenceRow {
    int N = 0;
    int rep = 0;
    double regret_gap = 0.0;
};

struct ExperimentSpec {
    std::vector<int> Ns;
    int reps = 1;
    EstimatorSpec estimator;
    PolicyClassSpec policy_class;
    int threads = 1;
};

struct ConvergenceResult {
    std::vector<ConvergenceRow> rows;  // ordered by (N, rep)
    std::uint64_t seed = 0;
};

// Per (N, rep): draw a sample, run estimate -> project -> regret matrix ->
// policy search, and record the population regret gap of the estimated
// policy against the class optimum.  Replication r of size N uses the
// stream derived from (dgp.seed, N, r), so results do not depend on the
// thread count.
ConvergenceResult convergence_experiment(const SyntheticDGP& dgp, const ConstraintSystem& cs,
                                         const UtilitySpec& u, const ExperimentSpec& spec);

}  // namespace mmr
