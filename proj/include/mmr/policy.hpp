#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mmr/core.hpp"
#include "mmr/linprog.hpp"

namespace mmr {

// Searchable family of assignment rules.
struct PolicyClassSpec {
    enum class Kind { Constant, LinearScore };
    Kind kind = Kind::Constant;
    std::vector<int> score_covariates;  // columns of the cell covariate vector
    // beta_1 > 0 is enforced by fixing beta_1 = 1; remaining weights lie in
    // [-1, 1].  Cutoffs live in [cutoff_lo, cutoff_hi]; NaN selects the
    // default box [-K, K+1] for K score covariates.
    double cutoff_lo = std::numeric_limits<double>::quiet_NaN();
    double cutoff_hi = std::numeric_limits<double>::quiet_NaN();
    double epsilon = 1e-6;  // strict-inequality offset in the MILP
    long node_limit = 1000000;

    void validate() const;
};

struct PolicySolution {
    Policy policy;
    double objective = 0.0;           // sum of weight * Gamma at the assignment
    std::vector<int> assignment;      // per-cell level index
};

// Level minimizing the weighted sum of regret contributions; ties go to the
// lowest level.
PolicySolution solve_constant(const RegretMatrix& rm, const std::vector<double>& weights);

// Exact linear-score policy search: binaries g_ij indicate score above
// cutoff j, pi_ij = g_{i,j-1} - g_ij picks the assigned level, and the
// indicator linearization uses the big-M implied by the normalized
// covariate and cutoff boxes.  Covariates must be rescaled to [0, 1].
PolicySolution solve_linear_score(const RegretMatrix& rm,
                                  const std::vector<Eigen::VectorXd>& cells,
                                  const std::vector<double>& weights,
                                  const PolicyClassSpec& spec);

}  // namespace mmr
