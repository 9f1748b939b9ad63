#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mmr/core.hpp"
#include "mmr/shape.hpp"

namespace mmr {

struct EstimatorSpec {
    enum class Kind { CellMeans, LogisticPoly2 };
    Kind kind = Kind::CellMeans;
    double ridge = 1e-8;  // L2 penalty keeping separated logistic fits finite
    int max_iter = 100;
    double tol = 1e-10;   // gradient-norm stopping rule

    void validate() const {
        if (ridge < 0.0) throw ValidationError("ridge penalty must be nonnegative");
        if (max_iter < 1) throw ValidationError("max_iter must be positive");
    }
};

// First-stage estimate of m(d, x) on the observed levels: within-cell sample
// means, or a per-level logistic regression on a degree-2 polynomial of the
// covariates evaluated at each cell.
ResponseEstimate estimate(const CovariateTable& data, const TreatmentGrid& grid,
                          const EstimatorSpec& spec);

// All degree <= 2 monomials of x: 1, x_i, x_i^2, x_i x_j (i < j).
Eigen::VectorXd poly2_features(const Eigen::VectorXd& x);

struct ProjectionResult {
    ResponseEstimate projected;
    std::vector<Eigen::VectorXd> witness;  // feasible extension m with F m = projected
    std::vector<bool> changed;
    std::vector<double> distance;          // ||projected - input|| per cell
};

// Per cell, the minimum-norm repair: F m* where m* minimizes ||F m - m0_hat||^2
// over the shape set {S m <= r}.  Already-feasible cells pass through
// unchanged.  Solved by away-step Frank-Wolfe with the LP engine as the
// linear minimization oracle (duality gap 1e-8 or 10000 iterations).
ProjectionResult project_feasible(const ResponseEstimate& est, const ConstraintSystem& cs);

}  // namespace mmr
