#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "mmr/errors.hpp"

namespace mmr {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense LP in the form
//     max/min  c'z   s.t.  A_ub z <= b_ub,  A_eq z = b_eq,  lower <= z <= upper
// Infinite bounds are allowed; empty blocks are 0 x n matrices.
struct LinearProgram {
    enum class Sense { Maximize, Minimize };
    Sense sense = Sense::Maximize;
    Eigen::VectorXd objective;
    Eigen::MatrixXd A_ub;
    Eigen::VectorXd b_ub;
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    int n_vars() const { return static_cast<int>(objective.size()); }
    void validate() const;

    // Starts an LP with n variables, empty constraint blocks, and free bounds.
    static LinearProgram make(int n, Sense sense = Sense::Maximize);
};

struct LpSolution {
    enum class Status { Optimal, Infeasible, Unbounded };
    Status status = Status::Infeasible;
    Eigen::VectorXd x;
    double value = 0.0;

    // Multipliers certify optimality of the equivalent maximization problem:
    //   q = objective        (Sense::Maximize)
    //   q = -objective       (Sense::Minimize)
    //   q = A_ub' lambda + A_eq' eta - mu_lower + mu_upper,
    // with lambda, mu >= 0, and dual_value reported in the user's sense so
    // that |value - dual_value| is small at an optimum.
    Eigen::VectorXd lambda;
    Eigen::VectorXd eta;
    Eigen::VectorXd mu_lower;
    Eigen::VectorXd mu_upper;
    double dual_value = 0.0;

    double primal_residual = 0.0;
    double complementarity_residual = 0.0;
    double stationarity_residual = 0.0;
    long iterations = 0;
};

// Two-phase dense primal simplex, Dantzig pricing with a Bland's-rule
// fallback after 5*(rows+cols) iterations.  Throws NumericalFailure if the
// fallback also fails to terminate.
LpSolution solve_lp(const LinearProgram& lp);

// An LP plus an index set of binary-constrained variables.
struct MixedProgram {
    LinearProgram lp;
    std::vector<int> binary;
    long node_limit = 1000000;

    void validate() const;
};

// Branch and bound: best-bound node selection, most-fractional branching,
// depth-first tie-break.  Returned binaries are integral (within 1e-6 of
// {0,1}, then rounded).  Throws NodeLimitExceeded past the node cap.
LpSolution solve_milp(const MixedProgram& mp);

}  // namespace mmr
