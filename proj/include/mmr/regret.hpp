#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "mmr/core.hpp"
#include "mmr/linprog.hpp"
#include "mmr/shape.hpp"

namespace mmr {

enum class Criterion { MinimaxRegret, MaximinWelfare };

// Optimality certificate for one worst-case regret value: the binding
// comparison level k, the multipliers from the dual program, and the primal
// regret-maximizing response curve.
struct DualCertificate {
    int k = -1;
    Eigen::VectorXd lambda;  // duals on the S m <= r rows, >= 0
    Eigen::VectorXd eta;     // duals on the F m = m0 rows
    Eigen::VectorXd m_star;
    double value = 0.0;
};

// Pointwise identified-set bounds per treatment level, with the induced
// utility bounds.
struct Envelope {
    Eigen::VectorXd m_min, m_max;
    Eigen::VectorXd v_min, v_max;
};

struct GammaValue {
    double value = 0.0;
    Eigen::VectorXd m_star;
    Eigen::VectorXd lambda;  // duals on the S rows
    Eigen::VectorXd eta;     // duals on the F rows; a supergradient of the
                             // concave value function q -> Gamma_jk(q)
};

// Worst-case regret of assigning level j when level k is the alternative:
//     max_m  v_m(d_k, x) - v_m(d_j, x)   s.t.  S m <= r,  F m = m0_hat(x).
GammaValue gamma_jk(int cell, int j, int k, const ConstraintSystem& cs,
                    const ResponseEstimate& est, const UtilitySpec& u);

// Gamma_j = max_k Gamma_jk via the single dual linear program; the primal
// curve is recovered from the binding k.
std::pair<double, DualCertificate> gamma_j(int cell, int j, const ConstraintSystem& cs,
                                           const ResponseEstimate& est, const UtilitySpec& u);

// Per-level min/max of m(d) over the identified set (2J linear programs)
// plus utility bounds oriented by the sign of b(d, x).
Envelope envelopes(int cell, const ConstraintSystem& cs, const ResponseEstimate& est,
                   const UtilitySpec& u);

struct RegretOptions {
    Criterion criterion = Criterion::MinimaxRegret;
    bool with_detail = false;          // also store every Gamma_jk
    bool with_worst_response = false;  // keep the per-(cell, j) maximizer m*
    int threads = 1;
};

// Gamma_hat for every unique covariate cell and level.  Cells are
// embarrassingly parallel; results are written into fixed slots so the
// output is independent of the thread count.
RegretMatrix regret_matrix(const CovariateTable& data, const TreatmentGrid& grid,
                           const ConstraintSystem& cs, const ResponseEstimate& est,
                           const UtilitySpec& u, const RegretOptions& opts = {});

}  // namespace mmr
