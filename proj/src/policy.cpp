#include "mmr/policy.hpp"

#include <algorithm>
#include <cmath>

namespace mmr {

void PolicyClassSpec::validate() const {
    if (kind == Kind::LinearScore && score_covariates.empty())
        throw ValidationError("linear score policy needs at least one score covariate");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    const bool lo_set = !std::isnan(cutoff_lo), hi_set = !std::isnan(cutoff_hi);
    if (lo_set != hi_set) throw ValidationError("set both cutoff box ends or neither");
    if (lo_set && !(cutoff_lo < cutoff_hi)) throw ValidationError("cutoff box must have lo < hi");
    if (node_limit < 1) throw ValidationError("node limit must be positive");
}

PolicySolution solve_constant(const RegretMatrix& rm, const std::vector<double>& weights) {
    if (static_cast<int>(weights.size()) != rm.n_cells())
        throw ValidationError("weights must cover every cell");
    PolicySolution out;
    int best = 0;
    double best_value = kInf;
    for (int j = 0; j < rm.J(); ++j) {
        double v = 0.0;
        for (int c = 0; c < rm.n_cells(); ++c) v += weights[c] * rm.gamma(c, j);
        if (v < best_value - 1e-12) {
            best_value = v;
            best = j;
        }
    }
    out.policy = Policy::constant(best);
    out.objective = best_value;
    out.assignment.assign(rm.n_cells(), best);
    return out;
}

PolicySolution solve_linear_score(const RegretMatrix& rm,
                                  const std::vector<Eigen::VectorXd>& cells,
                                  const std::vector<double>& weights,
                                  const PolicyClassSpec& spec) {
    spec.validate();
    const int n = rm.n_cells();
    const int J = rm.J();
    const int K = static_cast<int>(spec.score_covariates.size());
    if (static_cast<int>(cells.size()) != n || static_cast<int>(weights.size()) != n)
        throw ValidationError("cells and weights must cover every regret row");
    if (J < 2) throw ValidationError("policy search needs at least two levels");

    // Score covariate matrix, validated to the normalized box.
    Eigen::MatrixXd X(n, K);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < K; ++k) {
            const int col = spec.score_covariates[k];
            if (col < 0 || col >= cells[i].size())
                throw ValidationError("score covariate index outside the covariate vector");
            X(i, k) = cells[i][col];
            if (X(i, k) < -1e-9 || X(i, k) > 1.0 + 1e-9)
                throw ValidationError("score covariates must be rescaled to [0, 1]");
        }
    }

    const double c_lo = std::isnan(spec.cutoff_lo) ? -static_cast<double>(K) : spec.cutoff_lo;
    const double c_hi = std::isnan(spec.cutoff_hi) ? static_cast<double>(K) + 1.0 : spec.cutoff_hi;
    // The spec box keeps |score - c| within K + 2 for K <= 2; wider boxes or
    // more covariates need the sharp bound.
    const double score_lo = -(static_cast<double>(K) - 1.0), score_hi = static_cast<double>(K);
    const double big_m = std::max(static_cast<double>(K) + 2.0,
                                  std::max(score_hi - c_lo, c_hi - score_lo) + 1.0);

    // Variable layout: cutoffs, free betas (beta_1 is fixed to 1), binaries.
    const int nc = J - 1;
    const int nb = K - 1;
    auto cut_at = [&](int j) { return j; };                       // j in [0, J-2]
    auto beta_at = [&](int k) { return nc + (k - 1); };           // k in [1, K-1]
    auto g_at = [&](int i, int j) { return nc + nb + i * nc + j; };
    const int n_vars = nc + nb + n * nc;

    MixedProgram mp;
    mp.node_limit = spec.node_limit;
    mp.lp = LinearProgram::make(n_vars, LinearProgram::Sense::Minimize);
    for (int j = 0; j < nc; ++j) {
        mp.lp.lower[cut_at(j)] = c_lo;
        mp.lp.upper[cut_at(j)] = c_hi;
    }
    for (int k = 1; k < K; ++k) {
        mp.lp.lower[beta_at(k)] = -1.0;
        mp.lp.upper[beta_at(k)] = 1.0;
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < nc; ++j) {
            mp.lp.lower[g_at(i, j)] = 0.0;
            mp.lp.upper[g_at(i, j)] = 1.0;
            mp.binary.push_back(g_at(i, j));
        }
    }

    // Objective: sum_i w_i Gamma_i1 + sum_{i,j} w_i (Gamma_{i,j+1} - Gamma_ij) g_ij.
    double obj_const = 0.0;
    for (int i = 0; i < n; ++i) {
        obj_const += weights[i] * rm.gamma(i, 0);
        for (int j = 0; j < nc; ++j)
            mp.lp.objective[g_at(i, j)] = weights[i] * (rm.gamma(i, j + 1) - rm.gamma(i, j));
    }

    const int n_rows = (J - 2) + 2 * n * nc + n * (nc - 1);
    mp.lp.A_ub = Eigen::MatrixXd::Zero(n_rows, n_vars);
    mp.lp.b_ub.resize(n_rows);
    int row = 0;
    for (int j = 0; j + 1 < nc; ++j, ++row) {  // c_j <= c_{j+1}
        mp.lp.A_ub(row, cut_at(j)) = 1.0;
        mp.lp.A_ub(row, cut_at(j + 1)) = -1.0;
        mp.lp.b_ub[row] = 0.0;
    }
    // g_{i,j+1} <= g_{i,j}: integer-feasible points already satisfy this
    // (cutoffs are ordered), but the rows keep near-integral relaxation
    // vertices from producing pi_ij = -1 after rounding.
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j + 1 < nc; ++j, ++row) {
            mp.lp.A_ub(row, g_at(i, j + 1)) = 1.0;
            mp.lp.A_ub(row, g_at(i, j)) = -1.0;
            mp.lp.b_ub[row] = 0.0;
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < nc; ++j) {
            // M g_ij >= x_i'beta - c_j + eps
            mp.lp.A_ub(row, g_at(i, j)) = -big_m;
            for (int k = 1; k < K; ++k) mp.lp.A_ub(row, beta_at(k)) = X(i, k);
            mp.lp.A_ub(row, cut_at(j)) = -1.0;
            mp.lp.b_ub[row] = -X(i, 0) - spec.epsilon;
            ++row;
            // M (1 - g_ij) >= c_j - x_i'beta
            mp.lp.A_ub(row, g_at(i, j)) = big_m;
            for (int k = 1; k < K; ++k) mp.lp.A_ub(row, beta_at(k)) = -X(i, k);
            mp.lp.A_ub(row, cut_at(j)) = 1.0;
            mp.lp.b_ub[row] = big_m + X(i, 0);
            ++row;
        }
    }

    LpSolution sol = solve_milp(mp);
    if (sol.status == LpSolution::Status::Infeasible)
        throw MilpInfeasible("policy MILP infeasible; cutoff box too tight");
    if (sol.status != LpSolution::Status::Optimal)
        throw NumericalFailure("policy MILP did not reach an optimum");

    Eigen::VectorXd beta(K);
    beta[0] = 1.0;
    for (int k = 1; k < K; ++k) beta[k] = sol.x[beta_at(k)];
    Eigen::VectorXd scores = X * beta;

    // Levels from the binaries, then canonical cutoffs at the midpoints of
    // the score gaps so core::assign reproduces the binaries exactly.
    PolicySolution out;
    out.assignment.resize(n);
    for (int i = 0; i < n; ++i) {
        int level = 0;
        for (int j = 0; j < nc; ++j) level += sol.x[g_at(i, j)] > 0.5 ? 1 : 0;
        out.assignment[i] = level;
    }
    Eigen::VectorXd cutoffs(nc);
    double prev = -kInf;
    for (int j = 0; j < nc; ++j) {
        double lo = -kInf, hi = kInf;  // max score below, min score above
        for (int i = 0; i < n; ++i) {
            if (sol.x[g_at(i, j)] > 0.5) hi = std::min(hi, scores[i]);
            else lo = std::max(lo, scores[i]);
        }
        double c;
        if (std::isfinite(lo) && std::isfinite(hi)) c = 0.5 * (lo + hi);
        else if (std::isfinite(lo)) c = lo + 1.0;
        else if (std::isfinite(hi)) c = hi - 1.0;
        else c = 0.0;
        c = std::max(c, prev);
        cutoffs[j] = c;
        prev = c;
    }
    out.policy = Policy::linear_score(beta, cutoffs);

    double objective = 0.0;
    for (int i = 0; i < n; ++i) objective += weights[i] * rm.gamma(i, out.assignment[i]);
    out.objective = objective;
    // The MILP objective and the recomputed one agree up to integrality slack.
    if (std::abs(sol.value + obj_const - objective) > 1e-4 * (1.0 + std::abs(objective)))
        throw NumericalFailure("policy MILP objective certificate mismatch");
    return out;
}

}  // namespace mmr
