#include "mmr/regret.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace mmr {

namespace {

// b_jk has +b(d_k) at entry k and -b(d_j) at entry j (zero when j == k);
// the scalar offset c_jk = c(d_k) - c(d_j) completes v_m(d_k) - v_m(d_j).
Eigen::VectorXd benefit_diff(int cell, int j, int k, int J, const UtilitySpec& u) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(J);
    b[k] += u.b(cell, k);
    b[j] -= u.b(cell, j);
    return b;
}

double cost_diff(int cell, int j, int k, const UtilitySpec& u) {
    return u.c(cell, k) - u.c(cell, j);
}

LpSolution solve_identified_lp(const ConstraintSystem& cs, const Eigen::VectorXd& q,
                               const Eigen::VectorXd& objective, LinearProgram::Sense sense) {
    LinearProgram lp = LinearProgram::make(cs.J(), sense);
    lp.objective = objective;
    lp.A_ub = cs.S;
    lp.b_ub = cs.r;
    lp.A_eq = cs.F;
    lp.b_eq = q;
    LpSolution sol = solve_lp(lp);
    if (sol.status == LpSolution::Status::Infeasible)
        throw InfeasibleIdentifiedSet("no response vector matches the shape set and m0_hat");
    if (sol.status == LpSolution::Status::Unbounded)
        throw ValidationError("identified set is unbounded in the objective direction; add bounds");
    return sol;
}

}  // namespace

GammaValue gamma_jk(int cell, int j, int k, const ConstraintSystem& cs,
                    const ResponseEstimate& est, const UtilitySpec& u) {
    const Eigen::VectorXd b = benefit_diff(cell, j, k, cs.J(), u);
    LpSolution sol = solve_identified_lp(cs, est.m0[cell], b, LinearProgram::Sense::Maximize);
    return {sol.value - cost_diff(cell, j, k, u), sol.x, sol.lambda, sol.eta};
}

std::pair<double, DualCertificate> gamma_j(int cell, int j, const ConstraintSystem& cs,
                                           const ResponseEstimate& est, const UtilitySpec& u) {
    const int J = cs.J();
    const int nS = cs.n_rows();
    const int J0 = cs.J0();
    const Eigen::VectorXd& q = est.m0[cell];

    // Variables: mu, then per comparison level k a block (lambda_k, eta_k).
    const int block = nS + J0;
    const int n = 1 + J * block;
    auto lam_at = [&](int k) { return 1 + k * block; };
    auto eta_at = [&](int k) { return 1 + k * block + nS; };

    LinearProgram lp = LinearProgram::make(n, LinearProgram::Sense::Minimize);
    lp.objective[0] = 1.0;
    for (int k = 0; k < J; ++k)
        for (int i = 0; i < nS; ++i) lp.lower[lam_at(k) + i] = 0.0;

    // mu + c_jk >= lambda_k' r + eta_k' q for every k.
    lp.A_ub = Eigen::MatrixXd::Zero(J, n);
    lp.b_ub.resize(J);
    for (int k = 0; k < J; ++k) {
        lp.A_ub(k, 0) = -1.0;
        for (int i = 0; i < nS; ++i) lp.A_ub(k, lam_at(k) + i) = cs.r[i];
        for (int i = 0; i < J0; ++i) lp.A_ub(k, eta_at(k) + i) = q[i];
        lp.b_ub[k] = cost_diff(cell, j, k, u);
    }
    // S' lambda_k + F' eta_k = b_jk, the dual feasibility of each primal.
    lp.A_eq = Eigen::MatrixXd::Zero(J * J, n);
    lp.b_eq.resize(J * J);
    for (int k = 0; k < J; ++k) {
        const Eigen::VectorXd b = benefit_diff(cell, j, k, J, u);
        for (int row = 0; row < J; ++row) {
            for (int i = 0; i < nS; ++i) lp.A_eq(k * J + row, lam_at(k) + i) = cs.S(i, row);
            for (int i = 0; i < J0; ++i) lp.A_eq(k * J + row, eta_at(k) + i) = cs.F(i, row);
            lp.b_eq[k * J + row] = b[row];
        }
    }

    LpSolution sol = solve_lp(lp);
    if (sol.status == LpSolution::Status::Unbounded)
        throw InfeasibleIdentifiedSet("no response vector matches the shape set and m0_hat");
    if (sol.status == LpSolution::Status::Infeasible)
        throw ValidationError("identified set is unbounded in the objective direction; add bounds");
    const double mu = sol.value;

    // Every true argmax k binds its row; scan them in ascending order and
    // keep the first whose primal value confirms the maximum.
    DualCertificate cert;
    for (int k = 0; k < J; ++k) {
        double row_value = -mu + cost_diff(cell, j, k, u);
        for (int i = 0; i < nS; ++i) row_value -= cs.r[i] * sol.x[lam_at(k) + i];
        for (int i = 0; i < J0; ++i) row_value -= q[i] * sol.x[eta_at(k) + i];
        if (row_value > -1e-7) {  // binding row
            GammaValue g = gamma_jk(cell, j, k, cs, est, u);
            if (std::abs(g.value - mu) <= 1e-7) {
                cert.k = k;
                cert.lambda = sol.x.segment(lam_at(k), nS).cwiseMax(0.0);
                cert.eta = sol.x.segment(eta_at(k), J0);
                cert.m_star = g.m_star;
                cert.value = g.value;
                break;
            }
        }
    }
    if (cert.k < 0) {
        // Numerical fallback: evaluate all comparisons directly.
        double best = -kInf;
        for (int k = 0; k < J; ++k) {
            GammaValue g = gamma_jk(cell, j, k, cs, est, u);
            if (g.value > best + 1e-12) {
                best = g.value;
                cert.k = k;
                cert.m_star = g.m_star;
                cert.value = g.value;
            }
        }
        cert.lambda = Eigen::VectorXd::Zero(nS);
        cert.eta = Eigen::VectorXd::Zero(J0);
        return {best, cert};
    }
    return {mu, cert};
}

Envelope envelopes(int cell, const ConstraintSystem& cs, const ResponseEstimate& est,
                   const UtilitySpec& u) {
    const int J = cs.J();
    Envelope env;
    env.m_min.resize(J);
    env.m_max.resize(J);
    env.v_min.resize(J);
    env.v_max.resize(J);
    for (int j = 0; j < J; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(J);
        e[j] = 1.0;
        env.m_min[j] =
            solve_identified_lp(cs, est.m0[cell], e, LinearProgram::Sense::Minimize).value;
        env.m_max[j] =
            solve_identified_lp(cs, est.m0[cell], e, LinearProgram::Sense::Maximize).value;
        const double b = u.b(cell, j), c = u.c(cell, j);
        const double v1 = b * env.m_min[j] - c, v2 = b * env.m_max[j] - c;
        env.v_min[j] = std::min(v1, v2);
        env.v_max[j] = std::max(v1, v2);
    }
    return env;
}

RegretMatrix regret_matrix(const CovariateTable& data, const TreatmentGrid& grid,
                           const ConstraintSystem& cs, const ResponseEstimate& est,
                           const UtilitySpec& u, const RegretOptions& opts) {
    const int n_cells = data.n_cells();
    const int J = grid.J();
    if (est.n_cells() != n_cells)
        throw ValidationError("response estimate must cover every covariate cell");

    RegretMatrix rm;
    rm.gamma.resize(n_cells, J);
    if (opts.with_detail) rm.detail.assign(n_cells, Eigen::MatrixXd::Zero(J, J));
    if (opts.with_worst_response)
        rm.worst_response.assign(n_cells, std::vector<Eigen::VectorXd>(J));

    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&](int cell) {
        for (int j = 0; j < J; ++j) {
            if (opts.criterion == Criterion::MinimaxRegret) {
                auto [value, cert] = gamma_j(cell, j, cs, est, u);
                // The k = j comparison is exactly zero, so the maximum is
                // nonnegative; tiny negative solver slack is clipped.
                rm.gamma(cell, j) = std::max(value, 0.0);
                if (opts.with_worst_response) rm.worst_response[cell][j] = cert.m_star;
            } else {
                // Maximin welfare: Gamma_j = max_m [0 - v_m(d_j)].
                Eigen::VectorXd obj = Eigen::VectorXd::Zero(J);
                obj[j] = -u.b(cell, j);
                LpSolution sol =
                    solve_identified_lp(cs, est.m0[cell], obj, LinearProgram::Sense::Maximize);
                rm.gamma(cell, j) = sol.value + u.c(cell, j);
                if (opts.with_worst_response) rm.worst_response[cell][j] = sol.x;
            }
            if (opts.with_detail) {
                for (int k = 0; k < J; ++k)
                    rm.detail[cell](j, k) = gamma_jk(cell, j, k, cs, est, u).value;
            }
        }
    };

    const int threads = std::max(1, opts.threads);
    if (threads == 1 || n_cells <= 1) {
        for (int cell = 0; cell < n_cells; ++cell) work(cell);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int t = 0; t < std::min(threads, n_cells); ++t) {
            pool.emplace_back([&] {
                while (true) {
                    const int cell = next.fetch_add(1);
                    if (cell >= n_cells) return;
                    try {
                        work(cell);
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
    return rm;
}

}  // namespace mmr
