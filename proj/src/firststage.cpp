#include "mmr/firststage.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mmr/linprog.hpp"

namespace mmr {

Eigen::VectorXd poly2_features(const Eigen::VectorXd& x) {
    const int k = static_cast<int>(x.size());
    Eigen::VectorXd f(1 + 2 * k + k * (k - 1) / 2);
    int at = 0;
    f[at++] = 1.0;
    for (int i = 0; i < k; ++i) f[at++] = x[i];
    for (int i = 0; i < k; ++i) f[at++] = x[i] * x[i];
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) f[at++] = x[i] * x[j];
    return f;
}

namespace {

ResponseEstimate cell_means(const CovariateTable& data, const TreatmentGrid& grid) {
    const auto obs = grid.observed_indices();
    ResponseEstimate est;
    est.m0.assign(data.n_cells(), Eigen::VectorXd::Zero(static_cast<int>(obs.size())));
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(data.n_cells(), static_cast<int>(obs.size()));
    Eigen::MatrixXd counts = sums;
    for (int i = 0; i < data.n_rows(); ++i) {
        const int k = grid.observed_rank(data.row_level[i]);
        sums(data.row_cell[i], k) += data.rows[i].outcome;
        counts(data.row_cell[i], k) += 1.0;
    }
    for (int c = 0; c < data.n_cells(); ++c) {
        for (int k = 0; k < static_cast<int>(obs.size()); ++k) {
            if (counts(c, k) == 0.0) {
                std::ostringstream os;
                os << "no observations for cell " << c << " at observed level index " << obs[k];
                throw InsufficientData(os.str());
            }
            est.m0[c][k] = sums(c, k) / counts(c, k);
        }
    }
    return est;
}

// Ridge-penalized logistic fit by Newton/IRLS with step halving; returns the
// coefficient vector.  Stops when the penalized score norm is below tol.
Eigen::VectorXd logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const EstimatorSpec& spec) {
    const int p = static_cast<int>(X.cols());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    auto penalized_loglik = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd z = X * b;
        double ll = 0.0;
        for (int i = 0; i < z.size(); ++i) {
            const double softplus = std::max(z[i], 0.0) + std::log1p(std::exp(-std::abs(z[i])));
            ll += y[i] * z[i] - softplus;
        }
        return ll - 0.5 * spec.ridge * b.squaredNorm();
    };
    double ll = penalized_loglik(beta);
    for (int it = 0; it < spec.max_iter; ++it) {
        const Eigen::VectorXd z = X * beta;
        Eigen::VectorXd prob(z.size()), w(z.size());
        for (int i = 0; i < z.size(); ++i) {
            prob[i] = 1.0 / (1.0 + std::exp(-z[i]));
            w[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-12);
        }
        const Eigen::VectorXd grad = X.transpose() * (y - prob) - spec.ridge * beta;
        if (grad.norm() <= spec.tol) return beta;
        Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
        H.diagonal().array() += spec.ridge;
        const Eigen::VectorXd step = H.llt().solve(grad);
        double t = 1.0;
        while (t > 1e-8) {
            const Eigen::VectorXd cand = beta + t * step;
            const double cand_ll = penalized_loglik(cand);
            if (cand_ll >= ll - 1e-12) {
                beta = cand;
                ll = cand_ll;
                break;
            }
            t *= 0.5;
        }
    }
    const Eigen::VectorXd z = X * beta;
    Eigen::VectorXd prob(z.size());
    for (int i = 0; i < z.size(); ++i) prob[i] = 1.0 / (1.0 + std::exp(-z[i]));
    if ((X.transpose() * (y - prob) - spec.ridge * beta).norm() > std::max(spec.tol, 1e-8))
        throw NoConvergence("logistic IRLS did not reach the score tolerance");
    return beta;
}

ResponseEstimate logistic_poly2(const CovariateTable& data, const TreatmentGrid& grid,
                                const EstimatorSpec& spec) {
    const auto obs = grid.observed_indices();
    for (const auto& row : data.rows)
        if (row.outcome != 0.0 && row.outcome != 1.0)
            throw NonBinaryOutcome("logistic first stage needs outcomes in {0,1}");

    ResponseEstimate est;
    est.m0.assign(data.n_cells(), Eigen::VectorXd::Zero(static_cast<int>(obs.size())));
    Eigen::MatrixXd cell_features(data.n_cells(), poly2_features(data.cells[0]).size());
    for (int c = 0; c < data.n_cells(); ++c)
        cell_features.row(c) = poly2_features(data.cells[c]).transpose();

    for (int k = 0; k < static_cast<int>(obs.size()); ++k) {
        std::vector<int> rows_k;
        for (int i = 0; i < data.n_rows(); ++i)
            if (data.row_level[i] == obs[k]) rows_k.push_back(i);
        if (rows_k.empty()) {
            std::ostringstream os;
            os << "no observations at observed level index " << obs[k];
            throw InsufficientData(os.str());
        }
        Eigen::MatrixXd X(static_cast<int>(rows_k.size()), cell_features.cols());
        Eigen::VectorXd y(static_cast<int>(rows_k.size()));
        for (std::size_t i = 0; i < rows_k.size(); ++i) {
            X.row(static_cast<int>(i)) = cell_features.row(data.row_cell[rows_k[i]]);
            y[static_cast<int>(i)] = data.rows[rows_k[i]].outcome;
        }
        const Eigen::VectorXd beta = logistic_fit(X, y, spec);
        for (int c = 0; c < data.n_cells(); ++c) {
            const double z = cell_features.row(c).dot(beta);
            est.m0[c][k] = 1.0 / (1.0 + std::exp(-z));
        }
    }
    return est;
}

}  // namespace

ResponseEstimate estimate(const CovariateTable& data, const TreatmentGrid& grid,
                          const EstimatorSpec& spec) {
    spec.validate();
    if (data.n_rows() == 0) throw InsufficientData("empty sample");
    return spec.kind == EstimatorSpec::Kind::CellMeans ? cell_means(data, grid)
                                                       : logistic_poly2(data, grid, spec);
}

namespace {

// Linear minimization oracle over the shape set {S m <= r}.
Eigen::VectorXd shape_lmo(const ConstraintSystem& cs, const Eigen::VectorXd& direction) {
    LinearProgram lp = LinearProgram::make(cs.J(), LinearProgram::Sense::Minimize);
    lp.objective = direction;
    lp.A_ub = cs.S;
    lp.b_ub = cs.r;
    LpSolution sol = solve_lp(lp);
    if (sol.status == LpSolution::Status::Infeasible)
        throw InfeasibleShapeSet("shape set {S m <= r} is empty");
    if (sol.status == LpSolution::Status::Unbounded)
        throw ValidationError("shape set is unbounded; projection needs bounds rows");
    return sol.x;
}

struct ActiveVertex {
    Eigen::VectorXd v;
    double weight = 0.0;
};

// Minimum-norm point of {F m <= ...}: away-step Frank-Wolfe minimizing
// 0.5 ||F m - q||^2 over the shape polytope, exact line search.
Eigen::VectorXd project_cell(const ConstraintSystem& cs, const Eigen::VectorXd& q) {
    constexpr double kGapTol = 1e-8;
    constexpr int kMaxIter = 10000;
    std::vector<ActiveVertex> active;
    Eigen::VectorXd x = shape_lmo(cs, -(cs.F.transpose() * q));
    active.push_back({x, 1.0});

    auto find_vertex = [&](const Eigen::VectorXd& v) -> int {
        for (std::size_t i = 0; i < active.size(); ++i)
            if ((active[i].v - v).cwiseAbs().maxCoeff() <= 1e-10) return static_cast<int>(i);
        return -1;
    };

    for (int it = 0; it < kMaxIter; ++it) {
        const Eigen::VectorXd g = cs.F.transpose() * (cs.F * x - q);
        const Eigen::VectorXd s = shape_lmo(cs, g);
        const double gap_fw = g.dot(x - s);
        if (gap_fw <= kGapTol) break;

        int away_idx = 0;
        for (std::size_t i = 1; i < active.size(); ++i)
            if (g.dot(active[i].v) > g.dot(active[away_idx].v)) away_idx = static_cast<int>(i);
        const double gap_away = g.dot(active[away_idx].v - x);

        Eigen::VectorXd d;
        double t_max;
        bool is_away;
        if (gap_fw >= gap_away) {
            d = s - x;
            t_max = 1.0;
            is_away = false;
        } else {
            d = x - active[away_idx].v;
            const double w = active[away_idx].weight;
            t_max = w / (1.0 - w + 1e-300);
            is_away = true;
        }
        const double curv = (cs.F * d).squaredNorm();
        double t = curv > 1e-300 ? std::min(t_max, -g.dot(d) / curv) : t_max;
        t = std::max(t, 0.0);

        if (is_away) {
            for (auto& av : active) av.weight *= 1.0 + t;
            active[away_idx].weight -= t;
        } else {
            for (auto& av : active) av.weight *= 1.0 - t;
            int idx = find_vertex(s);
            if (idx < 0) {
                active.push_back({s, t});
            } else {
                active[idx].weight += t;
            }
        }
        active.erase(std::remove_if(active.begin(), active.end(),
                                    [](const ActiveVertex& av) { return av.weight <= 1e-14; }),
                     active.end());
        x += t * d;
        if ((it + 1) % 64 == 0) {
            // Rebuild from the weights to kill floating-point drift.
            double total = 0.0;
            for (const auto& av : active) total += av.weight;
            x.setZero();
            for (auto& av : active) {
                av.weight /= total;
                x += av.weight * av.v;
            }
        }
    }
    return x;
}

}  // namespace

ProjectionResult project_feasible(const ResponseEstimate& est, const ConstraintSystem& cs) {
    ProjectionResult out;
    out.projected.m0.reserve(est.n_cells());
    for (int c = 0; c < est.n_cells(); ++c) {
        const Eigen::VectorXd& q = est.m0[c];
        if (q.size() != cs.J0())
            throw ValidationError("response estimate length must equal the observed count");

        // Feasible cells pass through untouched; this also makes the
        // projection exactly idempotent.
        LinearProgram probe = LinearProgram::make(cs.J(), LinearProgram::Sense::Maximize);
        probe.A_ub = cs.S;
        probe.b_ub = cs.r;
        probe.A_eq = cs.F;
        probe.b_eq = q;
        LpSolution sol = solve_lp(probe);
        if (sol.status == LpSolution::Status::Optimal) {
            out.projected.m0.push_back(q);
            out.witness.push_back(sol.x);
            out.changed.push_back(false);
            out.distance.push_back(0.0);
            continue;
        }

        const Eigen::VectorXd m_star = project_cell(cs, q);
        out.projected.m0.push_back(cs.F * m_star);
        out.witness.push_back(m_star);
        out.changed.push_back(true);
        out.distance.push_back((cs.F * m_star - q).norm());
    }
    return out;
}

}  // namespace mmr
