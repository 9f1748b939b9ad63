#include "mmr/linprog.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace mmr {

namespace {

constexpr double kPivotTol = 1e-10;   // smallest usable pivot element
constexpr double kFeasTol = 1e-9;     // phase-1 infeasibility threshold
constexpr double kEnterTol = 5e-11;   // reduced-cost threshold to enter

// How each user variable maps into the nonnegative internal variables.
struct VarMap {
    enum class Kind { Shift, Mirror, Split } kind = Kind::Shift;
    int col = -1;        // first internal column
    int col_neg = -1;    // second column for Split
    double offset = 0.0; // Shift: z = offset + x; Mirror: z = offset - x
    int upper_row = -1;  // internal row index of a generated x <= u-l row
};

// Equality-form tableau data: E x = b, x >= 0, maximize cost'x.
struct Internal {
    Eigen::MatrixXd E;       // m x n_cols (structural + slacks)
    Eigen::VectorXd b;       // >= 0
    Eigen::VectorXd cost;    // phase-2 objective for real columns
    std::vector<double> row_sign;  // +-1 applied to the original row
    int n_struct = 0;
    int n_cols = 0;          // structural + slack columns
    int m = 0;
    double obj_const = 0.0;
    std::vector<VarMap> vmap;
    // Row bookkeeping: to which user block each internal row belongs.
    std::vector<int> row_ub;     // index into b_ub or -1
    std::vector<int> row_eq;     // index into b_eq or -1
    std::vector<int> row_bound;  // user variable whose upper bound this row encodes, or -1
    std::vector<int> slack_col;  // slack column of row i, or -1 for equality rows
};

class Simplex {
public:
    explicit Simplex(Internal in) : in_(std::move(in)) {
        m_ = in_.m;
        basis_.assign(m_, -1);
        binv_ = Eigen::MatrixXd::Identity(m_, m_);
        xb_ = in_.b;
    }

    // Returns false on infeasible (phase 1) or unbounded (phase 2).
    LpSolution::Status run() {
        // Phase 1: slacks start basic where possible, artificials elsewhere.
        bool need_phase1 = false;
        for (int i = 0; i < m_; ++i) {
            if (in_.slack_col[i] >= 0 && in_.row_sign[i] > 0) {
                basis_[i] = in_.slack_col[i];
            } else {
                basis_[i] = artificial(i);
                need_phase1 = true;
            }
        }
        refactor();
        if (need_phase1) {
            phase1_ = true;
            if (!iterate()) return LpSolution::Status::Infeasible;  // not reachable: phase 1 is bounded
            double infeas = 0.0;
            for (int i = 0; i < m_; ++i)
                if (basis_[i] >= in_.n_cols) infeas += std::max(xb_[i], 0.0);
            if (infeas > kFeasTol) return LpSolution::Status::Infeasible;
            expel_artificials();
        }
        phase1_ = false;
        if (!iterate()) return LpSolution::Status::Unbounded;
        refactor();
        return LpSolution::Status::Optimal;
    }

    // Basic primal solution over internal columns.
    Eigen::VectorXd primal() const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(in_.n_cols);
        for (int i = 0; i < m_; ++i)
            if (basis_[i] < in_.n_cols) x[basis_[i]] = xb_[i];
        return x;
    }

    // Row multipliers y = Binv' c_B for the phase-2 objective.
    Eigen::VectorXd duals() const {
        Eigen::VectorXd cb(m_);
        for (int i = 0; i < m_; ++i) cb[i] = basis_[i] < in_.n_cols ? in_.cost[basis_[i]] : 0.0;
        return binv_.transpose() * cb;
    }

    long iterations() const { return iters_; }
    const Internal& data() const { return in_; }

private:
    int artificial(int row) const { return in_.n_cols + row; }

    Eigen::VectorXd column(int j) const {
        if (j < in_.n_cols) return in_.E.col(j);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
        e[j - in_.n_cols] = 1.0;
        return e;
    }

    double cost_of(int j) const {
        if (phase1_) return j >= in_.n_cols ? -1.0 : 0.0;
        return j >= in_.n_cols ? 0.0 : in_.cost[j];
    }

    void refactor() {
        Eigen::MatrixXd B(m_, m_);
        for (int i = 0; i < m_; ++i) B.col(i) = column(basis_[i]);
        binv_ = B.partialPivLu().inverse();
        xb_ = binv_ * in_.b;
    }

    // Dantzig pricing first, Bland after the spec'd iteration budget.
    // Returns true at optimality, false if unbounded.
    bool iterate() {
        const long dantzig_budget = 5L * (m_ + in_.n_cols);
        const long hard_cap = 60L * (m_ + in_.n_cols) + 20000;
        std::vector<char> is_basic(in_.n_cols + m_, 0);
        for (int j : basis_) is_basic[j] = 1;

        while (true) {
            const bool bland = iters_ >= dantzig_budget;
            if (iters_ > hard_cap)
                throw NumericalFailure("simplex failed to terminate under Bland's rule");

            // Reduced costs for real columns.
            Eigen::VectorXd cb(m_);
            for (int i = 0; i < m_; ++i) cb[i] = cost_of(basis_[i]);
            Eigen::VectorXd y = binv_.transpose() * cb;
            Eigen::VectorXd d = Eigen::VectorXd::Zero(in_.n_cols);
            for (int j = 0; j < in_.n_cols; ++j) {
                if (is_basic[j]) continue;
                d[j] = cost_of(j) - y.dot(in_.E.col(j));
            }

            int enter = -1;
            if (bland) {
                for (int j = 0; j < in_.n_cols; ++j)
                    if (!is_basic[j] && d[j] > kEnterTol) { enter = j; break; }
            } else {
                double best = kEnterTol;
                for (int j = 0; j < in_.n_cols; ++j)
                    if (!is_basic[j] && d[j] > best) { best = d[j]; enter = j; }
            }
            if (enter < 0) return true;  // optimal

            Eigen::VectorXd w = binv_ * in_.E.col(enter);
            int leave = -1;
            double theta = kInf;
            for (int i = 0; i < m_; ++i) {
                if (w[i] <= kPivotTol) continue;
                const double ratio = std::max(xb_[i], 0.0) / w[i];
                if (ratio < theta - 1e-12) {
                    theta = ratio;
                    leave = i;
                } else if (ratio < theta + 1e-12 && leave >= 0) {
                    if (bland) {
                        if (basis_[i] < basis_[leave]) leave = i;
                    } else {
                        // Prefer expelling artificials, then the largest pivot.
                        const bool art_i = basis_[i] >= in_.n_cols;
                        const bool art_l = basis_[leave] >= in_.n_cols;
                        if (art_i != art_l ? art_i : w[i] > w[leave]) leave = i;
                    }
                }
            }
            if (leave < 0) {
                if (phase1_) throw NumericalFailure("phase-1 objective unbounded");
                return false;  // unbounded
            }

            // Pivot: update basis, basic values, and the dense inverse.
            is_basic[basis_[leave]] = 0;
            is_basic[enter] = 1;
            basis_[leave] = enter;
            xb_ -= theta * w;
            xb_[leave] = theta;
            const double piv = w[leave];
            binv_.row(leave) /= piv;
            for (int i = 0; i < m_; ++i) {
                if (i == leave) continue;
                const double f = w[i];
                if (f != 0.0) binv_.row(i) -= f * binv_.row(leave);
            }
            ++iters_;
            if (iters_ % 100 == 0) refactor();
        }
    }

    // Pivot basic artificials out on any usable real column; a row with no
    // usable column is linearly dependent and its artificial stays at zero.
    void expel_artificials() {
        for (int r = 0; r < m_; ++r) {
            if (basis_[r] < in_.n_cols) continue;
            std::vector<char> is_basic(in_.n_cols, 0);
            for (int j : basis_)
                if (j < in_.n_cols) is_basic[j] = 1;
            int enter = -1;
            double best = 1e-7;
            for (int j = 0; j < in_.n_cols; ++j) {
                if (is_basic[j]) continue;
                const double a = std::abs(binv_.row(r).dot(in_.E.col(j)));
                if (a > best) { best = a; enter = j; }
            }
            if (enter < 0) continue;
            Eigen::VectorXd w = binv_ * in_.E.col(enter);
            basis_[r] = enter;
            const double piv = w[r];
            binv_.row(r) /= piv;
            for (int i = 0; i < m_; ++i) {
                if (i == r) continue;
                const double f = w[i];
                if (f != 0.0) binv_.row(i) -= f * binv_.row(r);
            }
            xb_ = binv_ * in_.b;
        }
    }

    Internal in_;
    int m_ = 0;
    bool phase1_ = false;
    std::vector<int> basis_;
    Eigen::MatrixXd binv_;
    Eigen::VectorXd xb_;
    long iters_ = 0;
};

Internal build_internal(const LinearProgram& lp, const Eigen::VectorXd& cost_user) {
    const int n = lp.n_vars();
    const int m_ub = static_cast<int>(lp.b_ub.size());
    const int m_eq = static_cast<int>(lp.b_eq.size());

    Internal in;
    in.vmap.resize(n);
    int n_struct = 0;
    int n_upper_rows = 0;
    for (int v = 0; v < n; ++v) {
        const double l = lp.lower[v], u = lp.upper[v];
        auto& vm = in.vmap[v];
        if (std::isfinite(l)) {
            vm.kind = VarMap::Kind::Shift;
            vm.offset = l;
            vm.col = n_struct++;
            if (std::isfinite(u)) ++n_upper_rows;
        } else if (std::isfinite(u)) {
            vm.kind = VarMap::Kind::Mirror;
            vm.offset = u;
            vm.col = n_struct++;
        } else {
            vm.kind = VarMap::Kind::Split;
            vm.col = n_struct++;
            vm.col_neg = n_struct++;
        }
    }

    const int m = m_ub + m_eq + n_upper_rows;
    const int n_slacks = m_ub + n_upper_rows;
    in.m = m;
    in.n_struct = n_struct;
    in.n_cols = n_struct + n_slacks;
    in.E = Eigen::MatrixXd::Zero(m, in.n_cols);
    in.b = Eigen::VectorXd::Zero(m);
    in.cost = Eigen::VectorXd::Zero(in.n_cols);
    in.row_sign.assign(m, 1.0);
    in.row_ub.assign(m, -1);
    in.row_eq.assign(m, -1);
    in.row_bound.assign(m, -1);
    in.slack_col.assign(m, -1);

    // Objective in internal coordinates.
    for (int v = 0; v < n; ++v) {
        const auto& vm = in.vmap[v];
        const double c = cost_user[v];
        switch (vm.kind) {
            case VarMap::Kind::Shift:
                in.cost[vm.col] = c;
                in.obj_const += c * vm.offset;
                break;
            case VarMap::Kind::Mirror:
                in.cost[vm.col] = -c;
                in.obj_const += c * vm.offset;
                break;
            case VarMap::Kind::Split:
                in.cost[vm.col] = c;
                in.cost[vm.col_neg] = -c;
                break;
        }
    }

    auto fill_row = [&](int row, const Eigen::RowVectorXd& a, double rhs) {
        double adj = rhs;
        for (int v = 0; v < n; ++v) {
            const double av = a[v];
            if (av == 0.0) continue;
            const auto& vm = in.vmap[v];
            switch (vm.kind) {
                case VarMap::Kind::Shift:
                    in.E(row, vm.col) = av;
                    adj -= av * vm.offset;
                    break;
                case VarMap::Kind::Mirror:
                    in.E(row, vm.col) = -av;
                    adj -= av * vm.offset;
                    break;
                case VarMap::Kind::Split:
                    in.E(row, vm.col) = av;
                    in.E(row, vm.col_neg) = -av;
                    break;
            }
        }
        in.b[row] = adj;
    };

    int row = 0;
    int slack = n_struct;
    for (int i = 0; i < m_ub; ++i, ++row) {
        fill_row(row, lp.A_ub.row(i), lp.b_ub[i]);
        in.row_ub[row] = i;
        in.E(row, slack) = 1.0;
        in.slack_col[row] = slack++;
    }
    for (int i = 0; i < m_eq; ++i, ++row) {
        fill_row(row, lp.A_eq.row(i), lp.b_eq[i]);
        in.row_eq[row] = i;
    }
    for (int v = 0; v < n; ++v) {
        const auto& vm = in.vmap[v];
        if (vm.kind == VarMap::Kind::Shift && std::isfinite(lp.upper[v])) {
            in.E(row, vm.col) = 1.0;
            in.b[row] = lp.upper[v] - lp.lower[v];
            in.row_bound[row] = v;
            in.vmap[v].upper_row = row;
            in.E(row, slack) = 1.0;
            in.slack_col[row] = slack++;
            ++row;
        }
    }

    // Normalize to b >= 0; slack coefficients flip with the row.
    for (int i = 0; i < m; ++i) {
        if (in.b[i] < 0.0) {
            in.E.row(i) *= -1.0;
            in.b[i] *= -1.0;
            in.row_sign[i] = -1.0;
        }
    }
    return in;
}

}  // namespace

void LinearProgram::validate() const {
    const int n = n_vars();
    if (n < 1) throw ValidationError("LP needs at least one variable");
    if (A_ub.rows() != b_ub.size() || (A_ub.rows() > 0 && A_ub.cols() != n))
        throw ValidationError("inequality block dimensions inconsistent");
    if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != n))
        throw ValidationError("equality block dimensions inconsistent");
    if (lower.size() != n || upper.size() != n)
        throw ValidationError("bounds must cover every variable");
    for (int v = 0; v < n; ++v)
        if (lower[v] > upper[v]) throw ValidationError("lower bound exceeds upper bound");
}

LinearProgram LinearProgram::make(int n, Sense sense) {
    LinearProgram lp;
    lp.sense = sense;
    lp.objective = Eigen::VectorXd::Zero(n);
    lp.A_ub.resize(0, n);
    lp.b_ub.resize(0);
    lp.A_eq.resize(0, n);
    lp.b_eq.resize(0);
    lp.lower = Eigen::VectorXd::Constant(n, -kInf);
    lp.upper = Eigen::VectorXd::Constant(n, kInf);
    return lp;
}

LpSolution solve_lp(const LinearProgram& lp) {
    lp.validate();
    const bool maximize = lp.sense == LinearProgram::Sense::Maximize;
    const Eigen::VectorXd cost_user = maximize ? lp.objective : Eigen::VectorXd(-lp.objective);
    const int n = lp.n_vars();

    Simplex splx(build_internal(lp, cost_user));
    LpSolution sol;
    sol.status = splx.run();
    sol.iterations = splx.iterations();
    if (sol.status != LpSolution::Status::Optimal) return sol;

    const Internal& in = splx.data();
    const Eigen::VectorXd xi = splx.primal();
    const Eigen::VectorXd y = splx.duals();

    // Map the internal solution back onto user variables.
    sol.x.resize(n);
    for (int v = 0; v < n; ++v) {
        const auto& vm = in.vmap[v];
        switch (vm.kind) {
            case VarMap::Kind::Shift: sol.x[v] = vm.offset + xi[vm.col]; break;
            case VarMap::Kind::Mirror: sol.x[v] = vm.offset - xi[vm.col]; break;
            case VarMap::Kind::Split: sol.x[v] = xi[vm.col] - xi[vm.col_neg]; break;
        }
    }
    const double value_max = cost_user.dot(sol.x);
    sol.value = maximize ? value_max : -value_max;

    // Multipliers: row duals by block, bound duals from reduced costs.
    sol.lambda = Eigen::VectorXd::Zero(lp.b_ub.size());
    sol.eta = Eigen::VectorXd::Zero(lp.b_eq.size());
    sol.mu_lower = Eigen::VectorXd::Zero(n);
    sol.mu_upper = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < in.m; ++i) {
        const double yi = in.row_sign[i] * y[i];
        if (in.row_ub[i] >= 0) sol.lambda[in.row_ub[i]] = std::max(yi, 0.0);
        else if (in.row_eq[i] >= 0) sol.eta[in.row_eq[i]] = yi;
        else if (in.row_bound[i] >= 0) sol.mu_upper[in.row_bound[i]] = std::max(yi, 0.0);
    }
    for (int v = 0; v < n; ++v) {
        const auto& vm = in.vmap[v];
        if (vm.kind == VarMap::Kind::Split) continue;
        const double reduced = in.cost[vm.col] - y.dot(in.E.col(vm.col));
        const double mu = std::max(-reduced, 0.0);
        if (vm.kind == VarMap::Kind::Shift) sol.mu_lower[v] = mu;
        else sol.mu_upper[v] = mu;
    }

    // Dual objective and certificate residuals in user coordinates.
    double dual_max = sol.lambda.dot(lp.b_ub) + sol.eta.dot(lp.b_eq);
    for (int v = 0; v < n; ++v) {
        if (std::isfinite(lp.upper[v])) dual_max += sol.mu_upper[v] * lp.upper[v];
        if (std::isfinite(lp.lower[v])) dual_max -= sol.mu_lower[v] * lp.lower[v];
    }
    sol.dual_value = maximize ? dual_max : -dual_max;

    double pres = 0.0;
    if (lp.b_ub.size() > 0) {
        Eigen::VectorXd s = lp.A_ub * sol.x - lp.b_ub;
        pres = std::max(pres, s.maxCoeff());
        for (int i = 0; i < s.size(); ++i)
            sol.complementarity_residual =
                std::max(sol.complementarity_residual, std::abs(sol.lambda[i] * s[i]));
    }
    if (lp.b_eq.size() > 0)
        pres = std::max(pres, (lp.A_eq * sol.x - lp.b_eq).cwiseAbs().maxCoeff());
    for (int v = 0; v < n; ++v) {
        if (std::isfinite(lp.lower[v])) {
            pres = std::max(pres, lp.lower[v] - sol.x[v]);
            sol.complementarity_residual = std::max(
                sol.complementarity_residual, std::abs(sol.mu_lower[v] * (sol.x[v] - lp.lower[v])));
        }
        if (std::isfinite(lp.upper[v])) {
            pres = std::max(pres, sol.x[v] - lp.upper[v]);
            sol.complementarity_residual = std::max(
                sol.complementarity_residual, std::abs(sol.mu_upper[v] * (lp.upper[v] - sol.x[v])));
        }
    }
    sol.primal_residual = std::max(pres, 0.0);

    Eigen::VectorXd stat = cost_user - sol.mu_upper + sol.mu_lower;
    if (lp.b_ub.size() > 0) stat -= lp.A_ub.transpose() * sol.lambda;
    if (lp.b_eq.size() > 0) stat -= lp.A_eq.transpose() * sol.eta;
    sol.stationarity_residual = stat.cwiseAbs().maxCoeff();
    return sol;
}

void MixedProgram::validate() const {
    lp.validate();
    for (int j : binary)
        if (j < 0 || j >= lp.n_vars()) throw ValidationError("binary index outside variable range");
    if (node_limit < 1) throw ValidationError("node limit must be positive");
}

namespace {

struct BnbNode {
    double bound = 0.0;     // parent relaxation value, always in max sense
    long id = 0;            // creation order; larger = deeper first on ties
    Eigen::VectorXd lower, upper;
};

struct NodeOrder {
    bool operator()(const BnbNode& a, const BnbNode& b) const {
        if (a.bound != b.bound) return a.bound < b.bound;  // best bound first
        return a.id < b.id;                                // then depth-first
    }
};

}  // namespace

LpSolution solve_milp(const MixedProgram& mp) {
    mp.validate();
    const bool maximize = mp.lp.sense == LinearProgram::Sense::Maximize;
    constexpr double kIntTol = 1e-6;

    LinearProgram relax = mp.lp;
    for (int j : mp.binary) {
        relax.lower[j] = std::max(relax.lower[j], 0.0);
        relax.upper[j] = std::min(relax.upper[j], 1.0);
    }

    std::priority_queue<BnbNode, std::vector<BnbNode>, NodeOrder> open;
    open.push({kInf, 0, relax.lower, relax.upper});

    LpSolution best;
    best.status = LpSolution::Status::Infeasible;
    double incumbent = -kInf;  // in max sense
    bool any_unbounded = false;
    long nodes = 0;
    long next_id = 1;

    while (!open.empty()) {
        BnbNode node = open.top();
        open.pop();
        if (node.bound <= incumbent + 1e-9) continue;
        if (++nodes > mp.node_limit)
            throw NodeLimitExceeded("branch-and-bound node cap exceeded");

        LinearProgram sub = relax;
        sub.lower = node.lower;
        sub.upper = node.upper;
        LpSolution sol = solve_lp(sub);
        if (sol.status == LpSolution::Status::Infeasible) continue;
        if (sol.status == LpSolution::Status::Unbounded) {
            any_unbounded = true;
            continue;
        }
        const double value_max = maximize ? sol.value : -sol.value;
        if (value_max <= incumbent + 1e-9) continue;

        // Most-fractional binary, smallest index on ties.
        int branch = -1;
        double frac_best = kIntTol;
        for (int j : mp.binary) {
            const double f = std::abs(sol.x[j] - std::round(sol.x[j]));
            if (f > frac_best + 1e-15) {
                frac_best = f;
                branch = j;
            }
        }
        if (branch < 0) {
            for (int j : mp.binary) sol.x[j] = std::round(sol.x[j]);
            incumbent = value_max;
            best = sol;
            continue;
        }
        for (double fix : {0.0, 1.0}) {
            BnbNode child;
            child.bound = value_max;
            child.id = next_id++;
            child.lower = node.lower;
            child.upper = node.upper;
            child.lower[branch] = fix;
            child.upper[branch] = fix;
            open.push(std::move(child));
        }
    }

    if (best.status != LpSolution::Status::Optimal && any_unbounded) {
        LpSolution sol;
        sol.status = LpSolution::Status::Unbounded;
        return sol;
    }
    return best;
}

}  // namespace mmr
