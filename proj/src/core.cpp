#include "mmr/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace mmr {

int TreatmentGrid::J0() const {
    int n = 0;
    for (bool b : observed_mask) n += b ? 1 : 0;
    return n;
}

std::vector<int> TreatmentGrid::observed_indices() const {
    std::vector<int> idx;
    for (int j = 0; j < J(); ++j)
        if (observed_mask[j]) idx.push_back(j);
    return idx;
}

int TreatmentGrid::observed_rank(int j) const {
    if (j < 0 || j >= J() || !observed_mask[j]) return -1;
    int k = 0;
    for (int i = 0; i < j; ++i) k += observed_mask[i] ? 1 : 0;
    return k;
}

std::optional<int> TreatmentGrid::find_level(double d, double tol) const {
    for (int j = 0; j < J(); ++j)
        if (observed_mask[j] && std::abs(values[j] - d) <= tol) return j;
    return std::nullopt;
}

void TreatmentGrid::validate() const {
    if (J() < 2) throw ValidationError("treatment grid needs at least two levels");
    if (observed_mask.size() != values.size())
        throw ValidationError("observed_mask length must match values");
    for (int j = 1; j < J(); ++j)
        if (!(values[j] > values[j - 1]))
            throw ValidationError("treatment values must be strictly increasing");
    const int j0 = J0();
    if (j0 < 1 || j0 > J()) throw ValidationError("observed subset must be nonempty");
}

TreatmentGrid TreatmentGrid::make(std::vector<double> values, const std::vector<double>& observed) {
    TreatmentGrid g;
    g.values = std::move(values);
    g.observed_mask.assign(g.values.size(), false);
    for (double d : observed) {
        bool found = false;
        for (int j = 0; j < g.J(); ++j) {
            if (std::abs(g.values[j] - d) <= 1e-9) {
                g.observed_mask[j] = true;
                found = true;
                break;
            }
        }
        if (!found) {
            std::ostringstream os;
            os << "observed level " << d << " is not a grid value";
            throw ValidationError(os.str());
        }
    }
    g.validate();
    return g;
}

void UtilitySpec::validate(int J) const {
    if (benefit.cols() != J || cost.cols() != J)
        throw ValidationError("utility coefficient tables must have one column per level");
    if (benefit.rows() < 1 || cost.rows() < 1)
        throw ValidationError("utility coefficient tables must be nonempty");
    if (benefit.cwiseAbs().maxCoeff() > magnitude_bound || cost.cwiseAbs().maxCoeff() > magnitude_bound)
        throw ValidationError("utility coefficients exceed the configured magnitude bound");
}

UtilitySpec UtilitySpec::subsidy(double alpha, double p_full, const TreatmentGrid& grid) {
    UtilitySpec u;
    u.benefit.resize(1, grid.J());
    u.cost = Eigen::MatrixXd::Zero(1, grid.J());
    for (int j = 0; j < grid.J(); ++j) u.benefit(0, j) = alpha - (p_full - grid.values[j]);
    return u;
}

CovariateTable CovariateTable::make(std::vector<Observation> rows, const TreatmentGrid& grid) {
    CovariateTable t;
    t.rows = std::move(rows);
    t.row_cell.reserve(t.rows.size());
    t.row_level.reserve(t.rows.size());
    std::map<std::vector<double>, int> seen;
    std::vector<int> counts;
    for (const auto& r : t.rows) {
        auto level = grid.find_level(r.treatment);
        if (!level) {
            std::ostringstream os;
            os << "treatment value " << r.treatment << " is not an observed grid level";
            throw ValidationError(os.str());
        }
        t.row_level.push_back(*level);
        std::vector<double> key(r.x.data(), r.x.data() + r.x.size());
        auto [it, inserted] = seen.emplace(std::move(key), static_cast<int>(t.cells.size()));
        if (inserted) {
            t.cells.push_back(r.x);
            counts.push_back(0);
        }
        t.row_cell.push_back(it->second);
        counts[it->second] += 1;
    }
    t.cell_weights.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        t.cell_weights[i] = static_cast<double>(counts[i]) / static_cast<double>(t.rows.size());
    return t;
}

void CovariateTable::validate(const TreatmentGrid& grid) const {
    double total = 0.0;
    for (double w : cell_weights) total += w;
    if (!cells.empty() && std::abs(total - 1.0) > 1e-12)
        throw ValidationError("cell weights must sum to 1");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int j = row_level[i];
        if (j < 0 || j >= grid.J() || !grid.observed_mask[j])
            throw ValidationError("row treatment outside the observed set");
    }
}

void ResponseEstimate::validate(int J0, double lo, double hi) const {
    for (const auto& v : m0) {
        if (v.size() != J0) throw ValidationError("response estimate length must equal J0");
        for (int k = 0; k < v.size(); ++k)
            if (!(v[k] >= lo && v[k] <= hi))
                throw ValidationError("response estimate outside the configured outcome bounds");
    }
}

Policy Policy::constant(int level_index) {
    Policy p;
    p.kind = Kind::Constant;
    p.level = level_index;
    return p;
}

Policy Policy::linear_score(Eigen::VectorXd beta, Eigen::VectorXd cutoffs) {
    Policy p;
    p.kind = Kind::LinearScore;
    p.beta = std::move(beta);
    p.cutoffs = std::move(cutoffs);
    return p;
}

void Policy::validate(int J, bool require_positive_first) const {
    if (kind == Kind::Constant) {
        if (level < 0 || level >= J) throw ValidationError("constant policy level outside grid");
        return;
    }
    if (cutoffs.size() != J - 1) throw ValidationError("linear score policy needs J-1 cutoffs");
    for (int j = 1; j < cutoffs.size(); ++j)
        if (cutoffs[j] < cutoffs[j - 1]) throw ValidationError("cutoffs must be weakly increasing");
    if (beta.size() < 1) throw ValidationError("linear score policy needs a nonempty beta");
    if (require_positive_first && !(beta[0] > 0)) throw ValidationError("beta_1 must be positive");
}

int assign(const Policy& policy, const Eigen::VectorXd& x, const TreatmentGrid& grid) {
    if (policy.kind == Policy::Kind::Constant) return policy.level;
    const double score = policy.beta.dot(x.head(policy.beta.size()));
    // Level j holds scores in (c_{j-1}, c_j]; count how many cutoffs lie
    // strictly below the score.
    int j = 0;
    while (j < policy.cutoffs.size() && score > policy.cutoffs[j]) ++j;
    (void)grid;
    return j;
}

}  // namespace mmr
