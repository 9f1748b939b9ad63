#include "mmr/shape.hpp"

#include <iostream>
#include <vector>

namespace mmr {

void ShapeSpec::validate() const {
    if (bounds && !(bounds->first <= bounds->second))
        throw ValidationError("shape bounds must satisfy lower <= upper");
    if (lipschitz && *lipschitz < 0.0)
        throw ValidationError("Lipschitz constant must be nonnegative");
}

ConstraintSystem build_constraints(const TreatmentGrid& grid, const ShapeSpec& spec) {
    grid.validate();
    spec.validate();
    const int J = grid.J();
    const auto& d = grid.values;

    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    auto push = [&](const Eigen::RowVectorXd& row, double b) {
        rows.push_back(row);
        rhs.push_back(b);
    };

    // Normalized slope of gap g as a row vector: (m_{g+1} - m_g)/(d_{g+1} - d_g).
    auto slope_row = [&](int g) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(J);
        const double h = d[g + 1] - d[g];
        row[g] = -1.0 / h;
        row[g + 1] = 1.0 / h;
        return row;
    };

    if (spec.bounds) {
        for (int j = 0; j < J; ++j) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(J);
            row[j] = -1.0;
            push(row, -spec.bounds->first);
        }
        for (int j = 0; j < J; ++j) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(J);
            row[j] = 1.0;
            push(row, spec.bounds->second);
        }
    }
    if (spec.monotone == ShapeSpec::Monotone::Decreasing) {
        for (int g = 0; g < J - 1; ++g) push(slope_row(g), 0.0);
    } else if (spec.monotone == ShapeSpec::Monotone::Increasing) {
        for (int g = 0; g < J - 1; ++g) push(-slope_row(g), 0.0);
    }
    if (spec.curvature == ShapeSpec::Curvature::Convex) {
        // slope(g) <= slope(g+1): increasing slopes.
        for (int g = 0; g < J - 2; ++g) push(slope_row(g) - slope_row(g + 1), 0.0);
    } else if (spec.curvature == ShapeSpec::Curvature::Concave) {
        for (int g = 0; g < J - 2; ++g) push(slope_row(g + 1) - slope_row(g), 0.0);
    }
    if (spec.lipschitz) {
        for (int g = 0; g < J - 1; ++g) {
            push(slope_row(g), *spec.lipschitz);
            push(-slope_row(g), *spec.lipschitz);
        }
    }

    ConstraintSystem cs;
    cs.S.resize(static_cast<int>(rows.size()), J);
    cs.r.resize(static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        cs.S.row(static_cast<int>(i)) = rows[i];
        cs.r[static_cast<int>(i)] = rhs[i];
    }
    cs.bounded = spec.bounds.has_value();
    cs.vacuous = spec.empty();
    if (cs.vacuous)
        std::cerr << "warning: empty shape spec; new treatments are unidentified beyond bounds\n";

    const auto obs = grid.observed_indices();
    cs.F = Eigen::MatrixXd::Zero(static_cast<int>(obs.size()), J);
    for (std::size_t k = 0; k < obs.size(); ++k) cs.F(static_cast<int>(k), obs[k]) = 1.0;
    return cs;
}

bool is_feasible(const ConstraintSystem& cs, const Eigen::VectorXd& m, double tol) {
    if (m.size() != cs.J()) throw ValidationError("response vector length must equal J");
    if (cs.n_rows() == 0) return true;
    return (cs.S * m - cs.r).maxCoeff() <= tol;
}

}  // namespace mmr
