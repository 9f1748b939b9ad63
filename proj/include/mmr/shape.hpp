#pragma once

#include <Eigen/Dense>
#include <optional>

#include "mmr/core.hpp"

namespace mmr {

// Declarative restrictions on the response vector m(., x) across treatment
// levels; each one linearizes into rows of S m <= r.
struct ShapeSpec {
    enum class Monotone { None, Decreasing, Increasing };
    enum class Curvature { None, Convex, Concave };
    Monotone monotone = Monotone::None;
    Curvature curvature = Curvature::None;
    std::optional<std::pair<double, double>> bounds;  // [lower, upper] on m
    std::optional<double> lipschitz;                  // |dm/dd| <= L

    void validate() const;
    bool empty() const {
        return monotone == Monotone::None && curvature == Curvature::None && !bounds && !lipschitz;
    }
};

// Polyhedral shape set {m : S m <= r} together with the selection matrix F
// picking out the observed levels (F m = m0_hat pins them).
struct ConstraintSystem {
    Eigen::MatrixXd S;
    Eigen::VectorXd r;
    Eigen::MatrixXd F;      // J0 x J, one unit entry per row
    bool vacuous = false;   // no restrictions beyond (possibly absent) bounds
    bool bounded = false;   // bounds rows present, so the shape set is compact

    int J() const { return static_cast<int>(S.cols()); }
    int J0() const { return static_cast<int>(F.rows()); }
    int n_rows() const { return static_cast<int>(S.rows()); }
};

// Builds (S, r, F) from the grid and spec.  First differences are
// spacing-normalized, (m_{j+1} - m_j)/(d_{j+1} - d_j); second-difference rows
// compose two adjacent normalized slopes.  Emits a warning on stderr when the
// spec is empty (identification is then vacuous beyond bounds).
ConstraintSystem build_constraints(const TreatmentGrid& grid, const ShapeSpec& spec);

// True iff max(S m - r) <= tol.
bool is_feasible(const ConstraintSystem& cs, const Eigen::VectorXd& m, double tol = 1e-9);

}  // namespace mmr
