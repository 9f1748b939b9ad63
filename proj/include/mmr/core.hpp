#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mmr/errors.hpp"

namespace mmr {

// Ordered treatment values d_1 < ... < d_J with the experimentally observed
// subset marked.  Indices into `values` are used everywhere downstream.
struct TreatmentGrid {
    std::vector<double> values;
    std::vector<bool> observed_mask;

    int J() const { return static_cast<int>(values.size()); }
    int J0() const;

    // Indices of the observed levels, in grid order.
    std::vector<int> observed_indices() const;

    // Position of grid index j within the observed subset, or -1.
    int observed_rank(int j) const;

    // Maps a raw treatment value to its observed grid index.
    std::optional<int> find_level(double d, double tol = 1e-9) const;

    void validate() const;

    static TreatmentGrid make(std::vector<double> values, const std::vector<double>& observed);
};

// Linear-in-outcome utility u(d,x,y) = b(d,x) * y - c(d,x), stored as
// per-level coefficient rows.  A single row broadcasts across cells.
struct UtilitySpec {
    Eigen::MatrixXd benefit;  // n_cells x J or 1 x J
    Eigen::MatrixXd cost;     // same shape rules as benefit
    double magnitude_bound = 1e6;

    double b(int cell, int j) const { return benefit(benefit.rows() == 1 ? 0 : cell, j); }
    double c(int cell, int j) const { return cost(cost.rows() == 1 ? 0 : cell, j); }

    void validate(int J) const;

    // Subsidy program utility: b(d) = alpha - (p_full - d), c = 0.
    static UtilitySpec subsidy(double alpha, double p_full, const TreatmentGrid& grid);
};

struct Observation {
    double treatment = 0.0;
    double outcome = 0.0;
    Eigen::VectorXd x;
};

// Sample rows plus the deduplicated covariate cells.  All per-cell work
// downstream runs once per unique covariate value and is broadcast back.
struct CovariateTable {
    std::vector<Observation> rows;
    std::vector<Eigen::VectorXd> cells;   // unique covariate values, first-appearance order
    std::vector<double> cell_weights;     // counts / N, sums to 1
    std::vector<int> row_cell;            // row -> cell index
    std::vector<int> row_level;           // row -> grid index of the treatment

    int n_cells() const { return static_cast<int>(cells.size()); }
    int n_rows() const { return static_cast<int>(rows.size()); }

    static CovariateTable make(std::vector<Observation> rows, const TreatmentGrid& grid);
    void validate(const TreatmentGrid& grid) const;
};

// First-stage estimates m^(d, x): one vector of length J0 per covariate cell,
// ordered like TreatmentGrid::observed_indices().
struct ResponseEstimate {
    std::vector<Eigen::VectorXd> m0;  // per cell

    int n_cells() const { return static_cast<int>(m0.size()); }
    void validate(int J0, double lo = -std::numeric_limits<double>::infinity(),
                  double hi = std::numeric_limits<double>::infinity()) const;
};

// Worst-case regret contributions per (cell, level), with optional
// per-comparison detail and the regret-maximizing response curves.
struct RegretMatrix {
    Eigen::MatrixXd gamma;                       // n_cells x J
    std::vector<Eigen::MatrixXd> detail;         // optional: per cell, J x J of gamma_jk
    std::vector<std::vector<Eigen::VectorXd>> worst_response;  // optional: per cell, per j, m*

    int n_cells() const { return static_cast<int>(gamma.rows()); }
    int J() const { return static_cast<int>(gamma.cols()); }
};

// Assignment rule: a fixed level, or a linear eligibility score thresholded
// against increasing cutoffs (one interval per treatment level).
struct Policy {
    enum class Kind { Constant, LinearScore };
    Kind kind = Kind::Constant;
    int level = 0;               // Constant: grid index
    Eigen::VectorXd beta;        // LinearScore: weights over score covariates
    Eigen::VectorXd cutoffs;     // LinearScore: c_1 <= ... <= c_{J-1}

    static Policy constant(int level_index);
    static Policy linear_score(Eigen::VectorXd beta, Eigen::VectorXd cutoffs);

    void validate(int J, bool require_positive_first = false) const;
};

// Returns the grid index j with c_{j-1} < x'beta <= c_j (c_0 = -inf,
// c_J = +inf); a score exactly at c_j belongs to level j.  Total function.
int assign(const Policy& policy, const Eigen::VectorXd& x, const TreatmentGrid& grid);

}  // namespace mmr
