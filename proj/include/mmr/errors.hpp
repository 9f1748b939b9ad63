#pragma once

#include <stdexcept>
#include <string>

namespace mmr {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input fails a documented precondition or schema check.
struct ValidationError : Error {
    using Error::Error;
};

// Simplex could not reach a reliable optimum (cycling or ill-conditioning
// that persists after the Bland's-rule fallback).
struct NumericalFailure : Error {
    using Error::Error;
};

// A (cell, observed level) group needed by the estimator is empty.
struct InsufficientData : Error {
    using Error::Error;
};

// Logistic first stage applied to an outcome outside {0,1}.
struct NonBinaryOutcome : Error {
    using Error::Error;
};

// Iterative fit exhausted its iteration budget.
struct NoConvergence : Error {
    using Error::Error;
};

// The shape set {m : S m <= r} itself is empty.
struct InfeasibleShapeSet : Error {
    using Error::Error;
};

// No response vector matches both the shape set and the pinned first-stage
// values; signals a projection failure upstream.
struct InfeasibleIdentifiedSet : Error {
    using Error::Error;
};

// Policy MILP has no feasible point (cutoff box too tight).
struct MilpInfeasible : Error {
    using Error::Error;
};

// Branch-and-bound hit the node cap before proving optimality.
struct NodeLimitExceeded : Error {
    using Error::Error;
};

}  // namespace mmr
