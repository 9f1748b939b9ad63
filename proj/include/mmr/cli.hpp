#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mmr/core.hpp"
#include "mmr/firststage.hpp"
#include "mmr/policy.hpp"
#include "mmr/regret.hpp"
#include "mmr/shape.hpp"
#include "mmr/simlab.hpp"

namespace mmr {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitSolver = 4;

// Parsed, validated run configuration.  The on-disk form is a strict JSON
// key-value tree; unknown keys anywhere are errors.
struct RunConfig {
    TreatmentGrid grid;
    ShapeSpec shape;
    UtilitySpec utility;  // per-level coefficients (one row, broadcast)
    EstimatorSpec estimator;
    PolicyClassSpec policy_class;
    Criterion criterion = Criterion::MinimaxRegret;
    long node_limit = 1000000;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::vector<double> worstcase_levels;

    struct Sim {
        std::vector<int> Ns = {400, 1600, 6400};
        int reps = 200;
        std::optional<SyntheticDGP> dgp;  // absent = the default design
    };
    std::optional<Sim> sim;
};

RunConfig parse_config(const std::string& path);

struct CliOptions {
    std::string config_path;
    std::string data_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

// Subcommand bodies; each returns a process exit code and reports errors on
// stderr.  File outputs are byte-deterministic for a fixed config and seed,
// independent of the thread count.
int cmd_bounds(const CliOptions& opt);
int cmd_solve(const CliOptions& opt);
int cmd_project(const CliOptions& opt);
int cmd_simulate(const CliOptions& opt);

}  // namespace mmr
