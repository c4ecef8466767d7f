#pragma once

#include <json.hpp>
#include <memory>
#include <optional>
#include <string>

#include "bdlab/estimate.hpp"
#include "bdlab/kinetic.hpp"
#include "bdlab/lq.hpp"
#include "bdlab/policy.hpp"
#include "bdlab/scenario.hpp"
#include "bdlab/simulate.hpp"

namespace bdlab::config {

// Options of the statistical subcommands.
struct TestOptions {
    ScalarFn scalar;                  // compensated-functional outer function
    TestFn testfn;                    // cylindrical test function
    std::vector<double> checkpoints;  // strictly increasing, within (start, horizon]
    double z_threshold = 4.0;
    bool quadratic_variation = false;
    DriftMode mode = DriftMode::Martingale;
    std::string field = "lq";  // value field for verify: "lq" | "kinetic"
};

// Everything a subcommand needs, assembled from one declarative config file.
struct ExperimentBundle {
    nlohmann::json resolved;  // normalized config (execution-only keys stripped)

    Scenario scenario;
    Policy policy;
    std::optional<Policy> policy_b;  // for paired comparison

    double start_time = 0.0;
    AtomicMeasure initial{1};
    SimConfig sim;
    int replications = 0;
    uint64_t seed = 0;

    std::string scenario_kind;
    std::shared_ptr<const lq::Coefficients> lq_coeffs;
    std::shared_ptr<const lq::RiccatiSolution> lq_solution;
    std::shared_ptr<const kinetic::Coefficients> kinetic_coeffs;
    std::shared_ptr<const kinetic::Solution> kinetic_solution;

    TestOptions test;
    int lq_steps = 2000;
    kinetic::Grid kinetic_grid;

    // Builds (and caches) the requested value field; throws ConfigError when
    // the scenario kind cannot provide it.
    ValueField value_field_for(const std::string& name);
};

// Parses and assembles a full experiment. Schema errors carry the offending
// field path. Solver-backed policies (lq-optimal, kinetic-optimal,
// lq-perturbed) trigger the corresponding solve.
ExperimentBundle load_experiment(const nlohmann::json& config);

nlohmann::json read_config_file(const std::string& path);

}  // namespace bdlab::config
