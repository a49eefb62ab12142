#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semrd/ba.hpp"
#include "semrd/core.hpp"

namespace semrd {

inline constexpr const char* kVersion = "semrd 1.0.0";

// Parses, validates (unknown keys are errors), and executes a run
// configuration.  Returns 0 on success, 1 on configuration errors, 2 when
// some grid points failed but the run completed.
struct RunOptions {
    std::optional<std::uint64_t> seed_override;
    std::optional<unsigned> worker_override;  // also via SEMRD_WORKERS
    bool quiet = false;
};

int run_config(const std::string& config_path, const RunOptions& options);

struct VerifyOptions {
    double eps_bits = 1e-3;
    std::optional<double> capacity_bits;
};

struct VerifyReport {
    bool ok = true;
    std::vector<std::string> lines;  // one "[PASS]/[FAIL] check: detail" per check
};

VerifyReport verify_points(const std::string& points_path, const VerifyOptions& options);

// Inverts the slope parametrization: coordinate-wise bisection on the two
// slopes until the achieved distortions sit within tol of the targets, at
// most 60 outer rounds.  Targets must lie in (0, d_max] per axis.
RDPoint bisect_to_target(const DiscreteSemanticSource& src, const DistortionSpec& spec,
                         double target_d_o, double target_d_s, const BAConfig& cfg,
                         double tol = 1e-4);

}  // namespace semrd
