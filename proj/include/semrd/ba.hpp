#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "semrd/core.hpp"

namespace semrd {

enum class BAInit { uniform, random_positive };

// Solver configuration.  lambda1/lambda2 are the nonpositive slopes of the
// rate surface; -50 is the project-wide surrogate for a hard constraint
// (exp(-50 d) underflows past every distortion scale used here).
struct BAConfig {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    int max_iters = 2000;
    double tol = 1e-9;  // relative change of the Lagrangian
    BAInit init = BAInit::uniform;
    std::uint64_t seed = 1;
};

inline constexpr double kHardSlope = -50.0;

enum class BAStop { converged, max_iters };

struct BATraceEntry {
    double rate_nats = 0.0;
    double d_o = 0.0;
    double d_s = 0.0;
    double max_row_deviation = 0.0;  // worst |row sum - 1| of the kernel
    double seconds = 0.0;            // wall time of this iteration
};

// Per-iteration diagnostics.  The Lagrangian rate - l1*d_o - l2*d_s is
// non-increasing across entries.
struct BATrace {
    std::vector<BATraceEntry> entries;
    BAStop stop = BAStop::max_iters;

    double lagrangian(std::size_t i, double lambda1, double lambda2) const {
        const BATraceEntry& e = entries.at(i);
        return e.rate_nats - lambda1 * e.d_o - lambda2 * e.d_s;
    }
};

struct BAResult {
    RDPoint point;
    ReproductionKernel kernel;
    BATrace trace;
};

// Pair marginal induced by the kernel under px.
ReproductionMarginal ba_update_marginal(const DiscreteSemanticSource& src,
                                        const ReproductionKernel& kernel);

// Reweights the marginal by exp(l1 d_o + l2 d_hat_s) row by row.  Evaluated
// in log space; the row normalizer is re-evaluated for every entry, so one
// update costs Theta(|X| |Xhat|^2 |Shat|^2).
ReproductionKernel ba_update_kernel(const DiscreteSemanticSource& src,
                                    const ReproductionMarginal& marginal,
                                    const DistortionSpec& spec, const BAConfig& cfg);

// Alternates the marginal and kernel updates from a strictly positive start
// until the Lagrangian stops moving or max_iters is hit.
BAResult ba_solve(const DiscreteSemanticSource& src, const DistortionSpec& spec,
                  const BAConfig& cfg);

struct SweepEntry {
    std::optional<RDPoint> point;
    std::string error;  // empty on success
};

// One solve per slope pair; per-point failures are recorded and the sweep
// continues.  Points are independent, so they may run on several workers.
std::vector<SweepEntry> ba_sweep(const DiscreteSemanticSource& src, const DistortionSpec& spec,
                                 const std::vector<std::pair<double, double>>& lambda_grid,
                                 const BAConfig& cfg, unsigned workers = 1);

// Classic single-constraint solver: rate-distortion of (marginal, distortion)
// at the given slope.  Runs the generalized solver on a degenerate instance
// with a one-symbol semantic axis.
RDPoint conventional_rd(const Eigen::VectorXd& source_marginal,
                        const Eigen::MatrixXd& distortion, double lambda, const BAConfig& cfg);

// Slope for which conventional_rd achieves expected distortion `target`
// within tol, found by bisection on [-50, 0].  Returns the solved point.
RDPoint conventional_rd_at_distortion(const Eigen::VectorXd& source_marginal,
                                      const Eigen::MatrixXd& distortion, double target,
                                      const BAConfig& cfg, double tol = 1e-6);

}  // namespace semrd
