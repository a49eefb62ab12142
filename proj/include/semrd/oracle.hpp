#pragma once

#include <cstdint>
#include <vector>

#include "semrd/core.hpp"

namespace semrd {

struct OracleConfig {
    int restarts = 32;
    int max_steps = 30000;        // mirror-descent steps per restart
    double step_size = 0.5;       // initial multiplicative step on the rows
    double penalty_init = 10.0;   // augmented-Lagrangian weight, raised on a schedule
    int penalty_interval = 500;   // steps between multiplier/penalty updates
    double violation_tol = 1e-6;  // feasibility requirement on both constraints
    std::uint64_t seed = 7;
};

struct OracleResult {
    RDPoint point;
    ReproductionKernel kernel;
    double max_violation = 0.0;              // of the returned kernel
    std::vector<double> restart_objectives;  // feasible restarts only
};

// Direct constrained minimization of the mutual-information objective over
// row-stochastic kernels, independent of the fixed-point solver: rows are
// softmax-parameterized logits driven by gradient descent under an augmented
// Lagrangian on the two distortion constraints.  Desk-scale instances only
// (|X| * |Xhat| * |Shat| <= 64).
OracleResult brute_force_srdf(const DiscreteSemanticSource& src, const DistortionSpec& spec,
                              double d_o, double d_s, const OracleConfig& cfg);

// H_b(p) - H_b(D) in bits for D < min(p, 1-p), else 0.
double closed_form_binary_rd(double p, double d);

struct RateDecompositionReport {
    double constrained_min_nats = 0.0;  // min of the Q-referenced objective
    double decomposed_nats = 0.0;       // own-marginal rate + KL(marginal || Q)
    double srdf_nats = 0.0;             // unreferenced minimum at the same targets
    double gap_nats = 0.0;              // constrained_min - srdf
    double max_violation = 0.0;
};

// Minimizes the objective referenced to a fixed pair distribution Q and
// checks that it splits into the own-marginal rate plus the marginal-to-Q
// divergence, staying at or above the unreferenced minimum.
RateDecompositionReport verify_rate_decomposition(const DiscreteSemanticSource& src,
                                                  const DistortionSpec& spec,
                                                  const ReproductionMarginal& q, double d_o,
                                                  double d_s, const OracleConfig& cfg);

}  // namespace semrd
