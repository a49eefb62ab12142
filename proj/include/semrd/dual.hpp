#pragma once

#include <Eigen/Dense>
#include <utility>

#include "semrd/ba.hpp"
#include "semrd/core.hpp"

namespace semrd {

// Nonpositive multipliers of the two distortion constraints.
struct DualParams {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
};

// Per observation symbol, the reference pair distribution reweighted by the
// exponentiated distortions.  Row x holds the flat (xhat, shat) table.
struct TiltedMeasure {
    Eigen::MatrixXd rows;  // |X| x (|Xhat| * |Shat|)
    Eigen::Index xhat_size = 0;
    Eigen::Index shat_size = 0;
};

// log-moment functional of the distortion pair under the reference marginal:
// E_px[ ln E_Q exp(a1 d_o + a2 d_hat_s) ], in nats.  Nonpositive on the
// feasible quadrant, zero at the origin.
double log_moment(const DiscreteSemanticSource& src, const ReproductionMarginal& q,
                  const DualParams& params, const DistortionSpec& spec);

// Partial derivatives: expectations of d_o and d_hat_s under the tilted
// measure, averaged over px.  Both components are nonnegative.
std::pair<double, double> log_moment_grad(const DiscreteSemanticSource& src,
                                          const ReproductionMarginal& q,
                                          const DualParams& params, const DistortionSpec& spec);

// 2x2 Hessian: per-x tilted variances on the diagonal, the covariance off it.
// Positive semidefinite; strictly positive diagonal unless a distortion is
// essentially constant.
Eigen::Matrix2d log_moment_hessian(const DiscreteSemanticSource& src,
                                   const ReproductionMarginal& q, const DualParams& params,
                                   const DistortionSpec& spec);

TiltedMeasure tilted_measure(const DiscreteSemanticSource& src, const ReproductionMarginal& q,
                             const DualParams& params, const DistortionSpec& spec);

// Empirical analogue of log_moment on fixed sample matrices:
// mean_n [ ln (1/M) sum_m exp(a1 d_o(n,m) + a2 d_s_avg(n,m)) ].
// d_o_vals and d_s_avg_vals are N x M matrices of per-pair distortions; both
// expectations reuse the same matrices so value and gradient stay consistent.
double log_moment_empirical(const Eigen::MatrixXd& d_o_vals, const Eigen::MatrixXd& d_s_avg_vals,
                            const DualParams& params);

std::pair<double, double> log_moment_empirical_grad(const Eigen::MatrixXd& d_o_vals,
                                                    const Eigen::MatrixXd& d_s_avg_vals,
                                                    const DualParams& params);

// a1 D_o + a2 D_s - log_moment_value.
double dual_objective(const DualParams& params, double d_o, double d_s, double log_moment_value);

struct DualSupResult {
    double rate_nats = 0.0;
    DualParams params;
    int kkt_case = 4;  // 1: both active, 2: only semantic, 3: only observation, 4: none
    bool converged = false;
    int iterations = 0;
};

// Maximizes the strictly concave dual objective over the nonpositive quadrant
// by damped Newton with projection, falling back to projected gradient steps.
// Returns the reference-marginal rate bound at (d_o, d_s).
DualSupResult dual_sup(const DiscreteSemanticSource& src, const ReproductionMarginal& q,
                       double d_o, double d_s, const DistortionSpec& spec);

// Evaluates one surface point from the slope pair alone: the optimal
// reference marginal comes from the converged solver at the same slopes, the
// achieved distortions from log_moment_grad, and the rate from the dual
// objective.  Agrees with ba_solve at the shared fixed point.
RDPoint srdf_via_dual(const DiscreteSemanticSource& src, const DistortionSpec& spec,
                      const DualParams& params, const BAConfig& inner_cfg);

}  // namespace semrd
