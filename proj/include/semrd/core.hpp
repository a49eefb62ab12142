#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>

namespace semrd {

// A finite two-part source: an observable signal X jointly distributed with a
// hidden task-relevant state S.  All tables are plain probabilities; rows of
// ps_given_x with zero observation mass are filled uniform so every row stays
// stochastic.
struct DiscreteSemanticSource {
    Eigen::MatrixXd joint;       // |X| x |S|
    Eigen::VectorXd px;          // |X|
    Eigen::MatrixXd ps_given_x;  // |X| x |S|, row-stochastic

    Eigen::Index x_size() const { return joint.rows(); }
    Eigen::Index s_size() const { return joint.cols(); }
};

// Distortion tables for one problem instance.  d_hat_s is the conditional
// expectation of d_s given the observation and is derived, never set by hand.
struct DistortionSpec {
    Eigen::MatrixXd d_o;      // |X| x |Xhat|
    Eigen::MatrixXd d_s;      // |S| x |Shat|
    Eigen::MatrixXd d_hat_s;  // |X| x |Shat|

    Eigen::Index xhat_size() const { return d_o.cols(); }
    Eigen::Index shat_size() const { return d_s.cols(); }
};

// Conditional law of the reproduction pair given the observation.  Pair
// (xhat, shat) maps to flat column xhat * shat_size + shat; this layout is
// fixed project-wide so kernels and marginals round-trip exactly.
struct ReproductionKernel {
    Eigen::MatrixXd table;  // |X| x (|Xhat| * |Shat|), row-stochastic
    Eigen::Index xhat_size = 0;
    Eigen::Index shat_size = 0;

    Eigen::Index pairs() const { return xhat_size * shat_size; }
    Eigen::Index pair_index(Eigen::Index xhat, Eigen::Index shat) const {
        return xhat * shat_size + shat;
    }
};

// Probability table over reproduction pairs.
struct ReproductionMarginal {
    Eigen::MatrixXd table;  // |Xhat| x |Shat|

    Eigen::VectorXd flat() const {
        Eigen::VectorXd v(table.size());
        for (Eigen::Index x = 0; x < table.rows(); ++x)
            for (Eigen::Index s = 0; s < table.cols(); ++s) v[x * table.cols() + s] = table(x, s);
        return v;
    }
    static ReproductionMarginal from_flat(const Eigen::VectorXd& v, Eigen::Index xhat,
                                          Eigen::Index shat);
};

enum class Method { ba, nesrd, oracle };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// One solved point of the rate-distortion surface.
struct RDPoint {
    double alpha1 = 0.0;  // nonpositive slope parameters
    double alpha2 = 0.0;
    double d_o = 0.0;  // achieved expected observation distortion
    double d_s = 0.0;  // achieved expected semantic distortion
    double rate_nats = 0.0;
    double rate_bits = 0.0;
    int iterations = 0;
    bool converged = false;
    Method method = Method::ba;
};

// Normalizes a nonnegative table into a consistent source.
// Throws NonFinite / DomainError / DimensionMismatch.
DiscreteSemanticSource build_source(const Eigen::MatrixXd& joint);

// d_hat_s(x, shat) = sum_s P(s|x) d_s(s, shat).
Eigen::MatrixXd modified_semantic_distortion(const DiscreteSemanticSource& src,
                                             const Eigen::MatrixXd& d_s);

// Bundles d_o and d_s and derives the modified semantic table.
DistortionSpec make_distortion_spec(const DiscreteSemanticSource& src, Eigen::MatrixXd d_o,
                                    Eigen::MatrixXd d_s);

// Mutual information I(X; Xhat,Shat) of the kernel against its own induced
// pair marginal, in nats.  0 ln 0 := 0; marginal cells floored at 1e-300.
double kl_rate(const DiscreteSemanticSource& src, const ReproductionKernel& kernel);

// (E d_o, E d_hat_s) under px and the kernel.
std::pair<double, double> expected_distortions(const DiscreteSemanticSource& src,
                                               const ReproductionKernel& kernel,
                                               const DistortionSpec& spec);

// Smallest distortions reachable with a single fixed reproduction symbol on
// each axis; the rate surface is zero at or beyond both.
std::pair<double, double> d_max(const DiscreteSemanticSource& src, const DistortionSpec& spec);

// Rate fits through the channel iff rate_bits <= capacity_bits.
bool achievable(const RDPoint& point, double capacity_bits);

// Throws InvalidKernel unless rows are stochastic within tol and entries are
// finite and nonnegative.
void validate_kernel(const ReproductionKernel& kernel, double tol = 1e-10);

// Kernel with every row equal to the given pair distribution.
ReproductionKernel constant_kernel(Eigen::Index x_size, const ReproductionMarginal& m);

// --- distortion table builders -------------------------------------------

// 0 on the diagonal, 1 elsewhere.
Eigen::MatrixXd hamming_distortion(Eigen::Index a, Eigen::Index b);

// Pairwise squared Euclidean distance between representative rows.
Eigen::MatrixXd squared_error_distortion(const Eigen::MatrixXd& reps_a,
                                         const Eigen::MatrixXd& reps_b);

// Entry (k, j) = -ln prob_vectors(j, k): cross entropy of class k against the
// j-th reproduction distribution.  Probabilities floored at 1e-12.
Eigen::MatrixXd cross_entropy_distortion(Eigen::Index classes,
                                         const Eigen::MatrixXd& prob_vectors);

}  // namespace semrd
