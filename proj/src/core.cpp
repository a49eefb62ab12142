#include "semrd/core.hpp"

#include <cmath>

#include "semrd/error.hpp"
#include "semrd/numerics.hpp"

namespace semrd {

std::string method_name(Method m) {
    switch (m) {
        case Method::ba: return "ba";
        case Method::nesrd: return "nesrd";
        case Method::oracle: return "oracle";
    }
    return "ba";
}

Method method_from_name(const std::string& name) {
    if (name == "ba") return Method::ba;
    if (name == "nesrd") return Method::nesrd;
    if (name == "oracle") return Method::oracle;
    throw DomainError("unknown method tag: " + name);
}

ReproductionMarginal ReproductionMarginal::from_flat(const Eigen::VectorXd& v, Eigen::Index xhat,
                                                     Eigen::Index shat) {
    if (v.size() != xhat * shat) throw DimensionMismatch("flat marginal has wrong length");
    ReproductionMarginal m;
    m.table.resize(xhat, shat);
    for (Eigen::Index x = 0; x < xhat; ++x)
        for (Eigen::Index s = 0; s < shat; ++s) m.table(x, s) = v[x * shat + s];
    return m;
}

DiscreteSemanticSource build_source(const Eigen::MatrixXd& joint) {
    if (joint.rows() < 1 || joint.cols() < 1) throw DimensionMismatch("empty joint table");
    if (!joint.allFinite()) throw NonFinite("joint table has NaN or infinite entries");
    if ((joint.array() < 0.0).any()) throw DomainError("joint table has negative entries");
    const double total = joint.sum();
    if (total <= 0.0) throw DomainError("joint table sums to zero");

    DiscreteSemanticSource src;
    src.joint = joint / total;
    src.px = src.joint.rowwise().sum();
    src.ps_given_x.resize(joint.rows(), joint.cols());
    for (Eigen::Index x = 0; x < joint.rows(); ++x) {
        if (src.px[x] > 0.0) {
            src.ps_given_x.row(x) = src.joint.row(x) / src.px[x];
        } else {
            // zero-mass observations never enter an expectation
            src.ps_given_x.row(x).setConstant(1.0 / static_cast<double>(joint.cols()));
        }
    }
    return src;
}

Eigen::MatrixXd modified_semantic_distortion(const DiscreteSemanticSource& src,
                                             const Eigen::MatrixXd& d_s) {
    if (d_s.rows() != src.s_size()) throw DimensionMismatch("d_s rows must match |S|");
    if (!d_s.allFinite()) throw NonFinite("d_s has NaN or infinite entries");
    if ((d_s.array() < 0.0).any()) throw DomainError("d_s has negative entries");
    return src.ps_given_x * d_s;
}

DistortionSpec make_distortion_spec(const DiscreteSemanticSource& src, Eigen::MatrixXd d_o,
                                    Eigen::MatrixXd d_s) {
    if (d_o.rows() != src.x_size()) throw DimensionMismatch("d_o rows must match |X|");
    if (!d_o.allFinite()) throw NonFinite("d_o has NaN or infinite entries");
    if ((d_o.array() < 0.0).any()) throw DomainError("d_o has negative entries");
    DistortionSpec spec;
    spec.d_hat_s = modified_semantic_distortion(src, d_s);
    spec.d_o = std::move(d_o);
    spec.d_s = std::move(d_s);
    return spec;
}

void validate_kernel(const ReproductionKernel& kernel, double tol) {
    if (kernel.table.cols() != kernel.pairs())
        throw DimensionMismatch("kernel column count does not match pair alphabet");
    if (!kernel.table.allFinite()) throw InvalidKernel("kernel has NaN or infinite entries");
    if ((kernel.table.array() < 0.0).any()) throw InvalidKernel("kernel has negative entries");
    for (Eigen::Index x = 0; x < kernel.table.rows(); ++x) {
        const double s = kernel.table.row(x).sum();
        if (std::abs(s - 1.0) > tol)
            throw InvalidKernel("kernel row " + std::to_string(x) + " sums to " +
                                std::to_string(s));
    }
}

double kl_rate(const DiscreteSemanticSource& src, const ReproductionKernel& kernel) {
    if (kernel.table.rows() != src.x_size())
        throw DimensionMismatch("kernel rows must match |X|");
    validate_kernel(kernel);

    const Eigen::VectorXd marginal = kernel.table.transpose() * src.px;
    double rate = 0.0;
    for (Eigen::Index x = 0; x < src.x_size(); ++x) {
        const double w = src.px[x];
        if (w <= 0.0) continue;
        for (Eigen::Index j = 0; j < kernel.table.cols(); ++j) {
            const double p = kernel.table(x, j);
            if (p <= 0.0) continue;
            const double q = std::max(marginal[j], kProbFloor);
            rate += w * p * std::log(p / q);
        }
    }
    return std::max(rate, 0.0);
}

std::pair<double, double> expected_distortions(const DiscreteSemanticSource& src,
                                               const ReproductionKernel& kernel,
                                               const DistortionSpec& spec) {
    if (kernel.table.rows() != src.x_size())
        throw DimensionMismatch("kernel rows must match |X|");
    if (kernel.xhat_size != spec.xhat_size() || kernel.shat_size != spec.shat_size())
        throw DimensionMismatch("kernel pair alphabet does not match distortion tables");

    double d_o = 0.0;
    double d_s = 0.0;
    for (Eigen::Index x = 0; x < src.x_size(); ++x) {
        const double w = src.px[x];
        if (w <= 0.0) continue;
        for (Eigen::Index xh = 0; xh < kernel.xhat_size; ++xh) {
            for (Eigen::Index sh = 0; sh < kernel.shat_size; ++sh) {
                const double p = kernel.table(x, kernel.pair_index(xh, sh));
                d_o += w * p * spec.d_o(x, xh);
                d_s += w * p * spec.d_hat_s(x, sh);
            }
        }
    }
    return {d_o, d_s};
}

std::pair<double, double> d_max(const DiscreteSemanticSource& src, const DistortionSpec& spec) {
    if (spec.d_o.rows() != src.x_size() || spec.d_hat_s.rows() != src.x_size())
        throw DimensionMismatch("distortion tables do not match the source");
    const Eigen::VectorXd col_o = spec.d_o.transpose() * src.px;
    const Eigen::VectorXd col_s = spec.d_hat_s.transpose() * src.px;
    return {col_o.minCoeff(), col_s.minCoeff()};
}

bool achievable(const RDPoint& point, double capacity_bits) {
    if (capacity_bits < 0.0) throw DomainError("capacity must be nonnegative");
    return point.rate_bits <= capacity_bits;
}

ReproductionKernel constant_kernel(Eigen::Index x_size, const ReproductionMarginal& m) {
    ReproductionKernel k;
    k.xhat_size = m.table.rows();
    k.shat_size = m.table.cols();
    k.table.resize(x_size, k.pairs());
    const Eigen::VectorXd flat = m.flat();
    for (Eigen::Index x = 0; x < x_size; ++x) k.table.row(x) = flat.transpose();
    return k;
}

Eigen::MatrixXd hamming_distortion(Eigen::Index a, Eigen::Index b) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Ones(a, b);
    for (Eigen::Index i = 0; i < std::min(a, b); ++i) d(i, i) = 0.0;
    return d;
}

Eigen::MatrixXd squared_error_distortion(const Eigen::MatrixXd& reps_a,
                                         const Eigen::MatrixXd& reps_b) {
    if (reps_a.cols() != reps_b.cols())
        throw DimensionMismatch("representative dimensions differ");
    Eigen::MatrixXd d(reps_a.rows(), reps_b.rows());
    for (Eigen::Index i = 0; i < reps_a.rows(); ++i)
        for (Eigen::Index j = 0; j < reps_b.rows(); ++j)
            d(i, j) = (reps_a.row(i) - reps_b.row(j)).squaredNorm();
    return d;
}

Eigen::MatrixXd cross_entropy_distortion(Eigen::Index classes,
                                         const Eigen::MatrixXd& prob_vectors) {
    if (prob_vectors.cols() != classes)
        throw DimensionMismatch("probability vectors must have one column per class");
    Eigen::MatrixXd d(classes, prob_vectors.rows());
    for (Eigen::Index k = 0; k < classes; ++k)
        for (Eigen::Index j = 0; j < prob_vectors.rows(); ++j)
            d(k, j) = -std::log(std::max(prob_vectors(j, k), 1e-12));
    return d;
}

}  // namespace semrd
