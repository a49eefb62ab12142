#include "semrd/dual.hpp"

#include <cmath>

#include "semrd/error.hpp"
#include "semrd/numerics.hpp"

namespace semrd {

namespace {

void check_params(const DualParams& p) {
    if (p.alpha1 > 0.0 || p.alpha2 > 0.0)
        throw DomainError("dual multipliers must be nonpositive");
    if (!std::isfinite(p.alpha1) || !std::isfinite(p.alpha2))
        throw NonFinite("dual multipliers must be finite");
}

// Log-weights ln q_j + a1 d_o(x, xhat(j)) + a2 d_hat_s(x, shat(j)) for row x.
// Zero-mass reference cells become -inf and drop out of every reduction.
void row_log_weights(const Eigen::VectorXd& log_q, const DualParams& p,
                     const DistortionSpec& spec, Eigen::Index x, Eigen::VectorXd& out) {
    const Eigen::Index shat = spec.shat_size();
    for (Eigen::Index xh = 0; xh < spec.xhat_size(); ++xh)
        for (Eigen::Index sh = 0; sh < shat; ++sh)
            out[xh * shat + sh] =
                log_q[xh * shat + sh] + p.alpha1 * spec.d_o(x, xh) + p.alpha2 * spec.d_hat_s(x, sh);
}

Eigen::VectorXd reference_log_weights(const ReproductionMarginal& q) {
    const Eigen::VectorXd flat = q.flat();
    if (flat.sum() <= 0.0) throw EmptySupport("reference marginal has no support");
    Eigen::VectorXd log_q(flat.size());
    for (Eigen::Index j = 0; j < flat.size(); ++j)
        log_q[j] = flat[j] > 0.0 ? std::log(flat[j]) : -std::numeric_limits<double>::infinity();
    return log_q;
}

}  // namespace

double log_moment(const DiscreteSemanticSource& src, const ReproductionMarginal& q,
                  const DualParams& params, const DistortionSpec& spec) {
    check_params(params);
    const Eigen::VectorXd log_q = reference_log_weights(q);
    Eigen::VectorXd lw(log_q.size());
    double value = 0.0;
    for (Eigen::Index x = 0; x < src.x_size(); ++x) {
        if (src.px[x] <= 0.0) continue;
        row_log_weights(log_q, params, spec, x, lw);
        const double lse = log_sum_exp(lw);
        if (!std::isfinite(lse)) throw EmptySupport("tilted row underflowed to empty support");
        value += src.px[x] * lse;
    }
    return value;
}

TiltedMeasure tilted_measure(const DiscreteSemanticSource& src, const ReproductionMarginal& q,
                             const DualParams& params, const DistortionSpec& spec) {
    check_params(params);
    const Eigen::VectorXd log_q = reference_log_weights(q);
    TiltedMeasure t;
    t.xhat_size = spec.xhat_size();
    t.shat_size = spec.shat_size();
    t.rows.resize(src.x_size(), log_q.size());
    Eigen::VectorXd lw(log_q.size());
    for (Eigen::Index x = 0; x < src.x_size(); ++x) {
        row_log_weights(log_q, params, spec, x, lw);
        const double lse = log_sum_exp(lw);
        if (!std::isfinite(lse)) throw EmptySupport("tilted row underflowed to empty support");
        for (Eigen::Index j = 0; j < lw.size(); ++j) t.rows(x, j) = std::exp(lw[j] - lse);
    }
    return t;
}

std::pair<double, double> log_moment_grad(const DiscreteSemanticSource& src,
                                          const ReproductionMarginal& q,
                                          const DualParams& params, const DistortionSpec& spec) {
    const TiltedMeasure t = tilted_measure(src, q, params, spec);
    double g1 = 0.0;
    double g2 = 0.0;
    for (Eigen::Index x = 0; x < src.x_size(); ++x) {
        const double w = src.px[x];
        if (w <= 0.0) continue;
        for (Eigen::Index xh = 0; xh < t.xhat_size; ++xh)
            for (Eigen::Index sh = 0; sh < t.shat_size; ++sh) {
                const double p = t.rows(x, xh * t.shat_size + sh);
                g1 += w * p * spec.d_o(x, xh);
                g2 += w * p * spec.d_hat_s(x, sh);
            }
    }
    return {g1, g2};
}

Eigen::Matrix2d log_moment_hessian(const DiscreteSemanticSource& src,
                                   const ReproductionMarginal& q, const DualParams& params,
                                   const DistortionSpec& spec) {
    const TiltedMeasure t = tilted_measure(src, q, params, spec);
    Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
    for (Eigen::Index x = 0; x < src.x_size(); ++x) {
        const double w = src.px[x];
        if (w <= 0.0) continue;
        double m_o = 0.0, m_s = 0.0, m_oo = 0.0, m_ss = 0.0, m_os = 0.0;
        for (Eigen::Index xh = 0; xh < t.xhat_size; ++xh)
            for (Eigen::Index sh = 0; sh < t.shat_size; ++sh) {
                const double p = t.rows(x, xh * t.shat_size + sh);
                const double a = spec.d_o(x, xh);
                const double b = spec.d_hat_s(x, sh);
                m_o += p * a;
                m_s += p * b;
                m_oo += p * a * a;
                m_ss += p * b * b;
                m_os += p * a * b;
            }
        h(0, 0) += w * (m_oo - m_o * m_o);
        h(1, 1) += w * (m_ss - m_s * m_s);
        h(0, 1) += w * (m_os - m_o * m_s);
    }
    h(1, 0) = h(0, 1);
    return h;
}

double log_moment_empirical(const Eigen::MatrixXd& d_o_vals, const Eigen::MatrixXd& d_s_avg_vals,
                            const DualParams& params) {
    check_params(params);
    if (d_o_vals.rows() != d_s_avg_vals.rows() || d_o_vals.cols() != d_s_avg_vals.cols())
        throw DimensionMismatch("distortion sample matrices differ in shape");
    if (d_o_vals.rows() == 0 || d_o_vals.cols() == 0)
        throw EmptySupport("empty sample matrices");
    const double log_m = std::log(static_cast<double>(d_o_vals.cols()));
    double value = 0.0;
    Eigen::VectorXd a(d_o_vals.cols());
    for (Eigen::Index n = 0; n < d_o_vals.rows(); ++n) {
        a = params.alpha1 * d_o_vals.row(n).transpose() +
            params.alpha2 * d_s_avg_vals.row(n).transpose();
        value += log_sum_exp(a) - log_m;
    }
    return value / static_cast<double>(d_o_vals.rows());
}

std::pair<double, double> log_moment_empirical_grad(const Eigen::MatrixXd& d_o_vals,
                                                    const Eigen::MatrixXd& d_s_avg_vals,
                                                    const DualParams& params) {
    check_params(params);
    if (d_o_vals.rows() != d_s_avg_vals.rows() || d_o_vals.cols() != d_s_avg_vals.cols())
        throw DimensionMismatch("distortion sample matrices differ in shape");
    double g1 = 0.0;
    double g2 = 0.0;
    Eigen::VectorXd a(d_o_vals.cols());
    for (Eigen::Index n = 0; n < d_o_vals.rows(); ++n) {
        a = params.alpha1 * d_o_vals.row(n).transpose() +
            params.alpha2 * d_s_avg_vals.row(n).transpose();
        const double lse = log_sum_exp(a);
        for (Eigen::Index m = 0; m < a.size(); ++m) {
            const double w = std::exp(a[m] - lse);
            g1 += w * d_o_vals(n, m);
            g2 += w * d_s_avg_vals(n, m);
        }
    }
    const double n1 = static_cast<double>(d_o_vals.rows());
    return {g1 / n1, g2 / n1};
}

double dual_objective(const DualParams& params, double d_o, double d_s, double log_moment_value) {
    return params.alpha1 * d_o + params.alpha2 * d_s - log_moment_value;
}

DualSupResult dual_sup(const DiscreteSemanticSource& src, const ReproductionMarginal& q,
                       double d_o, double d_s, const DistortionSpec& spec) {
    if (d_o < 0.0 || d_s < 0.0) throw DomainError("distortion targets must be nonnegative");

    const auto objective = [&](const DualParams& p) {
        return dual_objective(p, d_o, d_s, log_moment(src, q, p, spec));
    };

    DualSupResult res;
    DualParams a{0.0, 0.0};
    double value = 0.0;  // objective at the origin
    const double scale = std::max({1.0, d_o, d_s});
    constexpr int kMaxIters = 200;

    int iter = 0;
    for (; iter < kMaxIters; ++iter) {
        const auto [lg1, lg2] = log_moment_grad(src, q, a, spec);
        const double g1 = d_o - lg1;  // ascent gradient of the objective
        const double g2 = d_s - lg2;

        // components pushing out of the quadrant at the boundary are inactive
        const double pg1 = (a.alpha1 >= -1e-12 && g1 > 0.0) ? 0.0 : g1;
        const double pg2 = (a.alpha2 >= -1e-12 && g2 > 0.0) ? 0.0 : g2;
        if (std::max(std::abs(pg1), std::abs(pg2)) <= 1e-11 * scale) {
            res.converged = true;
            break;
        }

        Eigen::Matrix2d h = log_moment_hessian(src, q, a, spec);
        h(0, 0) += 1e-12;
        h(1, 1) += 1e-12;
        Eigen::Vector2d newton = h.ldlt().solve(Eigen::Vector2d(g1, g2));

        bool moved = false;
        for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
            // Newton first, projected gradient as the fallback
            Eigen::Vector2d dir =
                (attempt == 0 && newton.allFinite() && newton.dot(Eigen::Vector2d(g1, g2)) > 0.0)
                    ? newton
                    : Eigen::Vector2d(pg1, pg2);
            if (dir.norm() == 0.0) continue;
            double t = 1.0;
            for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
                DualParams cand{std::min(0.0, a.alpha1 + t * dir[0]),
                                std::min(0.0, a.alpha2 + t * dir[1])};
                if (cand.alpha1 == a.alpha1 && cand.alpha2 == a.alpha2) continue;
                const double cand_value = objective(cand);
                const double predicted =
                    g1 * (cand.alpha1 - a.alpha1) + g2 * (cand.alpha2 - a.alpha2);
                if (cand_value >= value + 1e-4 * predicted - 1e-15) {
                    a = cand;
                    value = cand_value;
                    moved = true;
                    break;
                }
            }
        }
        if (!moved) {
            // no admissible step left at this scale: treat as stationary
            res.converged = true;
            break;
        }
    }

    res.rate_nats = std::max(value, 0.0);
    res.params = a;
    res.iterations = iter;
    const bool a1_zero = a.alpha1 > -1e-9;
    const bool a2_zero = a.alpha2 > -1e-9;
    if (!a1_zero && !a2_zero)
        res.kkt_case = 1;
    else if (a1_zero && !a2_zero)
        res.kkt_case = 2;
    else if (!a1_zero && a2_zero)
        res.kkt_case = 3;
    else
        res.kkt_case = 4;
    return res;
}

RDPoint srdf_via_dual(const DiscreteSemanticSource& src, const DistortionSpec& spec,
                      const DualParams& params, const BAConfig& inner_cfg) {
    check_params(params);
    BAConfig cfg = inner_cfg;
    cfg.lambda1 = params.alpha1;
    cfg.lambda2 = params.alpha2;
    const BAResult inner = ba_solve(src, spec, cfg);
    const ReproductionMarginal q = ba_update_marginal(src, inner.kernel);

    const auto [d_o, d_s] = log_moment_grad(src, q, params, spec);
    const double lm = log_moment(src, q, params, spec);

    RDPoint p;
    p.alpha1 = params.alpha1;
    p.alpha2 = params.alpha2;
    p.d_o = d_o;
    p.d_s = d_s;
    p.rate_nats = std::max(dual_objective(params, d_o, d_s, lm), 0.0);
    p.rate_bits = nats_to_bits(p.rate_nats);
    p.iterations = inner.point.iterations;
    p.converged = inner.point.converged;
    p.method = Method::ba;
    return p;
}

}  // namespace semrd
