#include "semrd/ba.hpp"

#include <chrono>
#include <cmath>

#include "semrd/error.hpp"
#include "semrd/numerics.hpp"
#include "semrd/parallel.hpp"

namespace semrd {

namespace {

void check_config(const BAConfig& cfg) {
    if (cfg.lambda1 > 0.0 || cfg.lambda2 > 0.0)
        throw DomainError("slope parameters must be nonpositive");
    if (cfg.tol <= 0.0) throw DomainError("tol must be positive");
    if (cfg.max_iters < 1) throw DomainError("max_iters must be at least 1");
}

ReproductionKernel initial_kernel(const DiscreteSemanticSource& src, const DistortionSpec& spec,
                                  const BAConfig& cfg) {
    ReproductionKernel k;
    k.xhat_size = spec.xhat_size();
    k.shat_size = spec.shat_size();
    k.table.resize(src.x_size(), k.pairs());
    if (cfg.init == BAInit::uniform) {
        k.table.setConstant(1.0 / static_cast<double>(k.pairs()));
    } else {
        Rng rng(cfg.seed);
        for (Eigen::Index x = 0; x < k.table.rows(); ++x) {
            double sum = 0.0;
            for (Eigen::Index j = 0; j < k.table.cols(); ++j) {
                k.table(x, j) = 0.05 + rng.uniform();
                sum += k.table(x, j);
            }
            k.table.row(x) /= sum;
        }
    }
    return k;
}

}  // namespace

ReproductionMarginal ba_update_marginal(const DiscreteSemanticSource& src,
                                        const ReproductionKernel& kernel) {
    if (kernel.table.rows() != src.x_size())
        throw DimensionMismatch("kernel rows must match |X|");
    const Eigen::VectorXd flat = kernel.table.transpose() * src.px;
    return ReproductionMarginal::from_flat(flat, kernel.xhat_size, kernel.shat_size);
}

ReproductionKernel ba_update_kernel(const DiscreteSemanticSource& src,
                                    const ReproductionMarginal& marginal,
                                    const DistortionSpec& spec, const BAConfig& cfg) {
    check_config(cfg);
    const Eigen::Index xhat = spec.xhat_size();
    const Eigen::Index shat = spec.shat_size();
    if (marginal.table.rows() != xhat || marginal.table.cols() != shat)
        throw DimensionMismatch("marginal does not match the distortion tables");

    ReproductionKernel out;
    out.xhat_size = xhat;
    out.shat_size = shat;
    out.table.resize(src.x_size(), xhat * shat);

    Eigen::VectorXd log_m(xhat * shat);
    for (Eigen::Index xh = 0; xh < xhat; ++xh)
        for (Eigen::Index sh = 0; sh < shat; ++sh)
            log_m[xh * shat + sh] = std::log(std::max(marginal.table(xh, sh), kProbFloor));

    Eigen::VectorXd logw(xhat * shat);
    for (Eigen::Index x = 0; x < src.x_size(); ++x) {
        for (Eigen::Index xh = 0; xh < xhat; ++xh)
            for (Eigen::Index sh = 0; sh < shat; ++sh)
                logw[xh * shat + sh] = log_m[xh * shat + sh] +
                                       cfg.lambda1 * spec.d_o(x, xh) +
                                       cfg.lambda2 * spec.d_hat_s(x, sh);
        const double shift = logw.maxCoeff();
        if (!std::isfinite(shift))
            throw DegenerateRow("row " + std::to_string(x) + " underflowed in log space");
        // Each entry carries its own normalizer pass, mirroring the update's
        // per-entry denominator; one iteration is Theta(|X| |Xhat|^2 |Shat|^2).
        for (Eigen::Index j = 0; j < logw.size(); ++j) {
            double z = 0.0;
            for (Eigen::Index k = 0; k < logw.size(); ++k) z += std::exp(logw[k] - shift);
            if (z <= 0.0)
                throw DegenerateRow("row " + std::to_string(x) + " normalizer underflowed");
            out.table(x, j) = std::exp(logw[j] - shift) / z;
        }
    }
    return out;
}

BAResult ba_solve(const DiscreteSemanticSource& src, const DistortionSpec& spec,
                  const BAConfig& cfg) {
    check_config(cfg);
    if (spec.d_o.rows() != src.x_size() || spec.d_hat_s.rows() != src.x_size())
        throw DimensionMismatch("distortion tables do not match the source");

    BAResult res;
    res.kernel = initial_kernel(src, spec, cfg);
    const Eigen::Index pairs = res.kernel.pairs();

    // Pairs whose marginal mass stays below 1e-15 for 50 straight iterations
    // are pinned at the floor; the iteration never revives dead support.
    std::vector<int> low_streak(static_cast<std::size_t>(pairs), 0);
    std::vector<bool> frozen(static_cast<std::size_t>(pairs), false);

    double prev_lagrangian = std::numeric_limits<double>::infinity();
    res.trace.stop = BAStop::max_iters;

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();

        ReproductionMarginal m = ba_update_marginal(src, res.kernel);
        for (Eigen::Index xh = 0; xh < m.table.rows(); ++xh) {
            for (Eigen::Index sh = 0; sh < m.table.cols(); ++sh) {
                const std::size_t j = static_cast<std::size_t>(xh * m.table.cols() + sh);
                if (frozen[j]) {
                    m.table(xh, sh) = kProbFloor;
                    continue;
                }
                if (m.table(xh, sh) < 1e-15) {
                    if (++low_streak[j] >= 50) frozen[j] = true;
                } else {
                    low_streak[j] = 0;
                }
            }
        }

        res.kernel = ba_update_kernel(src, m, spec, cfg);

        const double rate = kl_rate(src, res.kernel);
        const auto [d_o, d_s] = expected_distortions(src, res.kernel, spec);
        const double lagrangian = rate - cfg.lambda1 * d_o - cfg.lambda2 * d_s;

        double row_dev = 0.0;
        for (Eigen::Index x = 0; x < res.kernel.table.rows(); ++x)
            row_dev = std::max(row_dev, std::abs(res.kernel.table.row(x).sum() - 1.0));

        const auto t1 = std::chrono::steady_clock::now();
        res.trace.entries.push_back(
            {rate, d_o, d_s, row_dev, std::chrono::duration<double>(t1 - t0).count()});

        res.point.alpha1 = cfg.lambda1;
        res.point.alpha2 = cfg.lambda2;
        res.point.d_o = d_o;
        res.point.d_s = d_s;
        res.point.rate_nats = rate;
        res.point.rate_bits = nats_to_bits(rate);
        res.point.iterations = iter;
        res.point.method = Method::ba;

        if (std::abs(lagrangian - prev_lagrangian) <=
            cfg.tol * std::max(1.0, std::abs(lagrangian))) {
            res.point.converged = true;
            res.trace.stop = BAStop::converged;
            break;
        }
        prev_lagrangian = lagrangian;
    }
    return res;
}

std::vector<SweepEntry> ba_sweep(const DiscreteSemanticSource& src, const DistortionSpec& spec,
                                 const std::vector<std::pair<double, double>>& lambda_grid,
                                 const BAConfig& cfg, unsigned workers) {
    for (const auto& [l1, l2] : lambda_grid)
        if (l1 > 0.0 || l2 > 0.0) throw DomainError("grid slopes must be nonpositive");

    std::vector<SweepEntry> out(lambda_grid.size());
    parallel_for(lambda_grid.size(), workers, [&](std::size_t i) {
        BAConfig point_cfg = cfg;
        point_cfg.lambda1 = lambda_grid[i].first;
        point_cfg.lambda2 = lambda_grid[i].second;
        try {
            out[i].point = ba_solve(src, spec, point_cfg).point;
        } catch (const Error& e) {
            out[i].error = e.what();
        }
    });
    return out;
}

RDPoint conventional_rd(const Eigen::VectorXd& source_marginal, const Eigen::MatrixXd& distortion,
                        double lambda, const BAConfig& cfg) {
    if (source_marginal.size() != distortion.rows())
        throw DimensionMismatch("marginal length must match distortion rows");
    // one-symbol semantic axis turns the generalized solver into classic BA
    Eigen::MatrixXd joint(source_marginal.size(), 1);
    joint.col(0) = source_marginal;
    const DiscreteSemanticSource src = build_source(joint);
    const DistortionSpec spec =
        make_distortion_spec(src, distortion, Eigen::MatrixXd::Zero(1, 1));
    BAConfig run_cfg = cfg;
    run_cfg.lambda1 = lambda;
    run_cfg.lambda2 = 0.0;
    return ba_solve(src, spec, run_cfg).point;
}

RDPoint conventional_rd_at_distortion(const Eigen::VectorXd& source_marginal,
                                      const Eigen::MatrixXd& distortion, double target,
                                      const BAConfig& cfg, double tol) {
    if (target < 0.0) throw DomainError("target distortion must be nonnegative");
    double lo = kHardSlope;  // distortion increases with the slope
    double hi = 0.0;
    RDPoint best = conventional_rd(source_marginal, distortion, hi, cfg);
    if (best.d_o <= target + tol) return best;
    RDPoint low_point = conventional_rd(source_marginal, distortion, lo, cfg);
    if (low_point.d_o >= target) return low_point;
    for (int step = 0; step < 80; ++step) {
        const double mid = 0.5 * (lo + hi);
        RDPoint p = conventional_rd(source_marginal, distortion, mid, cfg);
        best = p;
        if (std::abs(p.d_o - target) <= tol) break;
        if (p.d_o > target) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return best;
}

}  // namespace semrd
