#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "semrd/dual.hpp"
#include "semrd/error.hpp"
#include "semrd/numerics.hpp"
#include "semrd/oracle.hpp"

using namespace semrd;

namespace {

struct Instance {
    DiscreteSemanticSource src;
    DistortionSpec spec;
};

Instance random_instance(std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd joint(3, 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) joint(i, j) = rng.uniform() + 0.05;
    Eigen::MatrixXd d_o(3, 3), d_s(2, 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) d_o(i, j) = (i == j) ? 0.0 : 0.2 + rng.uniform();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) d_s(i, j) = (i == j) ? 0.0 : 0.2 + rng.uniform();
    Instance inst;
    inst.src = build_source(joint);
    inst.spec = make_distortion_spec(inst.src, d_o, d_s);
    return inst;
}

ReproductionMarginal random_marginal(Eigen::Index xh, Eigen::Index sh, Rng& rng) {
    ReproductionMarginal m;
    m.table.resize(xh, sh);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < xh; ++i)
        for (Eigen::Index j = 0; j < sh; ++j) {
            m.table(i, j) = rng.uniform() + 0.02;
            sum += m.table(i, j);
        }
    m.table /= sum;
    return m;
}

ReproductionMarginal uniform_marginal(Eigen::Index xh, Eigen::Index sh) {
    ReproductionMarginal m;
    m.table = Eigen::MatrixXd::Constant(xh, sh, 1.0 / static_cast<double>(xh * sh));
    return m;
}

DiscreteSemanticSource binary_identity() {
    Eigen::MatrixXd joint(2, 2);
    joint << 0.5, 0.0, 0.0, 0.5;
    return build_source(joint);
}

}  // namespace

TEST_CASE("log_moment is zero at the origin and for point masses is linear") {
    const auto inst = random_instance(1);
    ReproductionMarginal q = uniform_marginal(3, 2);
    CHECK(log_moment(inst.src, q, {0.0, 0.0}, inst.spec) == doctest::Approx(0.0));

    ReproductionMarginal atom;
    atom.table = Eigen::MatrixXd::Zero(3, 2);
    atom.table(1, 0) = 1.0;
    const DualParams p{-1.3, -0.4};
    double expected = 0.0;
    for (int x = 0; x < 3; ++x)
        expected += inst.src.px[x] *
                    (p.alpha1 * inst.spec.d_o(x, 1) + p.alpha2 * inst.spec.d_hat_s(x, 0));
    CHECK(log_moment(inst.src, atom, p, inst.spec) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("log_moment two-term hand value") {
    const auto src = binary_identity();
    const auto spec = make_distortion_spec(src, hamming_distortion(2, 2),
                                           hamming_distortion(2, 2));
    // uniform over two pairs (0,0) and (1,1); only d_o active
    ReproductionMarginal q;
    q.table = Eigen::MatrixXd::Zero(2, 2);
    q.table(0, 0) = 0.5;
    q.table(1, 1) = 0.5;
    const double got = log_moment(src, q, {-1.0, 0.0}, spec);
    CHECK(got == doctest::Approx(std::log((1.0 + std::exp(-1.0)) / 2.0)).epsilon(1e-13));
}

TEST_CASE("log_moment is nonpositive on the feasible quadrant") {
    Rng rng(3);
    const auto inst = random_instance(2);
    for (int t = 0; t < 25; ++t) {
        const DualParams p{-3.0 * rng.uniform(), -3.0 * rng.uniform()};
        const auto q = random_marginal(3, 2, rng);
        CHECK(log_moment(inst.src, q, p, inst.spec) <= 1e-12);
    }
}

TEST_CASE("gradient at the origin is the untilted expectation") {
    const auto inst = random_instance(4);
    Rng rng(5);
    const auto q = random_marginal(3, 2, rng);
    const auto [g1, g2] = log_moment_grad(inst.src, q, {0.0, 0.0}, inst.spec);
    double e_o = 0.0, e_s = 0.0;
    for (int x = 0; x < 3; ++x)
        for (int xh = 0; xh < 3; ++xh)
            for (int sh = 0; sh < 2; ++sh) {
                e_o += inst.src.px[x] * q.table(xh, sh) * inst.spec.d_o(x, xh);
                e_s += inst.src.px[x] * q.table(xh, sh) * inst.spec.d_hat_s(x, sh);
            }
    CHECK(g1 == doctest::Approx(e_o).epsilon(1e-12));
    CHECK(g2 == doctest::Approx(e_s).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
    Rng rng(6);
    for (std::uint64_t seed = 10; seed < 14; ++seed) {
        const auto inst = random_instance(seed);
        for (int t = 0; t < 20; ++t) {
            const auto q = random_marginal(3, 2, rng);
            const DualParams p{-0.05 - 2.5 * rng.uniform(), -0.05 - 2.5 * rng.uniform()};
            const auto [g1, g2] = log_moment_grad(inst.src, q, p, inst.spec);
            const double h = 1e-5;
            const double f1p = log_moment(inst.src, q, {p.alpha1 + h, p.alpha2}, inst.spec);
            const double f1m = log_moment(inst.src, q, {p.alpha1 - h, p.alpha2}, inst.spec);
            const double f2p = log_moment(inst.src, q, {p.alpha1, p.alpha2 + h}, inst.spec);
            const double f2m = log_moment(inst.src, q, {p.alpha1, p.alpha2 - h}, inst.spec);
            CHECK(std::abs(g1 - (f1p - f1m) / (2 * h)) / std::max(1e-6, std::abs(g1)) < 1e-6);
            CHECK(std::abs(g2 - (f2p - f2m) / (2 * h)) / std::max(1e-6, std::abs(g2)) < 1e-6);
            CHECK(g1 >= 0.0);
            CHECK(g2 >= 0.0);
        }
    }
}

TEST_CASE("hessian matches finite differences and stays positive semidefinite") {
    Rng rng(8);
    for (std::uint64_t seed = 20; seed < 23; ++seed) {
        const auto inst = random_instance(seed);
        for (int t = 0; t < 20; ++t) {
            const auto q = random_marginal(3, 2, rng);
            const DualParams p{-0.05 - 2.0 * rng.uniform(), -0.05 - 2.0 * rng.uniform()};
            const Eigen::Matrix2d h = log_moment_hessian(inst.src, q, p, inst.spec);
            const double eps = 1e-4;
            const auto f = [&](double a1, double a2) {
                return log_moment(inst.src, q, {a1, a2}, inst.spec);
            };
            const double h11 = (f(p.alpha1 + eps, p.alpha2) - 2.0 * f(p.alpha1, p.alpha2) +
                                f(p.alpha1 - eps, p.alpha2)) /
                               (eps * eps);
            const double h22 = (f(p.alpha1, p.alpha2 + eps) - 2.0 * f(p.alpha1, p.alpha2) +
                                f(p.alpha1, p.alpha2 - eps)) /
                               (eps * eps);
            const double h12 = (f(p.alpha1 + eps, p.alpha2 + eps) -
                                f(p.alpha1 + eps, p.alpha2 - eps) -
                                f(p.alpha1 - eps, p.alpha2 + eps) +
                                f(p.alpha1 - eps, p.alpha2 - eps)) /
                               (4.0 * eps * eps);
            CHECK(std::abs(h(0, 0) - h11) < 1e-6);
            CHECK(std::abs(h(1, 1) - h22) < 1e-6);
            CHECK(std::abs(h(0, 1) - h12) < 1e-6);
            CHECK(h(0, 0) >= -1e-12);
            CHECK(h(1, 1) >= -1e-12);
            CHECK(h.determinant() >= -1e-10);
        }
    }
}

TEST_CASE("hessian degenerates for constant distortions and point masses") {
    const auto inst = random_instance(30);
    DistortionSpec flat = inst.spec;
    flat.d_o.setConstant(0.7);
    Rng rng(31);
    const auto q = random_marginal(3, 2, rng);
    const Eigen::Matrix2d h = log_moment_hessian(inst.src, q, {-1.0, -1.0}, flat);
    CHECK(std::abs(h(0, 0)) < 1e-14);

    ReproductionMarginal atom;
    atom.table = Eigen::MatrixXd::Zero(3, 2);
    atom.table(2, 1) = 1.0;
    const Eigen::Matrix2d h2 = log_moment_hessian(inst.src, atom, {-1.0, -1.0}, inst.spec);
    CHECK(h2.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("tilted measure reduces to q at the origin and concentrates in the hard limit") {
    const auto inst = random_instance(40);
    Rng rng(41);
    const auto q = random_marginal(3, 2, rng);
    const auto t0 = tilted_measure(inst.src, q, {0.0, 0.0}, inst.spec);
    const Eigen::VectorXd flat = q.flat();
    for (int x = 0; x < 3; ++x)
        CHECK((t0.rows.row(x).transpose() - flat).cwiseAbs().maxCoeff() < 1e-14);

    const auto hard = tilted_measure(inst.src, q, {-50.0, 0.0}, inst.spec);
    for (int x = 0; x < 3; ++x) {
        // d_o has a unique zero at xhat = x; the smallest competing gap is
        // 0.2, so the off-minimizer residue is at most exp(-10)
        double on_min = 0.0;
        for (int sh = 0; sh < 2; ++sh) on_min += hard.rows(x, x * 2 + sh);
        CHECK(on_min == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(hard.rows.row(x).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("tilted two-term softmax by hand") {
    const auto src = binary_identity();
    const auto spec = make_distortion_spec(src, hamming_distortion(2, 2),
                                           hamming_distortion(2, 2));
    ReproductionMarginal q;
    q.table = Eigen::MatrixXd::Zero(2, 2);
    q.table(0, 0) = 0.5;
    q.table(1, 1) = 0.5;
    const auto t = tilted_measure(src, q, {-1.0, 0.0}, spec);
    const double w_match = 1.0 / (1.0 + std::exp(-1.0));
    CHECK(t.rows(0, 0) == doctest::Approx(w_match).epsilon(1e-13));
    CHECK(t.rows(0, 3) == doctest::Approx(1.0 - w_match).epsilon(1e-13));
}

TEST_CASE("dual objective arithmetic") {
    CHECK(dual_objective({0.0, 0.0}, 1.0, 2.0, 0.0) == 0.0);
    CHECK(dual_objective({-1.0, 0.0}, 0.5, 9.0, -1.0) == doctest::Approx(0.5));
}

TEST_CASE("dual_sup identifies the slack case at generous targets") {
    const auto inst = random_instance(50);
    Rng rng(51);
    const auto q = random_marginal(3, 2, rng);
    const auto [e_o, e_s] = log_moment_grad(inst.src, q, {0.0, 0.0}, inst.spec);
    const auto res = dual_sup(inst.src, q, e_o + 0.5, e_s + 0.5, inst.spec);
    CHECK(res.kkt_case == 4);
    CHECK(res.rate_nats == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.params.alpha1 == doctest::Approx(0.0));
    CHECK(res.params.alpha2 == doctest::Approx(0.0));
}

TEST_CASE("dual_sup recovers the classic binary rate in the one-sided case") {
    const auto src = binary_identity();
    const auto spec = make_distortion_spec(src, hamming_distortion(2, 2),
                                           hamming_distortion(2, 2));
    // classic optimal output marginal is uniform; semantic target enormous
    const auto res = dual_sup(src, uniform_marginal(2, 2), 0.1, 10.0, spec);
    CHECK(res.converged);
    CHECK(res.kkt_case == 3);
    const double expected = std::log(2.0) - binary_entropy_nats(0.1);
    CHECK(res.rate_nats == doctest::Approx(expected).epsilon(1e-6));
    CHECK(res.params.alpha1 == doctest::Approx(std::log(1.0 / 9.0)).epsilon(1e-5));
}

TEST_CASE("dual objective is concave along random segments") {
    const auto inst = random_instance(60);
    Rng rng(61);
    const auto q = random_marginal(3, 2, rng);
    for (int t = 0; t < 20; ++t) {
        const DualParams a{-3.0 * rng.uniform(), -3.0 * rng.uniform()};
        const DualParams b{-3.0 * rng.uniform(), -3.0 * rng.uniform()};
        const double lam = rng.uniform();
        const double d_o = 0.4, d_s = 0.4;
        const auto value = [&](const DualParams& p) {
            return dual_objective(p, d_o, d_s, log_moment(inst.src, q, p, inst.spec));
        };
        const DualParams mid{lam * a.alpha1 + (1 - lam) * b.alpha1,
                             lam * a.alpha2 + (1 - lam) * b.alpha2};
        CHECK(value(mid) >= lam * value(a) + (1 - lam) * value(b) - 1e-10);
    }
}

TEST_CASE("weak duality against feasible kernels") {
    Rng rng(70);
    for (std::uint64_t seed = 80; seed < 85; ++seed) {
        const auto inst = random_instance(seed);
        // random feasible kernel; its own marginal is the reference
        ReproductionKernel k;
        k.xhat_size = 3;
        k.shat_size = 2;
        k.table.resize(3, 6);
        for (int x = 0; x < 3; ++x) {
            double sum = 0.0;
            for (int j = 0; j < 6; ++j) {
                k.table(x, j) = rng.uniform() + 0.02;
                sum += k.table(x, j);
            }
            k.table.row(x) /= sum;
        }
        const auto [d_o, d_s] = expected_distortions(inst.src, k, inst.spec);
        const double rate = kl_rate(inst.src, k);
        const auto q = ba_update_marginal(inst.src, k);
        const auto res = dual_sup(inst.src, q, d_o, d_s, inst.spec);
        CHECK(res.rate_nats <= rate + 1e-9);
    }
}

TEST_CASE("reference-marginal rate dominates the true rate with equality at the optimum") {
    const auto inst = random_instance(90);
    BAConfig cfg;
    cfg.lambda1 = -1.2;
    cfg.lambda2 = -0.8;
    cfg.tol = 1e-13;
    cfg.max_iters = 100000;
    const auto ba = ba_solve(inst.src, inst.spec, cfg);
    const auto q_star = ba_update_marginal(inst.src, ba.kernel);

    // at the converged marginal the dual bound meets the solver's rate
    const auto at_opt = dual_sup(inst.src, q_star, ba.point.d_o, ba.point.d_s, inst.spec);
    CHECK(at_opt.rate_nats == doctest::Approx(ba.point.rate_nats).epsilon(1e-5));

    // at any other reference it can only be larger
    Rng rng(91);
    for (int t = 0; t < 5; ++t) {
        const auto q = random_marginal(3, 2, rng);
        const auto res = dual_sup(inst.src, q, ba.point.d_o, ba.point.d_s, inst.spec);
        CHECK(res.rate_nats >= ba.point.rate_nats - 1e-7);
    }
}

TEST_CASE("srdf_via_dual equals the solver route") {
    for (std::uint64_t seed : {100ULL, 101ULL, 102ULL}) {
        const auto inst = random_instance(seed);
        BAConfig cfg;
        cfg.tol = 1e-14;
        cfg.max_iters = 200000;
        const DualParams p{-1.0, -0.6};
        cfg.lambda1 = p.alpha1;
        cfg.lambda2 = p.alpha2;
        const auto ba = ba_solve(inst.src, inst.spec, cfg);
        const auto via_dual = srdf_via_dual(inst.src, inst.spec, p, cfg);
        CHECK(std::abs(via_dual.rate_nats - ba.point.rate_nats) < 1e-6);
        CHECK(std::abs(via_dual.d_o - ba.point.d_o) < 1e-6);
        CHECK(std::abs(via_dual.d_s - ba.point.d_s) < 1e-6);
    }
}

TEST_CASE("srdf_via_dual at the origin is the zero-rate point") {
    const auto inst = random_instance(110);
    BAConfig cfg;
    const auto p = srdf_via_dual(inst.src, inst.spec, {0.0, 0.0}, cfg);
    CHECK(p.rate_nats == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("empirical log_moment matches the discrete value on atomized samples") {
    // a two-point source replicated as samples must give the same number
    const auto src = binary_identity();
    const auto spec = make_distortion_spec(src, hamming_distortion(2, 2),
                                           hamming_distortion(2, 2));
    ReproductionMarginal q;
    q.table = Eigen::MatrixXd::Zero(2, 2);
    q.table(0, 0) = 0.5;
    q.table(1, 1) = 0.5;
    const DualParams p{-1.0, -0.5};

    // samples: x in {0,1} uniform; bank = the two pairs of q
    Eigen::MatrixXd d_o_vals(2, 2), d_s_vals(2, 2);
    for (int n = 0; n < 2; ++n)
        for (int m = 0; m < 2; ++m) {
            d_o_vals(n, m) = spec.d_o(n, m);
            d_s_vals(n, m) = spec.d_hat_s(n, m);
        }
    const double empirical = log_moment_empirical(d_o_vals, d_s_vals, p);
    const double exact = log_moment(src, q, p, spec);
    CHECK(empirical == doctest::Approx(exact).epsilon(1e-13));

    const auto [g1, g2] = log_moment_empirical_grad(d_o_vals, d_s_vals, p);
    const auto [e1, e2] = log_moment_grad(src, q, p, spec);
    CHECK(g1 == doctest::Approx(e1).epsilon(1e-12));
    CHECK(g2 == doctest::Approx(e2).epsilon(1e-12));
}

TEST_CASE("empty support is rejected") {
    const auto inst = random_instance(120);
    ReproductionMarginal zero;
    zero.table = Eigen::MatrixXd::Zero(3, 2);
    CHECK_THROWS_AS(log_moment(inst.src, zero, {-1.0, -1.0}, inst.spec), EmptySupport);
}
