#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "treeberg/operators.hpp"

using namespace treeberg;

namespace {

DenseFunction random_function(const Tree& tree, int depth, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return DenseFunction::render(tree, depth, [&](const Vertex&) { return u(rng); });
}

Eigen::VectorXd weights_for(const Tree& tree, int N, double alpha) {
    const auto vs = tree.ball(N);
    Eigen::VectorXd w(static_cast<Eigen::Index>(vs.size()));
    for (std::size_t i = 0; i < vs.size(); ++i) {
        w(static_cast<Eigen::Index>(i)) = std::pow(tree.q(), -alpha * vs[i].norm());
    }
    return w;
}

} // namespace

TEST_CASE("projection of the root indicator is constant") {
    const KernelEvaluator k(exp_measure(2, 2));
    DenseFunction delta(2, 0);
    delta.set({}, 1.0);
    for (const auto& z : k.tree().ball(4)) {
        CHECK(project(k, delta, z) == doctest::Approx(0.4).epsilon(1e-15));
    }
}

TEST_CASE("projection is linear, harmonic and idempotent") {
    const KernelEvaluator k(exp_measure(2, 2));
    const Tree& tree = k.tree();
    const auto f = random_function(tree, 3, 99);
    const auto twice = f.scaled(2.0);
    const auto dense = DenseFunction::render(tree, 5, [&](const Vertex& z) { return project(k, f, z); });
    for (const auto& z : tree.ball(4)) {
        CHECK(project(k, twice, z) == 2.0 * project(k, f, z));
        CHECK(std::abs(laplacian(dense, z)) <= 1e-10);
    }
    const auto pf = project_to_expansion(k, f);
    for (const auto& z : tree.ball(4)) {
        CHECK(pf.evaluate(tree, z) == doctest::Approx(project(k, f, z)).epsilon(1e-10));
        CHECK(project_pairing(k, pf, z) == doctest::Approx(pf.evaluate(tree, z)).epsilon(1e-10));
    }
    for (const auto& v : tree.ball(2)) {
        for (int j = 1; j < tree.successor_count(v); ++j) {
            const auto basis = HarmonicExpansion::basis_function(v, j);
            for (const auto& z : tree.ball(4)) {
                CHECK(std::abs(project_pairing(k, basis, z) - basis.evaluate(tree, z)) <= 1e-10);
            }
        }
    }
}

TEST_CASE("Toeplitz operator on radial exponentials") {
    const OperatorParams params{0.0, 2.0, 2.0, OperatorKind::T};
    const KernelEvaluator k_c(exp_measure(2, 2));
    const auto phi = [](int n) { return std::pow(2.0, -static_cast<double>(n)); };
    for (int z_norm : {0, 1, 3}) {
        double previous_error = 1.0;
        for (int N = 10; N <= 40; N += 10) {
            const double value = toeplitz_apply_radial(params, k_c, phi, N, z_norm);
            const double error = std::abs(value - 0.6);
            CHECK(error <= previous_error);
            previous_error = error;
        }
        CHECK(previous_error <= 1e-8);
    }
    // general a: the limit is (B_{b+R}/B_c) q^{-a|z|}
    const OperatorParams tilted{0.7, 2.5, 2.0, OperatorKind::T};
    const double limit = exp_total_mass(2, 3.5) / exp_total_mass(2, 2.0);
    for (int z_norm : {0, 2}) {
        CHECK(toeplitz_apply_radial(tilted, k_c, phi, 60, z_norm) ==
              doctest::Approx(limit * std::pow(2.0, -0.7 * z_norm)).epsilon(1e-10));
    }
    // the grouped sum agrees with vertex-by-vertex application
    const Tree& tree = k_c.tree();
    const auto dense = DenseFunction::render(tree, 6, [&](const Vertex& x) { return phi(x.norm()); });
    for (const auto& z : tree.ball(3)) {
        CHECK(toeplitz_apply(params, k_c, dense, z) ==
              doctest::Approx(toeplitz_apply_radial(params, k_c, phi, 6, z.norm())).epsilon(1e-12));
    }
}

TEST_CASE("S dominates |T| on nonnegative functions") {
    const KernelEvaluator k_c(exp_measure(2, 2.5));
    const Tree& tree = k_c.tree();
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto f = DenseFunction::render(tree, 4, [&](const Vertex&) { return u(rng); });
    const OperatorParams t{0.3, 1.7, 2.5, OperatorKind::T};
    const OperatorParams s{0.3, 1.7, 2.5, OperatorKind::S};
    for (const auto& z : tree.ball(4)) {
        CHECK(toeplitz_apply(s, k_c, f, z) >= std::abs(toeplitz_apply(t, k_c, f, z)) - 1e-15);
    }
    CHECK_THROWS_AS(toeplitz_apply(OperatorParams{0, 1, 1.0, OperatorKind::S}, k_c, f, {}), ValidationError);
}

TEST_CASE("weighted L^p norms") {
    const auto m = exp_measure(2, 2);
    DenseFunction delta(2, 0);
    delta.set({}, 1.0);
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
        CHECK(lp_norm(m, delta, p) == 1.0);
    }
    const Tree tree(2);
    const auto radial = DenseFunction::render(tree, 14, [](const Vertex& x) { return std::pow(2.0, -x.norm()); });
    CHECK(lp_norm(m, radial, 1.0) == doctest::Approx(lp_norm_exp_radial(2, 2, 1, 1, 14)).epsilon(1e-13));
    CHECK(lp_norm_exp_radial(2, 2, 1, 1, 60) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(lp_norm_exp_radial(2, 2, 1, 1) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK_THROWS_AS(lp_norm_exp_radial(2, 1.5, -1, 2), DivergenceError);
    const auto fv = HarmonicExpansion::basis_function({1, 0}, 1);
    CHECK(lp_power_sum(tree, fv, m, 2.0).value == doctest::Approx(m.b_const(2)).epsilon(1e-12));
}

TEST_CASE("operator matrices") {
    const OperatorParams params{0.5, 1.5, 2.0, OperatorKind::T};
    const KernelEvaluator k_c(exp_measure(2, 2));
    const Tree& tree = k_c.tree();
    const auto m0 = operator_matrix(params, k_c, 0);
    REQUIRE(m0.rows() == 1);
    CHECK(m0(0, 0) == doctest::Approx(0.4).epsilon(1e-15));

    const int N = 3;
    const auto M = operator_matrix(params, k_c, N);
    const auto vs = tree.ball(N);
    REQUIRE(static_cast<std::size_t>(M.rows()) == vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
        for (std::size_t j = 0; j < vs.size(); ++j) {
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
            const double sym = M(ii, jj) * std::pow(2.0, 0.5 * vs[i].norm() + 1.5 * vs[j].norm());
            const double mirrored = M(jj, ii) * std::pow(2.0, 0.5 * vs[j].norm() + 1.5 * vs[i].norm());
            CHECK(sym == doctest::Approx(mirrored).epsilon(1e-13));
        }
        CHECK(M(0, static_cast<Eigen::Index>(i)) == doctest::Approx(0.4 * std::pow(2.0, -1.5 * vs[i].norm())).epsilon(1e-14));
    }
    CHECK_THROWS_AS(operator_matrix(params, k_c, 7), CapacityError);
    CHECK_THROWS_AS(operator_matrix(params, k_c, 5, MatrixCaps{6, 50}), CapacityError);
    CHECK(default_depth_cap(3) == 4);
    CHECK(Tree(5).ball_size(default_depth_cap(5)) <= 200.0);
}

TEST_CASE("adjoint under the L^2 weighting") {
    const double alpha = 2.0;
    const OperatorParams params{0.4, 1.3, 2.2, OperatorKind::T};
    const KernelEvaluator k_c(exp_measure(2, params.c));
    const int N = 3;
    const auto M = operator_matrix(params, k_c, N);
    const auto A = operator_matrix(params.adjoint(alpha), k_c, N);
    const Eigen::VectorXd w = weights_for(k_c.tree(), N, alpha);
    const Eigen::MatrixXd expected = w.cwiseInverse().asDiagonal() * M.transpose() * w.asDiagonal();
    CHECK((expected - A).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("matrix norms against independent computations") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 12;
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            M(i, j) = u(rng);
        }
    }
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) {
        w(i) = 0.2 + u(rng);
    }
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
        const Eigen::MatrixXd A = w.array().pow(1.0 / p).matrix().asDiagonal() * M *
                                  w.array().pow(-1.0 / p).matrix().asDiagonal();
        const auto est = weighted_matrix_norm(M, w, p, 1e-12);
        if (p == 2.0) {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
            CHECK(est.value == doctest::Approx(svd.singularValues()(0)).epsilon(1e-9));
        }
        if (p == 1.0) {
            double best = 0.0;
            for (int j = 0; j < n; ++j) {
                best = std::max(best, A.col(j).cwiseAbs().sum());
            }
            CHECK(est.value == doctest::Approx(best).epsilon(1e-14));
        }
        // sampled lower bound and Riesz-Thorin upper bound
        double sampled = 0.0;
        for (int trial = 0; trial < 2000; ++trial) {
            Eigen::VectorXd x(n);
            for (int i = 0; i < n; ++i) {
                x(i) = u(rng);
            }
            const double ratio = std::pow((A * x).array().abs().pow(p).sum(), 1 / p) /
                                 std::pow(x.array().abs().pow(p).sum(), 1 / p);
            sampled = std::max(sampled, ratio);
        }
        const double one = A.cwiseAbs().colwise().sum().maxCoeff();
        const double inf = A.cwiseAbs().rowwise().sum().maxCoeff();
        CHECK(est.value >= sampled * (1 - 1e-9));
        CHECK(est.value <= std::pow(one, 1 / p) * std::pow(inf, 1 - 1 / p) * (1 + 1e-9));
    }
    const auto zero = weighted_matrix_norm(Eigen::MatrixXd::Zero(4, 4), Eigen::VectorXd::Ones(4), 3.0);
    CHECK(zero.value == 0.0);
    CHECK(zero.method == "zero");
    CHECK_THROWS_AS(weighted_matrix_norm(M, w, 0.5), ValidationError);
    CHECK_THROWS_AS(weighted_matrix_norm(M, Eigen::VectorXd::Ones(3), 2.0), ValidationError);
}

TEST_CASE("norm estimates stabilise inside the boundedness region") {
    const double alpha = 2.0;
    const OperatorParams params{0.0, 3.0, 2.0, OperatorKind::S};
    for (double p : {1.0, 2.0, 3.0}) {
        REQUIRE(predicted_bounded(params.a, params.b, params.c, p, alpha));
        double previous = 0.0;
        for (int N = 3; N <= 6; ++N) {
            const auto est = operator_norm_estimate(params, alpha, 2, p, N);
            CHECK(est.depth == N);
            CHECK(est.witness_ratio.has_value());
            if (previous > 0.0) {
                CHECK(est.value / previous <= 1.1);
            }
            previous = est.value;
        }
    }
}

TEST_CASE("witness functions") {
    const double alpha = 2.0;
    // c > a + b: the ratio grows like q^{(c-a-b)p|v|}
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
        const OperatorParams params{0.5, 1.0, 3.0, OperatorKind::T};
        const double R = default_witness_R(params, alpha, p);
        const double fit = witness_exponent_fit(params, alpha, 2, p, R, 5);
        CHECK(fit == doctest::Approx((3.0 - 1.5) * p).epsilon(0.02));
    }
    // c = a + b: constant ratio
    const OperatorParams flat{0.5, 1.5, 2.0, OperatorKind::T};
    const double e2 = 1.0;
    const double first = witness_gvj(flat, alpha, 2, 2.0, 1, e2, 2.0).ratio();
    for (int d = 2; d <= 8; ++d) {
        CHECK(witness_gvj(flat, alpha, 2, 2.0, d, e2, 2.0).ratio() == doctest::Approx(first).epsilon(1e-12));
    }
    // large R: ||g||_2^2 q^{(2R+alpha)(|v|+1)} -> ||e||_2^2
    const OperatorParams params{0.0, 2.0, 2.0, OperatorKind::T};
    const double R = 30.0;
    const auto w = witness_gvj(params, alpha, 2, 2.0, 2, e2, R);
    CHECK(w.g_norm_p * std::pow(2.0, (2 * R + alpha) * 3) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(witness_gvj(params, alpha, 2, 2.0, 2, e2, -0.9), ValidationError);
    CHECK_THROWS_AS(witness_gvj(OperatorParams{-1.0, 2.0, 2.0, OperatorKind::T}, alpha, 2, 1.0, 2, e2, 2.0),
                    DivergenceError);
}

TEST_CASE("T g_{v,j} is a multiple of q^{-a|z|} f_{v,j}") {
    const OperatorParams params{0.3, 2.0, 2.0, OperatorKind::T};
    const KernelEvaluator k_c(exp_measure(2, params.c));
    const Tree& tree = k_c.tree();
    const double R = 1.0;
    const Vertex v{1};
    const auto g = DenseFunction::render(tree, 14, [&](const Vertex& x) {
        return oracle::basis_value(2, v, 1, x) * std::pow(2.0, -R * x.norm());
    });
    const double factor = exp_measure(2, params.b + R).b_const(1) / exp_measure(2, params.c).b_const(1);
    for (const Vertex& z : {Vertex{}, Vertex{1}, Vertex{1, 0}, Vertex{1, 1, 0}, Vertex{0, 1}}) {
        const double expected = factor * std::pow(2.0, -params.a * z.norm()) * oracle::basis_value(2, v, 1, z);
        CHECK(toeplitz_apply(params, k_c, g, z) == doctest::Approx(expected).epsilon(1e-6).scale(1.0));
    }
    // and its L^p norm is what the closed form says
    const auto closed = witness_gvj(params, 2.0, 2, 1.0, 1, 2 / std::sqrt(2.0), R);
    const auto g_exp = HarmonicExpansion::basis_function(v, 1);
    double g_norm = 0.0;
    for (const auto& [x, value] : g.values()) {
        g_norm += std::abs(value) * std::pow(2.0, -2.0 * x.norm());
    }
    CHECK(closed.g_norm_p == doctest::Approx(g_norm).epsilon(1e-6));
}

TEST_CASE("L^1 moments of the kernel") {
    for (double gamma_exp : {1.5, 2.0, 3.0}) {
        for (double beta : {1.5, 2.0, 3.0}) {
            const KernelEvaluator k(exp_measure(2, gamma_exp));
            const auto v = kernel_l1_moment(k, 0, beta, 200);
            CHECK(v.value == doctest::Approx(exp_total_mass(2, beta) / exp_total_mass(2, gamma_exp)).epsilon(1e-10));
        }
    }
    const KernelEvaluator k2(exp_measure(2, 2));
    for (int n = 2; n <= 8; n += 2) {
        CHECK(kernel_l1_moment(k2, n, 2.0).value / n >= 0.75);
    }
    // gamma < beta: bounded in |x|
    const KernelEvaluator k15(exp_measure(2, 1.5));
    double largest = 0.0;
    for (int n = 0; n <= 8; ++n) {
        largest = std::max(largest, kernel_l1_moment(k15, n, 2.0).value);
    }
    CHECK(largest < 3.0);
    // a direct vertex sum agrees
    const Tree& tree = k2.tree();
    const Vertex x{0, 1, 1};
    double direct = 0.0;
    for (const auto& z : tree.ball(14)) {
        direct += std::abs(k2.closed(z, x)) * std::pow(2.0, -2.0 * z.norm());
    }
    const auto moment = kernel_l1_moment(k2, 3, 2.0, 14);
    CHECK(moment.value == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("boundedness region and Schur window") {
    const double alpha = 2.0;
    CHECK_FALSE(predicted_bounded(0, alpha, alpha, 1, alpha));
    for (double beta : {2.5, 3.0}) {
        for (double p : {1.0, 1.5, 2.0, 3.0}) {
            CHECK(predicted_bounded(0, beta, beta, p, alpha) == (p * (beta - 1) > alpha - 1));
        }
    }
    CHECK(predicted_bounded(0, 2.0, 2.0, 1.5, alpha));
    CHECK_FALSE(predicted_bounded(0, 2.0, 2.5, 2.0, alpha));
    CHECK(predicted_bounded(0.5, 2.0, 1.5, 1.0, alpha));
    CHECK(schur_window(0, 3.0, 3.0, 2.0, alpha).nonempty);
    CHECK_FALSE(schur_window(-1.0, 3.0, 2.0, 2.0, alpha).nonempty);
    const auto edge = schur_window(0, 3.0, 3.0, 1.0, alpha);
    CHECK(edge.degenerate);
    CHECK(edge.nonempty);
    // for p > 1 the window is nonempty exactly on the region
    for (double a : {-0.6, 0.0, 0.4}) {
        for (double b : {1.2, 1.8, 2.6}) {
            for (double p : {1.5, 2.0, 3.0}) {
                const double c = a + b - 0.25;
                if (c > 1.0) {
                    CHECK(schur_window(a, b, c, p, alpha).nonempty == predicted_bounded(a, b, c, p, alpha));
                }
            }
        }
    }
}

TEST_CASE("dual pairing") {
    const auto m = exp_measure(2, 2);
    const Tree tree(2);
    CHECK(dual_pairing(HarmonicExpansion(1.0), HarmonicExpansion(1.0), m) == doctest::Approx(2.5));
    CHECK(dual_pairing(HarmonicExpansion::basis_function({0}, 1), HarmonicExpansion::basis_function({0, 1}, 1), m) == 0.0);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        HarmonicExpansion f(u(rng)), g(u(rng));
        for (const auto& v : tree.ball(2)) {
            for (int j = 1; j < tree.successor_count(v); ++j) {
                f.add_term(v, j, u(rng));
                g.add_term(v, j, u(rng));
            }
        }
        for (double p : {1.5, 3.0}) {
            const double pd = p / (p - 1);
            const double bound = std::pow(lp_power_sum(tree, f, m, p).value, 1 / p) *
                                 std::pow(lp_power_sum(tree, g, m, pd).value, 1 / pd);
            CHECK(std::abs(dual_pairing(f, g, m)) <= bound * (1 + 1e-9));
        }
    }
}
