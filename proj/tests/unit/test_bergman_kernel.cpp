#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../oracles.hpp"
#include "treeberg/bergman_kernel.hpp"
#include "treeberg/calderon_zygmund.hpp"

using namespace treeberg;

TEST_CASE("Gamma") {
    const Tree tree(2);
    CHECK(gamma(tree, {0}, {1, 0}, {1, 1}) == 0.0);
    CHECK(gamma(tree, {}, {0, 1}, {0, 0}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(gamma(tree, {}, {0, 1}, {2}) == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
    CHECK(gamma(tree, {1}, {1, 0}, {1, 1, 0}) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(gamma(tree, {1}, {1, 0}, {1, 0, 1}) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("kernel spot values") {
    const KernelEvaluator k(exp_measure(2, 2));
    const Tree& tree = k.tree();
    for (const auto& x : tree.ball(4)) {
        CHECK(k.recursive({}, x) == doctest::Approx(0.4).epsilon(1e-15));
        CHECK(k.closed({}, x) == doctest::Approx(0.4).epsilon(1e-15));
        CHECK(k.from_basis({}).evaluate(tree, x) == doctest::Approx(0.4).epsilon(1e-15));
    }
    const auto at_root = k.from_basis({});
    CHECK(at_root.c0() == doctest::Approx(0.4));
    CHECK(at_root.terms().empty());
    const double b0 = 20.0 / 21.0;
    for (const auto& value : {k.recursive({1}, {1}), k.closed({1}, {1}), k.from_basis({1}).evaluate(tree, {1})}) {
        CHECK(value == doctest::Approx(0.4 + (2.0 / 3.0) / b0).epsilon(1e-13));
        CHECK(value == doctest::Approx(1.1).epsilon(1e-13));
    }
    for (const auto& value : {k.recursive({1}, {2}), k.closed({1}, {2}), k.from_basis({1}).evaluate(tree, {2})}) {
        CHECK(value == doctest::Approx(0.05).epsilon(1e-12));
    }
}

TEST_CASE("three evaluations agree, and the kernel is symmetric and radial in the profile") {
    for (int q : {2, 3}) {
        for (double alpha : {1.5, 2.0, 3.0}) {
            const KernelEvaluator k(exp_measure(q, alpha));
            const Tree& tree = k.tree();
            const auto ball = tree.ball(q == 2 ? 4 : 3);
            std::map<std::tuple<int, int, int>, double> seen;
            for (const auto& z : ball) {
                const auto expansion = k.from_basis(z);
                for (const auto& x : ball) {
                    const double closed = k.closed(z, x);
                    const double rounding = 1e-13 * std::max(1.0, std::abs(closed));
                    CHECK(std::abs(k.recursive(z, x) - closed) <= 1e-10);
                    CHECK(std::abs(expansion.evaluate(tree, x) - closed) <= 1e-10);
                    CHECK(std::abs(k.closed(x, z) - closed) <= rounding);
                    CHECK(std::abs(k(z, x) - closed) <= 1e-12);
                    const auto key = std::make_tuple(z.norm(), x.norm(), tree.confluent_norm(z, x));
                    if (auto it = seen.find(key); it != seen.end()) {
                        CHECK(std::abs(it->second - closed) <= rounding);
                    } else {
                        seen[key] = closed;
                    }
                }
            }
        }
    }
}

TEST_CASE("extended-precision routes agree with each other and with the double ones") {
    const KernelEvaluator k(exp_measure(3, 3));
    const Tree& tree = k.tree();
    const auto vs = tree.ball(4);
    for (const auto& z : vs) {
        for (const auto& x : vs) {
            const long double c = k.closed_extended(z, x);
            CHECK(std::abs(static_cast<double>(k.recursive_extended(z, x) - c)) <= 1e-11);
            CHECK(std::abs(static_cast<double>(k.from_basis_extended(z, x) - c)) <= 1e-11);
            CHECK(k.closed(z, x) == doctest::Approx(static_cast<double>(c)).epsilon(1e-14));
        }
    }
}

TEST_CASE("kernel for a tabulated measure") {
    const auto m = RadialMeasure::table(2, {1.0, 0.3, 0.08, 0.03}, 0.3);
    const KernelEvaluator k(m);
    const Tree& tree = k.tree();
    for (const auto& z : tree.ball(3)) {
        const auto expansion = k.from_basis(z);
        for (const auto& x : tree.ball(4)) {
            CHECK(std::abs(k.recursive(z, x) - k.closed(z, x)) <= 1e-10);
            CHECK(std::abs(expansion.evaluate(tree, x) - k.closed(z, x)) <= 1e-10);
        }
    }
    CHECK_THROWS_AS(KernelEvaluator(RadialMeasure::table(2, {1.0, 0.5})), DivergenceError);
}

TEST_CASE("reproducing property") {
    const auto m = exp_measure(2, 2);
    const KernelEvaluator k(m);
    const Tree& tree = k.tree();
    std::vector<HarmonicExpansion> basis{HarmonicExpansion(1.0)};
    for (const auto& v : tree.ball(3)) {
        for (int j = 1; j < tree.successor_count(v); ++j) {
            basis.push_back(HarmonicExpansion::basis_function(v, j));
        }
    }
    for (const auto& z : tree.ball(4)) {
        const auto kz = k.from_basis(z);
        for (const auto& f : basis) {
            CHECK(std::abs(inner_product(f, kz, m) - f.evaluate(tree, z)) <= 1e-12);
        }
    }
}

TEST_CASE("K_z is harmonic") {
    const KernelEvaluator k(exp_measure(3, 1.5));
    const Tree& tree = k.tree();
    for (const auto& z : tree.ball(2)) {
        const auto dense = k.from_basis(z).render(tree, 5);
        CHECK_NOTHROW(require_harmonic(dense, 4, 1e-10));
    }
}

TEST_CASE("absolute bound on the kernel profile") {
    const KernelEvaluator k(exp_measure(2, 2));
    for (int nz = 0; nz <= 8; ++nz) {
        for (int nx = 0; nx <= 8; ++nx) {
            for (int l = 0; l <= std::min(nz, nx); ++l) {
                CHECK(std::abs(k.profile(nz, nx, l)) <= k.abs_bound(l) + 1e-12);
            }
        }
    }
}

TEST_CASE("kernel table output") {
    const KernelEvaluator k(exp_measure(2, 2));
    std::ostringstream out;
    write_kernel_table(out, k, 3);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "nz,nx,l,K");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        if (line.rfind("0,", 0) == 0) {
            CHECK(std::stod(line.substr(line.rfind(',') + 1)) == doctest::Approx(0.4).epsilon(1e-15));
        }
    }
    CHECK(rows == 30);
}

namespace {

// Direct enumeration: sup over x, y in T_v, |x|,|y| <= |v| + depth_xy, of the
// sum of |K(z,x) - K(z,y)| mu(z) over z in Ball(o,Z) outside T_v.
double hormander_by_enumeration(const KernelEvaluator& k, int nv, int depth_xy, int z_max) {
    const Tree& tree = k.tree();
    const Vertex v(std::vector<int>(static_cast<std::size_t>(nv), 0));
    const auto inside = tree.sector(v, nv + depth_xy);
    std::vector<Vertex> outside;
    for (const auto& z : tree.ball(z_max)) {
        if (!v.is_prefix_of(z)) {
            outside.push_back(z);
        }
    }
    double best = 0.0;
    for (const auto& x : inside) {
        for (const auto& y : inside) {
            double sum = 0.0;
            for (const auto& z : outside) {
                sum += std::abs(k.closed(z, x) - k.closed(z, y)) * std::pow(2.0, -2.0 * z.norm());
            }
            best = std::max(best, sum);
        }
    }
    return best;
}

} // namespace

TEST_CASE("Hormander supremum against direct enumeration") {
    const auto m = exp_measure(2, 2);
    const KernelEvaluator k(m);
    const int z_max = 9;
    // a zero tail bound pins the truncation at z_max
    const ProfileKernel exact{[&k](int nz, int nx, int l) { return k.profile(nz, nx, l); },
                              [](int, int) { return 0.0; }};
    for (int nv = 1; nv <= 3; ++nv) {
        const auto scan = hormander_profile(exact, m, nv, 1, z_max);
        CHECK(scan.z_truncation == z_max);
        double expected = 0.0;
        for (int w = 1; w <= nv; ++w) {
            expected = std::max(expected, hormander_by_enumeration(k, w, 1, z_max));
        }
        CHECK(scan.value == doctest::Approx(expected).epsilon(1e-12));
    }
    // the truncation is small: the full scan changes by no more than its tail bound
    const auto deep = hormander_constant_for_kernel(m, 3, 1, 60);
    const auto shallow = hormander_constant_for_kernel(m, 3, 1, z_max);
    CHECK(deep.value - shallow.value <= shallow.tail_bound + 1e-12);
}

TEST_CASE("Hormander supremum is finite and settles as |v| grows") {
    const auto m = exp_measure(2, 2);
    double previous = 0.0;
    for (int depth = 3; depth <= 5; ++depth) {
        const auto r = hormander_constant_for_kernel(m, depth, 2, 40);
        CHECK(std::isfinite(r.value));
        CHECK(r.tail_bound <= 0.1 * r.value);
        if (previous > 0.0) {
            CHECK(r.value / previous <= 1.1);
        }
        previous = r.value;
    }
    // the sum over confluent depths used in the proof stays below q/(q-1)
    for (int nv = 1; nv <= 12; ++nv) {
        double s = 0.0;
        for (int l = 0; l < nv; ++l) {
            s += std::pow(2.0, l - nv);
        }
        CHECK(s <= 2.0);
    }
}

TEST_CASE("Hormander check for stub kernels") {
    const auto m = exp_measure(2, 2);
    const ProfileKernel zero{[](int, int, int) { return 0.0; }, [](int, int) { return 0.0; }};
    CHECK(hormander_check(zero, m, 4, 2, 20).value == 0.0);
    CHECK(hormander_check(zero, m, 4, 2, 20).tail_ok);

    // grows in |z| faster than mu_2 decays; differences in x keep it from cancelling
    const ProfileKernel growing{[](int nz, int nx, int) { return std::pow(2.0, 2.0 * nz) * std::pow(2.0, -nx); },
                                {}};
    const auto bad = hormander_check(growing, m, 3, 1, 20);
    CHECK_FALSE(bad.tail_ok);

    const PointwiseKernel no_bound{[](const Vertex&, const Vertex&) { return 1.0; }, {}};
    CHECK_THROWS_AS(hormander_check(no_bound, m, 2, 1, 10), ValidationError);

    const auto k = std::make_shared<KernelEvaluator>(m);
    // |K(z,x)| <= abs_bound(|x|) whatever |z| is; x stays within depth 2 here
    const PointwiseKernel pointwise{[k](const Vertex& z, const Vertex& x) { return k->closed(z, x); },
                                    [k](int) { return k->abs_bound(2); }};
    const ProfileKernel profile{[k](int nz, int nx, int l) { return k->profile(nz, nx, l); },
                                [k](int, int l) { return k->abs_bound(l); }};
    const auto a = hormander_check(pointwise, m, 1, 1, 16);
    const auto b = hormander_check(profile, m, 1, 1, 16);
    CHECK(a.tail_ok);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-10));
}
