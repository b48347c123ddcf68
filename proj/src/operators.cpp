#include "treeberg/operators.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace treeberg {

void OperatorParams::validate() const {
    if (!(c > 1.0)) {
        throw ValidationError("operator parameter c must exceed 1, got " + std::to_string(c));
    }
    if (!std::isfinite(a) || !std::isfinite(b)) {
        throw ValidationError("operator parameters a, b must be finite");
    }
}

std::string OperatorParams::describe() const {
    std::ostringstream out;
    out << (kind == OperatorKind::S ? "S" : "T") << "(a=" << a << ",b=" << b << ",c=" << c << ")";
    return out.str();
}

double project(const KernelEvaluator& k_beta, const DenseFunction& f, const Vertex& z) {
    double sum = 0.0;
    for (const auto& [x, value] : f.values()) {
        sum += k_beta(z, x) * value * k_beta.measure().density(x);
    }
    return sum;
}

HarmonicExpansion project_to_expansion(const KernelEvaluator& k_beta, const DenseFunction& f) {
    HarmonicExpansion out;
    for (const auto& [x, value] : f.values()) {
        out += k_beta.from_basis(x) * (value * k_beta.measure().density(x));
    }
    return out;
}

double project_pairing(const KernelEvaluator& k_beta, const HarmonicExpansion& g, const Vertex& z) {
    return inner_product(g, k_beta.from_basis(z), k_beta.measure());
}

namespace {

double signed_kernel(const OperatorParams& params, double k) {
    return params.kind == OperatorKind::S ? std::abs(k) : k;
}

double qpow(int q, double e) { return std::pow(static_cast<double>(q), e); }

} // namespace

double toeplitz_apply(const OperatorParams& params, const KernelEvaluator& k_c, const DenseFunction& f,
                      const Vertex& z) {
    params.validate();
    const int q = k_c.q();
    double sum = 0.0;
    for (const auto& [x, value] : f.values()) {
        sum += signed_kernel(params, k_c(z, x)) * value * qpow(q, -params.b * x.norm());
    }
    return qpow(q, -params.a * z.norm()) * sum;
}

double toeplitz_apply_radial(const OperatorParams& params, const KernelEvaluator& k_c,
                             const std::function<double(int)>& phi, int N, int z_norm) {
    params.validate();
    const Tree& tree = k_c.tree();
    const int q = tree.q();
    double sum = 0.0;
    for (int n = 0; n <= N; ++n) {
        double shell = 0.0;
        for (int l = 0; l <= std::min(n, z_norm); ++l) {
            const double count = tree.confluent_class_count(z_norm, l, n);
            if (count > 0.0) {
                shell += count * signed_kernel(params, k_c.profile(z_norm, n, l));
            }
        }
        sum += shell * phi(n) * qpow(q, -params.b * n);
    }
    return qpow(q, -params.a * z_norm) * sum;
}

double lp_norm(const RadialMeasure& m, const DenseFunction& f, double p) {
    if (!(p >= 1.0)) {
        throw ValidationError("L^p norms need p >= 1");
    }
    double sum = 0.0;
    for (const auto& [x, value] : f.values()) {
        sum += std::pow(std::abs(value), p) * m.density(x);
    }
    return std::pow(sum, 1.0 / p);
}

double lp_norm_exp_radial(int q, double alpha, double R, double p, std::optional<int> N) {
    const Tree tree(q);
    const double s = R * p + alpha;
    if (N) {
        double sum = 0.0;
        for (int n = 0; n <= *N; ++n) {
            sum += tree.sphere_size(n) * qpow(q, -s * n);
        }
        return std::pow(sum, 1.0 / p);
    }
    if (!(s > 1.0)) {
        throw DivergenceError("q^{-R|x|} is not in L^p_alpha: Rp + alpha = " + std::to_string(s) +
                              " <= 1");
    }
    return std::pow(exp_total_mass(q, s), 1.0 / p);
}

int default_depth_cap(int q) {
    if (q == 2) {
        return 6;
    }
    if (q == 3) {
        return 4;
    }
    const Tree tree(q);
    int n = 0;
    while (tree.ball_size(n + 1) <= 200.0) {
        ++n;
    }
    return n;
}

Eigen::MatrixXd operator_matrix(const OperatorParams& params, const KernelEvaluator& k_c, int N,
                                const MatrixCaps& caps) {
    params.validate();
    const Tree& tree = k_c.tree();
    const int cap = caps.max_depth >= 0 ? caps.max_depth : default_depth_cap(tree.q());
    if (N < 0 || N > cap) {
        throw CapacityError("matrix depth N=" + std::to_string(N) + " exceeds the cap " +
                            std::to_string(cap) + " for q=" + std::to_string(tree.q()));
    }
    if (tree.ball_size(N) > static_cast<double>(caps.max_side)) {
        throw CapacityError("matrix side " + std::to_string(tree.ball_size(N)) + " exceeds " +
                            std::to_string(caps.max_side));
    }
    const auto vertices = tree.ball(N);
    const auto side = static_cast<Eigen::Index>(vertices.size());
    Eigen::MatrixXd M(side, side);
    for (Eigen::Index i = 0; i < side; ++i) {
        const double wz = qpow(tree.q(), -params.a * vertices[i].norm());
        for (Eigen::Index j = 0; j < side; ++j) {
            const double wx = qpow(tree.q(), -params.b * vertices[j].norm());
            M(i, j) = wz * signed_kernel(params, k_c(vertices[i], vertices[j])) * wx;
        }
    }
    return M;
}

namespace {

Eigen::VectorXd dual_map(const Eigen::VectorXd& y, double exponent) {
    return y.unaryExpr([exponent](double v) {
        return v == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(v), exponent), v);
    });
}

double lp(const Eigen::VectorXd& v, double p) {
    return std::pow(v.array().abs().pow(p).sum(), 1.0 / p);
}

Eigen::VectorXd start_vector(Eigen::Index n) {
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i) = 1.0 + 0.01 * std::sin(static_cast<double>(i + 1));
    }
    return x;
}

} // namespace

NormEstimate weighted_matrix_norm(const Eigen::MatrixXd& M, const Eigen::VectorXd& weights, double p,
                                  double tolerance, int max_iterations) {
    if (!(p >= 1.0)) {
        throw ValidationError("operator norms need p >= 1");
    }
    if (M.rows() != weights.size() || M.cols() != weights.size()) {
        throw ValidationError("weight vector does not match the matrix");
    }
    NormEstimate est;
    est.side = static_cast<std::size_t>(M.rows());
    const Eigen::VectorXd left = weights.array().pow(1.0 / p);
    const Eigen::VectorXd right = weights.array().pow(-1.0 / p);
    const Eigen::MatrixXd A = left.asDiagonal() * M * right.asDiagonal();
    if (A.size() == 0 || A.cwiseAbs().maxCoeff() == 0.0) {
        est.method = "zero";
        return est;
    }
    if (p == 1.0) {
        est.value = A.cwiseAbs().colwise().sum().maxCoeff();
        est.method = "exact-column-sum";
        return est;
    }
    Eigen::VectorXd x = start_vector(A.cols());
    if (p == 2.0) {
        est.method = "power-iteration";
        const Eigen::MatrixXd G = A.transpose() * A;
        x.normalize();
        double lambda = 0.0;
        for (int it = 1; it <= max_iterations; ++it) {
            Eigen::VectorXd y = G * x;
            const double next = x.dot(y);
            const double norm = y.norm();
            if (norm == 0.0) {
                break;
            }
            x = y / norm;
            est.iterations = it;
            if (std::abs(next - lambda) <= tolerance * std::abs(next)) {
                lambda = next;
                est.value = std::sqrt(std::max(lambda, 0.0));
                return est;
            }
            lambda = next;
        }
        throw ConvergenceError("power iteration did not converge in " + std::to_string(max_iterations) +
                               " steps; last estimate " + std::to_string(std::sqrt(std::max(lambda, 0.0))));
    }
    est.method = "boyd-power-method";
    const double pd = p / (p - 1.0);
    x /= lp(x, p);
    double value = 0.0;
    for (int it = 1; it <= max_iterations; ++it) {
        const Eigen::VectorXd y = A * x;
        const double next = lp(y, p);
        const Eigen::VectorXd z = A.transpose() * dual_map(y, p - 1.0);
        Eigen::VectorXd candidate = dual_map(z, pd - 1.0);
        const double norm = lp(candidate, p);
        est.iterations = it;
        if (norm == 0.0) {
            est.value = next;
            return est;
        }
        x = candidate / norm;
        if (std::abs(next - value) <= tolerance * std::abs(next)) {
            est.value = std::max(next, lp(A * x, p));
            return est;
        }
        value = next;
    }
    throw ConvergenceError("Boyd power method did not converge in " + std::to_string(max_iterations) +
                           " steps; last estimate " + std::to_string(value));
}

NormEstimate operator_norm_estimate(const OperatorParams& params, double alpha, int q, double lp_exp,
                                    int N, const MatrixCaps& caps, double tolerance) {
    params.validate();
    const KernelEvaluator k_c(RadialMeasure::exponential(q, params.c));
    const Eigen::MatrixXd M = operator_matrix(params, k_c, N, caps);
    const Tree& tree = k_c.tree();
    const auto vertices = tree.ball(N);
    Eigen::VectorXd w(static_cast<Eigen::Index>(vertices.size()));
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        w(static_cast<Eigen::Index>(i)) = qpow(q, -alpha * vertices[i].norm());
    }
    NormEstimate est = weighted_matrix_norm(M, w, lp_exp, tolerance);
    est.depth = N;

    // Lower bound: truncated g_{v,j} along the leftmost geodesic.
    auto weighted_lp = [&](const Eigen::VectorXd& h) {
        return std::pow((h.array().abs().pow(lp_exp) * w.array()).sum(), 1.0 / lp_exp);
    };
    const double R = 1.0;
    Vertex v;
    for (int depth = 0; depth < N; ++depth, v = v.child(0)) {
        Eigen::VectorXd g(w.size());
        for (std::size_t i = 0; i < vertices.size(); ++i) {
            g(static_cast<Eigen::Index>(i)) =
                basis_fn_eval(tree, v, 1, vertices[i]) * qpow(q, -R * vertices[i].norm());
        }
        const double g_norm = weighted_lp(g);
        if (g_norm == 0.0) {
            continue;
        }
        const double ratio = weighted_lp(M * g) / g_norm;
        if (!est.witness_ratio || ratio > *est.witness_ratio) {
            est.witness_ratio = ratio;
            est.witness = "g_{" + v.to_string() + ",1}, R=1";
        }
    }
    if (est.witness_ratio && *est.witness_ratio > est.value) {
        est.value = *est.witness_ratio;
        est.method += "+witness";
    }
    return est;
}

double default_witness_R(const OperatorParams& params, double alpha, double p) {
    return std::max((1.0 - alpha) / p, params.c - params.b) + 1.0;
}

WitnessNorms witness_gvj(const OperatorParams& params, double alpha, int q, double p, int v_norm,
                         double e_norm_p, double R) {
    params.validate();
    if (!(R > std::max((1.0 - alpha) / p, params.c - params.b))) {
        throw ValidationError("witness exponent R=" + std::to_string(R) +
                              " must exceed max{(1-alpha)/p, c-b}");
    }
    if (!(params.a * p + alpha > 1.0)) {
        throw DivergenceError("T g_{v,j} = const * q^{-a|z|} f_{v,j} is not in L^p_alpha when "
                              "ap + alpha <= 1");
    }
    WitnessNorms out;
    out.g_norm_p = e_norm_p * c_const(q, R * p + alpha, p).value * qpow(q, -(R * p + alpha) * v_norm);
    // T g_{v,j} = (b_{b+R,|v|}/b_{c,|v|}) q^{-a|z|} f_{v,j} by orthogonality.
    const double factor = RadialMeasure::exponential(q, params.b + R).b_const(v_norm) /
                          RadialMeasure::exponential(q, params.c).b_const(v_norm);
    out.tg_norm_p = e_norm_p * c_const(q, params.a * p + alpha, p).value * std::pow(factor, p) *
                    qpow(q, -(params.a * p + alpha) * v_norm);
    return out;
}

double witness_exponent_fit(const OperatorParams& params, double alpha, int q, double p, double R,
                            int max_depth) {
    if (max_depth < 2) {
        throw ValidationError("exponent fit needs at least two depths");
    }
    const double e_norm_p = 2.0 * std::pow(std::sqrt(0.5), p); // (1,-1)/sqrt 2 for q >= 2, j = 1
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = max_depth;
    for (int d = 1; d <= max_depth; ++d) {
        const double y = std::log(witness_gvj(params, alpha, q, p, d, e_norm_p, R).ratio()) /
                         std::log(static_cast<double>(q));
        sx += d;
        sy += y;
        sxx += static_cast<double>(d) * d;
        sxy += d * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

SeriesValue kernel_l1_moment(const KernelEvaluator& k_gamma, int x_norm, double beta, int z_truncation) {
    if (!(beta > 1.0)) {
        throw ValidationError("kernel moment needs beta > 1");
    }
    if (x_norm < 0) {
        throw ValidationError("|x| must be nonnegative");
    }
    const Tree& tree = k_gamma.tree();
    const int q = tree.q();
    const double qd = q;
    const double x1 = qpow(q, 1.0 - beta);
    int z_max = z_truncation >= 0 ? z_truncation : x_norm + 40;
    for (int attempt = 0; attempt < 8; ++attempt, z_max = 2 * std::max(z_max, 1)) {
        SeriesValue out;
        for (int n = 0; n <= z_max; ++n) {
            for (int l = 0; l <= std::min(n, x_norm); ++l) {
                const double count = tree.confluent_class_count(x_norm, l, n);
                if (count > 0.0) {
                    out.value += count * std::abs(k_gamma.profile(n, x_norm, l)) * qpow(q, -beta * n);
                }
            }
        }
        // count(l, n) <= ((q+1)/q) q^{n-l}
        const double geometric = std::pow(x1, z_max + 1) / (1.0 - x1);
        for (int l = 0; l <= x_norm; ++l) {
            out.tail_bound += k_gamma.abs_bound(l) * (qd + 1.0) / qd * qpow(q, -l) * geometric;
        }
        if (out.tail_bound <= 0.1 * out.value) {
            return out;
        }
    }
    throw DivergenceError("kernel moment tail bound stays above 10% of the partial sum; "
                          "increase the truncation depth");
}

SchurWindow schur_window(double a, double b, double c, double p, double alpha) {
    if (!(p >= 1.0)) {
        throw ValidationError("Schur window needs p >= 1");
    }
    SchurWindow w;
    if (p == 1.0) {
        w.degenerate = true;
        w.nonempty = predicted_bounded(a, b, c, p, alpha);
        return w;
    }
    const double pd = p / (p - 1.0);
    w.lo = std::max(-(b - 1.0) / pd, -(a + alpha - 1.0) / p);
    w.hi = std::min(a / pd, (b - alpha) / p);
    w.nonempty = c <= a + b && w.lo < w.hi;
    return w;
}

bool predicted_bounded(double a, double b, double c, double p, double alpha) {
    constexpr double eps = 1e-12;
    const double s = alpha - 1.0;
    if (p > 1.0) {
        return c <= a + b + eps && -p * a < s && s < p * (b - 1.0);
    }
    if (p == 1.0) {
        if (std::abs(c - (a + b)) <= eps) {
            return -a < s && s < b - 1.0;
        }
        return c < a + b && -a < s && s <= b - 1.0 + eps;
    }
    throw ValidationError("boundedness region needs p >= 1");
}

double dual_pairing(const HarmonicExpansion& f, const HarmonicExpansion& g, const RadialMeasure& m) {
    // Real-valued expansions: the bilinear pairing coincides with the inner product.
    return inner_product(f, g, m);
}

} // namespace treeberg
