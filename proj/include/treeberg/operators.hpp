#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "treeberg/bergman_kernel.hpp"
#include "treeberg/harmonic_space.hpp"
#include "treeberg/radial_measures.hpp"

namespace treeberg {

enum class OperatorKind { S, T };

/// S_{a,b,c} (|K_c|) or T_{a,b,c} (K_c), c > 1.
struct OperatorParams {
    double a = 0.0;
    double b = 0.0;
    double c = 2.0;
    OperatorKind kind = OperatorKind::T;

    void validate() const;
    /// L^2_alpha adjoint: T_{a,b,c}^* = T_{b-alpha, a+alpha, c}.
    OperatorParams adjoint(double alpha) const { return {b - alpha, a + alpha, c, kind}; }
    std::string describe() const;
};

/// P_beta f(z) = sum_x K_beta(z,x) f(x) q^{-beta|x|}, summed over supp f.
double project(const KernelEvaluator& k_beta, const DenseFunction& f, const Vertex& z);
/// P_beta f as an exact expansion: sum_x f(x) sigma(x) K_x.
HarmonicExpansion project_to_expansion(const KernelEvaluator& k_beta, const DenseFunction& f);
/// <g, K_z> through orthogonality; equals g(z) for g in the span of the basis.
double project_pairing(const KernelEvaluator& k_beta, const HarmonicExpansion& g, const Vertex& z);

/// q^{-a|z|} sum over supp f of (|K_c| or K_c)(z,x) f(x) q^{-b|x|}.
double toeplitz_apply(const OperatorParams& params, const KernelEvaluator& k_c, const DenseFunction& f,
                      const Vertex& z);
/// Same for the radial input f(x) = phi(|x|) on Ball(o, N), grouping x by |z^x|,
/// so N can be far beyond what enumeration allows.
double toeplitz_apply_radial(const OperatorParams& params, const KernelEvaluator& k_c,
                             const std::function<double(int)>& phi, int N, int z_norm);

/// (sum_x |f(x)|^p sigma(x))^{1/p}, exact for finite support.
double lp_norm(const RadialMeasure& m, const DenseFunction& f, double p);
/// ||q^{-R|.|}||_{L^p_alpha}, on Ball(o, N) when N is given, over X otherwise.
double lp_norm_exp_radial(int q, double alpha, double R, double p, std::optional<int> N = std::nullopt);

struct MatrixCaps {
    int max_depth = -1;           ///< -1 picks default_depth_cap(q)
    std::size_t max_side = 20000; ///< hard limit on |Ball(o,N)|
};

/// 6 for q = 2, 4 for q = 3, otherwise the largest N with |Ball(o,N)| <= 200.
int default_depth_cap(int q);

/// M[z][x] = q^{-a|z|} (|K_c| or K_c)(z,x) q^{-b|x|} for z, x in Ball(o,N),
/// rows and columns in lexicographic vertex order.
Eigen::MatrixXd operator_matrix(const OperatorParams& params, const KernelEvaluator& k_c, int N,
                                const MatrixCaps& caps = {});

struct NormEstimate {
    double value = 0.0;
    std::string method;
    int iterations = 0;
    int depth = 0;
    std::size_t side = 0;
    std::optional<double> witness_ratio; ///< best ||Mg||/||g|| over truncated g_{v,j}
    std::string witness;                 ///< description of the best witness
};

/// ||W^{1/p} M W^{-1/p}||_{p -> p} with W = diag(weights): power iteration for
/// p = 2, Boyd's nonlinear power method for 1 < p, exact column sums for p = 1.
NormEstimate weighted_matrix_norm(const Eigen::MatrixXd& M, const Eigen::VectorXd& weights, double p,
                                  double tolerance = 1e-8, int max_iterations = 200000);

/// Norm of the restriction of S/T to Ball(o,N) on L^p_alpha, with a witness
/// lower bound from truncated g_{v,j}; the reported value is never below the witness.
NormEstimate operator_norm_estimate(const OperatorParams& params, double alpha, int q, double lp, int N,
                                    const MatrixCaps& caps = {}, double tolerance = 1e-8);

/// Closed-form norms of g_{v,j} = f_{v,j} q^{-R|.|} and of T g_{v,j} (p-th powers).
struct WitnessNorms {
    double g_norm_p = 0.0;
    double tg_norm_p = 0.0;
    double ratio() const { return tg_norm_p / g_norm_p; }
};

/// Requires R > max{(1-alpha)/p, c-b}; DivergenceError when -pa >= alpha-1
/// (then T g_{v,j} is not in L^p_alpha at all).
WitnessNorms witness_gvj(const OperatorParams& params, double alpha, int q, double p, int v_norm,
                         double e_norm_p, double R);
/// Smallest admissible R plus one.
double default_witness_R(const OperatorParams& params, double alpha, double p);

/// Least-squares slope of log_q(ratio) against |v| = 1..max_depth; theory says (c-a-b)p.
double witness_exponent_fit(const OperatorParams& params, double alpha, int q, double p, double R,
                            int max_depth = 5);

/// sum_z |K_gamma(x,z)| q^{-beta|z|} for |x| = x_norm, grouped by |z^x| and |z|.
SeriesValue kernel_l1_moment(const KernelEvaluator& k_gamma, int x_norm, double beta,
                             int z_truncation = -1);

struct SchurWindow {
    double lo = 0.0;
    double hi = 0.0;
    bool nonempty = false;
    bool degenerate = false; ///< p = 1: the window collapses to gamma = 0
};

SchurWindow schur_window(double a, double b, double c, double p, double alpha);

/// Whether (a, b, c, p) lies in the bounded region (p > 1 and p = 1 variants).
bool predicted_bounded(double a, double b, double c, double p, double alpha);

/// sum_z f(z) g(z) q^{-alpha|z|} through orthogonality.
double dual_pairing(const HarmonicExpansion& f, const HarmonicExpansion& g, const RadialMeasure& m);

} // namespace treeberg
