#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "treeberg/bergman_kernel.hpp"
#include "treeberg/harmonic_space.hpp"
#include "treeberg/radial_measures.hpp"

namespace treeberg {

/// D_alpha = max{q^alpha + 1, (q^alpha + 1)/(q^alpha - q)}.
double doubling_constant(int q, double alpha);
/// max{q^alpha, 1/(1 - q^{1-alpha})}: the parent/child mass ratio inside one sector.
double sector_constant(int q, double alpha);

/// I_m = (q^{m+1} - q)/(q - 1).
long long partition_last_index(int q, int m);
/// Index k of u in the labeling of T_v with v_0 = v and s(v_k) = {v_{qk+l} : l = 1..q}.
long long sector_index(int q, const Vertex& v, const Vertex& u);

/// A piece Q_{k,m} of the sector partition: {v_k} or T_{v_k}.
struct PartitionSet {
    enum class Kind { Singleton, Sector };
    Kind kind = Kind::Sector;
    Vertex vertex;
    int scale = 0;
    long long index = 0;

    bool contains(const Vertex& u) const;
    double mass(const RadialMeasure& m) const;
    std::string to_string() const;
};

/// Q_{k,m}, k = 0..I_m, for the sector T_v; v must differ from o.
std::vector<PartitionSet> partition(const Tree& tree, const Vertex& v, int m);

/// One piece of the decomposition. For selected pieces (Q) g is stored on
/// supp f and equals g_elsewhere on the rest of the piece.
struct CzPiece {
    PartitionSet set;
    bool selected = false;
    double mass = 0.0;
    double abs_average = 0.0;
    double average = 0.0;
    std::map<Vertex, double> g_values;
    double g_elsewhere = 0.0;
};

struct CzDecomposition {
    double t = 0.0;
    std::vector<CzPiece> pieces; ///< Q and F pieces in processing order

    std::vector<const CzPiece*> bad() const;
    std::vector<const CzPiece*> good() const;
    /// Piece containing u.
    const CzPiece& piece_of(const Vertex& u) const;
    double g(const DenseFunction& f, const Vertex& u) const;
    double b(const DenseFunction& f, const Vertex& u) const { return f(u) - g(f, u); }

    nlohmann::json to_json(const DenseFunction& f) const;
};

/// Stopping-time decomposition at level t > ||f||_1 / mu(X), for finitely supported f.
CzDecomposition cz_decompose(const DenseFunction& f, double t, const RadialMeasure& m);

struct CzReport {
    std::vector<std::string> violations;
    std::vector<std::string> flags;
    double c_alpha = 0.0;
    double d_alpha = 0.0;
    double f_l1 = 0.0;
    double omega_mass = 0.0;
    double g_l2_squared = 0.0;
    double g_l2_bound = 0.0;
    double b_l1_sum = 0.0;
    double g_sup = 0.0;
    double max_average_ratio = 0.0; ///< max over Q of average / t
    /// Largest upper constant met: C_alpha inside sectors, D_alpha for scale-0 pieces.
    double average_constant = 0.0;
    std::size_t selected = 0;
    std::size_t free_pieces = 0;

    bool ok() const { return violations.empty(); }
    nlohmann::json to_json() const;
};

CzReport verify_cz(const CzDecomposition& d, const DenseFunction& f, double t, const RadialMeasure& m);

struct DoublingResult {
    double max_ratio = 0.0;
    double claimed = 0.0;
    Vertex argmax_center;
    std::string argmax_ball;
};

/// max of mu(B(v,2r))/mu(B(v,r)) over every Gromov ball centred at |v| <= depth.
DoublingResult doubling_check(const RadialMeasure& m, int depth);

/// A kernel given pointwise. decay_bound(n) must dominate |K(z,x)| for |z| = n
/// and every x the check visits.
struct PointwiseKernel {
    std::function<double(const Vertex& z, const Vertex& x)> value;
    std::function<double(int n)> decay_bound;
};

using KernelSpec = std::variant<ProfileKernel, PointwiseKernel>;

/// Truncated Hormander supremum; tail_ok = false when the z-tail cannot be
/// brought under 10% of the partial sum. ValidationError for a pointwise
/// kernel without a decay bound.
HormanderResult hormander_check(const KernelSpec& kernel, const RadialMeasure& m, int depth_v,
                                int depth_xy, int z_truncation);

/// Uniform draw in [-1, 1) from the top 53 bits; stable across standard libraries.
double symmetric_uniform(std::mt19937_64& rng);

/// i.i.d. symmetric values on Ball(o, depth), normalized to ||f||_{L^1} = 1.
DenseFunction random_l1_normalized(const Tree& tree, const RadialMeasure& m, int depth,
                                   std::mt19937_64& rng);

struct WeakTypeRow {
    double s = 0.0;
    double value = 0.0;      ///< max over trials of s * mu{z in Ball(o,Z) : |P f(z)| > s}
    double tail_bound = 0.0; ///< s * mu(X \ Ball(o,Z))
};

std::vector<WeakTypeRow> weak_type_experiment(const RadialMeasure& m, int trials, int support_depth,
                                              const std::vector<double>& s_grid, int z_depth,
                                              std::uint64_t seed);

/// The p = 1 witness f_n = q^{alpha n} 1_{v_n}: P f_n = K(., v_n).
struct WitnessDistribution {
    int n = 0;
    SeriesValue l1;      ///< ||P f_n||_{L^1}
    double weak_sup = 0; ///< sup_s s * mu{|P f_n| > s}
    double weak_tail = 0;
};

WitnessDistribution weak_type_witness(const KernelEvaluator& k_alpha, int n, int z_extra = 40);

} // namespace treeberg
