#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <unordered_map>

#include "treeberg/harmonic_space.hpp"
#include "treeberg/radial_measures.hpp"
#include "treeberg/tree_geometry.hpp"

namespace treeberg {

/// Gamma(v,z,x): 0 unless z, x in T_v \ {v}; (s-1)/s when they sit under the
/// same child of v, -1/s otherwise, with s = #s(v).
double gamma(const Tree& tree, const Vertex& v, const Vertex& z, const Vertex& x);

/// Reproducing kernel K_sigma of A^2(sigma), by three independent routes and
/// through a memoized radial profile (|z|, |x|, |z^x|) -> K.
class KernelEvaluator {
public:
    explicit KernelEvaluator(RadialMeasure measure);

    const RadialMeasure& measure() const { return measure_; }
    const Tree& tree() const { return tree_; }
    int q() const { return tree_.q(); }

    /// Two-step recursion along [o, z] through harmonic extensions of Gamma.
    double recursive(const Vertex& z, const Vertex& x) const;
    /// Explicit sum over t = 0..|z^x| with Gamma evaluated on vertices.
    double closed(const Vertex& z, const Vertex& x) const;
    /// c0 = 1/B, coefficients f_{v,j}(z)/b_{|v|} for v in [o, p(z)].
    HarmonicExpansion from_basis(const Vertex& z) const;

    /// The three routes carried out in long double. b_n and B stay as stored.
    long double recursive_extended(const Vertex& z, const Vertex& x) const;
    long double closed_extended(const Vertex& z, const Vertex& x) const;
    long double from_basis_extended(const Vertex& z, const Vertex& x) const;

    /// K as a function of (|z|, |x|, l = |z^x|); memoized, thread-safe.
    double profile(int nz, int nx, int l) const;
    double operator()(const Vertex& z, const Vertex& x) const;

    /// sup over |z|, |x| of |K| for pairs with confluent depth l.
    double abs_bound(int l) const;

private:
    template <class Real>
    Real recursive_as(const Vertex& z, const Vertex& x) const;
    template <class Real>
    Real closed_as(const Vertex& z, const Vertex& x) const;
    double compute_profile(int nz, int nx, int l) const;

    RadialMeasure measure_;
    Tree tree_;

    struct Cache {
        std::mutex mutex;
        std::unordered_map<std::uint64_t, double> values;
    };
    std::shared_ptr<Cache> cache_;
};

/// A kernel that depends on (|z|, |x|, |z^x|) only.
struct ProfileKernel {
    std::function<double(int nz, int nx, int l)> value;
    /// Optional: bound(nx, l) >= sup over nz of |K(nz, nx, l)|. Without it the
    /// tail is estimated from the ratio of the last two shells.
    std::function<double(int nx, int l)> bound;
};

struct HormanderResult {
    double value = 0.0;      ///< truncated supremum
    double tail_bound = 0.0; ///< neglected z-tail at the maximizing configuration
    int z_truncation = 0;    ///< largest |z| summed explicitly
    int argmax_v = 0;        ///< |v| of the maximizer
    int argmax_x = 0;
    int argmax_y = 0;
    bool tail_ok = true;     ///< tail bound below 10% of the partial sum everywhere
};

/// sup over 1 <= |v| <= depth_v and x, y in T_v with |x|, |y| <= |v| + depth_xy of
/// sum_{z not in T_v} |K(z,x) - K(z,y)| sigma(z), with z grouped by l = |z^v|.
/// The truncation is widened while the tail exceeds 10% of the partial sum;
/// when that never happens the result carries tail_ok = false and the offending configuration.
HormanderResult hormander_profile(const ProfileKernel& kernel, const RadialMeasure& m, int depth_v,
                                  int depth_xy, int z_truncation);

/// The same for K_alpha with its explicit bound; DivergenceError on a tail breach.
HormanderResult hormander_constant_for_kernel(const RadialMeasure& m, int depth_v, int depth_xy,
                                              int z_truncation);

/// CSV table "|z|,|x|,l,K" over all profile keys with |z|, |x| <= depth.
void write_kernel_table(std::ostream& out, const KernelEvaluator& k, int depth);

} // namespace treeberg
