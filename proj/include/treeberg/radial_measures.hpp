#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treeberg/tree_geometry.hpp"

namespace treeberg {

/// A truncated series: partial sum plus a rigorous bound on the neglected tail.
struct SeriesValue {
    double value = 0.0;
    double tail_bound = 0.0;
};

/// a_n = sum_{j=0}^n q^{-j} = (q - q^{-n})/(q - 1), with a_{-1} = 0.
double a_seq(int q, int n);

/// Radial, strictly positive, nonincreasing density sigma_n on the tree.
///
/// Stored as a finite prefix sigma_0..sigma_M plus an optional geometric tail
/// sigma_{n+1} = ratio * sigma_n for n >= M. The exponential family
/// mu_alpha (sigma_n = q^{-alpha n}) is the prefix {1} with ratio q^{-alpha};
/// it keeps its exponent so closed forms can be used.
class RadialMeasure {
public:
    static RadialMeasure exponential(int q, double alpha);
    static RadialMeasure table(int q, std::vector<double> prefix,
                               std::optional<double> tail_ratio = std::nullopt);

    int q() const { return q_; }
    bool is_exponential() const { return alpha_.has_value(); }
    /// Exponent of mu_alpha; throws for non-exponential measures.
    double alpha() const;
    const std::vector<double>& prefix() const { return prefix_; }
    std::optional<double> tail_ratio() const { return tail_ratio_; }
    /// True when the total mass is finite (a tail rule with ratio * q < 1).
    bool is_finite() const;

    double density(int n) const;
    double density(const Vertex& v) const { return density(v.norm()); }

    /// B_sigma = sigma_0 + ((q+1)/q) sum_{n>=1} sigma_n q^n.
    double total_mass() const;

    /// b_n from the defining series, evaluated in closed form on the geometric
    /// tail. For mu_alpha this is b_0 scaled by q^{-alpha n}.
    double b_const(int n) const;
    /// The defining series for b_n without the exponential-family shortcut.
    double b_const_series(int n) const;

    /// sum_{n >= n0} sigma_n g^n, exactly (prefix terms plus geometric tail).
    double tail_sum(int n0, double g) const;

    /// mu(T_u) for u != o.
    double sector_mass(const Vertex& u) const;
    double sector_mass_at_depth(int depth) const;
    /// mu of Y_l = T_{u_l} \ T_{u_{l+1}}, the vertices whose confluent with a
    /// vertex of norm > l sits at depth l.
    double confluent_class_mass(int l) const;

    double measure_of(const GromovBall& ball) const;
    double measure_of(std::span<const Vertex> distinct_vertices) const;

    std::string describe() const;

private:
    RadialMeasure(int q, std::vector<double> prefix, std::optional<double> tail_ratio,
                  std::optional<double> alpha);
    void require_finite(const char* what) const;

    int q_;
    std::vector<double> prefix_;
    std::optional<double> tail_ratio_;
    std::optional<double> alpha_;

    struct Cache {
        std::mutex mutex;
        std::map<int, double> b;
    };
    std::shared_ptr<Cache> cache_;
};

/// sigma_n = q^{-alpha n}, alpha > 1.
inline RadialMeasure exp_measure(int q, double alpha) { return RadialMeasure::exponential(q, alpha); }

/// B_alpha = (q^alpha + 1)/(q^alpha - q).
double exp_total_mass(int q, double alpha);

/// C(s,p) = sum_{m>=1} q^{(1-s)m-1} a_{m-1}^p, truncated once the tail bound
/// drops below `tolerance` (relative to the partial sum).
SeriesValue c_const(int q, double s, double p, double tolerance = 1e-15);

/// mu_alpha(T_u) = q^{-alpha |u|}/(1 - q^{1-alpha}) for u != o.
double sector_mass(const RadialMeasure& m, const Vertex& u);

} // namespace treeberg
