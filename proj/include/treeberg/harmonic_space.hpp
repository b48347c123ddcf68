#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "treeberg/radial_measures.hpp"
#include "treeberg/tree_geometry.hpp"

namespace treeberg {

/// Finitely many values on Ball(o, radius). Anything outside the stored map is 0.
class DenseFunction {
public:
    DenseFunction(int q, int radius);

    /// Materializes `fn` on every vertex of Ball(o, radius).
    static DenseFunction render(const Tree& tree, int radius,
                                const std::function<double(const Vertex&)>& fn);

    int q() const { return q_; }
    int radius() const { return radius_; }
    bool in_region(const Vertex& v) const { return v.norm() <= radius_; }

    double operator()(const Vertex& v) const;
    /// Throws when v lies outside the recorded region.
    void set(const Vertex& v, double value);
    void add(const Vertex& v, double value) { set(v, (*this)(v) + value); }

    const std::map<Vertex, double>& values() const { return values_; }
    /// Vertices carrying a nonzero value, in lexicographic order.
    std::vector<Vertex> support() const;

    DenseFunction scaled(double factor) const;

private:
    int q_;
    int radius_;
    std::map<Vertex, double> values_;
};

/// f(v) - (1/(q+1)) sum of f over the q+1 neighbours of v.
/// Throws when a neighbour falls outside the region of f.
double laplacian(const DenseFunction& f, const Vertex& v);

/// Checks |Lf| <= tolerance on Ball(o, radius); throws naming the first offending vertex.
void require_harmonic(const DenseFunction& f, int radius, double tolerance = 1e-10);

/// g^H_n: the harmonic function equal to g on Ball(o, n+1) and radial on
/// every sector rooted in S(o, n+1).
class HarmonicExtension {
public:
    HarmonicExtension(DenseFunction g, int n, double tolerance = 1e-10);

    double operator()(const Vertex& x) const;
    int n() const { return n_; }

private:
    DenseFunction g_;
    int n_;
};

/// One element e_{v,j} of the Helmert basis of W_v, indexed by child label.
struct WBasisElement {
    Vertex v;
    int j = 1;
    std::vector<double> coefficients;

    double norm_p(double p) const;
};

/// Helmert coefficient of e_j (1 <= j < s) at child `label` of a vertex with s children.
double helmert(int s, int j, int label);

std::vector<WBasisElement> w_basis(const Tree& tree, const Vertex& v);

/// f_{v,j}(x).
double basis_fn_eval(const Tree& tree, const Vertex& v, int j, const Vertex& x);

/// c0 f_0 + sum of c_{v,j} f_{v,j}, finitely many terms.
class HarmonicExpansion {
public:
    using Key = std::pair<Vertex, int>;

    HarmonicExpansion() = default;
    explicit HarmonicExpansion(double c0) : c0_(c0) {}

    static HarmonicExpansion basis_function(const Vertex& v, int j, double coefficient = 1.0);

    double c0() const { return c0_; }
    void set_c0(double c) { c0_ = c; }
    const std::map<Key, double>& terms() const { return terms_; }
    /// Adds to the coefficient of f_{v,j}.
    void add_term(const Vertex& v, int j, double coefficient);
    double coefficient(const Vertex& v, int j) const;
    /// Deepest |v| among the terms, -1 if there are none.
    int max_term_depth() const;

    double evaluate(const Tree& tree, const Vertex& x) const;
    DenseFunction render(const Tree& tree, int radius) const;

    HarmonicExpansion& operator+=(const HarmonicExpansion& other);
    HarmonicExpansion operator*(double factor) const;

    nlohmann::json to_json() const;
    static HarmonicExpansion from_json(const nlohmann::json& records);

private:
    double c0_ = 0.0;
    std::map<Key, double> terms_;
};

/// Exact inner product in L^2(sigma) through orthogonality of the basis.
double inner_product(const HarmonicExpansion& f, const HarmonicExpansion& g, const RadialMeasure& m);

/// ||f_{v,j}||_p^p under mu_alpha: ||e_{v,j}||_p^p C(alpha,p) q^{-alpha|v|}.
SeriesValue lp_norm_basis_fn(const Tree& tree, const Vertex& v, int j, double p, const RadialMeasure& m);

/// sum_x |f(x)|^p sigma(x) for an expansion, summed exactly up to the depth
/// where f becomes sector-radial and then radially with a tail bound.
SeriesValue lp_power_sum(const Tree& tree, const HarmonicExpansion& f, const RadialMeasure& m,
                         double p, double tolerance = 1e-13);

} // namespace treeberg
