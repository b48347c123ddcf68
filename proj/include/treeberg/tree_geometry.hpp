#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "treeberg/errors.hpp"

namespace treeberg {

/// Word address of a vertex of the rooted homogeneous tree.
///
/// The root is the empty word. The first label selects one of the q+1
/// children of the root, every later label one of the q children of a
/// non-root vertex. The address carries the whole predecessor chain, so
/// depth, ancestors and confluents are prefix operations.
class Vertex {
public:
    Vertex() = default;
    explicit Vertex(std::vector<int> labels) : labels_(std::move(labels)) {}
    Vertex(std::initializer_list<int> labels) : labels_(labels) {}

    static Vertex root() { return {}; }

    int norm() const { return static_cast<int>(labels_.size()); }
    bool is_root() const { return labels_.empty(); }
    const std::vector<int>& labels() const { return labels_; }

    /// p(v); throws for the root.
    Vertex parent() const;
    /// p^k(v); requires k <= norm().
    Vertex ancestor(int k) const;
    /// The vertex of [o, v] at depth `depth`.
    Vertex prefix(int depth) const;
    Vertex child(int label) const;

    /// True when [o, this] is contained in [o, x], i.e. x lies in the sector of this.
    bool is_prefix_of(const Vertex& x) const;

    std::string to_string() const;
    static Vertex parse(std::string_view text);

    friend auto operator<=>(const Vertex&, const Vertex&) = default;
    friend bool operator==(const Vertex&, const Vertex&) = default;

private:
    std::vector<int> labels_;
};

struct VertexHash {
    std::size_t operator()(const Vertex& v) const noexcept;
};

/// Gromov-metric ball. Every ball is a single vertex, a sector or the whole tree.
struct GromovBall {
    enum class Kind { Singleton, Sector, WholeTree };
    Kind kind = Kind::WholeTree;
    Vertex vertex; // unused for WholeTree

    bool contains(const Vertex& u) const;
    std::string to_string() const;

    friend bool operator==(const GromovBall&, const GromovBall&) = default;
};

/// Geometry of the q-homogeneous tree rooted at o.
class Tree {
public:
    explicit Tree(int q);

    int q() const { return q_; }

    /// Throws ValidationError when a label is out of range for this tree.
    void validate(const Vertex& v) const;
    bool is_valid(const Vertex& v) const;

    /// #s(v): q+1 at the root, q elsewhere.
    int successor_count(const Vertex& v) const { return v.is_root() ? q_ + 1 : q_; }
    int successor_count_at_depth(int depth) const { return depth == 0 ? q_ + 1 : q_; }
    std::vector<Vertex> children(const Vertex& v) const;
    std::vector<Vertex> neighbors(const Vertex& v) const;

    int distance(const Vertex& u, const Vertex& v) const;
    Vertex confluent(const Vertex& u, const Vertex& v) const;
    int confluent_norm(const Vertex& u, const Vertex& v) const;

    /// #S(o, n) = #S(v, n) for any v.
    double sphere_size(int n) const;
    double ball_size(int n) const;

    /// Number of x with |x| = n and |z ^ x| = l, for a fixed z with |z| = z_norm.
    double confluent_class_count(int z_norm, int l, int n) const;

    double gromov_distance(const Vertex& u, const Vertex& v) const;
    GromovBall gromov_ball(const Vertex& v, double r) const;
    /// The |v|+2 distinct Gromov balls centred at v, ordered by inclusion.
    std::vector<GromovBall> gromov_balls_at(const Vertex& v) const;

    // Lazy enumeration in lexicographic word order; the visitor may be called
    // many times, so it should be cheap.
    void for_each_in_sphere(int n, const std::function<void(const Vertex&)>& visit) const;
    void for_each_in_ball(const Vertex& center, int radius,
                          const std::function<void(const Vertex&)>& visit) const;
    /// Vertices of the sector T_v with |x| <= max_depth.
    void for_each_in_sector(const Vertex& v, int max_depth,
                            const std::function<void(const Vertex&)>& visit) const;
    /// Vertices of a Gromov ball with |x| <= max_depth. A WholeTree or Sector
    /// ball needs a cutoff; pass std::nullopt only for singletons.
    void for_each_in_gromov_ball(const GromovBall& ball, std::optional<int> max_depth,
                                 const std::function<void(const Vertex&)>& visit) const;

    std::vector<Vertex> sphere(int n) const;
    std::vector<Vertex> ball(const Vertex& center, int radius) const;
    std::vector<Vertex> ball(int radius) const { return ball(Vertex::root(), radius); }
    std::vector<Vertex> sector(const Vertex& v, int max_depth) const;

private:
    int q_;
};

} // namespace treeberg
