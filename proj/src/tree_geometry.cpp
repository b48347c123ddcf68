#include "treeberg/tree_geometry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace treeberg {

Vertex Vertex::parent() const {
    if (is_root()) {
        throw ValidationError("the root has no predecessor");
    }
    return ancestor(1);
}

Vertex Vertex::ancestor(int k) const {
    if (k < 0 || k > norm()) {
        throw ValidationError("ancestor p^" + std::to_string(k) + " undefined for " + to_string());
    }
    return prefix(norm() - k);
}

Vertex Vertex::prefix(int depth) const {
    if (depth < 0 || depth > norm()) {
        throw ValidationError("prefix depth " + std::to_string(depth) + " out of range for " +
                              to_string());
    }
    return Vertex(std::vector<int>(labels_.begin(), labels_.begin() + depth));
}

Vertex Vertex::child(int label) const {
    std::vector<int> labels = labels_;
    labels.push_back(label);
    return Vertex(std::move(labels));
}

bool Vertex::is_prefix_of(const Vertex& x) const {
    if (norm() > x.norm()) {
        return false;
    }
    return std::equal(labels_.begin(), labels_.end(), x.labels_.begin());
}

std::string Vertex::to_string() const {
    std::string out = "[";
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += std::to_string(labels_[i]);
    }
    out += ']';
    return out;
}

Vertex Vertex::parse(std::string_view text) {
    auto fail = [&] { return ValidationError("malformed vertex address '" + std::string(text) + "'"); };
    std::string compact;
    for (char ch : text) {
        if (!std::isspace(static_cast<unsigned char>(ch))) {
            compact += ch;
        }
    }
    if (compact.size() < 2 || compact.front() != '[' || compact.back() != ']') {
        throw fail();
    }
    std::string_view body(compact);
    body = body.substr(1, body.size() - 2);
    std::vector<int> labels;
    if (body.empty()) {
        return Vertex{};
    }
    std::size_t start = 0;
    while (start <= body.size()) {
        std::size_t comma = body.find(',', start);
        std::string_view token =
            body.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        if (token.empty() || !std::all_of(token.begin(), token.end(),
                                          [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            throw fail();
        }
        labels.push_back(std::stoi(std::string(token)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return Vertex(std::move(labels));
}

std::size_t VertexHash::operator()(const Vertex& v) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (int label : v.labels()) {
        h ^= static_cast<std::size_t>(label) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h ^ static_cast<std::size_t>(v.norm());
}

bool GromovBall::contains(const Vertex& u) const {
    switch (kind) {
    case Kind::Singleton:
        return u == vertex;
    case Kind::Sector:
        return vertex.is_prefix_of(u);
    case Kind::WholeTree:
        return true;
    }
    return false;
}

std::string GromovBall::to_string() const {
    switch (kind) {
    case Kind::Singleton:
        return "Singleton(" + vertex.to_string() + ")";
    case Kind::Sector:
        return "Sector(" + vertex.to_string() + ")";
    case Kind::WholeTree:
        return "WholeTree";
    }
    return "?";
}

Tree::Tree(int q) : q_(q) {
    if (q < 2) {
        throw ValidationError("branching parameter q must be >= 2, got " + std::to_string(q));
    }
}

bool Tree::is_valid(const Vertex& v) const {
    const auto& labels = v.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int limit = i == 0 ? q_ + 1 : q_;
        if (labels[i] < 0 || labels[i] >= limit) {
            return false;
        }
    }
    return true;
}

void Tree::validate(const Vertex& v) const {
    if (!is_valid(v)) {
        throw ValidationError("vertex " + v.to_string() + " has a label out of range for q=" +
                              std::to_string(q_));
    }
}

std::vector<Vertex> Tree::children(const Vertex& v) const {
    validate(v);
    std::vector<Vertex> out;
    const int count = successor_count(v);
    out.reserve(count);
    for (int label = 0; label < count; ++label) {
        out.push_back(v.child(label));
    }
    return out;
}

std::vector<Vertex> Tree::neighbors(const Vertex& v) const {
    std::vector<Vertex> out;
    if (!v.is_root()) {
        out.push_back(v.parent());
    }
    auto kids = children(v);
    out.insert(out.end(), kids.begin(), kids.end());
    return out;
}

int Tree::confluent_norm(const Vertex& u, const Vertex& v) const {
    validate(u);
    validate(v);
    const auto& a = u.labels();
    const auto& b = v.labels();
    const std::size_t limit = std::min(a.size(), b.size());
    std::size_t k = 0;
    while (k < limit && a[k] == b[k]) {
        ++k;
    }
    return static_cast<int>(k);
}

Vertex Tree::confluent(const Vertex& u, const Vertex& v) const {
    return u.prefix(confluent_norm(u, v));
}

int Tree::distance(const Vertex& u, const Vertex& v) const {
    return u.norm() + v.norm() - 2 * confluent_norm(u, v);
}

double Tree::sphere_size(int n) const {
    if (n < 0) {
        return 0.0;
    }
    if (n == 0) {
        return 1.0;
    }
    return (q_ + 1) * std::pow(static_cast<double>(q_), n - 1);
}

double Tree::ball_size(int n) const {
    double total = 0.0;
    for (int k = 0; k <= n; ++k) {
        total += sphere_size(k);
    }
    return total;
}

double Tree::confluent_class_count(int z_norm, int l, int n) const {
    if (l < 0 || l > z_norm || n < l) {
        return 0.0;
    }
    const double qd = q_;
    if (l == z_norm) {
        // x in the sector of z itself
        return z_norm == 0 ? sphere_size(n) : std::pow(qd, n - z_norm);
    }
    if (n == l) {
        return 1.0;
    }
    return (successor_count_at_depth(l) - 1) * std::pow(qd, n - l - 1);
}

double Tree::gromov_distance(const Vertex& u, const Vertex& v) const {
    if (u == v) {
        validate(u);
        return 0.0;
    }
    return std::exp(-static_cast<double>(confluent_norm(u, v)));
}

GromovBall Tree::gromov_ball(const Vertex& v, double r) const {
    validate(v);
    if (!(r > 0.0)) {
        throw ValidationError("Gromov ball radius must be positive");
    }
    if (r > 1.0) {
        return {GromovBall::Kind::WholeTree, {}};
    }
    if (r <= std::exp(-static_cast<double>(v.norm()))) {
        return {GromovBall::Kind::Singleton, v};
    }
    // rho(v,u) = e^{-|v^u|} < r  <=>  |v^u| >= d with d the least integer such that e^{-d} < r.
    int depth = 0;
    while (std::exp(-static_cast<double>(depth)) >= r) {
        ++depth;
    }
    return {GromovBall::Kind::Sector, v.prefix(depth)};
}

std::vector<GromovBall> Tree::gromov_balls_at(const Vertex& v) const {
    validate(v);
    std::vector<GromovBall> out;
    out.push_back({GromovBall::Kind::Singleton, v});
    for (int depth = v.norm(); depth >= 1; --depth) {
        out.push_back({GromovBall::Kind::Sector, v.prefix(depth)});
    }
    out.push_back({GromovBall::Kind::WholeTree, {}});
    return out;
}

namespace {

// Preorder walk, children in label order, which is lexicographic word order.
void walk(std::vector<int>& labels, int q, int max_depth,
          const std::function<bool(const Vertex&)>& keep,
          const std::function<bool(const Vertex&)>& descend_into,
          const std::function<void(const Vertex&)>& visit) {
    const Vertex here(labels);
    if (keep(here)) {
        visit(here);
    }
    const int depth = static_cast<int>(labels.size());
    if (depth >= max_depth || !descend_into(here)) {
        return;
    }
    const int count = depth == 0 ? q + 1 : q;
    for (int label = 0; label < count; ++label) {
        labels.push_back(label);
        walk(labels, q, max_depth, keep, descend_into, visit);
        labels.pop_back();
    }
}

} // namespace

void Tree::for_each_in_sphere(int n, const std::function<void(const Vertex&)>& visit) const {
    if (n < 0) {
        throw ValidationError("sphere radius must be nonnegative");
    }
    std::vector<int> labels;
    walk(labels, q_, n, [n](const Vertex& x) { return x.norm() == n; },
         [](const Vertex&) { return true; }, visit);
}

void Tree::for_each_in_ball(const Vertex& center, int radius,
                            const std::function<void(const Vertex&)>& visit) const {
    validate(center);
    if (radius < 0) {
        throw ValidationError("ball radius must be nonnegative");
    }
    std::vector<int> labels;
    walk(
        labels, q_, center.norm() + radius,
        [&](const Vertex& x) { return distance(center, x) <= radius; },
        [&](const Vertex& x) { return x.is_prefix_of(center) || distance(center, x) < radius; },
        visit);
}

void Tree::for_each_in_sector(const Vertex& v, int max_depth,
                              const std::function<void(const Vertex&)>& visit) const {
    validate(v);
    std::vector<int> labels = v.labels();
    if (max_depth < v.norm()) {
        return;
    }
    walk(labels, q_, max_depth, [](const Vertex&) { return true; },
         [](const Vertex&) { return true; }, visit);
}

void Tree::for_each_in_gromov_ball(const GromovBall& ball, std::optional<int> max_depth,
                                   const std::function<void(const Vertex&)>& visit) const {
    if (ball.kind == GromovBall::Kind::Singleton) {
        validate(ball.vertex);
        if (!max_depth || ball.vertex.norm() <= *max_depth) {
            visit(ball.vertex);
        }
        return;
    }
    if (!max_depth) {
        throw ValidationError("enumerating " + ball.to_string() + " requires a depth cutoff");
    }
    if (ball.kind == GromovBall::Kind::Sector) {
        for_each_in_sector(ball.vertex, *max_depth, visit);
    } else {
        for_each_in_ball(Vertex::root(), *max_depth, visit);
    }
}

std::vector<Vertex> Tree::sphere(int n) const {
    std::vector<Vertex> out;
    for_each_in_sphere(n, [&](const Vertex& x) { out.push_back(x); });
    return out;
}

std::vector<Vertex> Tree::ball(const Vertex& center, int radius) const {
    std::vector<Vertex> out;
    for_each_in_ball(center, radius, [&](const Vertex& x) { out.push_back(x); });
    return out;
}

std::vector<Vertex> Tree::sector(const Vertex& v, int max_depth) const {
    std::vector<Vertex> out;
    for_each_in_sector(v, max_depth, [&](const Vertex& x) { out.push_back(x); });
    return out;
}

} // namespace treeberg
