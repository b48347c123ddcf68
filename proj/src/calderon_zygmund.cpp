#include "treeberg/calderon_zygmund.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "treeberg/operators.hpp"

namespace treeberg {

double doubling_constant(int q, double alpha) {
    const double qa = std::pow(static_cast<double>(q), alpha);
    return std::max(qa + 1.0, (qa + 1.0) / (qa - q));
}

double sector_constant(int q, double alpha) {
    const double qd = q;
    return std::max(std::pow(qd, alpha), 1.0 / (1.0 - std::pow(qd, 1.0 - alpha)));
}

long long partition_last_index(int q, int m) {
    if (m < 0) {
        throw ValidationError("partition scale must be nonnegative");
    }
    long long power = 1;
    for (int i = 0; i <= m; ++i) {
        power *= q;
    }
    return (power - q) / (q - 1);
}

long long sector_index(int q, const Vertex& v, const Vertex& u) {
    if (!v.is_prefix_of(u)) {
        throw ValidationError(u.to_string() + " is not in the sector of " + v.to_string());
    }
    long long k = 0;
    for (int d = v.norm(); d < u.norm(); ++d) {
        k = q * k + u.labels()[d] + 1;
    }
    return k;
}

bool PartitionSet::contains(const Vertex& u) const {
    return kind == Kind::Singleton ? u == vertex : vertex.is_prefix_of(u);
}

double PartitionSet::mass(const RadialMeasure& m) const {
    if (kind == Kind::Singleton) {
        return m.density(vertex);
    }
    return vertex.is_root() ? m.total_mass() : m.sector_mass(vertex);
}

std::string PartitionSet::to_string() const {
    return (kind == Kind::Singleton ? "Singleton(" : "Sector(") + vertex.to_string() + ")";
}

std::vector<PartitionSet> partition(const Tree& tree, const Vertex& v, int m) {
    tree.validate(v);
    if (v.is_root()) {
        throw ValidationError("sector partitions are defined for v != o; the root is handled by "
                              "the decomposition itself");
    }
    if (m < 0) {
        throw ValidationError("partition scale must be nonnegative");
    }
    std::vector<PartitionSet> out;
    tree.for_each_in_sector(v, v.norm() + m, [&](const Vertex& u) {
        const int rel = u.norm() - v.norm();
        PartitionSet piece;
        piece.kind = rel < m ? PartitionSet::Kind::Singleton : PartitionSet::Kind::Sector;
        piece.vertex = u;
        piece.scale = m;
        piece.index = sector_index(tree.q(), v, u);
        out.push_back(piece);
    });
    std::sort(out.begin(), out.end(),
              [](const PartitionSet& x, const PartitionSet& y) { return x.index < y.index; });
    return out;
}

std::vector<const CzPiece*> CzDecomposition::bad() const {
    std::vector<const CzPiece*> out;
    for (const auto& p : pieces) {
        if (p.selected) {
            out.push_back(&p);
        }
    }
    return out;
}

std::vector<const CzPiece*> CzDecomposition::good() const {
    std::vector<const CzPiece*> out;
    for (const auto& p : pieces) {
        if (!p.selected) {
            out.push_back(&p);
        }
    }
    return out;
}

const CzPiece& CzDecomposition::piece_of(const Vertex& u) const {
    for (const auto& p : pieces) {
        if (p.set.contains(u)) {
            return p;
        }
    }
    throw ValidationError("no piece of the decomposition contains " + u.to_string());
}

double CzDecomposition::g(const DenseFunction& f, const Vertex& u) const {
    const CzPiece& p = piece_of(u);
    if (!p.selected) {
        return f(u);
    }
    auto it = p.g_values.find(u);
    return it == p.g_values.end() ? p.g_elsewhere : it->second;
}

nlohmann::json CzDecomposition::to_json(const DenseFunction& f) const {
    nlohmann::json out;
    out["t"] = t;
    nlohmann::json q_family = nlohmann::json::array();
    nlohmann::json f_family = nlohmann::json::array();
    for (const auto& p : pieces) {
        if (!p.selected) {
            f_family.push_back(p.set.to_string());
            continue;
        }
        nlohmann::json b = nlohmann::json::array();
        for (const auto& [v, g] : p.g_values) {
            b.push_back({{"v", v.to_string()}, {"b", f(v) - g}});
        }
        q_family.push_back({{"piece", p.set.to_string()},
                            {"scale", p.set.scale},
                            {"index", p.set.index},
                            {"mass", p.mass},
                            {"avg", p.average},
                            {"abs_avg", p.abs_average},
                            {"b_on_support", b},
                            {"b_elsewhere", -p.g_elsewhere}});
    }
    out["Q"] = q_family;
    out["F"] = f_family;
    return out;
}

namespace {

using Support = std::vector<std::pair<Vertex, double>>;

struct Decomposer {
    const RadialMeasure& m;
    const Tree tree;
    double t;
    Vertex root_child;
    CzDecomposition& out;

    void emit(PartitionSet set, const Support& local, bool selected) {
        CzPiece piece;
        piece.set = std::move(set);
        piece.selected = selected;
        piece.mass = piece.set.mass(m);
        double signed_sum = 0.0;
        double abs_sum = 0.0;
        for (const auto& [v, value] : local) {
            signed_sum += value * m.density(v);
            abs_sum += std::abs(value) * m.density(v);
        }
        piece.average = signed_sum / piece.mass;
        piece.abs_average = abs_sum / piece.mass;
        if (selected) {
            for (const auto& [v, value] : local) {
                piece.g_values[v] = piece.average;
            }
            piece.g_elsewhere = piece.average;
        }
        out.pieces.push_back(std::move(piece));
    }

    void process(PartitionSet set, const Support& local) {
        double abs_sum = 0.0;
        for (const auto& [v, value] : local) {
            abs_sum += std::abs(value) * m.density(v);
        }
        if (abs_sum / set.mass(m) > t) {
            emit(std::move(set), local, true);
            return;
        }
        if (set.kind == PartitionSet::Kind::Singleton || local.empty()) {
            // A sector without support of f only holds singletons that stop in F.
            emit(std::move(set), local, false);
            return;
        }
        const Vertex u = set.vertex;
        const int scale = u.norm() - root_child.norm();
        Support here;
        for (const auto& entry : local) {
            if (entry.first == u) {
                here.push_back(entry);
            }
        }
        process({PartitionSet::Kind::Singleton, u, scale + 1, sector_index(tree.q(), root_child, u)},
                here);
        for (const auto& child : tree.children(u)) {
            Support below;
            for (const auto& entry : local) {
                if (child.is_prefix_of(entry.first)) {
                    below.push_back(entry);
                }
            }
            process({PartitionSet::Kind::Sector, child, scale + 1,
                     sector_index(tree.q(), root_child, child)},
                    below);
        }
    }
};

} // namespace

CzDecomposition cz_decompose(const DenseFunction& f, double t, const RadialMeasure& m) {
    m.alpha();
    if (f.q() != m.q()) {
        throw ValidationError("function and measure live on trees with different q");
    }
    const double l1 = lp_norm(m, f, 1.0);
    const double threshold = l1 / m.total_mass();
    if (!(t > threshold)) {
        throw ValidationError("level t=" + std::to_string(t) +
                              " must exceed ||f||_1 / mu(X) = " + std::to_string(threshold));
    }
    CzDecomposition out;
    out.t = t;
    const Tree tree(m.q());
    Support all(f.values().begin(), f.values().end());

    Support at_root;
    for (const auto& entry : all) {
        if (entry.first.is_root()) {
            at_root.push_back(entry);
        }
    }
    Decomposer root_pass{m, tree, t, Vertex::root(), out};
    root_pass.emit({PartitionSet::Kind::Singleton, Vertex::root(), 0, 0}, at_root,
                   std::abs(f(Vertex::root())) > t);

    for (const auto& v : tree.children(Vertex::root())) {
        Support local;
        for (const auto& entry : all) {
            if (v.is_prefix_of(entry.first)) {
                local.push_back(entry);
            }
        }
        Decomposer pass{m, tree, t, v, out};
        pass.process({PartitionSet::Kind::Sector, v, 0, 0}, local);
    }
    return out;
}

nlohmann::json CzReport::to_json() const {
    return {{"ok", ok()},
            {"violations", violations},
            {"flags", flags},
            {"C_alpha", c_alpha},
            {"D_alpha", d_alpha},
            {"average_constant", average_constant},
            {"f_l1", f_l1},
            {"omega_mass", omega_mass},
            {"g_l2_squared", g_l2_squared},
            {"g_l2_bound", g_l2_bound},
            {"b_l1_sum", b_l1_sum},
            {"g_sup", g_sup},
            {"max_average_ratio", max_average_ratio},
            {"selected_pieces", selected},
            {"free_pieces", free_pieces}};
}

CzReport verify_cz(const CzDecomposition& d, const DenseFunction& f, double t, const RadialMeasure& m) {
    const int q = m.q();
    const double alpha = m.alpha();
    const Tree tree(q);
    CzReport r;
    r.c_alpha = sector_constant(q, alpha);
    r.d_alpha = doubling_constant(q, alpha);
    r.f_l1 = lp_norm(m, f, 1.0);
    constexpr double kMeanTolerance = 1e-12;
    constexpr double kRelative = 1e-12;

    // Partition exactness: every vertex of a ball deeper than all pieces lies in
    // exactly one piece, and the deepest layer is covered by sectors.
    std::map<Vertex, std::vector<std::size_t>> by_vertex;
    int deepest = 0;
    for (std::size_t i = 0; i < d.pieces.size(); ++i) {
        by_vertex[d.pieces[i].set.vertex].push_back(i);
        deepest = std::max(deepest, d.pieces[i].set.vertex.norm());
    }
    const int cover_depth = std::max(deepest + 1, f.radius() + 1);
    std::size_t cover_errors = 0;
    tree.for_each_in_ball(Vertex::root(), cover_depth, [&](const Vertex& x) {
        int hits = 0;
        for (int k = 0; k <= x.norm(); ++k) {
            auto it = by_vertex.find(x.prefix(k));
            if (it == by_vertex.end()) {
                continue;
            }
            for (std::size_t i : it->second) {
                hits += d.pieces[i].set.contains(x) ? 1 : 0;
            }
        }
        if (hits != 1 && cover_errors++ < 5) {
            r.violations.push_back("partition: " + x.to_string() + " lies in " +
                                   std::to_string(hits) + " pieces");
        }
    });

    for (const auto& [v, value] : f.values()) {
        const CzPiece& p = d.piece_of(v);
        if (!p.selected && std::abs(value) > t) {
            r.violations.push_back("|f| <= t on F fails at " + v.to_string());
        }
    }

    double f_sq_on_free = 0.0;
    for (const auto& piece : d.pieces) {
        double sigma_on_support = 0.0;
        double abs_sum = 0.0;
        double mean = 0.0;
        double g_sq = 0.0;
        double b_abs = 0.0;
        for (const auto& [v, value] : f.values()) {
            if (!piece.set.contains(v)) {
                continue;
            }
            const double sigma = m.density(v);
            sigma_on_support += sigma;
            abs_sum += std::abs(value) * sigma;
            if (piece.selected) {
                auto it = piece.g_values.find(v);
                const double g = it == piece.g_values.end() ? piece.g_elsewhere : it->second;
                mean += (value - g) * sigma;
                g_sq += g * g * sigma;
                b_abs += std::abs(value - g) * sigma;
                r.g_sup = std::max(r.g_sup, std::abs(g));
            } else {
                f_sq_on_free += value * value * sigma;
                r.g_sup = std::max(r.g_sup, std::abs(value));
            }
        }
        if (!piece.selected) {
            ++r.free_pieces;
            continue;
        }
        ++r.selected;
        const double mass = piece.set.mass(m);
        const double rest = mass - sigma_on_support;
        mean -= piece.g_elsewhere * rest;
        g_sq += piece.g_elsewhere * piece.g_elsewhere * rest;
        b_abs += std::abs(piece.g_elsewhere) * rest;
        if (rest > 0.0) {
            r.g_sup = std::max(r.g_sup, std::abs(piece.g_elsewhere));
        }
        r.omega_mass += mass;
        r.g_l2_squared += g_sq;
        r.b_l1_sum += b_abs;
        if (std::abs(mean) > kMeanTolerance * std::max(1.0, b_abs)) {
            r.violations.push_back("vanishing mean fails on " + piece.set.to_string() + " (" +
                                   std::to_string(mean) + ")");
        }
        const double average = abs_sum / mass;
        r.max_average_ratio = std::max(r.max_average_ratio, average / t);
        // A scale-0 piece is compared with the whole tree, not with a parent inside its sector.
        const double limit = piece.set.scale == 0 ? r.d_alpha : r.c_alpha;
        r.average_constant = std::max(r.average_constant, limit);
        if (!(average > t) || average > limit * t * (1.0 + kRelative)) {
            r.violations.push_back("two-sided average bound t < avg <= " +
                                   std::string(piece.set.scale == 0 ? "D_alpha" : "C_alpha") +
                                   " t fails on " +
                                   piece.set.to_string() + " (avg/t = " + std::to_string(average / t) +
                                   ")");
        }
    }
    r.g_l2_squared += f_sq_on_free;
    const double c = std::max(r.c_alpha, r.average_constant);

    if (r.omega_mass > r.f_l1 / t * (1.0 + kRelative)) {
        r.violations.push_back("mu(Omega) <= ||f||_1 / t fails");
    }
    r.g_l2_bound = (1.0 + c * c) * t * r.f_l1;
    if (r.g_l2_squared > 2.0 * r.g_l2_bound) {
        r.violations.push_back("||g||_2^2 exceeds twice (1 + C^2) t ||f||_1");
    } else if (r.g_l2_squared > r.g_l2_bound * (1.0 + kRelative)) {
        r.flags.push_back("||g||_2^2 lies between (1 + C^2) t ||f||_1 and twice that");
    }
    if (r.b_l1_sum > (1.0 + c) * r.f_l1 * (1.0 + kRelative)) {
        r.violations.push_back("sum of ||b_Q||_1 exceeds (1 + C) ||f||_1");
    }
    if (r.g_sup > c * t * (1.0 + kRelative)) {
        r.violations.push_back("||g||_inf exceeds C t");
    }
    return r;
}

DoublingResult doubling_check(const RadialMeasure& m, int depth) {
    if (depth < 0) {
        throw ValidationError("doubling check needs depth >= 0");
    }
    const Tree tree(m.q());
    DoublingResult out;
    out.claimed = doubling_constant(m.q(), m.alpha());
    tree.for_each_in_ball(Vertex::root(), depth, [&](const Vertex& v) {
        // Within one ball class the largest r maximizes B(v,2r); those r are
        // e^{-|v|} for the singleton and e^{-(d-1)} for Sector(p at depth d).
        std::vector<double> radii{std::exp(-static_cast<double>(v.norm()))};
        for (int d = v.norm(); d >= 1; --d) {
            radii.push_back(std::exp(-static_cast<double>(d - 1)));
        }
        radii.push_back(2.0);
        for (double r : radii) {
            const GromovBall small = tree.gromov_ball(v, r);
            const GromovBall large = tree.gromov_ball(v, 2.0 * r);
            const double ratio = m.measure_of(large) / m.measure_of(small);
            if (ratio > out.max_ratio) {
                out.max_ratio = ratio;
                out.argmax_center = v;
                out.argmax_ball = small.to_string() + " -> " + large.to_string();
            }
        }
    });
    return out;
}

namespace {

HormanderResult hormander_pointwise(const PointwiseKernel& kernel, const RadialMeasure& m, int depth_v,
                                    int depth_xy, int z_truncation) {
    if (!kernel.decay_bound) {
        throw ValidationError("a pointwise kernel needs a z-decay bound for the Hormander check");
    }
    const Tree tree(m.q());
    HormanderResult result;
    result.z_truncation = z_truncation;

    // sum_{n > Z} 2 bound(n) #S(o,n) sigma_n, summed until negligible.
    double tail = 0.0;
    double previous = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int n = z_truncation + 1; n <= z_truncation + 4000; ++n) {
        const double term = 2.0 * kernel.decay_bound(n) * tree.sphere_size(n) * m.density(n);
        tail += term;
        if (!std::isfinite(tail)) {
            break;
        }
        if (term <= 1e-17 * std::max(tail, 1e-300) && term <= previous) {
            converged = true;
            break;
        }
        if (term == 0.0) {
            converged = true;
            break;
        }
        previous = term;
    }
    if (!converged) {
        tail = std::numeric_limits<double>::infinity();
    }

    std::vector<Vertex> zs = tree.ball(Vertex::root(), z_truncation);
    for (int nv = 1; nv <= depth_v; ++nv) {
        tree.for_each_in_sphere(nv, [&](const Vertex& v) {
            const auto region = tree.sector(v, nv + depth_xy);
            for (std::size_t i = 0; i < region.size(); ++i) {
                for (std::size_t j = i + 1; j < region.size(); ++j) {
                    double sum = 0.0;
                    for (const auto& z : zs) {
                        if (v.is_prefix_of(z)) {
                            continue;
                        }
                        sum += std::abs(kernel.value(z, region[i]) - kernel.value(z, region[j])) *
                               m.density(z);
                    }
                    if (!(sum <= result.value)) {
                        result.value = sum;
                        result.argmax_v = nv;
                        result.argmax_x = region[i].norm();
                        result.argmax_y = region[j].norm();
                    }
                }
            }
        });
    }
    // The tail estimate does not depend on the pair, so it is judged against the supremum.
    result.tail_bound = tail;
    result.tail_ok = std::isfinite(result.value) && std::isfinite(tail) &&
                     (tail <= 0.1 * result.value || (result.value == 0.0 && tail == 0.0));
    return result;
}

} // namespace

HormanderResult hormander_check(const KernelSpec& kernel, const RadialMeasure& m, int depth_v,
                                int depth_xy, int z_truncation) {
    if (const auto* profile = std::get_if<ProfileKernel>(&kernel)) {
        return hormander_profile(*profile, m, depth_v, depth_xy, z_truncation);
    }
    return hormander_pointwise(std::get<PointwiseKernel>(kernel), m, depth_v, depth_xy, z_truncation);
}

double symmetric_uniform(std::mt19937_64& rng) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
}

DenseFunction random_l1_normalized(const Tree& tree, const RadialMeasure& m, int depth,
                                   std::mt19937_64& rng) {
    DenseFunction f = DenseFunction::render(tree, depth, [&](const Vertex&) { return symmetric_uniform(rng); });
    const double norm = lp_norm(m, f, 1.0);
    return norm > 0.0 ? f.scaled(1.0 / norm) : f;
}

std::vector<WeakTypeRow> weak_type_experiment(const RadialMeasure& m, int trials, int support_depth,
                                              const std::vector<double>& s_grid, int z_depth,
                                              std::uint64_t seed) {
    if (trials < 1) {
        throw ValidationError("weak-type experiment needs at least one trial");
    }
    const Tree tree(m.q());
    const KernelEvaluator k(m);
    std::mt19937_64 rng(seed);
    const auto zs = tree.ball(Vertex::root(), z_depth);
    const double outside = (static_cast<double>(m.q()) + 1.0) / m.q() * m.tail_sum(z_depth + 1, m.q());
    std::vector<WeakTypeRow> rows(s_grid.size());
    for (std::size_t i = 0; i < s_grid.size(); ++i) {
        rows[i].s = s_grid[i];
        rows[i].tail_bound = s_grid[i] * outside;
    }
    for (int trial = 0; trial < trials; ++trial) {
        const DenseFunction f = random_l1_normalized(tree, m, support_depth, rng);
        std::vector<std::pair<double, double>> values; // (|Pf(z)|, sigma(z))
        values.reserve(zs.size());
        for (const auto& z : zs) {
            values.emplace_back(std::abs(project(k, f, z)), m.density(z));
        }
        for (auto& row : rows) {
            double mass = 0.0;
            for (const auto& [value, sigma] : values) {
                if (value > row.s) {
                    mass += sigma;
                }
            }
            row.value = std::max(row.value, row.s * mass);
        }
    }
    return rows;
}

WitnessDistribution weak_type_witness(const KernelEvaluator& k_alpha, int n, int z_extra) {
    const RadialMeasure& m = k_alpha.measure();
    const Tree& tree = k_alpha.tree();
    WitnessDistribution out;
    out.n = n;
    out.l1 = kernel_l1_moment(k_alpha, n, m.alpha());
    const int z_max = n + z_extra;
    std::vector<std::pair<double, double>> classes; // (|K|, mass)
    double largest = 0.0;
    for (int nz = 0; nz <= z_max; ++nz) {
        for (int l = 0; l <= std::min(nz, n); ++l) {
            const double count = tree.confluent_class_count(n, l, nz);
            if (count > 0.0) {
                classes.emplace_back(std::abs(k_alpha.profile(nz, n, l)), count * m.density(nz));
            }
        }
    }
    std::sort(classes.begin(), classes.end(),
              [](const auto& x, const auto& y) { return x.first > y.first; });
    double mass = 0.0;
    for (std::size_t i = 0; i < classes.size();) {
        const double level = classes[i].first;
        while (i < classes.size() && classes[i].first == level) {
            mass += classes[i].second;
            ++i;
        }
        // s -> level from below gives level * mu{|K| >= level}.
        out.weak_sup = std::max(out.weak_sup, level * mass);
    }
    for (int l = 0; l <= n; ++l) {
        largest = std::max(largest, k_alpha.abs_bound(l));
    }
    const double outside = (static_cast<double>(m.q()) + 1.0) / m.q() * m.tail_sum(z_max + 1, m.q());
    out.weak_tail = largest * outside;
    return out;
}

} // namespace treeberg
