#include "treeberg/harmonic_space.hpp"

#include <cmath>

namespace treeberg {

DenseFunction::DenseFunction(int q, int radius) : q_(q), radius_(radius) {
    Tree{q};
    if (radius < 0) {
        throw ValidationError("region radius must be nonnegative");
    }
}

DenseFunction DenseFunction::render(const Tree& tree, int radius,
                                    const std::function<double(const Vertex&)>& fn) {
    DenseFunction out(tree.q(), radius);
    tree.for_each_in_ball(Vertex::root(), radius, [&](const Vertex& x) {
        const double value = fn(x);
        if (value != 0.0) {
            out.values_[x] = value;
        }
    });
    return out;
}

double DenseFunction::operator()(const Vertex& v) const {
    auto it = values_.find(v);
    return it == values_.end() ? 0.0 : it->second;
}

void DenseFunction::set(const Vertex& v, double value) {
    if (!in_region(v)) {
        throw ValidationError("vertex " + v.to_string() + " lies outside Ball(o," +
                              std::to_string(radius_) + ")");
    }
    Tree(q_).validate(v);
    if (value == 0.0) {
        values_.erase(v);
    } else {
        values_[v] = value;
    }
}

std::vector<Vertex> DenseFunction::support() const {
    std::vector<Vertex> out;
    out.reserve(values_.size());
    for (const auto& [v, value] : values_) {
        if (value != 0.0) {
            out.push_back(v);
        }
    }
    return out;
}

DenseFunction DenseFunction::scaled(double factor) const {
    DenseFunction out(q_, radius_);
    for (const auto& [v, value] : values_) {
        out.values_[v] = value * factor;
    }
    return out;
}

double laplacian(const DenseFunction& f, const Vertex& v) {
    if (v.norm() + 1 > f.radius()) {
        throw ValidationError("Laplacian at " + v.to_string() +
                              " needs neighbours outside the region Ball(o," +
                              std::to_string(f.radius()) + ")");
    }
    const Tree tree(f.q());
    double sum = 0.0;
    for (const auto& u : tree.neighbors(v)) {
        sum += f(u);
    }
    return f(v) - sum / (f.q() + 1);
}

void require_harmonic(const DenseFunction& f, int radius, double tolerance) {
    const Tree tree(f.q());
    tree.for_each_in_ball(Vertex::root(), radius, [&](const Vertex& v) {
        const double lap = laplacian(f, v);
        if (!(std::abs(lap) <= tolerance)) {
            throw ValidationError("function is not harmonic at " + v.to_string() +
                                  " (Laplacian " + std::to_string(lap) + ")");
        }
    });
}

HarmonicExtension::HarmonicExtension(DenseFunction g, int n, double tolerance)
    : g_(std::move(g)), n_(n) {
    if (n < 0) {
        throw ValidationError("extension level must be nonnegative");
    }
    if (g_.radius() < n + 1) {
        throw ValidationError("harmonic extension from level " + std::to_string(n) +
                              " needs g on Ball(o," + std::to_string(n + 1) + ")");
    }
    require_harmonic(g_, n, tolerance);
}

double HarmonicExtension::operator()(const Vertex& x) const {
    if (x.norm() <= n_ + 1) {
        return g_(x);
    }
    const int k = x.norm() - n_ - 1;
    const double a = a_seq(g_.q(), k);
    return a * g_(x.ancestor(k)) - (a - 1.0) * g_(x.ancestor(k + 1));
}

double WBasisElement::norm_p(double p) const {
    double sum = 0.0;
    for (double c : coefficients) {
        sum += std::pow(std::abs(c), p);
    }
    return std::pow(sum, 1.0 / p);
}

double helmert(int s, int j, int label) {
    if (j < 1 || j >= s) {
        throw ValidationError("basis index j=" + std::to_string(j) + " outside I_v = {1,...," +
                              std::to_string(s - 1) + "}");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(j) * (j + 1));
    if (label < j) {
        return scale;
    }
    if (label == j) {
        return -j * scale;
    }
    return 0.0;
}

std::vector<WBasisElement> w_basis(const Tree& tree, const Vertex& v) {
    tree.validate(v);
    const int s = tree.successor_count(v);
    std::vector<WBasisElement> out;
    for (int j = 1; j < s; ++j) {
        WBasisElement e{v, j, std::vector<double>(s)};
        for (int label = 0; label < s; ++label) {
            e.coefficients[label] = helmert(s, j, label);
        }
        out.push_back(std::move(e));
    }
    return out;
}

double basis_fn_eval(const Tree& tree, const Vertex& v, int j, const Vertex& x) {
    const int s = tree.successor_count(v);
    if (j < 1 || j >= s) {
        throw ValidationError("basis index j=" + std::to_string(j) + " out of range for " +
                              v.to_string());
    }
    if (x.norm() <= v.norm() || !v.is_prefix_of(x)) {
        return 0.0;
    }
    const int label = x.labels()[v.norm()];
    return a_seq(tree.q(), x.norm() - v.norm() - 1) * helmert(s, j, label);
}

HarmonicExpansion HarmonicExpansion::basis_function(const Vertex& v, int j, double coefficient) {
    HarmonicExpansion out;
    out.add_term(v, j, coefficient);
    return out;
}

void HarmonicExpansion::add_term(const Vertex& v, int j, double coefficient) {
    if (j < 1) {
        throw ValidationError("basis index must be >= 1");
    }
    auto [it, inserted] = terms_.try_emplace({v, j}, 0.0);
    it->second += coefficient;
}

double HarmonicExpansion::coefficient(const Vertex& v, int j) const {
    auto it = terms_.find({v, j});
    return it == terms_.end() ? 0.0 : it->second;
}

int HarmonicExpansion::max_term_depth() const {
    int depth = -1;
    for (const auto& [key, c] : terms_) {
        depth = std::max(depth, key.first.norm());
    }
    return depth;
}

double HarmonicExpansion::evaluate(const Tree& tree, const Vertex& x) const {
    double value = c0_;
    // Only v in [o, p(x)] contribute, so walk the prefixes of x.
    for (int depth = 0; depth < x.norm(); ++depth) {
        const Vertex v = x.prefix(depth);
        auto it = terms_.lower_bound({v, 0});
        for (; it != terms_.end() && it->first.first == v; ++it) {
            value += it->second * basis_fn_eval(tree, v, it->first.second, x);
        }
    }
    return value;
}

DenseFunction HarmonicExpansion::render(const Tree& tree, int radius) const {
    return DenseFunction::render(tree, radius, [&](const Vertex& x) { return evaluate(tree, x); });
}

HarmonicExpansion& HarmonicExpansion::operator+=(const HarmonicExpansion& other) {
    c0_ += other.c0_;
    for (const auto& [key, c] : other.terms_) {
        add_term(key.first, key.second, c);
    }
    return *this;
}

HarmonicExpansion HarmonicExpansion::operator*(double factor) const {
    HarmonicExpansion out(c0_ * factor);
    for (const auto& [key, c] : terms_) {
        out.terms_[key] = c * factor;
    }
    return out;
}

nlohmann::json HarmonicExpansion::to_json() const {
    nlohmann::json records = nlohmann::json::array();
    records.push_back({{"f0", c0_}});
    for (const auto& [key, c] : terms_) {
        records.push_back({{"v", key.first.to_string()}, {"j", key.second}, {"c", c}});
    }
    return records;
}

HarmonicExpansion HarmonicExpansion::from_json(const nlohmann::json& records) {
    if (!records.is_array()) {
        throw ValidationError("expansion must be a JSON record list");
    }
    HarmonicExpansion out;
    for (const auto& record : records) {
        if (record.contains("f0")) {
            out.c0_ += record.at("f0").get<double>();
        } else if (record.contains("v") && record.contains("j") && record.contains("c")) {
            out.add_term(Vertex::parse(record.at("v").get<std::string>()), record.at("j").get<int>(),
                         record.at("c").get<double>());
        } else {
            throw ValidationError("unrecognized expansion record " + record.dump());
        }
    }
    return out;
}

double inner_product(const HarmonicExpansion& f, const HarmonicExpansion& g, const RadialMeasure& m) {
    double total = f.c0() * g.c0() * m.total_mass();
    const auto& small = f.terms().size() <= g.terms().size() ? f.terms() : g.terms();
    const auto& large = &small == &f.terms() ? g.terms() : f.terms();
    for (const auto& [key, c] : small) {
        auto it = large.find(key);
        if (it != large.end()) {
            total += c * it->second * m.b_const(key.first.norm());
        }
    }
    return total;
}

SeriesValue lp_norm_basis_fn(const Tree& tree, const Vertex& v, int j, double p, const RadialMeasure& m) {
    tree.validate(v);
    const int s = tree.successor_count(v);
    if (j < 1 || j >= s) {
        throw ValidationError("basis index j=" + std::to_string(j) + " out of range for " +
                              v.to_string());
    }
    double e_norm = 0.0;
    for (int label = 0; label < s; ++label) {
        e_norm += std::pow(std::abs(helmert(s, j, label)), p);
    }
    const double alpha = m.alpha();
    const SeriesValue c = c_const(tree.q(), alpha, p);
    const double scale = e_norm * std::pow(static_cast<double>(tree.q()), -alpha * v.norm());
    return {c.value * scale, c.tail_bound * scale};
}

SeriesValue lp_power_sum(const Tree& tree, const HarmonicExpansion& f, const RadialMeasure& m,
                         double p, double tolerance) {
    if (!(p >= 1.0)) {
        throw ValidationError("L^p norms need p >= 1");
    }
    const int depth = f.max_term_depth() + 1;
    if (depth == 0) {
        return {std::pow(std::abs(f.c0()), p) * m.total_mass(), 0.0};
    }
    SeriesValue out;
    tree.for_each_in_ball(Vertex::root(), depth - 1, [&](const Vertex& x) {
        out.value += std::pow(std::abs(f.evaluate(tree, x)), p) * m.density(x);
    });
    const double qd = tree.q();
    const double lim = qd / (qd - 1.0);
    tree.for_each_in_sphere(depth, [&](const Vertex& w) {
        // On T_w the expansion is a function of |x| alone.
        double envelope = std::abs(f.c0());
        std::vector<std::pair<int, double>> active; // (|v|, c * e_{v,j}(child toward w))
        for (int d = 0; d < depth; ++d) {
            const Vertex v = w.prefix(d);
            auto it = f.terms().lower_bound({v, 0});
            for (; it != f.terms().end() && it->first.first == v; ++it) {
                const double ce = it->second *
                                  helmert(tree.successor_count(v), it->first.second, w.labels()[d]);
                active.emplace_back(d, ce);
                envelope += std::abs(ce) * lim;
            }
        }
        auto radial = [&](int n) {
            double value = f.c0();
            for (const auto& [d, ce] : active) {
                value += ce * a_seq(tree.q(), n - d - 1);
            }
            return value;
        };
        double partial = 0.0;
        int n = depth;
        double tail = 0.0;
        for (;; ++n) {
            partial += std::pow(qd, n - depth) * m.density(n) * std::pow(std::abs(radial(n)), p);
            tail = std::pow(envelope, p) * std::pow(qd, -depth) * m.tail_sum(n + 1, qd);
            if (tail <= tolerance * partial || tail == 0.0 || n - depth > 5000) {
                break;
            }
        }
        out.value += partial;
        out.tail_bound += tail;
    });
    return out;
}

} // namespace treeberg
