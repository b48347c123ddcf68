#include "treeberg/radial_measures.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace treeberg {

double a_seq(int q, int n) {
    if (n < -1) {
        throw ValidationError("a_n is defined for n >= -1, got n=" + std::to_string(n));
    }
    if (n == -1) {
        return 0.0;
    }
    const double qd = q;
    return (qd - std::pow(qd, -n)) / (qd - 1.0);
}

double exp_total_mass(int q, double alpha) {
    const double qa = std::pow(static_cast<double>(q), alpha);
    return (qa + 1.0) / (qa - q);
}

RadialMeasure::RadialMeasure(int q, std::vector<double> prefix, std::optional<double> tail_ratio,
                             std::optional<double> alpha)
    : q_(q), prefix_(std::move(prefix)), tail_ratio_(tail_ratio), alpha_(alpha),
      cache_(std::make_shared<Cache>()) {
    Tree{q}; // validates q
    if (prefix_.empty()) {
        throw ValidationError("radial measure needs at least sigma_0");
    }
    for (std::size_t n = 0; n < prefix_.size(); ++n) {
        if (!(prefix_[n] > 0.0) || !std::isfinite(prefix_[n])) {
            throw ValidationError("density must be strictly positive; sigma_" + std::to_string(n) +
                                  " = " + std::to_string(prefix_[n]));
        }
        if (n > 0 && prefix_[n] > prefix_[n - 1]) {
            throw ValidationError("density must be nonincreasing; sigma_" + std::to_string(n) +
                                  " > sigma_" + std::to_string(n - 1));
        }
    }
    if (tail_ratio_ && !(*tail_ratio_ > 0.0 && *tail_ratio_ <= 1.0)) {
        throw ValidationError("geometric tail ratio must lie in (0, 1] for a positive "
                              "nonincreasing density");
    }
}

RadialMeasure RadialMeasure::exponential(int q, double alpha) {
    if (!(alpha > 1.0)) {
        throw ValidationError("exponential measure needs alpha > 1, got " + std::to_string(alpha));
    }
    return RadialMeasure(q, {1.0}, std::pow(static_cast<double>(q), -alpha), alpha);
}

RadialMeasure RadialMeasure::table(int q, std::vector<double> prefix,
                                   std::optional<double> tail_ratio) {
    return RadialMeasure(q, std::move(prefix), tail_ratio, std::nullopt);
}

double RadialMeasure::alpha() const {
    if (!alpha_) {
        throw ValidationError("measure " + describe() + " is not exponential");
    }
    return *alpha_;
}

bool RadialMeasure::is_finite() const {
    return tail_ratio_.has_value() && *tail_ratio_ * q_ < 1.0;
}

void RadialMeasure::require_finite(const char* what) const {
    if (!tail_ratio_) {
        throw DivergenceError(std::string(what) + " needs a tail rule; measure " + describe() +
                              " only supports finitely supported sums");
    }
    if (!is_finite()) {
        throw DivergenceError(std::string("measure not finite: ") + describe());
    }
}

double RadialMeasure::density(int n) const {
    if (n < 0) {
        throw ValidationError("density index must be nonnegative");
    }
    const int last = static_cast<int>(prefix_.size()) - 1;
    if (n <= last) {
        return prefix_[n];
    }
    if (!tail_ratio_) {
        throw ValidationError("sigma_" + std::to_string(n) + " lies beyond the prefix of " +
                              describe() + " and no tail rule is given");
    }
    return prefix_[last] * std::pow(*tail_ratio_, n - last);
}

double RadialMeasure::tail_sum(int n0, double g) const {
    n0 = std::max(n0, 0);
    const int last = static_cast<int>(prefix_.size()) - 1;
    double total = 0.0;
    for (int n = n0; n <= last; ++n) {
        total += prefix_[n] * std::pow(g, n);
    }
    if (!tail_ratio_) {
        throw DivergenceError("sum over all radii needs a tail rule; measure " + describe());
    }
    const double rg = *tail_ratio_ * g;
    if (rg >= 1.0) {
        throw DivergenceError("series sum_n sigma_n g^n diverges for g=" + std::to_string(g) +
                              " under " + describe());
    }
    const int start = std::max(n0, last + 1);
    total += prefix_[last] * std::pow(*tail_ratio_, start - last) * std::pow(g, start) / (1.0 - rg);
    return total;
}

double RadialMeasure::total_mass() const {
    require_finite("total mass");
    if (alpha_) {
        return exp_total_mass(q_, *alpha_);
    }
    const double qd = q_;
    return prefix_[0] + (qd + 1.0) / qd * tail_sum(1, qd);
}

double RadialMeasure::b_const_series(int n) const {
    if (n < 0) {
        throw ValidationError("b_n needs n >= 0");
    }
    require_finite("b_n");
    const double qd = q_;
    const double scale = qd / ((qd - 1.0) * (qd - 1.0));
    // b_n = sum_{m>n} sigma_m a_{m-n-1} sum_{k<m-n} q^k, and
    // a_{l-1} (q^l - 1)/(q - 1) = q (q^l - 2 + q^{-l})/(q - 1)^2.
    const int last = static_cast<int>(prefix_.size()) - 1;
    double total = 0.0;
    for (int m = n + 1; m <= last; ++m) {
        const int l = m - n;
        total += prefix_[m] * a_seq(q_, l - 1) * (std::pow(qd, l) - 1.0) / (qd - 1.0);
    }
    const int start = std::max(n + 1, last + 1);
    const double r = *tail_ratio_;
    const double head = prefix_[last] * std::pow(r, start - last);
    const int l0 = start - n;
    const double grow = head * std::pow(qd, l0) / (1.0 - r * qd);
    const double flat = head / (1.0 - r);
    const double decay = head * std::pow(qd, -l0) / (1.0 - r / qd);
    total += scale * (grow - 2.0 * flat + decay);
    return total;
}

double RadialMeasure::b_const(int n) const {
    if (n < 0) {
        throw ValidationError("b_n needs n >= 0");
    }
    {
        std::lock_guard lock(cache_->mutex);
        if (auto it = cache_->b.find(n); it != cache_->b.end()) {
            return it->second;
        }
    }
    double value;
    if (alpha_) {
        value = std::pow(static_cast<double>(q_), -*alpha_ * n) * b_const_series(0);
    } else {
        value = b_const_series(n);
    }
    std::lock_guard lock(cache_->mutex);
    cache_->b.emplace(n, value);
    return value;
}

double RadialMeasure::sector_mass_at_depth(int depth) const {
    if (depth < 1) {
        throw ValidationError("sector mass is defined for u != o; use total_mass for the root");
    }
    require_finite("sector mass");
    const double qd = q_;
    if (alpha_) {
        return std::pow(qd, -*alpha_ * depth) / (1.0 - std::pow(qd, 1.0 - *alpha_));
    }
    return std::pow(qd, -depth) * tail_sum(depth, qd);
}

double RadialMeasure::sector_mass(const Vertex& u) const {
    Tree(q_).validate(u);
    return sector_mass_at_depth(u.norm());
}

double RadialMeasure::confluent_class_mass(int l) const {
    if (l < 0) {
        throw ValidationError("confluent depth must be nonnegative");
    }
    const int spare = (l == 0 ? q_ + 1 : q_) - 1;
    return density(l) + spare * sector_mass_at_depth(l + 1);
}

double RadialMeasure::measure_of(const GromovBall& ball) const {
    switch (ball.kind) {
    case GromovBall::Kind::Singleton:
        return density(ball.vertex);
    case GromovBall::Kind::Sector:
        return ball.vertex.is_root() ? total_mass() : sector_mass(ball.vertex);
    case GromovBall::Kind::WholeTree:
        return total_mass();
    }
    return 0.0;
}

double RadialMeasure::measure_of(std::span<const Vertex> distinct_vertices) const {
    double total = 0.0;
    for (const auto& v : distinct_vertices) {
        total += density(v);
    }
    return total;
}

std::string RadialMeasure::describe() const {
    std::ostringstream out;
    out.precision(17);
    if (alpha_) {
        out << "exp(q=" << q_ << ",alpha=" << *alpha_ << ")";
        return out.str();
    }
    out << "table(q=" << q_ << ",values=";
    for (std::size_t i = 0; i < prefix_.size(); ++i) {
        out << (i ? ";" : "") << prefix_[i];
    }
    if (tail_ratio_) {
        out << ",tail=geometric:" << *tail_ratio_;
    }
    out << ")";
    return out.str();
}

SeriesValue c_const(int q, double s, double p, double tolerance) {
    if (!(s > 1.0)) {
        throw DivergenceError("C(s,p) diverges for s <= 1 (s=" + std::to_string(s) + ")");
    }
    if (!(p >= 1.0)) {
        throw ValidationError("C(s,p) needs p >= 1");
    }
    const double qd = q;
    const double x = std::pow(qd, 1.0 - s);
    // a_{m-1} < q/(q-1), so the tail beyond M is at most q^{-1} (q/(q-1))^p x^{M+1}/(1-x).
    const double envelope = std::pow(qd / (qd - 1.0), p) / qd / (1.0 - x);
    SeriesValue out;
    double xm = 1.0;
    constexpr int kMaxTerms = 50'000'000;
    for (int m = 1; m <= kMaxTerms; ++m) {
        xm *= x;
        out.value += xm / qd * std::pow(a_seq(q, m - 1), p);
        out.tail_bound = envelope * xm * x;
        if (out.tail_bound <= tolerance * out.value) {
            return out;
        }
    }
    return out;
}

double sector_mass(const RadialMeasure& m, const Vertex& u) { return m.sector_mass(u); }

} // namespace treeberg
