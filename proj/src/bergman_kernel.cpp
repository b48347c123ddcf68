#include "treeberg/bergman_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace treeberg {

namespace {

template <class Real>
Real a_of(int q, int n) {
    if (n < 0) {
        return 0;
    }
    const Real qr = q;
    return (qr - std::pow(qr, static_cast<Real>(-n))) / (qr - 1);
}

template <class Real>
Real gamma_of(const Tree& tree, const Vertex& v, const Vertex& z, const Vertex& x) {
    const int n = v.norm();
    if (z.norm() <= n || x.norm() <= n || !v.is_prefix_of(z) || !v.is_prefix_of(x)) {
        return 0;
    }
    const Real s = tree.successor_count(v);
    if (z.labels()[n] == x.labels()[n]) {
        return (s - 1) / s;
    }
    return -1 / s;
}

template <class Real>
Real helmert_of(int j, int label) {
    const Real scale = 1 / std::sqrt(static_cast<Real>(j) * (j + 1));
    if (label < j) {
        return scale;
    }
    return label == j ? -j * scale : Real(0);
}

} // namespace

double gamma(const Tree& tree, const Vertex& v, const Vertex& z, const Vertex& x) {
    return gamma_of<double>(tree, v, z, x);
}

KernelEvaluator::KernelEvaluator(RadialMeasure measure)
    : measure_(std::move(measure)), tree_(measure_.q()), cache_(std::make_shared<Cache>()) {
    if (!measure_.is_finite()) {
        throw DivergenceError("kernel needs a finite measure; got " + measure_.describe());
    }
}

template <class Real>
Real KernelEvaluator::recursive_as(const Vertex& z, const Vertex& x) const {
    tree_.validate(z);
    tree_.validate(x);
    const Real q = tree_.q();
    // (Gamma(v,z,.))^H_{|v|}(x) = a_{|x|-|v|-1} Gamma(v,z,x), zero off T_v \ {v}.
    auto extension = [&](const Vertex& v) {
        const Real g = gamma_of<Real>(tree_, v, z, x);
        return g == 0 ? Real(0) : a_of<Real>(tree_.q(), x.norm() - v.norm() - 1) * g;
    };
    const Real k_o = 1 / static_cast<Real>(measure_.total_mass());
    if (z.is_root()) {
        return k_o;
    }
    Real before = k_o; // K_{v_{m-2}}(x)
    Real current = k_o + extension(Vertex::root()) / static_cast<Real>(measure_.b_const(0)); // K_{v_1}(x)
    for (int m = 2; m <= z.norm(); ++m) {
        const Vertex v = z.prefix(m - 1);
        const Real next =
            -before / q + (q + 1) / q * current + extension(v) / static_cast<Real>(measure_.b_const(m - 1));
        before = current;
        current = next;
    }
    return current;
}

template <class Real>
Real KernelEvaluator::closed_as(const Vertex& z, const Vertex& x) const {
    const int l = tree_.confluent_norm(z, x);
    const Real q = tree_.q();
    Real sum = 0;
    for (int t = 0; t <= l; ++t) {
        const Real g = gamma_of<Real>(tree_, z.prefix(t), z, x);
        if (g == 0) {
            continue;
        }
        sum += g / static_cast<Real>(measure_.b_const(t)) *
               (1 - std::pow(q, static_cast<Real>(t - z.norm()))) *
               (1 - std::pow(q, static_cast<Real>(t - x.norm())));
    }
    return 1 / static_cast<Real>(measure_.total_mass()) + q * q / ((q - 1) * (q - 1)) * sum;
}

double KernelEvaluator::recursive(const Vertex& z, const Vertex& x) const { return recursive_as<double>(z, x); }
double KernelEvaluator::closed(const Vertex& z, const Vertex& x) const { return closed_as<double>(z, x); }

long double KernelEvaluator::recursive_extended(const Vertex& z, const Vertex& x) const {
    return recursive_as<long double>(z, x);
}

long double KernelEvaluator::closed_extended(const Vertex& z, const Vertex& x) const {
    return closed_as<long double>(z, x);
}

HarmonicExpansion KernelEvaluator::from_basis(const Vertex& z) const {
    tree_.validate(z);
    HarmonicExpansion out(1.0 / measure_.total_mass());
    for (int d = 0; d < z.norm(); ++d) {
        const Vertex v = z.prefix(d);
        const double b = measure_.b_const(d);
        for (int j = 1; j < tree_.successor_count(v); ++j) {
            const double value = basis_fn_eval(tree_, v, j, z);
            if (value != 0.0) {
                out.add_term(v, j, value / b);
            }
        }
    }
    return out;
}

long double KernelEvaluator::from_basis_extended(const Vertex& z, const Vertex& x) const {
    tree_.validate(z);
    tree_.validate(x);
    using Real = long double;
    Real sum = 1 / static_cast<Real>(measure_.total_mass());
    const int l = tree_.confluent_norm(z, x);
    // f_{v,j}(z) f_{v,j}(x) vanishes unless v is a proper prefix of both.
    for (int d = 0; d < std::min({l + 1, z.norm(), x.norm()}); ++d) {
        const Vertex v = z.prefix(d);
        const int s = tree_.successor_count(v);
        const Real az = a_of<Real>(tree_.q(), z.norm() - d - 1);
        const Real ax = a_of<Real>(tree_.q(), x.norm() - d - 1);
        for (int j = 1; j < s; ++j) {
            sum += az * helmert_of<Real>(j, z.labels()[d]) * ax * helmert_of<Real>(j, x.labels()[d]) /
                   static_cast<Real>(measure_.b_const(d));
        }
    }
    return sum;
}

double KernelEvaluator::compute_profile(int nz, int nx, int l) const {
    const double q = tree_.q();
    double sum = 0.0;
    for (int t = 0; t <= l; ++t) {
        const double s = tree_.successor_count_at_depth(t);
        double g;
        if (t < l) {
            g = (s - 1.0) / s;
        } else if (nz > l && nx > l) {
            g = -1.0 / s;
        } else {
            g = 0.0;
        }
        if (g == 0.0) {
            continue;
        }
        sum += g / measure_.b_const(t) * (1.0 - std::pow(q, t - nz)) * (1.0 - std::pow(q, t - nx));
    }
    return 1.0 / measure_.total_mass() + q * q / ((q - 1.0) * (q - 1.0)) * sum;
}

double KernelEvaluator::profile(int nz, int nx, int l) const {
    if (nz < 0 || nx < 0 || l < 0 || l > std::min(nz, nx)) {
        throw ValidationError("invalid kernel profile key (" + std::to_string(nz) + "," +
                              std::to_string(nx) + "," + std::to_string(l) + ")");
    }
    if (nz > nx) {
        std::swap(nz, nx);
    }
    const std::uint64_t key = (static_cast<std::uint64_t>(nz) << 42) |
                              (static_cast<std::uint64_t>(nx) << 21) | static_cast<std::uint64_t>(l);
    {
        std::lock_guard lock(cache_->mutex);
        if (auto it = cache_->values.find(key); it != cache_->values.end()) {
            return it->second;
        }
    }
    const double value = compute_profile(nz, nx, l);
    std::lock_guard lock(cache_->mutex);
    cache_->values.emplace(key, value);
    return value;
}

double KernelEvaluator::operator()(const Vertex& z, const Vertex& x) const {
    return profile(z.norm(), x.norm(), tree_.confluent_norm(z, x));
}

double KernelEvaluator::abs_bound(int l) const {
    const double q = tree_.q();
    double sum = 0.0;
    for (int t = 0; t <= l; ++t) {
        sum += 1.0 / measure_.b_const(t);
    }
    return 1.0 / measure_.total_mass() + q * q / ((q - 1.0) * (q - 1.0)) * sum;
}

namespace {

struct PairSum {
    double value = 0.0;
    double tail = 0.0;
    double last_shell = 0.0;
    double previous_shell = 0.0;
};

// sum over z outside T_v, |z| <= z_max, grouped by l = |z^v| < |v|.
PairSum pair_sum(const ProfileKernel& kernel, const RadialMeasure& m, const Tree& tree, int nv,
                 int nx, int ny, int z_max) {
    PairSum out;
    const double qd = tree.q();
    for (int n = 0; n <= z_max; ++n) {
        double shell = 0.0;
        for (int l = 0; l < nv && l <= n; ++l) {
            const double count = tree.confluent_class_count(nv, l, n);
            if (count == 0.0) {
                continue;
            }
            const double diff = kernel.value(n, nx, l) - kernel.value(n, ny, l);
            shell += count * m.density(n) * std::abs(diff);
        }
        out.previous_shell = out.last_shell;
        out.last_shell = shell;
        out.value += shell;
    }
    if (kernel.bound) {
        // count(l, n) <= ((q+1)/q) q^{n-l}
        for (int l = 0; l < nv; ++l) {
            const double envelope = kernel.bound(nx, l) + kernel.bound(ny, l);
            out.tail += envelope * (qd + 1.0) / qd * std::pow(qd, -l) * m.tail_sum(z_max + 1, qd);
        }
    } else if (out.last_shell > 0.0) {
        const double ratio = out.previous_shell > 0.0 ? out.last_shell / out.previous_shell : 1.0;
        out.tail = ratio >= 1.0 ? std::numeric_limits<double>::infinity()
                                : out.last_shell * ratio / (1.0 - ratio);
    }
    return out;
}

} // namespace

HormanderResult hormander_profile(const ProfileKernel& kernel, const RadialMeasure& m, int depth_v,
                                  int depth_xy, int z_truncation) {
    if (depth_v < 1 || depth_xy < 0) {
        throw ValidationError("Hormander scan needs depth_v >= 1 and depth_xy >= 0");
    }
    const Tree tree(m.q());
    HormanderResult result;
    result.z_truncation = z_truncation;
    constexpr int kWidenings = 6;
    for (int nv = 1; nv <= depth_v; ++nv) {
        for (int nx = nv; nx <= nv + depth_xy; ++nx) {
            for (int ny = nx + 1; ny <= nv + depth_xy; ++ny) {
                // x, y at equal depth under v give identical sums, so only distinct depths matter.
                int z_max = std::max(z_truncation, ny + 1);
                PairSum sum = pair_sum(kernel, m, tree, nv, nx, ny, z_max);
                auto acceptable = [](const PairSum& ps) {
                    return std::isfinite(ps.value) && std::isfinite(ps.tail) &&
                           (ps.tail <= 0.1 * ps.value || (ps.value == 0.0 && ps.tail == 0.0));
                };
                for (int widen = 0; widen < kWidenings && !acceptable(sum); ++widen) {
                    if (sum.value == 0.0 && sum.tail == 0.0) {
                        break;
                    }
                    z_max *= 2;
                    sum = pair_sum(kernel, m, tree, nv, nx, ny, z_max);
                }
                const bool tail_ok = acceptable(sum);
                result.z_truncation = std::max(result.z_truncation, z_max);
                if (!tail_ok && result.tail_ok) {
                    result.tail_ok = false;
                    result.value = sum.value;
                    result.tail_bound = sum.tail;
                    result.argmax_v = nv;
                    result.argmax_x = nx;
                    result.argmax_y = ny;
                }
                if (result.tail_ok && sum.value > result.value) {
                    result.value = sum.value;
                    result.tail_bound = sum.tail;
                    result.argmax_v = nv;
                    result.argmax_x = nx;
                    result.argmax_y = ny;
                }
            }
        }
    }
    return result;
}

HormanderResult hormander_constant_for_kernel(const RadialMeasure& m, int depth_v, int depth_xy,
                                              int z_truncation) {
    m.alpha();
    auto k = std::make_shared<KernelEvaluator>(m);
    ProfileKernel kernel{[k](int nz, int nx, int l) { return k->profile(nz, nx, l); },
                         [k](int, int l) { return k->abs_bound(l); }};
    HormanderResult result = hormander_profile(kernel, m, depth_v, depth_xy, z_truncation);
    if (!result.tail_ok) {
        throw DivergenceError("Hormander z-sum tail bound " + std::to_string(result.tail_bound) +
                              " exceeds 10% of the partial sum " + std::to_string(result.value) +
                              " at |v|=" + std::to_string(result.argmax_v));
    }
    return result;
}

void write_kernel_table(std::ostream& out, const KernelEvaluator& k, int depth) {
    out << "nz,nx,l,K\n";
    out << std::setprecision(17);
    for (int nz = 0; nz <= depth; ++nz) {
        for (int nx = 0; nx <= depth; ++nx) {
            for (int l = 0; l <= std::min(nz, nx); ++l) {
                out << nz << ',' << nx << ',' << l << ',' << k.profile(nz, nx, l) << '\n';
            }
        }
    }
}

} // namespace treeberg
