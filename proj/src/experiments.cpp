#include "treeberg/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "treeberg/bergman_kernel.hpp"
#include "treeberg/calderon_zygmund.hpp"
#include "treeberg/operators.hpp"

namespace treeberg {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::string num(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, v);
    return std::string(buffer, end);
}

std::ofstream open_output(const RunOptions& options, const std::string& name) {
    std::filesystem::create_directories(options.out_dir);
    const auto path = options.out_dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    return out;
}

std::ostream& log_of(const RunOptions& options) { return options.log ? *options.log : std::clog; }

} // namespace

Config Config::parse(std::istream& in, const std::string& source) {
    Config config;
    config.source_ = source;
    std::string section;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) {
            line.erase(comment);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ValidationError(source + ":" + std::to_string(line_no) + ": malformed section header '" +
                                      raw + "'");
            }
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            config.sections_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": expected key=value, got '" +
                                  raw + "'");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": empty key");
        }
        auto& entries = config.sections_[section];
        if (entries.count(key)) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key +
                                  "' (first set on line " + std::to_string(entries[key].line) + ")");
        }
        entries[key] = {trim(std::string_view(line).substr(eq + 1)), line_no};
    }
    return config;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config file " + path.string());
    }
    return parse(in, path.string());
}

void Config::fail(const std::string& section, const std::string& key, const std::string& why) const {
    auto sit = sections_.find(section);
    std::string where = source_;
    if (sit != sections_.end()) {
        if (auto kit = sit->second.find(key); kit != sit->second.end()) {
            where += ":" + std::to_string(kit->second.line);
        }
    }
    throw ValidationError(where + ": [" + section + "] " + key + ": " + why);
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
}

std::string Config::get(const std::string& section, const std::string& key) const {
    if (!has(section, key)) {
        throw ValidationError(source_ + ": missing required key [" + section + "] " + key);
    }
    return sections_.at(section).at(key).value;
}

std::string Config::get(const std::string& section, const std::string& key, const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) {
        return fallback;
    }
    const std::string text = get(section, key);
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) {
            fail(section, key, "trailing characters in number '" + text + "'");
        }
        return v;
    } catch (const std::invalid_argument&) {
        fail(section, key, "not a number: '" + text + "'");
    } catch (const std::out_of_range&) {
        fail(section, key, "number out of range: '" + text + "'");
    }
}

long long Config::get_int(const std::string& section, const std::string& key, long long fallback) const {
    if (!has(section, key)) {
        return fallback;
    }
    const std::string text = get(section, key);
    long long v = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size()) {
        fail(section, key, "not an integer: '" + text + "'");
    }
    return v;
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        std::vector<double> fallback) const {
    if (!has(section, key)) {
        return fallback;
    }
    std::vector<double> out;
    for (const auto& item : split(get(section, key), ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                fail(section, key, "bad list element '" + item + "'");
            }
        } catch (const std::logic_error&) {
            fail(section, key, "bad list element '" + item + "'");
        }
    }
    if (out.empty()) {
        fail(section, key, "empty list");
    }
    return out;
}

std::vector<int> Config::get_ints(const std::string& section, const std::string& key,
                                  std::vector<int> fallback) const {
    if (!has(section, key)) {
        return fallback;
    }
    std::vector<int> out;
    for (const auto& item : split(get(section, key), ',')) {
        int v = 0;
        auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || end != item.data() + item.size()) {
            fail(section, key, "bad integer list element '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        fail(section, key, "empty list");
    }
    return out;
}

RadialMeasure Config::measure() const {
    const int q = static_cast<int>(get_int("measure", "q", 2));
    const std::string kind = get("measure", "kind", "exp");
    try {
        if (kind == "exp") {
            return RadialMeasure::exponential(q, get_double("measure", "alpha", 2.0));
        }
        if (kind == "table") {
            std::optional<double> tail;
            const std::string rule = get("measure", "tail", "");
            if (!rule.empty()) {
                const std::string prefix = "geometric:";
                if (rule.rfind(prefix, 0) != 0) {
                    fail("measure", "tail", "expected geometric:<ratio>");
                }
                try {
                    tail = std::stod(rule.substr(prefix.size()));
                } catch (const std::logic_error&) {
                    fail("measure", "tail", "bad ratio in '" + rule + "'");
                }
            }
            return RadialMeasure::table(q, get_doubles("measure", "values", {}), tail);
        }
    } catch (const ValidationError& e) {
        if (std::string(e.what()).find(source_) == 0) {
            throw;
        }
        fail("measure", "kind", e.what());
    }
    fail("measure", "kind", "unknown measure kind '" + kind + "' (expected exp or table)");
}

int worker_count() {
    if (const char* env = std::getenv("TREEBERG_WORKERS")) {
        const int n = std::atoi(env);
        if (n >= 1) {
            return n;
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

int cmd_kernel_table(const Config& config, const RunOptions& options) {
    const RadialMeasure m = config.measure();
    const int depth = static_cast<int>(config.get_int("kernel_table", "depth", 4));
    const double tolerance = config.get_double("kernel_table", "tolerance", 1e-10);
    if (depth < 0 || depth > 8) {
        throw ValidationError("[kernel_table] depth must lie in 0..8");
    }
    const KernelEvaluator k(m);
    const Tree& tree = k.tree();
    const auto vertices = tree.ball(depth);

    struct Residual {
        double recursive_closed = 0.0;
        double closed_basis = 0.0;
    };
    std::map<std::tuple<int, int, int>, Residual> residuals;
    std::vector<std::map<std::tuple<int, int, int>, Residual>> partial(vertices.size());
    parallel_for(vertices.size(), [&](std::size_t i) {
        const Vertex& z = vertices[i];
        const HarmonicExpansion kz = k.from_basis(z);
        for (const auto& x : vertices) {
            const double closed = k.closed(z, x);
            auto& r = partial[i][{z.norm(), x.norm(), tree.confluent_norm(z, x)}];
            r.recursive_closed = std::max(r.recursive_closed, std::abs(k.recursive(z, x) - closed));
            r.closed_basis = std::max(r.closed_basis, std::abs(closed - kz.evaluate(tree, x)));
        }
    });
    for (const auto& p : partial) {
        for (const auto& [key, r] : p) {
            auto& acc = residuals[key];
            acc.recursive_closed = std::max(acc.recursive_closed, r.recursive_closed);
            acc.closed_basis = std::max(acc.closed_basis, r.closed_basis);
        }
    }

    auto out = open_output(options, "kernel_table.csv");
    out << "nz,nx,l,K,residual_recursive_closed,residual_closed_basis\n";
    double worst = 0.0;
    for (const auto& [key, r] : residuals) {
        const auto [nz, nx, l] = key;
        out << nz << ',' << nx << ',' << l << ',' << num(k.profile(nz, nx, l)) << ','
            << num(r.recursive_closed) << ',' << num(r.closed_basis) << '\n';
        worst = std::max({worst, r.recursive_closed, r.closed_basis});
    }
    log_of(options) << "kernel-table: " << residuals.size() << " profile keys, max residual "
                    << num(worst) << " (tolerance " << num(tolerance) << ")\n";
    return worst <= tolerance ? kExitOk : kExitBreach;
}

int cmd_phase_diagram(const Config& config, const RunOptions& options) {
    const RadialMeasure m = config.measure();
    const int q = m.q();
    const double alpha = m.alpha();
    const std::string sec = "phase_diagram";
    const auto as = config.get_doubles(sec, "a", {0.0});
    const auto bs = config.get_doubles(sec, "b", {alpha});
    const auto cs = config.get_doubles(sec, "c", {alpha});
    const auto ps = config.get_doubles(sec, "p", {1.0, 1.5, 2.0, 3.0});
    const auto depths = config.get_ints(sec, "depths", {4, 5, 6});
    const int witness_depth = static_cast<int>(config.get_int(sec, "witness_depth", 5));
    const long long max_axis = config.get_int(sec, "max_axis", 64);
    const long long max_points = config.get_int(sec, "max_points", 4096);
    const double growth_tol = config.get_double(sec, "exponent_tolerance", 0.02);
    const double stable_ratio = config.get_double(sec, "stable_ratio", 1.1);
    const std::string kind_name = config.get(sec, "kind", "S");
    if (kind_name != "S" && kind_name != "T") {
        throw ValidationError("[phase_diagram] kind must be S or T");
    }
    const OperatorKind kind = kind_name == "S" ? OperatorKind::S : OperatorKind::T;

    const std::vector<std::pair<std::string, std::size_t>> axes{
        {"a", as.size()}, {"b", bs.size()}, {"c", cs.size()}, {"p", ps.size()}, {"depths", depths.size()}};
    std::string offending;
    for (const auto& [name, size] : axes) {
        if (static_cast<long long>(size) > max_axis) {
            offending += (offending.empty() ? "" : ", ") + name + " (" + std::to_string(size) + " > " +
                         std::to_string(max_axis) + ")";
        }
    }
    if (!offending.empty()) {
        throw CapacityError("phase-diagram grid exceeds the per-axis cap: " + offending);
    }
    const long long total = static_cast<long long>(as.size() * bs.size() * cs.size() * ps.size());
    if (total > max_points) {
        throw CapacityError("phase-diagram grid has " + std::to_string(total) + " points, cap " +
                            std::to_string(max_points) + " (axes a, b, c, p)");
    }
    const int cap = default_depth_cap(q);
    for (int N : depths) {
        if (N < 0 || N > cap) {
            throw CapacityError("phase-diagram axis depths: N=" + std::to_string(N) + " exceeds the cap " +
                                std::to_string(cap));
        }
    }

    struct Point {
        double a, b, c, p;
    };
    std::vector<Point> points;
    for (double p : ps) {
        for (double a : as) {
            for (double b : bs) {
                for (double c : cs) {
                    if (c > 1.0) {
                        points.push_back({a, b, c, p});
                    }
                }
            }
        }
    }

    struct Result {
        std::vector<NormEstimate> trajectory;
        double fit = std::nan("");
        double theory = 0.0;
        bool predicted = false;
        bool breach = false;
        std::string note;
    };
    std::vector<Result> results(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        const Point& pt = points[i];
        Result& r = results[i];
        const OperatorParams params{pt.a, pt.b, pt.c, kind};
        r.predicted = predicted_bounded(pt.a, pt.b, pt.c, pt.p, alpha);
        r.theory = (pt.c - pt.a - pt.b) * pt.p;
        for (int N : depths) {
            r.trajectory.push_back(operator_norm_estimate(params, alpha, q, pt.p, N));
        }
        if (pt.a * pt.p + alpha > 1.0) {
            const OperatorParams t_params{pt.a, pt.b, pt.c, OperatorKind::T};
            r.fit = witness_exponent_fit(t_params, alpha, q, pt.p, default_witness_R(t_params, alpha, pt.p),
                                         witness_depth);
        }
        if (pt.c > pt.a + pt.b) {
            if (std::isnan(r.fit)) {
                r.note = "witness-not-in-Lp";
            } else if (std::abs(r.fit - r.theory) > growth_tol * std::abs(r.theory)) {
                r.breach = true;
                r.note = "exponent-mismatch";
            }
        }
        if (r.predicted) {
            for (std::size_t k = 1; k < r.trajectory.size(); ++k) {
                if (r.trajectory[k].value > stable_ratio * r.trajectory[k - 1].value) {
                    r.breach = true;
                    r.note = "unstable-trajectory";
                }
            }
        }
    });

    auto out = open_output(options, "phase_diagram.csv");
    out << "a,b,c,p,alpha,N,norm_estimate,ratio_to_previous,method,witness_ratio,witness_exponent_fit,"
           "witness_exponent_theory,predicted_bounded,note\n";
    int breaches = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point& pt = points[i];
        const Result& r = results[i];
        breaches += r.breach ? 1 : 0;
        for (std::size_t k = 0; k < r.trajectory.size(); ++k) {
            const NormEstimate& e = r.trajectory[k];
            const double ratio = k == 0 ? std::nan("") : e.value / r.trajectory[k - 1].value;
            out << num(pt.a) << ',' << num(pt.b) << ',' << num(pt.c) << ',' << num(pt.p) << ','
                << num(alpha) << ',' << e.depth << ',' << num(e.value) << ',' << num(ratio) << ','
                << e.method << ',' << num(e.witness_ratio.value_or(std::nan(""))) << ',' << num(r.fit)
                << ',' << num(r.theory) << ',' << (r.predicted ? "yes" : "no") << ','
                << (r.note.empty() ? "-" : r.note) << '\n';
        }
    }
    log_of(options) << "phase-diagram: " << points.size() << " points, " << breaches << " breaches\n";
    return breaches == 0 ? kExitOk : kExitBreach;
}

int cmd_cz_demo(const Config& config, const RunOptions& options) {
    const RadialMeasure m = config.measure();
    const Tree tree(m.q());
    const std::string sec = "cz_demo";
    const int trials = static_cast<int>(config.get_int(sec, "trials", 20));
    const int support_depth = static_cast<int>(config.get_int(sec, "support_depth", 4));
    const auto t_factors = config.get_doubles(sec, "t_factors", {2.0, 4.0, 8.0});
    const int doubling_depth = static_cast<int>(config.get_int(sec, "doubling_depth", 6));
    const int export_pieces = static_cast<int>(config.get_int(sec, "export_decompositions", 1));
    const std::uint64_t seed =
        options.seed.value_or(static_cast<std::uint64_t>(config.get_int("run", "seed", 20240601)));
    if (trials < 1 || trials > 100000 || support_depth < 0 || support_depth > 8) {
        throw ValidationError("[cz_demo] trials must lie in 1..100000 and support_depth in 0..8");
    }

    // One generator per trial keeps every run independent of the worker count.
    struct Run {
        nlohmann::json json;
        bool ok = true;
        std::size_t flags = 0;
    };
    std::vector<Run> runs(static_cast<std::size_t>(trials) * t_factors.size());
    parallel_for(static_cast<std::size_t>(trials), [&](std::size_t trial) {
        std::mt19937_64 rng(seed + trial);
        const DenseFunction f = random_l1_normalized(tree, m, support_depth, rng);
        const double l1 = lp_norm(m, f, 1.0);
        for (std::size_t k = 0; k < t_factors.size(); ++k) {
            const double t = t_factors[k] * l1 / m.total_mass();
            const CzDecomposition d = cz_decompose(f, t, m);
            const CzReport report = verify_cz(d, f, t, m);
            Run& run = runs[trial * t_factors.size() + k];
            run.ok = report.ok();
            run.flags = report.flags.size();
            run.json = {{"trial", trial}, {"t_factor", t_factors[k]}, {"t", t}, {"report", report.to_json()}};
            if (static_cast<int>(trial) < export_pieces) {
                run.json["decomposition"] = d.to_json(f);
            }
        }
    });

    const DoublingResult doubling = doubling_check(m, doubling_depth);
    const bool doubling_ok = std::abs(doubling.max_ratio - doubling.claimed) <= 1e-12 * doubling.claimed;
    nlohmann::json report;
    report["config"] = {{"measure", m.describe()},
                        {"seed", seed},
                        {"trials", trials},
                        {"support_depth", support_depth},
                        {"t_factors", t_factors}};
    report["doubling"] = {{"depth", doubling_depth},
                          {"max_ratio", doubling.max_ratio},
                          {"D_alpha", doubling.claimed},
                          {"argmax_center", doubling.argmax_center.to_string()},
                          {"argmax_ball", doubling.argmax_ball},
                          {"ok", doubling_ok}};
    nlohmann::json all = nlohmann::json::array();
    std::size_t failures = 0;
    std::size_t flags = 0;
    for (auto& run : runs) {
        failures += run.ok ? 0 : 1;
        flags += run.flags;
        all.push_back(std::move(run.json));
    }
    report["runs"] = std::move(all);
    report["summary"] = {{"runs", runs.size()}, {"failed_runs", failures}, {"flags", flags}};
    auto out = open_output(options, "cz_report.json");
    out << report.dump(2) << '\n';
    log_of(options) << "cz-demo: " << runs.size() << " decompositions, " << failures
                    << " failed, doubling max ratio " << num(doubling.max_ratio) << " vs D_alpha "
                    << num(doubling.claimed) << '\n';
    return failures == 0 && doubling_ok ? kExitOk : kExitBreach;
}

int cmd_hormander_scan(const Config& config, const RunOptions& options) {
    const RadialMeasure m = config.measure();
    const double alpha = m.alpha();
    const std::string sec = "hormander_scan";
    const int depth_v = static_cast<int>(config.get_int(sec, "depth_v", 8));
    const int depth_xy = static_cast<int>(config.get_int(sec, "depth_xy", 2));
    const int z_truncation = static_cast<int>(config.get_int(sec, "z_truncation", 40));
    const double stable_ratio = config.get_double(sec, "stable_ratio", 1.1);
    const int stable_from = static_cast<int>(config.get_int(sec, "stable_from", 3));
    const auto moment_depths = config.get_ints(sec, "moment_depths", {0, 2, 4, 6, 8});
    const double gamma_exp = config.get_double(sec, "gamma", alpha);
    const double beta = config.get_double(sec, "beta", alpha);
    if (depth_v < 1 || depth_v > 64) {
        throw ValidationError("[hormander_scan] depth_v must lie in 1..64");
    }

    std::vector<HormanderResult> rows(static_cast<std::size_t>(depth_v));
    parallel_for(rows.size(), [&](std::size_t i) {
        const auto k = std::make_shared<KernelEvaluator>(m);
        ProfileKernel kernel{[k](int nz, int nx, int l) { return k->profile(nz, nx, l); },
                             [k](int, int l) { return k->abs_bound(l); }};
        rows[i] = hormander_profile(kernel, m, static_cast<int>(i) + 1, depth_xy, z_truncation);
    });
    auto out = open_output(options, "hormander_scan.csv");
    out << "depth_v,sup,tail_bound,z_truncation,ratio_to_previous,tail_ok,flag\n";
    int breaches = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const double ratio = i == 0 ? std::nan("") : r.value / rows[i - 1].value;
        std::string flag = "-";
        if (!r.tail_ok) {
            flag = "tail-breach";
        } else if (static_cast<int>(i) + 1 > stable_from && ratio > stable_ratio) {
            flag = "unstable";
        }
        breaches += flag == "-" ? 0 : 1;
        out << i + 1 << ',' << num(r.value) << ',' << num(r.tail_bound) << ',' << r.z_truncation << ','
            << num(ratio) << ',' << (r.tail_ok ? "yes" : "no") << ',' << flag << '\n';
    }

    const KernelEvaluator k_gamma(RadialMeasure::exponential(m.q(), gamma_exp));
    const double reference = exp_total_mass(m.q(), beta) / exp_total_mass(m.q(), gamma_exp);
    auto moments = open_output(options, "l1_moment.csv");
    moments << "x_norm,moment,tail_bound,moment_over_x,constant_row_reference\n";
    for (int n : moment_depths) {
        const SeriesValue v = kernel_l1_moment(k_gamma, n, beta);
        if (v.tail_bound > 0.1 * v.value) {
            ++breaches;
        }
        moments << n << ',' << num(v.value) << ',' << num(v.tail_bound) << ','
                << (n == 0 ? std::string("nan") : num(v.value / n)) << ','
                << (n == 0 ? num(reference) : std::string("nan")) << '\n';
    }
    log_of(options) << "hormander-scan: depth_v up to " << depth_v << ", " << breaches << " flagged rows\n";
    return breaches == 0 ? kExitOk : kExitBreach;
}

} // namespace treeberg
