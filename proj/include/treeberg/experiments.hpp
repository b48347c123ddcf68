#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "treeberg/radial_measures.hpp"

namespace treeberg {

/// key=value configuration with [section] headers; '#' and ';' start comments.
class Config {
public:
    static Config parse(std::istream& in, const std::string& source = "<config>");
    static Config load(const std::filesystem::path& path);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long long get_int(const std::string& section, const std::string& key, long long fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    std::vector<double> fallback) const;
    std::vector<int> get_ints(const std::string& section, const std::string& key,
                              std::vector<int> fallback) const;

    /// The [measure] section: kind=exp with q, alpha, or kind=table with
    /// values=s0,s1,... and optional tail=geometric:ratio.
    RadialMeasure measure() const;

private:
    struct Entry {
        std::string value;
        int line = 0;
    };
    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& why) const;

    std::string source_;
    std::map<std::string, std::map<std::string, Entry>> sections_;
};

/// Number of worker threads from TREEBERG_WORKERS, defaulting to the hardware count.
int worker_count();
/// Runs body(i) for i in [0, n) on worker_count() threads; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Exit codes of the commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitBreach = 2;

struct RunOptions {
    std::filesystem::path out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::ostream* log = nullptr;
};

int cmd_kernel_table(const Config& config, const RunOptions& options);
int cmd_phase_diagram(const Config& config, const RunOptions& options);
int cmd_cz_demo(const Config& config, const RunOptions& options);
int cmd_hormander_scan(const Config& config, const RunOptions& options);

} // namespace treeberg
