#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

// Flat key=value configuration with dotted section keys, e.g.
//   network.devices = 40
//   optimizer.step_size = 0.01
// '#' starts a comment; blank lines are ignored. Keys are unique (later
// assignments override earlier ones, which is how --set overrides work).

namespace dflopt {

class Config {
public:
    Config() = default;

    static Config parse_text(const std::string& text, const std::string& origin = "<string>");
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value);
    // Applies "key=value" (the CLI --set form).
    void set_from_assignment(const std::string& assignment);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;              // required
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Keys in sorted order; canonical echo re-parses to an equal Config.
    std::string canonical_text() const;
    const std::map<std::string, std::string>& entries() const { return values_; }

    bool operator==(const Config& o) const { return values_ == o.values_; }

private:
    std::map<std::string, std::string> values_;
};

} // namespace dflopt
