#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinlab/mixture.hpp"
#include "spinlab/parisi.hpp"

namespace spinlab {

using Json = nlohmann::ordered_json;

/// Parses the configuration text format: `key = <JSON value>` lines,
/// `[section]` headers, `#` comments, and arrays continued over several lines
/// until their brackets balance. Returns a JSON object of sections; `lines`
/// receives the line of every "section.key". Throws ConfigError with the
/// line number and key on malformed input.
Json parse_config_text(const std::string& text, const std::string& origin = "config",
                       std::map<std::string, int>* lines = nullptr);

/// Fully resolved run configuration: defaults, then the file, then overrides.
class RunConfig {
public:
    /// Defaults only.
    RunConfig();

    /// Merges a parsed file; unknown keys and type mismatches are errors.
    void merge_text(const std::string& text, const std::string& origin);
    void merge_file(const std::string& path);
    /// Applies "section.key=value"; value is JSON or a bare string.
    void apply_override(const std::string& assignment);
    void set_seed(std::uint64_t seed);

    const Json& json() const { return data_; }
    const Json& at(const std::string& section, const std::string& key) const;
    double number(const std::string& section, const std::string& key) const;
    std::int64_t integer(const std::string& section, const std::string& key) const;
    std::size_t count(const std::string& section, const std::string& key) const;
    std::string string(const std::string& section, const std::string& key) const;
    bool boolean(const std::string& section, const std::string& key) const;
    std::uint64_t seed() const;
    unsigned threads() const;

    MixtureSpec mixture() const;
    /// zeta from [zeta].atoms, or the replica-symmetric delta at the fixed
    /// point when [zeta].replica_symmetric is true.
    ParisiMeasure measure() const;
    PdeGrid grid(const MixtureSpec& mixture, const ParisiMeasure& measure) const;

    /// Resolved configuration including derived values (atoms, grid).
    Json resolved() const;

private:
    void set_value(const std::string& section, const std::string& key, const Json& value, const std::string& where);
    Json data_;
};

}  // namespace spinlab
