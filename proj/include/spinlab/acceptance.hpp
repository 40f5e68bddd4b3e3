#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace spinlab {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double budget_seconds = 0.0;
};

struct AcceptanceOptions {
    /// Directory holding the bundled configuration files.
    std::string config_dir;
    /// Scratch directory for the determinism check.
    std::string work_dir;
    std::uint64_t seed = 20240607;
    unsigned threads = 1;
    /// Criteria to run (all when empty).
    std::vector<int> only;
};

/// Default bundled configuration directory (set at build time).
std::string default_config_dir();

/// Runs the acceptance criteria, printing one line per criterion to `log`.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options, std::ostream& log);

}  // namespace spinlab
