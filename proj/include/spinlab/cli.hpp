#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "spinlab/config.hpp"

namespace spinlab {

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"solve-pde", "simulate",  "two-spin",  "three-spin", "moment",
                                                "gg-check",  "tilt-check", "tap-check", "finite-n",   "selftest"};
    return names;
}

/// Runs one subcommand other than selftest: writes `<out>/<command>.json`
/// (and any CSV/binary side files) and returns the report. The report
/// embeds the resolved configuration and the version, and contains no
/// timestamps, so identical inputs give identical bytes.
Json run_command(const std::string& command, const RunConfig& config, std::ostream& log);

/// Entry point of the `spinlab` executable. Exit codes: 0 ok, 1
/// configuration error, 2 numerical failure, 3 acceptance failure.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace spinlab
