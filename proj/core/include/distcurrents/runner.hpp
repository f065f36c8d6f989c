#pragma once

#include <string>
#include <utility>
#include <vector>

#include "distcurrents/config.hpp"

namespace distcurrents {

/// Executes the configured operation and serializes the report: one JSON
/// object {config, results, tables, meta} with sorted keys, two-space
/// indentation, and a trailing newline. The same config produces the same
/// bytes regardless of thread count. Wall-clock time enters meta only when
/// include_timing is set, since it would break that reproducibility.
std::string run_operation(const RunConfig& config, bool include_timing = false);

/// Exhaustive index/sign/minor property sweep. One entry per property,
/// true when it held at every point checked.
std::vector<std::pair<std::string, bool>> selftest_properties();

}  // namespace distcurrents
