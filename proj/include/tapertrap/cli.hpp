#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tapertrap::cli {

inline constexpr const char* version = "0.1.0";

/// Exit codes: 0 success, 2 configuration error, 3 physics/solver error.
/// Every successful run writes its results to --out plus a JSON provenance
/// record (<out>.provenance.json) with the config hash and seed.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace tapertrap::cli
