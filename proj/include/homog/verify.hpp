////////////////////////////////////////////////////////////////////////////////
// verify.hpp
////////////////////////////////////////////////////////////////////////////////
/*! @file
//  Invariant suite behind `homog verify`. Checks are grouped; a failing check
//  never stops the others. Kernel artifacts found in the output directory are
//  checked as stored; missing ones are recomputed from the configuration.
*/
////////////////////////////////////////////////////////////////////////////////
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "homog/config.hpp"

namespace homog {

struct VerifyCheck {
    std::string group;
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    bool all_passed() const;
    nlohmann::json to_json() const;
};

const std::vector<std::string> &verify_groups();

// `only` empty runs every group; otherwise a single group name (Input error if unknown).
VerifyReport run_verification(const RunConfig &config, const std::string &only = "");

} // namespace homog
