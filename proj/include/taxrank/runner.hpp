#pragma once

#include <iosfwd>
#include <string>

#include "taxrank/config.hpp"

namespace taxrank {

// Exit codes: 0 pass / success, 1 pipeline unresolved or failing metatest,
// 2 usage / config errors.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUnresolved = 1;
inline constexpr int kExitUsage = 2;

int cmd_score(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_metatest(const RunConfig& config, const std::string& candidate_id, std::ostream& out,
                 std::ostream& err);
int cmd_pipeline(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_report(const RunConfig& config, std::ostream& out, std::ostream& err);

} // namespace taxrank
