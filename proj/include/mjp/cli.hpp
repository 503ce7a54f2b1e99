#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mjp {

// Runs one CLI command. Exit codes: 0 success / certified / nonexplosive,
// 2 refuted / explosive verdicts, 1 errors or inconclusive results.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mjp
