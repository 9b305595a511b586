#pragma once

// Quick invariant suites runnable from the CLI. Each check is small enough to
// finish in well under a second.

#include <iosfwd>
#include <string>
#include <vector>

namespace spinn {

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SelftestResult> run_selftest();
// Prints one line per check; returns whether all passed.
bool report_selftest(const std::vector<SelftestResult>& results, std::ostream& os);

}  // namespace spinn
