#pragma once

#include "pathflow/parallel.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace pathflow {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs the fifteen acceptance criteria with their tolerances and time limits pinned
/// in code. Progress goes to `log` when given.
std::vector<CriterionResult> run_acceptance(const Execution& exec, std::ostream* log = nullptr);

/// "[PASS] 01 name: detail (1.2 s)".
std::string format_criterion(const CriterionResult& r);

}  // namespace pathflow
