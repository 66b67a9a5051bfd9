#include "pathflow/acceptance.hpp"

#include <iostream>

// One line per acceptance criterion; exit 0 only if all pass.
int main(int argc, char** argv) {
  pathflow::Execution exec;
  if (argc > 1) exec.workers = std::atoi(argv[1]);
  const auto results = pathflow::run_acceptance(exec, &std::cerr);
  bool all = true;
  for (const auto& r : results) {
    std::cout << pathflow::format_criterion(r) << "\n";
    all = all && r.pass;
  }
  std::cout << (all ? "acceptance: 15/15 criteria pass" : "acceptance: some criteria fail") << "\n";
  return all ? 0 : 1;
}
