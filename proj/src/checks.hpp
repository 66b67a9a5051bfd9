#pragma once

#include "pathflow/harness.hpp"
#include "pathflow/sde.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pathflow::detail {

struct CheckContext {
  const Scenario& scenario;
  std::shared_ptr<const MetricFlow> flow;
  EnsembleSpec spec;
};

/// A check with its parameters already parsed. Parsing throws ConfigError with the line of
/// the offending key; running throws the simulation errors of the modules.
using CheckPlan = std::function<std::vector<Verdict>()>;

CheckPlan plan_check(const std::string& name, const CheckContext& ctx);

}  // namespace pathflow::detail
