#pragma once

#include <functional>
#include <string>
#include <vector>

#include "common.hpp"

namespace flowlab::tool {

struct Scenario {
  std::string name;
  std::string summary;  // one line for the catalog listing
  std::function<void(RunContext&)> run;
};

const std::vector<Scenario>& scenario_catalog();
const Scenario* find_scenario(const std::string& name);
std::string catalog_listing();

}  // namespace flowlab::tool
