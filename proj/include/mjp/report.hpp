#pragma once

#include <string>

#include "json.hpp"

namespace mjp {

// Envelope for every CLI run. results/budgets/seeds are command-specific;
// identical digest + parameters + seeds must reproduce the results payload
// byte for byte, so wall_time stays outside results.
struct RunReport {
  std::string command;
  std::string model_digest;
  nlohmann::json parameters = nlohmann::json::object();
  nlohmann::json results = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json budgets = nlohmann::json::object();
  double wall_time = 0.0;

  nlohmann::json to_json() const {
    return nlohmann::json{{"command", command},     {"model_digest", model_digest},
                          {"parameters", parameters}, {"results", results},
                          {"seeds", seeds},          {"budgets", budgets},
                          {"wall_time", wall_time}};
  }
};

}  // namespace mjp
