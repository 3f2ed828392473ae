#pragma once

#include "mdpulab/discovery.hpp"
#include "mdpulab/mdp.hpp"
#include "mdpulab/mdpu.hpp"

#include <json.hpp>

#include <string>

namespace mdpulab {

using Json = nlohmann::json;

/// Raised for malformed documents; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json mdp_to_json(const DiscreteMdp& mdp);
DiscreteMdp mdp_from_json(const Json& doc);

Json discovery_to_json(const DiscoveryModel& model);
DiscoveryModel discovery_from_json(const Json& doc);

Json mdpu_to_json(const Mdpu& mdpu);
Mdpu mdpu_from_json(const Json& doc);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& doc);

}  // namespace mdpulab
