#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "shapnav/attrib/attribution.hpp"

namespace shapnav::attrib {

inline nlohmann::ordered_json to_json(const AttributionResult& r, const std::vector<std::string>& names) {
  if (names.size() != r.phi.size()) throw ConfigError("feature name count does not match attribution length");
  nlohmann::ordered_json j;
  j["output_index"] = r.output_index;
  j["output"] = r.output_index >= 0 && r.output_index < 3 ? kOutputNames[static_cast<std::size_t>(r.output_index)] : "?";
  j["f_x"] = r.f_x;
  j["f_ref"] = r.f_ref;
  j["features"] = names;
  j["phi"] = r.phi;
  j["input"] = r.input;
  j["reference"] = r.reference;
  return j;
}

inline AttributionResult attribution_from_json(const nlohmann::ordered_json& j) {
  AttributionResult r;
  r.output_index = j.at("output_index").get<int>();
  r.f_x = j.at("f_x").get<double>();
  r.f_ref = j.at("f_ref").get<double>();
  r.phi = j.at("phi").get<std::vector<double>>();
  r.input = j.at("input").get<std::vector<double>>();
  r.reference = j.at("reference").get<std::vector<double>>();
  return r;
}

}  // namespace shapnav::attrib
