#pragma once

// JSON form of truth tables: {"n": 3, "domains": [2,2,2], "outputs": [...]}.
// Outputs are strings or numbers (numbers become their decimal text);
// arrays and objects would describe randomized outputs and are rejected.
//
// Requires nlohmann/json (json.hpp) on the include path.

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "ringbreak/dominance.hpp"

namespace ringbreak {

class TableFormatError : public Error {
 public:
  using Error::Error;
};

inline FunctionTable table_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw TableFormatError("table must be a JSON object");
  for (const char* key : {"n", "domains", "outputs"})
    if (!j.contains(key)) throw TableFormatError(std::string("table is missing \"") + key + "\"");
  if (!j["n"].is_number_unsigned()) throw TableFormatError("\"n\" must be a positive integer");
  if (!j["domains"].is_array()) throw TableFormatError("\"domains\" must be an array");
  if (!j["outputs"].is_array()) throw TableFormatError("\"outputs\" must be an array");
  FunctionTable f;
  f.n = j["n"].get<std::size_t>();
  for (const auto& d : j["domains"]) {
    if (!d.is_number_unsigned() || d.get<std::uint64_t>() < 1) throw TableFormatError("domain sizes must be integers >= 1");
    f.domains.push_back(d.get<std::uint32_t>());
  }
  for (std::size_t i = 0; i < j["outputs"].size(); ++i) {
    const auto& o = j["outputs"][i];
    if (o.is_string()) {
      f.outputs.push_back(o.get<std::string>());
    } else if (o.is_number()) {
      f.outputs.push_back(o.dump());
    } else if (o.is_array() || o.is_object()) {
      throw TableFormatError("output " + std::to_string(i) + " is randomized; only deterministic tables are supported");
    } else {
      throw TableFormatError("output " + std::to_string(i) + " must be a string or number");
    }
  }
  try {
    f.validate();
  } catch (const PreconditionError& e) {
    throw TableFormatError(e.what());
  }
  return f;
}

inline nlohmann::json table_to_json(const FunctionTable& f) {
  return {{"n", f.n}, {"domains", f.domains}, {"outputs", f.outputs}};
}

inline FunctionTable load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TableFormatError("cannot read table file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw TableFormatError(path + ": " + e.what());
  }
  return table_from_json(j);
}

}  // namespace ringbreak
