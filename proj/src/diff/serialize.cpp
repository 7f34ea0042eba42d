#include "dfac/diff/serialize.hpp"

#include "dfac/error.hpp"

namespace dfac::diff {

nlohmann::json params_to_json(const ParameterSet& set) {
  nlohmann::json j = nlohmann::json::object();
  for (const Parameter* p : set.all()) {
    const auto v = p->value().values();
    j[p->name()] = {{"shape", p->value().shape()}, {"values", std::vector<double>(v.begin(), v.end())}};
  }
  return j;
}

void params_from_json(const nlohmann::json& j, ParameterSet& set, const std::string& prefix) {
  if (!j.is_object()) throw FormatError("parameters must be a JSON object");
  for (Parameter* p : set.all()) {
    const std::string key = prefix + p->name();
    if (!j.contains(key)) throw FormatError("parameter '" + key + "' missing");
    const auto& e = j.at(key);
    if (!e.contains("shape") || !e.contains("values")) throw FormatError("parameter '" + key + "' needs shape and values");
    const auto shape = e.at("shape").get<Shape>();
    const auto values = e.at("values").get<std::vector<double>>();
    if (shape != p->value().shape() || values.size() != p->value().size())
      throw FormatError("parameter '" + key + "' has shape " + shape_string(shape) + ", expected " +
                        shape_string(p->value().shape()));
    std::copy(values.begin(), values.end(), p->value().values().begin());
  }
}

}  // namespace dfac::diff
