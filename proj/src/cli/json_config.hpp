#pragma once

#include <istream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace fuselab::cli {

/// CLI11 config reader for JSON files. Top-level scalars bind to global
/// options; an object keyed by a subcommand name binds to that subcommand's
/// options. Key names are long option names without the dashes.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    // Resolved configs are assembled by each command and written to the manifest.
    return "{}";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        for (const auto& [sub, v] : value.items()) items.push_back(item({key}, sub, v));
      } else {
        items.push_back(item({}, key, value));
      }
    }
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConfigError(key + ": unsupported value " + v.dump());
  }

  static CLI::ConfigItem item(std::vector<std::string> parents, const std::string& name,
                              const nlohmann::json& v) {
    CLI::ConfigItem it;
    it.parents = std::move(parents);
    it.name = name;
    const std::string where = it.fullname();
    if (v.is_array()) {
      for (const auto& e : v) it.inputs.push_back(scalar(e, where));
    } else {
      it.inputs.push_back(scalar(v, where));
    }
    return it;
  }
};

}  // namespace fuselab::cli
