#include "skillguard/policy.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace skillguard {

namespace {

using nlohmann::json;

template <typename T>
void merge_unique(std::vector<T>& base, const std::vector<T>& extra) {
  for (const auto& e : extra) {
    if (std::find(base.begin(), base.end(), e) == base.end()) {
      base.push_back(e);
    }
  }
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

Watchlist Watchlist::defaults() {
  Watchlist w;
  w.memory_files = {"AGENTS.md", "MEMORY.md", "SOUL.md", "CLAUDE.md"};
  w.config_globs = {"settings.json", "mcp.json", ".claude/**"};
  w.sensitive_keys = {"ANTHROPIC_BASE_URL"};
  w.hook_keys = {"hooks"};
  return w;
}

void Watchlist::merge(const Watchlist& extensions) {
  merge_unique(memory_files, extensions.memory_files);
  merge_unique(config_globs, extensions.config_globs);
  merge_unique(sensitive_keys, extensions.sensitive_keys);
  merge_unique(hook_keys, extensions.hook_keys);
}

bool Watchlist::is_sensitive_key(std::string_view key) const {
  if (ends_with(key, "_BASE_URL")) return true;
  return std::find(sensitive_keys.begin(), sensitive_keys.end(), key) !=
         sensitive_keys.end();
}

bool Watchlist::is_hook_key(std::string_view key) const {
  return std::find(hook_keys.begin(), hook_keys.end(), key) != hook_keys.end();
}

std::map<std::string, std::string> RegistrySettings::default_endpoints() {
  return {
      {"python-pypi", "https://pypi.org/pypi/{name}/json"},
      {"node-npm", "https://registry.npmjs.org/{name}"},
  };
}

PolicyConfig PolicyConfig::defaults() {
  PolicyConfig cfg;
  for (DetectorId id : kAllDetectors) cfg.enabled.insert(id);
  cfg.watchlist = Watchlist::defaults();
  cfg.credential_paths = default_credential_paths();
  cfg.script_extensions = ModelConfig::defaults().script_extensions;
  cfg.registry.endpoints = RegistrySettings::default_endpoints();
  return cfg;
}

std::vector<std::string> PolicyConfig::default_credential_paths() {
  return {
      ".ssh",
      "id_rsa",
      ".aws/credentials",
      ".env",
      ".netrc",
      ".npmrc",
      ".pgpass",
      ".git-credentials",
      ".docker/config.json",
      ".kube/config",
      ".gnupg",
      "Library/Keychains",
      "Login Data",
      ".mozilla/firefox",
      ".config/google-chrome",
      "AppData/Local/Google/Chrome",
      "AppData/Roaming/Mozilla",
      "wallet.dat",
      ".bitcoin",
      ".ethereum",
      "Electrum",
      "Exodus",
  };
}

Severity PolicyConfig::apply_override(DetectorId id, Severity s) const {
  auto it = severity_overrides.find(id);
  return it == severity_overrides.end() ? s : it->second;
}

ModelConfig PolicyConfig::model_config() const {
  ModelConfig cfg;
  cfg.script_extensions = script_extensions;
  return cfg;
}

namespace {

bool parse_string_list(const json& j, std::vector<std::string>* out,
                       const std::string& key, std::vector<std::string>* errors) {
  if (!j.is_array()) {
    errors->push_back(key + " must be an array of strings");
    return false;
  }
  for (const auto& e : j) {
    if (!e.is_string()) {
      errors->push_back(key + " must contain only strings");
      return false;
    }
    out->push_back(e.get<std::string>());
  }
  return true;
}

}  // namespace

PolicyParseResult parse_policy(std::string_view json_text) {
  PolicyParseResult result;
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    result.errors.push_back("policy file is not a JSON object");
    return result;
  }

  PolicyConfig cfg = PolicyConfig::defaults();
  auto& errors = result.errors;
  std::vector<DetectorId> disabled;

  for (const auto& [key, value] : doc.items()) {
    if (key == "disable") {
      std::vector<std::string> ids;
      if (!parse_string_list(value, &ids, key, &errors)) continue;
      for (const auto& s : ids) {
        auto id = detector_from_dotted(s);
        if (!id) {
          errors.push_back("unknown detector id \"" + s + "\"");
        } else {
          disabled.push_back(*id);
        }
      }
    } else if (key == "enabled_detectors") {
      std::vector<std::string> ids;
      if (!parse_string_list(value, &ids, key, &errors)) continue;
      cfg.enabled.clear();
      for (const auto& s : ids) {
        auto id = detector_from_dotted(s);
        if (!id) {
          errors.push_back("unknown detector id \"" + s + "\"");
        } else {
          cfg.enabled.insert(*id);
        }
      }
    } else if (key == "severity_overrides") {
      if (!value.is_object()) {
        errors.push_back("severity_overrides must be an object");
        continue;
      }
      for (const auto& [id_str, sev_val] : value.items()) {
        auto id = detector_from_dotted(id_str);
        if (!id) {
          errors.push_back("unknown detector id \"" + id_str + "\"");
          continue;
        }
        if (!sev_val.is_string()) {
          errors.push_back("severity override for " + id_str + " must be a string");
          continue;
        }
        auto sev = severity_from_string(sev_val.get<std::string>());
        if (!sev) {
          errors.push_back("unknown severity \"" + sev_val.get<std::string>() + "\"");
          continue;
        }
        cfg.severity_overrides[*id] = *sev;
      }
    } else if (key == "fail_threshold") {
      auto sev = value.is_string()
                     ? severity_from_string(value.get<std::string>())
                     : std::nullopt;
      if (!sev) {
        errors.push_back("fail_threshold must be one of Info/Low/Medium/High/Critical");
      } else {
        cfg.fail_threshold = *sev;
      }
    } else if (key == "body_delta_threshold") {
      if (!value.is_number() || value.get<double>() < 0.0 || value.get<double>() > 1.0) {
        errors.push_back("body_delta_threshold must be a number in [0,1]");
      } else {
        cfg.body_delta_threshold = value.get<double>();
      }
    } else if (key == "typosquat_threshold") {
      if (!value.is_number() || value.get<double>() < 0.0 || value.get<double>() > 1.0) {
        errors.push_back("typosquat_threshold must be a number in [0,1]");
      } else {
        cfg.typosquat_threshold = value.get<double>();
      }
    } else if (key == "typosquat_popularity_floor") {
      if (!value.is_number_integer() || value.get<long long>() < 0) {
        errors.push_back("typosquat_popularity_floor must be a non-negative integer");
      } else {
        cfg.typosquat_popularity_floor = value.get<int>();
      }
    } else if (key == "shadow_threshold") {
      if (!value.is_number() || value.get<double>() < 0.0 || value.get<double>() > 1.0) {
        errors.push_back("shadow_threshold must be a number in [0,1]");
      } else {
        cfg.shadow_threshold = value.get<double>();
      }
    } else if (key == "watchlist") {
      if (!value.is_object()) {
        errors.push_back("watchlist must be an object");
        continue;
      }
      Watchlist ext;
      for (const auto& [wkey, wval] : value.items()) {
        if (wkey == "memory_files") {
          parse_string_list(wval, &ext.memory_files, "watchlist.memory_files", &errors);
        } else if (wkey == "config_globs") {
          parse_string_list(wval, &ext.config_globs, "watchlist.config_globs", &errors);
        } else if (wkey == "sensitive_keys") {
          parse_string_list(wval, &ext.sensitive_keys, "watchlist.sensitive_keys", &errors);
        } else if (wkey == "hook_keys") {
          parse_string_list(wval, &ext.hook_keys, "watchlist.hook_keys", &errors);
        } else {
          errors.push_back("unknown policy key \"watchlist." + wkey + "\"");
        }
      }
      // Additive only: defaults stay.
      cfg.watchlist.merge(ext);
    } else if (key == "credential_paths") {
      std::vector<std::string> extra;
      if (parse_string_list(value, &extra, key, &errors)) {
        merge_unique(cfg.credential_paths, extra);
      }
    } else if (key == "script_extensions") {
      std::vector<std::string> extra;
      if (parse_string_list(value, &extra, key, &errors)) {
        merge_unique(cfg.script_extensions, extra);
      }
    } else if (key == "registry") {
      if (!value.is_object()) {
        errors.push_back("registry must be an object");
        continue;
      }
      for (const auto& [rkey, rval] : value.items()) {
        if (rkey == "mode") {
          std::string mode = rval.is_string() ? rval.get<std::string>() : "";
          if (mode == "off") {
            cfg.registry.mode = RegistrySettings::Mode::Off;
          } else if (mode == "fixture") {
            cfg.registry.mode = RegistrySettings::Mode::Fixture;
          } else if (mode == "live") {
            cfg.registry.mode = RegistrySettings::Mode::Live;
          } else {
            errors.push_back("registry.mode must be off, fixture or live");
          }
        } else if (rkey == "fixture_path") {
          if (!rval.is_string()) {
            errors.push_back("registry.fixture_path must be a string");
          } else {
            cfg.registry.fixture_path = rval.get<std::string>();
          }
        } else if (rkey == "endpoints") {
          if (!rval.is_object()) {
            errors.push_back("registry.endpoints must be an object");
            continue;
          }
          for (const auto& [eco, url] : rval.items()) {
            if (!url.is_string()) {
              errors.push_back("registry.endpoints values must be strings");
            } else {
              cfg.registry.endpoints[eco] = url.get<std::string>();
            }
          }
        } else if (rkey == "cache_ttl_seconds") {
          if (!rval.is_number_integer() || rval.get<long long>() < 0) {
            errors.push_back("registry.cache_ttl_seconds must be a non-negative integer");
          } else {
            cfg.registry.cache_ttl_seconds = rval.get<int>();
          }
        } else if (rkey == "timeout_ms") {
          if (!rval.is_number_integer() || rval.get<long long>() <= 0) {
            errors.push_back("registry.timeout_ms must be a positive integer");
          } else {
            cfg.registry.timeout_ms = rval.get<int>();
          }
        } else if (rkey == "max_parallel") {
          if (!rval.is_number_integer() || rval.get<long long>() <= 0) {
            errors.push_back("registry.max_parallel must be a positive integer");
          } else {
            cfg.registry.max_parallel = rval.get<int>();
          }
        } else if (rkey == "rate_per_second") {
          if (!rval.is_number() || rval.get<double>() < 0.0) {
            errors.push_back("registry.rate_per_second must be non-negative");
          } else {
            cfg.registry.rate_per_second = rval.get<double>();
          }
        } else {
          errors.push_back("unknown policy key \"registry." + rkey + "\"");
        }
      }
    } else if (key == "offline") {
      if (!value.is_boolean()) {
        errors.push_back("offline must be a boolean");
      } else {
        cfg.offline = value.get<bool>();
      }
    } else if (key == "allow_broad_sandbox") {
      if (!value.is_boolean()) {
        errors.push_back("allow_broad_sandbox must be a boolean");
      } else {
        cfg.allow_broad_sandbox = value.get<bool>();
      }
    } else {
      // Fail closed: a typo must not silently relax anything.
      errors.push_back("unknown policy key \"" + key + "\"");
    }
  }

  // Subtractive on top of whatever enabled_detectors left in place.
  for (DetectorId id : disabled) cfg.enabled.erase(id);

  if (!errors.empty()) return result;
  result.config = std::move(cfg);
  return result;
}

std::string policy_to_json(const PolicyConfig& cfg) {
  json doc;
  json enabled = json::array();
  for (DetectorId id : kAllDetectors) {
    if (cfg.detector_enabled(id)) enabled.push_back(dotted_id(id));
  }
  doc["enabled_detectors"] = enabled;
  json overrides = json::object();
  for (const auto& [id, sev] : cfg.severity_overrides) {
    overrides[dotted_id(id)] = to_string(sev);
  }
  doc["severity_overrides"] = overrides;
  doc["fail_threshold"] = to_string(cfg.fail_threshold);
  doc["body_delta_threshold"] = cfg.body_delta_threshold;
  doc["typosquat_threshold"] = cfg.typosquat_threshold;
  doc["typosquat_popularity_floor"] = cfg.typosquat_popularity_floor;
  doc["shadow_threshold"] = cfg.shadow_threshold;
  doc["watchlist"] = {
      {"memory_files", cfg.watchlist.memory_files},
      {"config_globs", cfg.watchlist.config_globs},
      {"sensitive_keys", cfg.watchlist.sensitive_keys},
      {"hook_keys", cfg.watchlist.hook_keys},
  };
  doc["credential_paths"] = cfg.credential_paths;
  doc["script_extensions"] = cfg.script_extensions;
  const char* mode = cfg.registry.mode == RegistrySettings::Mode::Off ? "off"
                     : cfg.registry.mode == RegistrySettings::Mode::Fixture
                         ? "fixture"
                         : "live";
  doc["registry"] = {
      {"mode", mode},
      {"fixture_path", cfg.registry.fixture_path},
      {"endpoints", cfg.registry.endpoints},
      {"cache_ttl_seconds", cfg.registry.cache_ttl_seconds},
      {"timeout_ms", cfg.registry.timeout_ms},
      {"max_parallel", cfg.registry.max_parallel},
      {"rate_per_second", cfg.registry.rate_per_second},
  };
  doc["offline"] = cfg.offline;
  doc["allow_broad_sandbox"] = cfg.allow_broad_sandbox;
  return doc.dump(2) + "\n";
}

}  // namespace skillguard
