#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "skillguard/finding.hpp"

namespace skillguard {

/// Files and keys the integrity monitor and the persistence detectors care
/// about. Policy may extend every set; defaults can never be removed.
struct Watchlist {
  std::vector<std::string> memory_files;
  std::vector<std::string> config_globs;
  std::vector<std::string> sensitive_keys;  // exact names; *_BASE_URL always counts
  std::vector<std::string> hook_keys;

  static Watchlist defaults();
  void merge(const Watchlist& extensions);
  bool is_sensitive_key(std::string_view key) const;
  bool is_hook_key(std::string_view key) const;
};

struct RegistrySettings {
  enum class Mode { Off, Fixture, Live };
  Mode mode = Mode::Off;
  std::string fixture_path;
  // Lookup URL templates keyed by ecosystem; "{name}" is substituted.
  std::map<std::string, std::string> endpoints;
  int cache_ttl_seconds = 900;
  int timeout_ms = 3000;
  int max_parallel = 4;
  double rate_per_second = 5.0;

  static std::map<std::string, std::string> default_endpoints();
};

/// Scanner configuration. Loaded from a flat JSON file; unknown keys are
/// rejected so a typoed policy fails closed instead of silently relaxing.
struct PolicyConfig {
  std::set<DetectorId> enabled;  // default: every in-scope detector
  std::map<DetectorId, Severity> severity_overrides;
  Severity fail_threshold = Severity::High;
  double body_delta_threshold = 0.05;
  double typosquat_threshold = 0.2;
  int typosquat_popularity_floor = 100;
  double shadow_threshold = 0.6;
  Watchlist watchlist;  // defaults plus policy extensions
  std::vector<std::string> credential_paths;
  std::vector<std::string> script_extensions;
  RegistrySettings registry;
  bool offline = false;
  bool allow_broad_sandbox = false;

  static PolicyConfig defaults();
  static std::vector<std::string> default_credential_paths();

  bool detector_enabled(DetectorId id) const { return enabled.count(id) > 0; }
  Severity apply_override(DetectorId id, Severity s) const;
  ModelConfig model_config() const;
};

struct PolicyParseResult {
  std::optional<PolicyConfig> config;
  std::vector<std::string> errors;
};

/// Parses a policy JSON document. Any unknown key, malformed value or
/// out-of-range threshold is an error and yields no config.
PolicyParseResult parse_policy(std::string_view json_text);

/// Canonical JSON for the effective configuration (`policy show`).
std::string policy_to_json(const PolicyConfig& cfg);

}  // namespace skillguard
