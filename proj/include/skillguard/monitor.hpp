#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "skillguard/finding.hpp"
#include "skillguard/policy.hpp"

namespace skillguard::monitor {

/// Key-level fingerprint of one watched config file. Sensitive keys,
/// hook keys and auto-approve flags are collected recursively with
/// dot-joined paths; top_keys covers the document root.
struct ConfigFingerprint {
  std::string path;
  std::vector<std::string> top_keys;                           // sorted
  std::vector<std::pair<std::string, std::string>> sensitive;  // key -> value
  std::vector<std::pair<std::string, std::string>> hooks;      // key -> canonical json
  std::vector<std::pair<std::string, bool>> auto_approve;      // key -> flag

  bool operator==(const ConfigFingerprint&) const = default;
};

struct BaselineEntry {
  enum class State { Present, Absent, Unreadable };
  std::string path;
  State state = State::Present;
  std::string sha256;      // empty unless Present
  std::uint64_t size = 0;  // 0 unless Present

  bool operator==(const BaselineEntry&) const = default;
};

struct BaselineSnapshot {
  int version = 1;
  std::int64_t taken_at = 0;
  std::vector<BaselineEntry> entries;      // sorted by path
  std::vector<ConfigFingerprint> configs;  // sorted by path

  const BaselineEntry* find(std::string_view path) const;
  const ConfigFingerprint* find_config(std::string_view path) const;

  bool operator==(const BaselineSnapshot&) const = default;
};

inline constexpr const char* kDefaultBaselineName = "skillguard.baseline.json";

struct BaselineResult {
  BaselineSnapshot snapshot;
  std::vector<ParseDiagnostic> diagnostics;  // unreadable files, bad json
};

/// Hashes every watched file under root. Watched memory files that do not
/// exist are recorded as Absent so creation is detectable; unreadable
/// files become Unreadable entries but never abort the snapshot.
BaselineResult take_baseline(const std::filesystem::path& root,
                             const Watchlist& watch, std::int64_t now);

/// Compares the tree against the snapshot. Memory file changes are T6.1
/// findings, config changes T6.2; new hook keys and sensitive key changes
/// escalate to Critical (evidence carries old and new values), auto-approve
/// flips to High. A clean tree yields no findings.
std::vector<Finding> check(const std::filesystem::path& root,
                           const BaselineSnapshot& baseline,
                           const Watchlist& watch);

std::string serialize_snapshot(const BaselineSnapshot& snapshot);

struct SnapshotParseResult {
  std::optional<BaselineSnapshot> snapshot;
  std::vector<std::string> errors;
};

SnapshotParseResult parse_snapshot(std::string_view json_text);

bool save_snapshot(const std::filesystem::path& path, const BaselineSnapshot& s,
                   std::string* error = nullptr);
SnapshotParseResult load_snapshot(const std::filesystem::path& path);

}  // namespace skillguard::monitor
