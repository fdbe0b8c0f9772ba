#include "skillguard/monitor.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "skillguard/caps.hpp"
#include "skillguard/hash.hpp"

namespace skillguard::monitor {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

bool read_file_bytes(const fs::path& p, std::string* out) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  *out = ss.str();
  return true;
}

std::string basename_of(std::string_view path) {
  std::size_t slash = path.rfind('/');
  return std::string(slash == std::string_view::npos ? path
                                                     : path.substr(slash + 1));
}

bool is_auto_approve_key(std::string_view key) {
  std::string lower(key);
  for (char& c : lower) c = char(std::tolower(static_cast<unsigned char>(c)));
  return lower.find("autoapprove") != std::string::npos ||
         lower.find("auto_approve") != std::string::npos ||
         lower.find("auto-approve") != std::string::npos ||
         lower == "bypasspermissions" || lower == "dangerouslyskippermissions";
}

/// Collects sensitive keys, hook keys and auto-approve flags anywhere in
/// the document; key paths are dot-joined.
void walk_config(const json& node, const std::string& prefix,
                 const Watchlist& watch, ConfigFingerprint* fp) {
  if (!node.is_object()) return;
  for (const auto& [key, value] : node.items()) {
    std::string path = prefix.empty() ? key : prefix + "." + key;
    if (watch.is_sensitive_key(key)) {
      std::string rendered =
          value.is_string() ? value.get<std::string>() : value.dump();
      fp->sensitive.emplace_back(path, rendered);
    }
    if (watch.is_hook_key(key)) {
      fp->hooks.emplace_back(path, value.dump());
    }
    if (is_auto_approve_key(key) && value.is_boolean()) {
      fp->auto_approve.emplace_back(path, value.get<bool>());
    }
    walk_config(value, path, watch, fp);
  }
}

std::optional<ConfigFingerprint> fingerprint_config(
    const fs::path& file, const std::string& rel, const Watchlist& watch) {
  std::string bytes;
  if (!read_file_bytes(file, &bytes)) return std::nullopt;
  json doc = json::parse(bytes, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;

  ConfigFingerprint fp;
  fp.path = rel;
  for (const auto& [key, value] : doc.items()) fp.top_keys.push_back(key);
  std::sort(fp.top_keys.begin(), fp.top_keys.end());
  walk_config(doc, "", watch, &fp);
  std::sort(fp.sensitive.begin(), fp.sensitive.end());
  std::sort(fp.hooks.begin(), fp.hooks.end());
  std::sort(fp.auto_approve.begin(), fp.auto_approve.end());
  return fp;
}

struct WatchedFile {
  std::string rel;
  bool is_config = false;
};

/// Resolves the watchlist against the tree: memory files match by
/// basename anywhere under root, config globs against relative paths.
/// Watched literal paths that do not exist are reported too so creation
/// is detectable later.
std::vector<WatchedFile> resolve_watchlist(const fs::path& root,
                                           const Watchlist& watch,
                                           std::vector<std::string>* missing) {
  std::vector<WatchedFile> files;
  std::set<std::string> seen;

  std::error_code ec;
  fs::recursive_directory_iterator it(
      root, fs::directory_options::skip_permission_denied, ec);
  if (!ec) {
    for (auto end = fs::recursive_directory_iterator(); it != end;
         it.increment(ec)) {
      if (ec) break;
      if (it->is_symlink(ec)) {
        if (it->is_directory(ec)) it.disable_recursion_pending();
        continue;
      }
      if (!it->is_regular_file(ec)) continue;
      std::string rel = it->path().lexically_relative(root).generic_string();
      std::string base = basename_of(rel);

      bool memory = std::find(watch.memory_files.begin(),
                              watch.memory_files.end(),
                              base) != watch.memory_files.end();
      bool config = false;
      for (const std::string& glob : watch.config_globs) {
        if (caps::glob_match(glob, rel) || base == glob) {
          config = true;
          break;
        }
      }
      if ((memory || config) && seen.insert(rel).second) {
        files.push_back({rel, config});
      }
    }
  }

  // Literal watch entries (no glob metacharacters) that matched nothing
  // become Absent entries.
  auto has_meta = [](const std::string& s) {
    return s.find('*') != std::string::npos || s.find('?') != std::string::npos;
  };
  for (const std::string& name : watch.memory_files) {
    if (has_meta(name)) continue;
    bool found = false;
    for (const WatchedFile& f : files) {
      if (basename_of(f.rel) == name) found = true;
    }
    if (!found) missing->push_back(name);
  }

  std::sort(files.begin(), files.end(),
            [](const WatchedFile& a, const WatchedFile& b) {
              return a.rel < b.rel;
            });
  return files;
}

std::string dump_snapshot_entry_state(BaselineEntry::State s) {
  switch (s) {
    case BaselineEntry::State::Present: return "present";
    case BaselineEntry::State::Absent: return "absent";
    case BaselineEntry::State::Unreadable: return "unreadable";
  }
  return "?";
}

std::optional<BaselineEntry::State> entry_state_from(std::string_view s) {
  if (s == "present") return BaselineEntry::State::Present;
  if (s == "absent") return BaselineEntry::State::Absent;
  if (s == "unreadable") return BaselineEntry::State::Unreadable;
  return std::nullopt;
}

Finding make_finding(DetectorId id, Severity sev, Confidence conf,
                     const std::string& file, std::string evidence,
                     std::string message, std::string rule) {
  Finding f;
  f.detector = id;
  f.severity = sev;
  f.confidence = conf;
  f.phase = detector_phase(id);
  f.span.file = file;
  f.span.line_start = f.span.line_end = 1;
  f.evidence = std::move(evidence);
  f.message = std::move(message);
  f.rule = std::move(rule);
  return f;
}

}  // namespace

const BaselineEntry* BaselineSnapshot::find(std::string_view path) const {
  for (const BaselineEntry& e : entries) {
    if (e.path == path) return &e;
  }
  return nullptr;
}

const ConfigFingerprint* BaselineSnapshot::find_config(
    std::string_view path) const {
  for (const ConfigFingerprint& c : configs) {
    if (c.path == path) return &c;
  }
  return nullptr;
}

BaselineResult take_baseline(const fs::path& root, const Watchlist& watch,
                             std::int64_t now) {
  BaselineResult result;
  result.snapshot.taken_at = now;

  std::vector<std::string> missing;
  std::vector<WatchedFile> files = resolve_watchlist(root, watch, &missing);

  for (const WatchedFile& wf : files) {
    BaselineEntry entry;
    entry.path = wf.rel;
    std::string bytes;
    if (!read_file_bytes(root / fs::path(wf.rel), &bytes)) {
      entry.state = BaselineEntry::State::Unreadable;
      result.diagnostics.push_back(
          {DiagSeverity::Warning, DiagCode::IoError,
           "cannot read watched file " + wf.rel, std::nullopt});
    } else {
      entry.state = BaselineEntry::State::Present;
      entry.sha256 = sha256_hex(bytes);
      entry.size = bytes.size();
    }
    result.snapshot.entries.push_back(std::move(entry));

    if (wf.is_config) {
      auto fp = fingerprint_config(root / fs::path(wf.rel), wf.rel, watch);
      if (fp) {
        result.snapshot.configs.push_back(std::move(*fp));
      } else {
        // Unparseable config: the hash entry alone has to carry the diff.
        result.diagnostics.push_back(
            {DiagSeverity::Warning, DiagCode::MalformedManifest,
             "watched config is not a JSON object: " + wf.rel, std::nullopt});
      }
    }
  }

  for (const std::string& name : missing) {
    BaselineEntry entry;
    entry.path = name;
    entry.state = BaselineEntry::State::Absent;
    result.snapshot.entries.push_back(std::move(entry));
  }

  std::sort(result.snapshot.entries.begin(), result.snapshot.entries.end(),
            [](const BaselineEntry& a, const BaselineEntry& b) {
              return a.path < b.path;
            });
  std::sort(result.snapshot.configs.begin(), result.snapshot.configs.end(),
            [](const ConfigFingerprint& a, const ConfigFingerprint& b) {
              return a.path < b.path;
            });
  return result;
}

namespace {

void diff_config(const ConfigFingerprint& before, const ConfigFingerprint& now,
                 std::vector<Finding>* findings) {
  auto map_of = [](const std::vector<std::pair<std::string, std::string>>& v) {
    return std::map<std::string, std::string>(v.begin(), v.end());
  };

  // Hook keys: new or changed hook payloads are how persistence survives.
  auto hooks_before = map_of(before.hooks);
  for (const auto& [key, value] : now.hooks) {
    auto it = hooks_before.find(key);
    if (it == hooks_before.end()) {
      findings->push_back(make_finding(
          DetectorId::T6_2, Severity::Critical, Confidence::Confirmed,
          now.path, key + " = " + value,
          "hook key " + key + " appeared in " + now.path, "monitor-hook-added"));
    } else if (it->second != value) {
      findings->push_back(make_finding(
          DetectorId::T6_2, Severity::Critical, Confidence::Confirmed,
          now.path, key + ": " + it->second + " -> " + value,
          "hook key " + key + " changed in " + now.path,
          "monitor-hook-changed"));
    }
  }

  auto sensitive_before = map_of(before.sensitive);
  for (const auto& [key, value] : now.sensitive) {
    auto it = sensitive_before.find(key);
    if (it == sensitive_before.end()) {
      findings->push_back(make_finding(
          DetectorId::T6_2, Severity::Critical, Confidence::Confirmed,
          now.path, key + " = " + value,
          "sensitive key " + key + " appeared in " + now.path,
          "monitor-sensitive-added"));
    } else if (it->second != value) {
      findings->push_back(make_finding(
          DetectorId::T6_2, Severity::Critical, Confidence::Confirmed,
          now.path, key + ": " + it->second + " -> " + value,
          "sensitive key " + key + " changed in " + now.path,
          "monitor-sensitive-changed"));
    }
  }
  auto sensitive_now = map_of(now.sensitive);
  for (const auto& [key, value] : before.sensitive) {
    if (!sensitive_now.count(key)) {
      findings->push_back(make_finding(
          DetectorId::T6_2, Severity::High, Confidence::Confirmed, now.path,
          key + ": " + value + " -> (removed)",
          "sensitive key " + key + " removed from " + now.path,
          "monitor-sensitive-removed"));
    }
  }

  std::map<std::string, bool> approve_before(before.auto_approve.begin(),
                                             before.auto_approve.end());
  for (const auto& [key, flag] : now.auto_approve) {
    auto it = approve_before.find(key);
    bool was = it != approve_before.end() && it->second;
    if (flag && !was) {
      findings->push_back(make_finding(
          DetectorId::T6_2, Severity::High, Confidence::Confirmed, now.path,
          key + ": false -> true",
          "approval bypass flag " + key + " enabled in " + now.path,
          "monitor-auto-approve"));
    }
  }
}

}  // namespace

std::vector<Finding> check(const fs::path& root,
                           const BaselineSnapshot& baseline,
                           const Watchlist& watch) {
  std::vector<Finding> findings;

  std::vector<std::string> missing;
  std::vector<WatchedFile> files = resolve_watchlist(root, watch, &missing);
  std::set<std::string> current_paths;
  for (const WatchedFile& f : files) current_paths.insert(f.rel);

  for (const WatchedFile& wf : files) {
    DetectorId id = wf.is_config ? DetectorId::T6_2 : DetectorId::T6_1;
    const char* kind = wf.is_config ? "config" : "memory file";
    std::string bytes;
    bool readable = read_file_bytes(root / fs::path(wf.rel), &bytes);
    const BaselineEntry* before = baseline.find(wf.rel);

    if (!before || before->state == BaselineEntry::State::Absent) {
      // Match by basename for memory files recorded as Absent.
      if (!before) before = baseline.find(basename_of(wf.rel));
      if (!before || before->state == BaselineEntry::State::Absent) {
        findings.push_back(make_finding(
            id, Severity::High, Confidence::Confirmed, wf.rel,
            wf.rel,
            std::string(kind) + " " + wf.rel + " appeared after the baseline",
            wf.is_config ? "monitor-config-added" : "monitor-memory-added"));
        continue;
      }
    }
    if (!readable) continue;  // unreadable now: nothing to compare

    std::string hash = sha256_hex(bytes);
    if (before->state == BaselineEntry::State::Present &&
        hash == before->sha256) {
      continue;
    }

    // Key-level diff for configs when both sides parse; hash diff
    // otherwise.
    if (wf.is_config) {
      const ConfigFingerprint* fp_before = baseline.find_config(wf.rel);
      auto fp_now = fingerprint_config(root / fs::path(wf.rel), wf.rel, watch);
      if (fp_before && fp_now) {
        std::size_t count_before = findings.size();
        diff_config(*fp_before, *fp_now, &findings);
        if (findings.size() != count_before) continue;
      }
      findings.push_back(make_finding(
          id, Severity::High, Confidence::Confirmed, wf.rel,
          before->sha256.substr(0, 12) + " -> " + hash.substr(0, 12),
          "config " + wf.rel + " changed since the baseline",
          "monitor-config-changed"));
    } else {
      findings.push_back(make_finding(
          id, Severity::High, Confidence::Likely, wf.rel,
          before->sha256.substr(0, 12) + " -> " + hash.substr(0, 12),
          "memory file " + wf.rel + " changed since the baseline",
          "monitor-memory-changed"));
    }
  }

  // Files hashed at baseline time that are gone now.
  for (const BaselineEntry& e : baseline.entries) {
    if (e.state != BaselineEntry::State::Present) continue;
    if (current_paths.count(e.path)) continue;
    bool config = baseline.find_config(e.path) != nullptr;
    findings.push_back(make_finding(
        config ? DetectorId::T6_2 : DetectorId::T6_1, Severity::High,
        Confidence::Confirmed, e.path, e.path,
        std::string(config ? "config " : "memory file ") + e.path +
            " disappeared after the baseline",
        config ? "monitor-config-removed" : "monitor-memory-removed"));
  }

  sort_findings(findings);
  return findings;
}

std::string serialize_snapshot(const BaselineSnapshot& snapshot) {
  nlohmann::ordered_json doc;
  doc["version"] = snapshot.version;
  doc["taken_at"] = snapshot.taken_at;
  doc["files"] = nlohmann::ordered_json::array();
  for (const BaselineEntry& e : snapshot.entries) {
    nlohmann::ordered_json entry;
    entry["path"] = e.path;
    entry["state"] = dump_snapshot_entry_state(e.state);
    if (e.state == BaselineEntry::State::Present) {
      entry["sha256"] = e.sha256;
      entry["size"] = e.size;
    }
    doc["files"].push_back(std::move(entry));
  }
  doc["configs"] = nlohmann::ordered_json::array();
  for (const ConfigFingerprint& c : snapshot.configs) {
    nlohmann::ordered_json fp;
    fp["path"] = c.path;
    fp["top_keys"] = c.top_keys;
    fp["sensitive"] = nlohmann::ordered_json::array();
    for (const auto& [k, v] : c.sensitive) {
      fp["sensitive"].push_back({{"key", k}, {"value", v}});
    }
    fp["hooks"] = nlohmann::ordered_json::array();
    for (const auto& [k, v] : c.hooks) {
      fp["hooks"].push_back({{"key", k}, {"value", v}});
    }
    fp["auto_approve"] = nlohmann::ordered_json::array();
    for (const auto& [k, v] : c.auto_approve) {
      fp["auto_approve"].push_back({{"key", k}, {"value", v}});
    }
    doc["configs"].push_back(std::move(fp));
  }
  return doc.dump(2) + "\n";
}

SnapshotParseResult parse_snapshot(std::string_view json_text) {
  SnapshotParseResult result;
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    result.errors.push_back("baseline is not a JSON object");
    return result;
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer() ||
      doc["version"].get<int>() != 1) {
    result.errors.push_back("unsupported baseline version");
    return result;
  }

  BaselineSnapshot snapshot;
  if (doc.contains("taken_at") && doc["taken_at"].is_number_integer()) {
    snapshot.taken_at = doc["taken_at"].get<std::int64_t>();
  }
  if (!doc.contains("files") || !doc["files"].is_array()) {
    result.errors.push_back("baseline has no files array");
    return result;
  }
  for (const auto& e : doc["files"]) {
    if (!e.is_object() || !e.contains("path") || !e["path"].is_string() ||
        !e.contains("state") || !e["state"].is_string()) {
      result.errors.push_back("malformed baseline entry");
      return result;
    }
    BaselineEntry entry;
    entry.path = e["path"].get<std::string>();
    auto state = entry_state_from(e["state"].get<std::string>());
    if (!state) {
      result.errors.push_back("unknown state for " + entry.path);
      return result;
    }
    entry.state = *state;
    if (e.contains("sha256") && e["sha256"].is_string()) {
      entry.sha256 = e["sha256"].get<std::string>();
    }
    if (e.contains("size") && e["size"].is_number_unsigned()) {
      entry.size = e["size"].get<std::uint64_t>();
    }
    snapshot.entries.push_back(std::move(entry));
  }
  if (doc.contains("configs")) {
    if (!doc["configs"].is_array()) {
      result.errors.push_back("configs must be an array");
      return result;
    }
    for (const auto& c : doc["configs"]) {
      if (!c.is_object() || !c.contains("path") || !c["path"].is_string()) {
        result.errors.push_back("malformed config fingerprint");
        return result;
      }
      ConfigFingerprint fp;
      fp.path = c["path"].get<std::string>();
      if (c.contains("top_keys") && c["top_keys"].is_array()) {
        for (const auto& k : c["top_keys"]) {
          if (k.is_string()) fp.top_keys.push_back(k.get<std::string>());
        }
      }
      auto read_pairs = [&](const char* key,
                            std::vector<std::pair<std::string, std::string>>*
                                out) {
        if (!c.contains(key) || !c[key].is_array()) return;
        for (const auto& p : c[key]) {
          if (p.is_object() && p.contains("key") && p["key"].is_string() &&
              p.contains("value") && p["value"].is_string()) {
            out->emplace_back(p["key"].get<std::string>(),
                              p["value"].get<std::string>());
          }
        }
      };
      read_pairs("sensitive", &fp.sensitive);
      read_pairs("hooks", &fp.hooks);
      if (c.contains("auto_approve") && c["auto_approve"].is_array()) {
        for (const auto& p : c["auto_approve"]) {
          if (p.is_object() && p.contains("key") && p["key"].is_string() &&
              p.contains("value") && p["value"].is_boolean()) {
            fp.auto_approve.emplace_back(p["key"].get<std::string>(),
                                         p["value"].get<bool>());
          }
        }
      }
      snapshot.configs.push_back(std::move(fp));
    }
  }
  result.snapshot = std::move(snapshot);
  return result;
}

bool save_snapshot(const fs::path& path, const BaselineSnapshot& s,
                   std::string* error) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    if (error) *error = "cannot write " + path.string();
    return false;
  }
  out << serialize_snapshot(s);
  if (!out) {
    if (error) *error = "write failed for " + path.string();
    return false;
  }
  return true;
}

SnapshotParseResult load_snapshot(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    SnapshotParseResult r;
    r.errors.push_back("cannot read " + path.string());
    return r;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_snapshot(buf.str());
}

}  // namespace skillguard::monitor
