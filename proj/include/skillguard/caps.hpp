#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skillguard/finding.hpp"
#include "skillguard/policy.hpp"
#include "skillguard/skill_model.hpp"

namespace skillguard::caps {

enum class ActionClass {
  FileRead,
  FileWrite,
  NetworkFetch,
  NetworkSend,
  Subprocess,
  ConfigWrite,
};

const char* to_string(ActionClass c);

/// Declared scope from the frontmatter `capabilities` key. Clause string
/// grammar: `read=<glob>; write=<glob>; net=<host>|*; exec=yes|no;
/// eco=<ecosystem>`, clauses separated by ';', values may be
/// comma-separated lists. Globs are package-relative.
struct CapabilityManifest {
  std::vector<std::string> read_globs;
  std::vector<std::string> write_globs;
  std::vector<std::string> network_domains;  // lowercased; "*" = any host
  bool subprocess = false;
  std::vector<std::string> ecosystems;

  bool empty() const;
  bool allows_host(std::string_view host) const;
  bool allows_path(std::string_view path) const;  // read or write glob
  /// Canonical clause strings, stable order (trust records store these).
  std::vector<std::string> clause_ids() const;
};

struct ManifestResult {
  std::optional<CapabilityManifest> manifest;
  std::vector<ParseDiagnostic> diagnostics;
  bool clause_present = false;  // frontmatter had a capabilities key
};

/// Parses the `capabilities` extras value. Unknown clause keys and
/// absolute or escaping globs are MalformedManifest: the manifest is
/// treated as absent and the caller reports a finding.
ManifestResult parse_manifest(const SkillMetadata& metadata);

/// Findings for behavior outside the declared scope: undeclared network
/// hosts (High), path literals outside the granted globs (Medium), and
/// subprocess use without exec=yes (High). Only scheme-prefixed URLs are
/// treated as network evidence. Requires a manifest.
std::vector<Finding> check_scope(const CapabilityManifest& manifest,
                                 const SkillPackage& pkg,
                                 const PolicyConfig& policy);

struct SandboxPolicy {
  enum class Tier { Isolated, Scoped, Broad };
  struct Mount {
    std::string glob;
    std::string mode;  // "ro" or "rw"
    bool operator==(const Mount&) const = default;
  };
  struct Network {
    std::string mode;  // "deny" or "allowlist"
    std::vector<std::string> hosts;
    bool operator==(const Network&) const = default;
  };

  Tier tier = Tier::Isolated;
  std::vector<Mount> mounts;
  Network network{"deny", {}};
  bool subprocess = false;
  std::vector<std::string> warnings;  // not part of the serialized policy

  bool operator==(const SandboxPolicy&) const = default;
};

const char* to_string(SandboxPolicy::Tier t);

/// Derives the least-privilege execution policy for a manifest. No
/// manifest (or an empty one) means deny-all Isolated; subprocess plus
/// network requires `allow_broad_sandbox` or subprocess is denied with a
/// warning.
SandboxPolicy generate_policy(const std::optional<CapabilityManifest>& manifest,
                              const PolicyConfig& policy);

/// Canonical JSON: {"mounts":[{glob,mode}],"network":{hosts,mode},
/// "subprocess":bool,"tier":string}, sorted keys.
std::string sandbox_to_json(const SandboxPolicy& p);

/// Glob match over '/'-separated relative paths. `*` and `?` stay inside a
/// path segment, `**` crosses segments. A leading "./" on either side is
/// ignored.
bool glob_match(std::string_view glob, std::string_view path);

}  // namespace skillguard::caps
