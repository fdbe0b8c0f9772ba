#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "skillguard/caps.hpp"
#include "skillguard/finding.hpp"
#include "skillguard/policy.hpp"
#include "skillguard/skill_model.hpp"

namespace skillguard::trust {

struct TrustRecord {
  std::string name;
  std::string combined;  // hex combined digest at approval
  std::vector<std::pair<std::string, std::string>> files;  // path -> hex, sorted
  std::int64_t approved_at = 0;  // unix seconds, UTC
  std::vector<std::string> capabilities;  // canonical manifest clauses
  std::string note;
  std::string approved_body;  // stored in the sidecar, not the lockfile

  bool operator==(const TrustRecord&) const = default;
};

struct TrustLockfile {
  int version = 1;
  std::vector<TrustRecord> records;  // sorted by name, unique

  const TrustRecord* find(std::string_view name) const;
  void upsert(TrustRecord record);

  bool operator==(const TrustLockfile&) const = default;
};

/// Canonical lockfile bytes: fixed field order, skills sorted by name,
/// files by path, 2-space indent, trailing newline. serialize(parse(x))
/// == x for anything serialize produced.
std::string serialize_lockfile(const TrustLockfile& lf);

struct LockfileParseResult {
  std::optional<TrustLockfile> lockfile;
  std::vector<std::string> errors;
};

LockfileParseResult parse_lockfile(std::string_view json_text);

inline constexpr const char* kDefaultLockfileName = "skillguard.lock";

/// Sidecar directory holding the approved instruction bodies; the lockfile
/// schema itself carries digests only.
std::filesystem::path lockfile_sidecar_dir(const std::filesystem::path& lockfile);

bool save_lockfile(const std::filesystem::path& path, const TrustLockfile& lf,
                   std::string* error = nullptr);
LockfileParseResult load_lockfile(const std::filesystem::path& path);

/// Inserts or replaces the record for pkg's name.
TrustLockfile approve(const SkillPackage& pkg,
                      const std::optional<caps::CapabilityManifest>& manifest,
                      std::string note, TrustLockfile lockfile, std::int64_t now);

struct DiffReport {
  std::vector<std::string> added;
  std::vector<std::string> removed;
  std::vector<std::string> modified;
  double body_change_ratio = 0.0;
  bool script_changed = false;

  bool operator==(const DiffReport&) const = default;
};

struct TrustStatus {
  enum class Kind { Unknown, Trusted, Modified };
  Kind kind = Kind::Unknown;
  std::optional<DiffReport> diff;  // present iff Modified
  std::string record_name;
};

TrustStatus verify(const SkillPackage& pkg, const TrustLockfile& lockfile,
                   const PolicyConfig& policy);

/// Digest-level verification that tolerates a package whose frontmatter no
/// longer parses (tampering must stay detectable). Falls back to the only
/// record, then the directory name, when the name cannot be read.
TrustStatus verify_dir(const std::filesystem::path& dir,
                       const TrustLockfile& lockfile, const PolicyConfig& policy);

struct ConsentDecision {
  bool auto_accept = false;
  std::vector<std::string> reasons;  // empty iff auto_accept
};

/// Hard rules first: a changed script, any added/removed file and any
/// modified file other than SKILL.md always requires re-approval; only the
/// instruction body gets the similarity allowance, compared against the
/// policy threshold.
ConsentDecision consent_delta(const DiffReport& diff, const PolicyConfig& policy);

/// (words added + words removed) / max(1, words in old_body), computed
/// over an LCS word alignment. Whitespace-only reflow is 0.
double word_diff_ratio(std::string_view old_body, std::string_view new_body);

/// T2.2 finding for a Modified package, anchored at the frontmatter name.
Finding modified_finding(const SkillPackage& pkg, const DiffReport& diff);

}  // namespace skillguard::trust
