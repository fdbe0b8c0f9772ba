#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace skillguard {

/// Byte and line coordinates of a region inside one file. Lines are
/// 1-based, byte offsets 0-based and half-open.
struct SourceSpan {
  std::string file;
  int line_start = 1;
  int line_end = 1;
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;

  bool operator==(const SourceSpan&) const = default;
};

enum class DiagSeverity { Error, Warning };

enum class DiagCode {
  MissingFrontmatter,
  MissingRequiredField,
  DuplicateKey,
  MalformedYaml,
  InvalidName,
  MissingSkillMd,
  PathEscape,
  SymlinkSkipped,
  IoError,
  MalformedManifest,
  MalformedPep723,
};

struct ParseDiagnostic {
  DiagSeverity severity = DiagSeverity::Error;
  DiagCode code = DiagCode::MalformedYaml;
  std::string message;
  std::optional<SourceSpan> span;
};

const char* to_string(DiagCode code);
bool has_error(const std::vector<ParseDiagnostic>& diags);

/// Frontmatter fields of a SKILL.md. `extras` holds every key other than
/// name/description in source order.
struct SkillMetadata {
  std::string name;         // canonical lowercase form
  std::string description;
  std::vector<std::pair<std::string, std::string>> extras;

  std::optional<std::string> extra(std::string_view key) const;
  bool operator==(const SkillMetadata&) const = default;
};

struct FileEntry {
  std::string path;   // relative, '/'-separated
  std::string bytes;
  bool operator==(const FileEntry&) const = default;
};

struct ScriptFile {
  std::string path;
  std::string bytes;
  std::string ecosystem;  // "python", "shell", "node", "powershell", "ruby"
  bool operator==(const ScriptFile&) const = default;
};

/// Per-file and combined SHA-256 of a package. per_file is sorted bytewise
/// by path; combined is a pure function of per_file (see canonical_digest).
struct ContentDigest {
  std::vector<std::pair<std::string, std::string>> per_file;  // path -> hex
  std::string combined;
  bool operator==(const ContentDigest&) const = default;
};

struct BodyLocation {
  int first_line = 1;        // 1-based line of the first body byte
  std::size_t byte_offset = 0;  // offset of the body inside SKILL.md
  bool operator==(const BodyLocation&) const = default;
};

struct SkillPackage {
  std::filesystem::path root;
  SkillMetadata metadata;
  std::string skill_md;  // raw SKILL.md bytes
  std::string body;      // markdown after the frontmatter
  BodyLocation body_loc;
  std::vector<FileEntry> supplementary;  // sorted by path
  std::vector<ScriptFile> scripts;       // sorted by path
  ContentDigest digest;
};

struct FrontmatterResult {
  std::optional<SkillMetadata> metadata;
  std::string body;
  BodyLocation body_loc;
  std::vector<ParseDiagnostic> diagnostics;
};

/// Parses the minimal YAML frontmatter subset: the block between the
/// leading `---` line and the next `---` line, one `key: value` scalar per
/// line, indented lines folding into the previous value. Collections are
/// rejected. Errors leave `metadata` empty.
FrontmatterResult parse_frontmatter(std::string_view text);

struct ModelConfig {
  std::vector<std::string> script_extensions = {
      ".py", ".sh", ".bash", ".js", ".mjs", ".ts", ".ps1", ".rb"};
  static const ModelConfig& defaults();
};

struct LoadResult {
  std::optional<SkillPackage> package;
  std::vector<ParseDiagnostic> diagnostics;
};

/// Loads a package directory: SKILL.md plus every regular file beneath the
/// root. Symlinks are skipped with a warning; skillguard's own state files
/// (lockfile, baseline, sidecar) are excluded so verification does not
/// observe itself. The result is independent of directory enumeration
/// order.
LoadResult load_package(const std::filesystem::path& dir,
                        const ModelConfig& cfg = ModelConfig::defaults());

/// Recomputes the digest from the bytes held in the package. Pure.
ContentDigest canonical_digest(const SkillPackage& pkg);

/// Digest of a package directory under load_package's enumeration rules
/// but with no frontmatter requirement: tampering stays measurable even
/// when the package no longer parses. Unsafe entry names are skipped with
/// a diagnostic instead of aborting.
struct DirDigest {
  ContentDigest digest;
  std::optional<std::string> skill_md;  // raw bytes when present
  std::vector<ParseDiagnostic> diagnostics;
};

DirDigest digest_dir(const std::filesystem::path& dir,
                     const ModelConfig& cfg = {});

/// Combined digest over (path, hex) pairs: per sorted entry the stream is
/// u64-be(len(path)) || path || u64-be(32) || raw per-file digest.
std::string combined_digest(
    const std::vector<std::pair<std::string, std::string>>& per_file);

/// True when `path` is a relative '/'-separated path with no empty, "." or
/// ".." components. Everything load_package enumerates must satisfy this.
bool is_safe_relative_path(std::string_view path);

/// Ecosystem tag for a script path, empty when not a script.
std::string script_ecosystem(std::string_view path, const ModelConfig& cfg);

/// Names skipped during enumeration (trust/monitor state living in the
/// package root must not change the package digest).
bool is_reserved_state_name(std::string_view relpath);

}  // namespace skillguard
