#include "skillguard/skill_model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "skillguard/hash.hpp"

namespace skillguard {

namespace {

constexpr std::size_t kMaxNameLength = 64;

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::string strip_quotes(std::string_view v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                        (v.front() == '\'' && v.back() == '\''))) {
    return std::string(v.substr(1, v.size() - 2));
  }
  return std::string(v);
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  return std::all_of(key.begin(), key.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
}

bool valid_name_grammar(std::string_view lowered) {
  if (lowered.empty() || lowered.size() > kMaxNameLength) return false;
  auto head = static_cast<unsigned char>(lowered.front());
  if (!(std::islower(head) || std::isdigit(head))) return false;
  return std::all_of(lowered.begin(), lowered.end(), [](unsigned char c) {
    return std::islower(c) || std::isdigit(c) || c == '-';
  });
}

struct RawLine {
  std::string_view text;  // excludes newline and trailing \r
  int number;
  std::size_t offset;  // byte offset of line start
};

std::vector<RawLine> lines_of(std::string_view text) {
  std::vector<RawLine> out;
  std::size_t pos = 0;
  int number = 1;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::size_t end = (nl == std::string_view::npos) ? text.size() : nl;
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back({line, number, pos});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
    ++number;
  }
  return out;
}

SourceSpan line_span(const RawLine& line) {
  SourceSpan s;
  s.file = "SKILL.md";
  s.line_start = s.line_end = line.number;
  s.byte_start = line.offset;
  s.byte_end = line.offset + line.text.size();
  return s;
}

}  // namespace

const char* to_string(DiagCode code) {
  switch (code) {
    case DiagCode::MissingFrontmatter: return "MissingFrontmatter";
    case DiagCode::MissingRequiredField: return "MissingRequiredField";
    case DiagCode::DuplicateKey: return "DuplicateKey";
    case DiagCode::MalformedYaml: return "MalformedYaml";
    case DiagCode::InvalidName: return "InvalidName";
    case DiagCode::MissingSkillMd: return "MissingSkillMd";
    case DiagCode::PathEscape: return "PathEscape";
    case DiagCode::SymlinkSkipped: return "SymlinkSkipped";
    case DiagCode::IoError: return "IoError";
    case DiagCode::MalformedManifest: return "MalformedManifest";
    case DiagCode::MalformedPep723: return "MalformedPep723";
  }
  return "Unknown";
}

bool has_error(const std::vector<ParseDiagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const ParseDiagnostic& d) {
    return d.severity == DiagSeverity::Error;
  });
}

std::optional<std::string> SkillMetadata::extra(std::string_view key) const {
  for (const auto& [k, v] : extras) {
    if (k == key) return v;
  }
  return std::nullopt;
}

const ModelConfig& ModelConfig::defaults() {
  static const ModelConfig cfg;
  return cfg;
}

FrontmatterResult parse_frontmatter(std::string_view text) {
  FrontmatterResult result;
  auto fail = [&](DiagCode code, std::string msg,
                  std::optional<SourceSpan> span = std::nullopt) {
    result.diagnostics.push_back(
        {DiagSeverity::Error, code, std::move(msg), std::move(span)});
  };

  // Tolerate a UTF-8 BOM before the opening delimiter.
  std::string_view body_text = text;
  std::size_t bom = 0;
  if (body_text.substr(0, 3) == "\xef\xbb\xbf") bom = 3;

  const auto lines = lines_of(text);
  std::size_t open = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view t = lines[i].text;
    if (i == 0 && bom) t.remove_prefix(std::min<std::size_t>(3, t.size()));
    if (trim(t).empty()) continue;
    if (trim(t) == "---") open = i;
    break;  // only the first non-blank line may open the block
  }
  if (open == lines.size()) {
    fail(DiagCode::MissingFrontmatter, "no frontmatter block: SKILL.md must start with ---");
    result.body = std::string(text);
    return result;
  }

  std::size_t close = lines.size();
  for (std::size_t i = open + 1; i < lines.size(); ++i) {
    if (trim(lines[i].text) == "---") {
      close = i;
      break;
    }
  }
  if (close == lines.size()) {
    fail(DiagCode::MissingFrontmatter, "frontmatter block is never closed");
    result.body = std::string(text);
    return result;
  }

  // Body starts on the line after the closing delimiter.
  const RawLine& close_line = lines[close];
  std::size_t body_off = close_line.offset + close_line.text.size();
  // Skip the delimiter line's own terminator.
  if (body_off < text.size() && text[body_off] == '\r') ++body_off;
  if (body_off < text.size() && text[body_off] == '\n') ++body_off;
  result.body = std::string(text.substr(body_off));
  result.body_loc.first_line = close_line.number + 1;
  result.body_loc.byte_offset = body_off;

  SkillMetadata meta;
  std::vector<std::pair<std::string, std::string>> fields;  // source order
  std::ptrdiff_t open_field = -1;  // target for folded continuation lines

  for (std::size_t i = open + 1; i < close; ++i) {
    const RawLine& line = lines[i];
    std::string_view raw = line.text;
    std::string_view t = trim(raw);
    if (t.empty()) {
      open_field = -1;
      continue;
    }
    if (t.front() == '#') continue;

    const bool indented = std::isspace(static_cast<unsigned char>(raw.front()));
    if (indented && open_field >= 0) {
      // Plain-scalar folding: continuation joins with one space.
      std::string& value = fields[static_cast<std::size_t>(open_field)].second;
      value.append(" ");
      value.append(strip_quotes(t));
      continue;
    }

    if (t.front() == '-' && !t.starts_with("---")) {
      fail(DiagCode::MalformedYaml, "sequences are not supported in frontmatter",
           line_span(line));
      return result;
    }

    std::size_t colon = t.find(':');
    if (colon == std::string_view::npos) {
      fail(DiagCode::MalformedYaml,
           "expected key: value, got \"" + std::string(t) + "\"", line_span(line));
      return result;
    }
    std::string key = std::string(trim(t.substr(0, colon)));
    std::string_view value_raw = trim(t.substr(colon + 1));
    if (!valid_key(key)) {
      fail(DiagCode::MalformedYaml, "invalid key \"" + key + "\"", line_span(line));
      return result;
    }
    if (!value_raw.empty() && (value_raw.front() == '[' || value_raw.front() == '{' ||
                               value_raw.front() == '|' || value_raw.front() == '>')) {
      fail(DiagCode::MalformedYaml,
           "collections and block scalars are not supported (key \"" + key + "\")",
           line_span(line));
      return result;
    }

    auto dup = std::find_if(fields.begin(), fields.end(),
                            [&](const auto& kv) { return kv.first == key; });
    if (dup != fields.end()) {
      fail(DiagCode::DuplicateKey, "duplicate key \"" + key + "\"", line_span(line));
      return result;
    }
    fields.emplace_back(key, strip_quotes(value_raw));
    open_field = static_cast<std::ptrdiff_t>(fields.size()) - 1;
  }

  for (auto& [key, value] : fields) {
    if (key == "name") {
      meta.name = to_lower(trim(value));
    } else if (key == "description") {
      meta.description = std::string(trim(value));
    } else {
      meta.extras.emplace_back(key, value);
    }
  }

  if (meta.name.empty()) {
    fail(DiagCode::MissingRequiredField, "frontmatter is missing \"name\"");
  } else if (!valid_name_grammar(meta.name)) {
    fail(DiagCode::InvalidName,
         "name \"" + meta.name + "\" must match [a-z0-9][a-z0-9-]* and be at most 64 chars");
  }
  if (meta.description.empty()) {
    fail(DiagCode::MissingRequiredField, "frontmatter is missing \"description\"");
  }
  if (has_error(result.diagnostics)) return result;

  result.metadata = std::move(meta);
  return result;
}

bool is_safe_relative_path(std::string_view path) {
  if (path.empty() || path.front() == '/' || path.find('\\') != std::string_view::npos) {
    return false;
  }
  // Windows drive prefixes are absolute too.
  if (path.size() >= 2 && path[1] == ':') return false;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    std::size_t sep = path.find('/', pos);
    std::string_view comp = path.substr(pos, (sep == std::string_view::npos ? path.size() : sep) - pos);
    if (comp.empty() || comp == "." || comp == "..") return false;
    if (sep == std::string_view::npos) break;
    pos = sep + 1;
  }
  return true;
}

std::string script_ecosystem(std::string_view path, const ModelConfig& cfg) {
  auto dot = path.rfind('.');
  if (dot == std::string_view::npos) return "";
  std::string ext = to_lower(path.substr(dot));
  if (std::find(cfg.script_extensions.begin(), cfg.script_extensions.end(), ext) ==
      cfg.script_extensions.end()) {
    return "";
  }
  if (ext == ".py") return "python";
  if (ext == ".sh" || ext == ".bash") return "shell";
  if (ext == ".js" || ext == ".mjs" || ext == ".ts") return "node";
  if (ext == ".ps1") return "powershell";
  if (ext == ".rb") return "ruby";
  return "script";
}

bool is_reserved_state_name(std::string_view relpath) {
  if (relpath == "skillguard.lock" || relpath == "skillguard.baseline.json") {
    return true;
  }
  return relpath.rfind("skillguard.lock.d/", 0) == 0;
}

std::string combined_digest(
    const std::vector<std::pair<std::string, std::string>>& per_file) {
  Sha256 h;
  auto put_u64 = [&](std::uint64_t v) {
    std::uint8_t be[8];
    for (int i = 0; i < 8; ++i) be[i] = std::uint8_t(v >> (56 - 8 * i));
    h.update(be, 8);
  };
  for (const auto& [path, hex] : per_file) {
    put_u64(path.size());
    h.update(path.data(), path.size());
    // Hex back to the raw 32-byte digest.
    std::uint8_t raw[32];
    for (std::size_t i = 0; i < 32 && i * 2 + 1 < hex.size(); ++i) {
      auto nyb = [](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return std::uint8_t(c - '0');
        if (c >= 'a' && c <= 'f') return std::uint8_t(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return std::uint8_t(c - 'A' + 10);
        return 0;
      };
      raw[i] = std::uint8_t((nyb(hex[i * 2]) << 4) | nyb(hex[i * 2 + 1]));
    }
    put_u64(32);
    h.update(raw, 32);
  }
  return to_hex(h.finish());
}

ContentDigest canonical_digest(const SkillPackage& pkg) {
  std::vector<std::pair<std::string, std::string>> per_file;
  per_file.emplace_back("SKILL.md", sha256_hex(pkg.skill_md));
  for (const auto& f : pkg.supplementary) {
    per_file.emplace_back(f.path, sha256_hex(f.bytes));
  }
  for (const auto& s : pkg.scripts) {
    per_file.emplace_back(s.path, sha256_hex(s.bytes));
  }
  std::sort(per_file.begin(), per_file.end());
  ContentDigest d;
  d.per_file = std::move(per_file);
  d.combined = combined_digest(d.per_file);
  return d;
}

namespace {

bool read_file_bytes(const std::filesystem::path& p, std::string* out) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  *out = ss.str();
  return true;
}

/// Regular files under dir except SKILL.md and reserved state names,
/// sorted by '/'-relative path so the result never depends on directory
/// enumeration order. Unsafe entry names set *escaped.
std::vector<std::string> enumerate_rel_paths(
    const std::filesystem::path& dir, bool* escaped,
    std::vector<ParseDiagnostic>* diags) {
  namespace fs = std::filesystem;
  std::vector<std::string> rel_paths;
  auto diag = [&](DiagSeverity sev, DiagCode code, std::string msg) {
    diags->push_back({sev, code, std::move(msg), std::nullopt});
  };

  std::error_code ec;
  fs::recursive_directory_iterator it(
      dir, fs::directory_options::skip_permission_denied, ec);
  if (ec) {
    diag(DiagSeverity::Error, DiagCode::IoError,
         "cannot enumerate " + dir.string() + ": " + ec.message());
    return rel_paths;
  }
  for (auto end = fs::recursive_directory_iterator(); it != end;
       it.increment(ec)) {
    if (ec) {
      diag(DiagSeverity::Warning, DiagCode::IoError,
           "enumeration error: " + ec.message());
      break;
    }
    const fs::path& p = it->path();
    std::string rel = p.lexically_relative(dir).generic_string();
    if (it->is_symlink(ec)) {
      diag(DiagSeverity::Warning, DiagCode::SymlinkSkipped,
           "symlink skipped: " + rel);
      if (it->is_directory(ec)) it.disable_recursion_pending();
      continue;
    }
    if (it->is_directory(ec)) continue;
    if (!it->is_regular_file(ec)) continue;
    if (rel == "SKILL.md") continue;
    if (is_reserved_state_name(rel)) continue;
    if (!is_safe_relative_path(rel)) {
      diag(DiagSeverity::Error, DiagCode::PathEscape,
           "entry escapes the package root: " + rel);
      *escaped = true;
      continue;
    }
    rel_paths.push_back(std::move(rel));
  }
  std::sort(rel_paths.begin(), rel_paths.end());
  return rel_paths;
}

}  // namespace

LoadResult load_package(const std::filesystem::path& dir, const ModelConfig& cfg) {
  namespace fs = std::filesystem;
  LoadResult result;
  auto diag = [&](DiagSeverity sev, DiagCode code, std::string msg) {
    result.diagnostics.push_back({sev, code, std::move(msg), std::nullopt});
  };

  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    diag(DiagSeverity::Error, DiagCode::IoError,
         "not a directory: " + dir.string());
    return result;
  }
  const fs::path skill_md = dir / "SKILL.md";
  if (!fs::is_regular_file(fs::symlink_status(skill_md, ec))) {
    diag(DiagSeverity::Error, DiagCode::MissingSkillMd,
         "no SKILL.md in " + dir.string());
    return result;
  }

  SkillPackage pkg;
  pkg.root = dir;
  if (!read_file_bytes(skill_md, &pkg.skill_md)) {
    diag(DiagSeverity::Error, DiagCode::IoError, "cannot read SKILL.md");
    return result;
  }

  FrontmatterResult fm = parse_frontmatter(pkg.skill_md);
  for (auto& d : fm.diagnostics) {
    result.diagnostics.push_back(std::move(d));
  }
  if (!fm.metadata) return result;
  pkg.metadata = std::move(*fm.metadata);
  pkg.body = std::move(fm.body);
  pkg.body_loc = fm.body_loc;

  bool escaped = false;
  std::vector<std::string> rel_paths =
      enumerate_rel_paths(dir, &escaped, &result.diagnostics);
  if (escaped) return result;

  for (const std::string& rel : rel_paths) {
    std::string bytes;
    if (!read_file_bytes(dir / fs::path(rel), &bytes)) {
      diag(DiagSeverity::Warning, DiagCode::IoError, "cannot read " + rel);
      continue;
    }
    std::string eco = script_ecosystem(rel, cfg);
    if (!eco.empty()) {
      pkg.scripts.push_back({rel, std::move(bytes), std::move(eco)});
    } else {
      pkg.supplementary.push_back({rel, std::move(bytes)});
    }
  }

  pkg.digest = canonical_digest(pkg);
  result.package = std::move(pkg);
  return result;
}

DirDigest digest_dir(const std::filesystem::path& dir, const ModelConfig&) {
  namespace fs = std::filesystem;
  DirDigest result;
  auto diag = [&](DiagSeverity sev, DiagCode code, std::string msg) {
    result.diagnostics.push_back({sev, code, std::move(msg), std::nullopt});
  };

  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    diag(DiagSeverity::Error, DiagCode::IoError,
         "not a directory: " + dir.string());
    return result;
  }

  bool escaped = false;
  std::vector<std::string> rel_paths =
      enumerate_rel_paths(dir, &escaped, &result.diagnostics);
  // Unsafe names are skipped, not fatal: the digest must stay computable
  // on a tampered tree.

  std::string skill_md_bytes;
  if (read_file_bytes(dir / "SKILL.md", &skill_md_bytes)) {
    result.skill_md = skill_md_bytes;
    result.digest.per_file.emplace_back("SKILL.md",
                                        sha256_hex(skill_md_bytes));
  }
  for (const std::string& rel : rel_paths) {
    std::string bytes;
    if (!read_file_bytes(dir / fs::path(rel), &bytes)) {
      diag(DiagSeverity::Warning, DiagCode::IoError, "cannot read " + rel);
      continue;
    }
    result.digest.per_file.emplace_back(rel, sha256_hex(bytes));
  }
  std::sort(result.digest.per_file.begin(), result.digest.per_file.end());
  result.digest.combined = combined_digest(result.digest.per_file);
  return result;
}

}  // namespace skillguard
