#include "skillguard/caps.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include <nlohmann/json.hpp>

namespace skillguard::caps {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

/// Package-relative glob: same rules as file paths but '*' and '?' are
/// allowed inside segments and a segment may be exactly "**".
bool valid_glob(std::string_view glob) {
  if (glob.empty() || glob.front() == '/') return false;
  if (glob.find('\\') != std::string_view::npos) return false;
  if (glob.size() >= 2 && glob[1] == ':') return false;
  for (std::string_view seg : split(glob, '/')) {
    if (seg.empty() || seg == "." || seg == "..") return false;
  }
  return true;
}

bool valid_host(std::string_view host) {
  if (host.empty()) return false;
  if (host == "*") return true;
  for (char c : host) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
              c == '-' || c == '*';
    if (!ok) return false;
  }
  return true;
}

void sort_unique(std::vector<std::string>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

bool segment_match(std::string_view pat, std::string_view seg) {
  // Iterative '*'/'?' match with backtracking, single segment only.
  std::size_t p = 0, s = 0, star = std::string_view::npos, mark = 0;
  while (s < seg.size()) {
    if (p < pat.size() && (pat[p] == '?' || pat[p] == seg[s])) {
      ++p;
      ++s;
    } else if (p < pat.size() && pat[p] == '*') {
      star = p++;
      mark = s;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      s = ++mark;
    } else {
      return false;
    }
  }
  while (p < pat.size() && pat[p] == '*') ++p;
  return p == pat.size();
}

bool match_segments(const std::vector<std::string_view>& glob, std::size_t gi,
                    const std::vector<std::string_view>& path, std::size_t pi) {
  if (gi == glob.size()) return pi == path.size();
  if (glob[gi] == "**") {
    if (match_segments(glob, gi + 1, path, pi)) return true;
    return pi < path.size() && match_segments(glob, gi, path, pi + 1);
  }
  return pi < path.size() && segment_match(glob[gi], path[pi]) &&
         match_segments(glob, gi + 1, path, pi + 1);
}

std::string_view strip_dot_slash(std::string_view s) {
  while (s.size() >= 2 && s[0] == '.' && s[1] == '/') s.remove_prefix(2);
  return s;
}

struct ScanUnit {
  const std::string* file;
  const std::string* content;
  int base_line;           // line number of the first line of content
  std::size_t base_offset; // byte offset of content within the file
};

std::vector<ScanUnit> scan_units(const SkillPackage& pkg) {
  std::vector<ScanUnit> units;
  static const std::string kSkillMd = "SKILL.md";
  units.push_back(
      {&kSkillMd, &pkg.body, pkg.body_loc.first_line, pkg.body_loc.byte_offset});
  for (const ScriptFile& s : pkg.scripts) {
    units.push_back({&s.path, &s.bytes, 1, 0});
  }
  return units;
}

std::string_view line_at(std::string_view content, std::size_t pos,
                         int* line_no) {
  int line = 1;
  std::size_t line_start = 0;
  for (std::size_t i = 0; i < pos; ++i) {
    if (content[i] == '\n') {
      ++line;
      line_start = i + 1;
    }
  }
  std::size_t line_end = content.find('\n', pos);
  if (line_end == std::string_view::npos) line_end = content.size();
  *line_no = line;
  return content.substr(line_start, line_end - line_start);
}

}  // namespace

const char* to_string(ActionClass c) {
  switch (c) {
    case ActionClass::FileRead: return "file-read";
    case ActionClass::FileWrite: return "file-write";
    case ActionClass::NetworkFetch: return "network-fetch";
    case ActionClass::NetworkSend: return "network-send";
    case ActionClass::Subprocess: return "subprocess";
    case ActionClass::ConfigWrite: return "config-write";
  }
  return "?";
}

bool CapabilityManifest::empty() const {
  return read_globs.empty() && write_globs.empty() &&
         network_domains.empty() && !subprocess && ecosystems.empty();
}

bool CapabilityManifest::allows_host(std::string_view host) const {
  std::string h = to_lower(host);
  for (const std::string& d : network_domains) {
    if (d == "*") return true;
    if (d == h) return true;
    // "*.example.com" admits any subdomain but not the apex.
    if (d.size() > 2 && d[0] == '*' && d[1] == '.') {
      std::string_view suffix(d.c_str() + 1, d.size() - 1);  // ".example.com"
      if (h.size() > suffix.size() &&
          std::string_view(h).substr(h.size() - suffix.size()) == suffix) {
        return true;
      }
    }
  }
  return false;
}

bool CapabilityManifest::allows_path(std::string_view path) const {
  for (const std::string& g : read_globs)
    if (glob_match(g, path)) return true;
  for (const std::string& g : write_globs)
    if (glob_match(g, path)) return true;
  return false;
}

std::vector<std::string> CapabilityManifest::clause_ids() const {
  std::vector<std::string> ids;
  for (const std::string& g : read_globs) ids.push_back("read=" + g);
  for (const std::string& g : write_globs) ids.push_back("write=" + g);
  for (const std::string& d : network_domains) ids.push_back("net=" + d);
  if (subprocess) ids.push_back("exec=yes");
  for (const std::string& e : ecosystems) ids.push_back("eco=" + e);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ManifestResult parse_manifest(const SkillMetadata& metadata) {
  ManifestResult result;
  auto raw = metadata.extra("capabilities");
  if (!raw) return result;
  result.clause_present = true;

  CapabilityManifest m;
  bool ok = true;
  auto fail = [&](const std::string& why) {
    result.diagnostics.push_back(
        {DiagSeverity::Error, DiagCode::MalformedManifest,
         "capabilities: " + why, {}});
    ok = false;
  };

  for (std::string_view clause : split(*raw, ';')) {
    clause = trim(clause);
    if (clause.empty()) continue;
    std::size_t eq = clause.find('=');
    if (eq == std::string_view::npos) {
      fail("clause \"" + std::string(clause) + "\" is not key=value");
      continue;
    }
    std::string key = to_lower(trim(clause.substr(0, eq)));
    for (std::string_view item : split(clause.substr(eq + 1), ',')) {
      item = trim(item);
      if (item.empty()) {
        fail("empty value in clause \"" + std::string(clause) + "\"");
        continue;
      }
      std::string value(item);
      if (key == "read" || key == "write") {
        if (!valid_glob(value)) {
          fail("glob \"" + value + "\" must be package-relative");
          continue;
        }
        (key == "read" ? m.read_globs : m.write_globs).push_back(value);
      } else if (key == "net") {
        std::string host = to_lower(value);
        if (!valid_host(host)) {
          fail("host \"" + value + "\" is not a domain name");
          continue;
        }
        m.network_domains.push_back(host);
      } else if (key == "exec") {
        std::string v = to_lower(value);
        if (v == "yes") {
          m.subprocess = true;
        } else if (v == "no") {
          m.subprocess = false;
        } else {
          fail("exec must be yes or no");
        }
      } else if (key == "eco") {
        m.ecosystems.push_back(to_lower(value));
      } else {
        fail("unknown clause key \"" + key + "\"");
      }
    }
  }

  if (!ok) return result;
  sort_unique(m.read_globs);
  sort_unique(m.write_globs);
  sort_unique(m.network_domains);
  sort_unique(m.ecosystems);
  result.manifest = std::move(m);
  return result;
}

namespace {

bool pathlike_literal(std::string_view s) {
  if (s.empty() || s.find("://") != std::string_view::npos) return false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) return false;
    if (c == '{' || c == '}' || c == '(' || c == ')' || c == '$' ||
        c == '<' || c == '>') {
      return false;
    }
  }
  if (s.front() == '/' || s.front() == '~') return true;
  if (s.rfind("./", 0) == 0 || s.rfind("../", 0) == 0) return true;
  if (s.back() == '/') return s.find('/') != std::string_view::npos;
  std::size_t slash = s.rfind('/');
  if (slash == std::string_view::npos) return false;
  return s.substr(slash + 1).find('.') != std::string_view::npos;
}

bool package_relative(std::string_view s) {
  return s.front() != '/' && s.front() != '~' && s.rfind("../", 0) != 0;
}

}  // namespace

std::vector<Finding> check_scope(const CapabilityManifest& manifest,
                                 const SkillPackage& pkg,
                                 const PolicyConfig& policy) {
  std::vector<Finding> findings;
  static const std::regex kUrl(R"((https?)://([A-Za-z0-9.-]+))");
  static const std::regex kQuoted(R"re("([^"]*)"|'([^']*)')re");
  static const std::regex kExec(
      R"(\b(subprocess\.(run|Popen|call|check_call|check_output)|os\.system|os\.exec\w*|os\.popen|child_process|execSync|spawnSync)\b)");

  std::set<std::string> seen_hosts;
  std::set<std::string> seen_paths;
  bool exec_reported = false;

  auto emit = [&](Severity sev, Confidence conf, const std::string& rule,
                  const ScanUnit& unit, int line_no, std::string_view line,
                  std::size_t pos, std::size_t len, const std::string& message) {
    Finding f;
    f.detector = DetectorId::T2_1;
    f.severity = policy.apply_override(DetectorId::T2_1, sev);
    f.confidence = conf;
    f.phase = detector_phase(DetectorId::T2_1);
    f.span.file = *unit.file;
    f.span.line_start = f.span.line_end = unit.base_line + line_no - 1;
    f.span.byte_start = unit.base_offset + pos;
    f.span.byte_end = unit.base_offset + pos + len;
    f.evidence = std::string(trim(line));
    f.message = message;
    f.rule = rule;
    findings.push_back(std::move(f));
  };

  for (const ScanUnit& unit : scan_units(pkg)) {
    const std::string& text = *unit.content;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), kUrl);
         it != std::sregex_iterator(); ++it) {
      std::string host = to_lower((*it)[2].str());
      if (manifest.allows_host(host) || !seen_hosts.insert(host).second)
        continue;
      int line_no = 0;
      auto line = line_at(text, std::size_t(it->position(0)), &line_no);
      emit(Severity::High, Confidence::Likely, "cap-net-undeclared", unit,
           line_no, line, std::size_t(it->position(0)), (*it)[0].length(),
           "contacts " + host + ", which the capability manifest does not declare");
    }
    for (auto it = std::sregex_iterator(text.begin(), text.end(), kQuoted);
         it != std::sregex_iterator(); ++it) {
      std::string lit = (*it)[1].matched ? (*it)[1].str() : (*it)[2].str();
      if (!pathlike_literal(lit)) continue;
      bool allowed = package_relative(lit) &&
                     manifest.allows_path(strip_dot_slash(lit));
      if (allowed || !seen_paths.insert(lit).second) continue;
      int line_no = 0;
      auto line = line_at(text, std::size_t(it->position(0)), &line_no);
      emit(Severity::Medium, Confidence::Heuristic, "cap-path-undeclared", unit,
           line_no, line, std::size_t(it->position(0)), (*it)[0].length(),
           "touches " + lit + ", outside the declared read/write globs");
    }
    if (!manifest.subprocess && !exec_reported) {
      std::smatch m;
      if (std::regex_search(text, m, kExec)) {
        exec_reported = true;
        int line_no = 0;
        auto line = line_at(text, std::size_t(m.position(0)), &line_no);
        emit(Severity::High, Confidence::Likely, "cap-exec-undeclared", unit,
             line_no, line, std::size_t(m.position(0)), m[0].length(),
             "spawns subprocesses but the manifest does not set exec=yes");
      }
    }
  }

  sort_findings(findings);
  return findings;
}

const char* to_string(SandboxPolicy::Tier t) {
  switch (t) {
    case SandboxPolicy::Tier::Isolated: return "isolated";
    case SandboxPolicy::Tier::Scoped: return "scoped";
    case SandboxPolicy::Tier::Broad: return "broad";
  }
  return "?";
}

SandboxPolicy generate_policy(const std::optional<CapabilityManifest>& manifest,
                              const PolicyConfig& policy) {
  SandboxPolicy p;
  if (!manifest || manifest->empty()) return p;  // deny-all Isolated

  const CapabilityManifest& m = *manifest;
  // A glob granted rw subsumes its ro mount.
  for (const std::string& g : m.write_globs) p.mounts.push_back({g, "rw"});
  for (const std::string& g : m.read_globs) {
    if (std::find(m.write_globs.begin(), m.write_globs.end(), g) ==
        m.write_globs.end()) {
      p.mounts.push_back({g, "ro"});
    }
  }
  std::sort(p.mounts.begin(), p.mounts.end(),
            [](const SandboxPolicy::Mount& a, const SandboxPolicy::Mount& b) {
              return std::tie(a.glob, a.mode) < std::tie(b.glob, b.mode);
            });

  if (!m.network_domains.empty()) {
    p.network.mode = "allowlist";
    p.network.hosts = m.network_domains;
  }

  p.subprocess = m.subprocess;
  if (m.subprocess && !m.network_domains.empty() &&
      !policy.allow_broad_sandbox) {
    // Subprocess plus network is how exfiltration escapes the allowlist.
    p.subprocess = false;
    p.warnings.push_back(
        "subprocess together with network access needs allow_broad_sandbox; "
        "subprocess denied");
  }

  if (p.subprocess && p.network.mode != "deny") {
    p.tier = SandboxPolicy::Tier::Broad;
  } else {
    p.tier = SandboxPolicy::Tier::Scoped;
  }
  return p;
}

std::string sandbox_to_json(const SandboxPolicy& p) {
  nlohmann::json doc;
  doc["tier"] = to_string(p.tier);
  doc["mounts"] = nlohmann::json::array();
  for (const auto& m : p.mounts) {
    doc["mounts"].push_back({{"glob", m.glob}, {"mode", m.mode}});
  }
  doc["network"] = {{"mode", p.network.mode}, {"hosts", p.network.hosts}};
  doc["subprocess"] = p.subprocess;
  return doc.dump(2) + "\n";
}

bool glob_match(std::string_view glob, std::string_view path) {
  glob = strip_dot_slash(glob);
  path = strip_dot_slash(path);
  if (glob.empty()) return path.empty();
  return match_segments(split(glob, '/'), 0, split(path, '/'), 0);
}

}  // namespace skillguard::caps
