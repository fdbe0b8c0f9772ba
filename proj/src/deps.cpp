#include "skillguard/deps.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <nlohmann/json.hpp>

namespace skillguard::deps {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::string basename_of(std::string_view path) {
  std::size_t slash = path.rfind('/');
  return std::string(slash == std::string_view::npos ? path
                                                     : path.substr(slash + 1));
}

bool is_requirements_file(std::string_view path) {
  std::string base = basename_of(path);
  return base.rfind("requirements", 0) == 0 && base.size() >= 4 &&
         base.substr(base.size() - 4) == ".txt";
}

struct Line {
  std::string_view text;
  int number;
};

std::vector<Line> lines_of(std::string_view content) {
  std::vector<Line> lines;
  std::size_t start = 0;
  int number = 1;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    lines.push_back({content.substr(start, end - start), number});
    if (end == content.size()) break;
    start = end + 1;
    ++number;
  }
  return lines;
}

SourceSpan span_for(const std::string& file, int line) {
  SourceSpan s;
  s.file = file;
  s.line_start = s.line_end = line;
  return s;
}

/// Splits a PEP 508-ish requirement into (name, constraint). The name
/// ends at the first character that cannot appear in a package name;
/// extras brackets are dropped from the constraint.
std::pair<std::string, std::string> split_python_requirement(
    std::string_view req) {
  req = trim(req);
  std::size_t i = 0;
  while (i < req.size()) {
    char c = req[i];
    bool name_char = std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                     c == '_' || c == '.';
    if (!name_char) break;
    ++i;
  }
  std::string name(req.substr(0, i));
  std::string_view rest = req.substr(i);
  if (!rest.empty() && rest.front() == '[') {
    std::size_t close = rest.find(']');
    rest = close == std::string_view::npos ? std::string_view{}
                                           : rest.substr(close + 1);
  }
  // Environment markers are not version constraints.
  std::size_t semi = rest.find(';');
  if (semi != std::string_view::npos) rest = rest.substr(0, semi);
  return {name, std::string(trim(rest))};
}

/// Splits npm's name[@constraint]; the '@' of a scope prefix is not a
/// separator.
std::pair<std::string, std::string> split_node_spec(std::string_view spec) {
  std::size_t at = spec.rfind('@');
  if (at == std::string_view::npos || at == 0) return {std::string(spec), ""};
  return {std::string(spec.substr(0, at)), std::string(spec.substr(at + 1))};
}

/// The word list of a shell command with quotes stripped; no expansion.
std::vector<std::string> shell_words(std::string_view line) {
  std::vector<std::string> words;
  std::string current;
  char quote = 0;
  for (char c : line) {
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else {
        current.push_back(c);
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) {
        words.push_back(current);
        current.clear();
      }
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(current);
  return words;
}

struct InstallCommand {
  std::string ecosystem;
  std::vector<std::string> packages;  // raw tokens
};

bool is_command_separator(const std::string& w) {
  return w == "&&" || w == ";" || w == "|" || w == "||";
}

/// Recognizes every package-install command in one segment of shell or
/// instructions text. Option tokens are skipped; options that consume a
/// value (-r, --index-url, ...) skip the value too.
std::vector<InstallCommand> parse_install_words(
    const std::vector<std::string>& words) {
  std::vector<InstallCommand> commands;
  std::size_t i = 0;
  while (i < words.size()) {
    // Collects arguments until a command separator; returns the index of
    // that separator (or the end) so scanning resumes after the command.
    auto collect = [&](std::size_t start, const char* ecosystem) {
      InstallCommand cmd;
      cmd.ecosystem = ecosystem;
      bool skip_next = false;
      std::size_t j = start;
      for (; j < words.size(); ++j) {
        const std::string& w = words[j];
        if (is_command_separator(w)) break;
        if (skip_next) {
          skip_next = false;
          continue;
        }
        if (!w.empty() && w.front() == '-') {
          if (w == "-r" || w == "--requirement" || w == "--index-url" ||
              w == "-i" || w == "--extra-index-url" || w == "-t" ||
              w == "--target") {
            skip_next = true;
          }
          continue;
        }
        cmd.packages.push_back(w);
      }
      commands.push_back(std::move(cmd));
      return j;
    };

    const std::string& w = words[i];
    bool has_next = i + 1 < words.size();
    auto next = [&] { return words[i + 1]; };

    if ((w == "pip" || w == "pip3") && has_next && next() == "install") {
      i = collect(i + 2, "python-pypi");
    } else if ((w == "python" || w == "python3") && i + 3 < words.size() &&
               words[i + 1] == "-m" && words[i + 2] == "pip" &&
               words[i + 3] == "install") {
      i = collect(i + 4, "python-pypi");
    } else if (w == "uv" && has_next && next() == "add") {
      i = collect(i + 2, "python-pypi");
    } else if (w == "uv" && i + 2 < words.size() && words[i + 1] == "pip" &&
               words[i + 2] == "install") {
      i = collect(i + 3, "python-pypi");
    } else if ((w == "npm" || w == "pnpm") && has_next &&
               (next() == "install" || next() == "i" || next() == "add")) {
      i = collect(i + 2, "node-npm");
    } else if (w == "yarn" && has_next && next() == "add") {
      i = collect(i + 2, "node-npm");
    } else if (w == "npx" && has_next) {
      InstallCommand cmd;
      cmd.ecosystem = "node-npm";
      std::size_t j = i + 1;
      for (; j < words.size(); ++j) {
        if (is_command_separator(words[j])) break;
        if (!words[j].empty() && words[j].front() == '-') continue;
        cmd.packages.push_back(words[j]);  // the executed package only
        ++j;
        break;
      }
      commands.push_back(std::move(cmd));
      i = j;
    } else if ((w == "brew" || w == "apt" || w == "apt-get") && has_next &&
               next() == "install") {
      i = collect(i + 2, "shell-tool");
    } else {
      ++i;
    }
  }
  return commands;
}

/// Instructions text puts commands inside backtick spans; each span (and
/// the text between spans) is parsed as its own command line so prose
/// around a span never reads as package arguments.
std::vector<InstallCommand> parse_install_line(std::string_view line) {
  std::vector<InstallCommand> commands;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t tick = line.find('`', start);
    std::string_view segment =
        line.substr(start, tick == std::string_view::npos ? line.size() - start
                                                          : tick - start);
    for (auto& cmd : parse_install_words(shell_words(segment))) {
      commands.push_back(std::move(cmd));
    }
    if (tick == std::string_view::npos) break;
    start = tick + 1;
  }
  return commands;
}

void extract_install_commands(const std::string& file,
                              std::string_view content, DepOrigin origin,
                              std::vector<DependencyRef>* deps,
                              int base_line = 1) {
  for (const Line& line : lines_of(content)) {
    for (const InstallCommand& cmd : parse_install_line(line.text)) {
      for (const std::string& token : cmd.packages) {
        DependencyRef dep;
        dep.ecosystem = cmd.ecosystem;
        dep.origin = origin;
        dep.span = span_for(file, base_line + line.number - 1);
        if (cmd.ecosystem == "python-pypi") {
          auto [name, constraint] = split_python_requirement(token);
          if (name.empty()) continue;
          dep.name = name;
          dep.constraint = constraint;
        } else if (cmd.ecosystem == "node-npm") {
          auto [name, constraint] = split_node_spec(token);
          if (name.empty()) continue;
          dep.name = name;
          dep.constraint = constraint;
        } else {
          dep.name = token;
        }
        deps->push_back(std::move(dep));
      }
    }
  }
}

void extract_pep723(const ScriptFile& script, std::vector<DependencyRef>* deps,
                    std::vector<ParseDiagnostic>* diags) {
  std::vector<Line> lines = lines_of(script.bytes);
  bool in_block = false;
  bool closed = false;
  bool in_deps = false;
  int block_line = 0;
  static const std::regex kEntry(R"re("([^"]*)"|'([^']*)')re");

  for (const Line& line : lines) {
    std::string_view t = trim(line.text);
    if (!in_block) {
      if (t == "# /// script") {
        in_block = true;
        block_line = line.number;
      }
      continue;
    }
    if (t == "# ///") {
      in_block = false;
      closed = true;
      in_deps = false;
      continue;
    }
    if (t.rfind("#", 0) != 0) {
      // A PEP 723 block is comment lines only; anything else aborts it.
      diags->push_back({DiagSeverity::Warning, DiagCode::MalformedPep723,
                        script.path + ": inline script block interrupted at line " +
                            std::to_string(line.number),
                        span_for(script.path, line.number)});
      in_block = false;
      in_deps = false;
      continue;
    }
    std::string_view body = trim(t.substr(1));
    if (body.rfind("dependencies", 0) == 0) {
      std::size_t eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      in_deps = true;
      body = body.substr(eq + 1);
    }
    if (!in_deps) continue;
    std::string text(body);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), kEntry);
         it != std::sregex_iterator(); ++it) {
      std::string token =
          (*it)[1].matched ? (*it)[1].str() : (*it)[2].str();
      auto [name, constraint] = split_python_requirement(token);
      if (name.empty()) continue;
      DependencyRef dep;
      dep.ecosystem = "python-pypi";
      dep.name = name;
      dep.constraint = constraint;
      dep.origin = DepOrigin::Pep723Block;
      dep.span = span_for(script.path, line.number);
      deps->push_back(std::move(dep));
    }
    if (body.find(']') != std::string_view::npos) in_deps = false;
  }

  if (in_block && !closed) {
    diags->push_back({DiagSeverity::Warning, DiagCode::MalformedPep723,
                      script.path + ": inline script block never closed",
                      span_for(script.path, block_line)});
  }
}

void extract_requirements(const FileEntry& file,
                          std::vector<DependencyRef>* deps) {
  for (const Line& line : lines_of(file.bytes)) {
    std::string_view t = trim(line.text);
    if (t.empty() || t.front() == '#' || t.front() == '-') continue;
    auto [name, constraint] = split_python_requirement(t);
    if (name.empty()) continue;
    DependencyRef dep;
    dep.ecosystem = "python-pypi";
    dep.name = name;
    dep.constraint = constraint;
    dep.origin = DepOrigin::RequirementsFile;
    dep.span = span_for(file.path, line.number);
    deps->push_back(std::move(dep));
  }
}

void extract_package_json(const FileEntry& file,
                          std::vector<DependencyRef>* deps,
                          std::vector<ParseDiagnostic>* diags) {
  json doc = json::parse(file.bytes, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    diags->push_back({DiagSeverity::Warning, DiagCode::MalformedManifest,
                      file.path + ": not a JSON object",
                      span_for(file.path, 1)});
    return;
  }
  for (const char* section :
       {"dependencies", "devDependencies", "optionalDependencies"}) {
    if (!doc.contains(section) || !doc[section].is_object()) continue;
    for (const auto& [name, value] : doc[section].items()) {
      DependencyRef dep;
      dep.ecosystem = "node-npm";
      dep.name = name;
      dep.constraint = value.is_string() ? value.get<std::string>() : "";
      dep.origin = DepOrigin::PackageManifest;
      dep.span = span_for(file.path, 1);
      deps->push_back(std::move(dep));
    }
  }
}

}  // namespace

const char* to_string(DepOrigin origin) {
  switch (origin) {
    case DepOrigin::Pep723Block: return "inline script metadata";
    case DepOrigin::RequirementsFile: return "requirements file";
    case DepOrigin::PackageManifest: return "package.json";
    case DepOrigin::InlineInstall: return "install command in script";
    case DepOrigin::BodyCommand: return "install command in instructions";
  }
  return "?";
}

const char* to_string(PinStatus s) {
  switch (s) {
    case PinStatus::Pinned: return "pinned";
    case PinStatus::Unpinned: return "unpinned";
    case PinStatus::Floating: return "floating";
  }
  return "?";
}

ExtractionResult extract_dependencies(const SkillPackage& pkg) {
  ExtractionResult result;

  for (const ScriptFile& script : pkg.scripts) {
    if (script.ecosystem == "python") {
      extract_pep723(script, &result.deps, &result.diagnostics);
    }
    extract_install_commands(script.path, script.bytes,
                             DepOrigin::InlineInstall, &result.deps);
  }

  extract_install_commands("SKILL.md", pkg.body, DepOrigin::BodyCommand,
                           &result.deps, pkg.body_loc.first_line);

  for (const FileEntry& file : pkg.supplementary) {
    std::string base = basename_of(file.path);
    if (is_requirements_file(file.path)) {
      extract_requirements(file, &result.deps);
    } else if (base == "package.json") {
      extract_package_json(file, &result.deps, &result.diagnostics);
    }
    if (base == "uv.lock" || base == "package-lock.json" ||
        base == "poetry.lock" || base == "yarn.lock") {
      result.lockfile_present = true;
    }
  }

  std::sort(result.deps.begin(), result.deps.end(),
            [](const DependencyRef& a, const DependencyRef& b) {
              return std::tie(a.span.file, a.span.line_start, a.name) <
                     std::tie(b.span.file, b.span.line_start, b.name);
            });
  return result;
}

PinStatus check_pinning(const DependencyRef& dep) {
  if (dep.ecosystem == "shell-tool") return PinStatus::Floating;

  std::string c = dep.constraint;
  c.erase(std::remove_if(c.begin(), c.end(),
                         [](unsigned char ch) { return std::isspace(ch); }),
          c.end());

  if (c.empty() || c == "*" || c == "latest" || c == "x") {
    return PinStatus::Floating;
  }

  if (dep.ecosystem == "python-pypi") {
    // Exactly one clause, operator ==/===, no wildcard version.
    if (c.find(',') != std::string::npos) return PinStatus::Unpinned;
    static const std::regex kExact(R"(^===?([A-Za-z0-9.!+]+)$)");
    std::smatch m;
    if (std::regex_match(c, m, kExact) &&
        m[1].str().find('*') == std::string::npos) {
      return PinStatus::Pinned;
    }
    return PinStatus::Unpinned;
  }

  if (dep.ecosystem == "node-npm") {
    static const std::regex kExact(
        R"(^\d+\.\d+\.\d+(-[0-9A-Za-z.-]+)?(\+[0-9A-Za-z.-]+)?$)");
    return std::regex_match(c, kExact) ? PinStatus::Pinned
                                       : PinStatus::Unpinned;
  }

  return PinStatus::Unpinned;
}

std::vector<Finding> pinning_findings(const ExtractionResult& extraction,
                                      const PolicyConfig& policy) {
  std::vector<Finding> findings;
  for (const DependencyRef& dep : extraction.deps) {
    PinStatus status = check_pinning(dep);
    if (status == PinStatus::Pinned) continue;

    // Auto-resolved origins execute without any human in the loop.
    bool auto_resolved = dep.origin == DepOrigin::Pep723Block ||
                         dep.origin == DepOrigin::InlineInstall ||
                         dep.origin == DepOrigin::BodyCommand;
    Severity sev = auto_resolved ? Severity::High : Severity::Medium;
    if (extraction.lockfile_present) {
      sev = sev == Severity::High ? Severity::Medium : Severity::Low;
    }

    Finding f;
    f.detector = DetectorId::T4_2;
    f.severity = policy.apply_override(DetectorId::T4_2, sev);
    f.confidence = Confidence::Confirmed;
    f.phase = detector_phase(DetectorId::T4_2);
    f.span = dep.span;
    f.evidence = dep.constraint.empty()
                     ? dep.name
                     : dep.ecosystem == "node-npm"
                           ? dep.name + "@" + dep.constraint
                           : dep.name + dep.constraint;
    f.message = "dependency " + dep.name + " is " + to_string(status) + " (" +
                to_string(dep.origin) +
                (extraction.lockfile_present ? ", lockfile shipped)" : ")");
    f.rule = "dep-unpinned";
    findings.push_back(std::move(f));
  }
  sort_findings(findings);
  return findings;
}

}  // namespace skillguard::deps
