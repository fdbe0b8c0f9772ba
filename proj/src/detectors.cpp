#include "skillguard/detectors.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillguard/deps.hpp"

namespace skillguard::detect {

namespace {

using ordered_json = nlohmann::ordered_json;

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

bool ends_with_ci(std::string_view s, std::string_view suffix) {
  if (s.size() < suffix.size()) return false;
  return to_lower(s.substr(s.size() - suffix.size())) == to_lower(suffix);
}

std::string basename_of(std::string_view path) {
  auto pos = path.find_last_of('/');
  return std::string(pos == std::string_view::npos ? path
                                                   : path.substr(pos + 1));
}

bool is_markdown(std::string_view path) {
  return ends_with_ci(path, ".md") || ends_with_ci(path, ".markdown");
}

/// Scan surfaces of a package: instruction body, scripts, supplementary
/// markdown. Spans inside the body are mapped back into SKILL.md.
std::vector<TextUnit> package_units(const SkillPackage& pkg) {
  std::vector<TextUnit> units;
  TextUnit body;
  body.file = "SKILL.md";
  body.base_line = pkg.body_loc.first_line;
  body.base_offset = pkg.body_loc.byte_offset;
  body.content = pkg.body;
  body.kind = kTargetBody;
  units.push_back(body);
  for (const ScriptFile& script : pkg.scripts) {
    TextUnit u;
    u.file = script.path;
    u.content = script.bytes;
    u.kind = kTargetScripts;
    units.push_back(u);
  }
  for (const FileEntry& entry : pkg.supplementary) {
    if (!is_markdown(entry.path)) continue;
    TextUnit u;
    u.file = entry.path;
    u.content = entry.bytes;
    u.kind = kTargetSuppMarkdown;
    units.push_back(u);
  }
  return units;
}

/// First frontmatter line starting with `key:`. Falls back to the top of
/// the file so package-level findings always have an anchor.
SourceSpan frontmatter_key_span(const SkillPackage& pkg, std::string_view key) {
  SourceSpan span;
  span.file = "SKILL.md";
  std::string prefix = std::string(key) + ":";
  for (const LineRef& line : split_lines(pkg.skill_md)) {
    if (line.begin >= pkg.body_loc.byte_offset) break;
    if (line.text.rfind(prefix, 0) == 0) {
      span.line_start = span.line_end = line.number;
      span.byte_start = line.begin;
      span.byte_end = line.end;
      return span;
    }
  }
  span.byte_end = std::min<std::size_t>(pkg.skill_md.size(),
                                        pkg.skill_md.find('\n'));
  return span;
}

std::string span_text(const SkillPackage& pkg, const SourceSpan& span) {
  if (span.byte_end <= span.byte_start ||
      span.byte_end > pkg.skill_md.size())
    return {};
  return std::string(trim(std::string_view(pkg.skill_md)
                              .substr(span.byte_start,
                                      span.byte_end - span.byte_start)));
}

/// Vocabulary tying description verbs to the action classes they consent
/// to. Matching is token-based with plain inflection suffixes, so "reads"
/// declares file-read but "ready" does not.
const std::vector<std::pair<caps::ActionClass, std::vector<std::string>>>&
class_vocabulary() {
  using caps::ActionClass;
  static const std::vector<std::pair<ActionClass, std::vector<std::string>>>
      vocab = {
          {ActionClass::FileRead,
           {"read", "extract", "load", "open", "parse", "scan", "process",
            "convert", "bundle", "merge"}},
          {ActionClass::FileWrite,
           {"write", "save", "store", "create", "update", "output",
            "generate", "export", "edit", "add"}},
          {ActionClass::NetworkFetch,
           {"fetch", "download", "retrieve", "query", "request", "pull",
            "lookup"}},
          {ActionClass::NetworkSend,
           {"send", "upload", "sync", "post", "submit", "share", "publish",
            "report"}},
          {ActionClass::Subprocess,
           {"run", "execute", "launch", "invoke", "call", "command"}},
          {ActionClass::ConfigWrite,
           {"configure", "config", "setting", "settings", "setup", "set",
            "install", "enable", "hook", "hooks"}},
      };
  return vocab;
}

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      current += char(std::tolower(static_cast<unsigned char>(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

bool token_declares(const std::string& token, const std::string& keyword) {
  if (token == keyword) return true;
  if (token.size() <= keyword.size() ||
      token.compare(0, keyword.size(), keyword) != 0)
    return false;
  std::string_view suffix = std::string_view(token).substr(keyword.size());
  return suffix == "s" || suffix == "es" || suffix == "d" || suffix == "ed" ||
         suffix == "ing";
}

// "e"-final verbs drop the e before "ing" ("save" -> "saving").

bool stem_declares(const std::vector<std::string>& tokens,
                   const std::string& keyword) {
  std::string stem = keyword;
  if (!stem.empty() && stem.back() == 'e') stem.pop_back();
  for (const std::string& token : tokens) {
    if (token_declares(token, keyword)) return true;
    if (stem != keyword && token == stem + "ing") return true;
  }
  return false;
}

std::set<caps::ActionClass> declared_classes(
    const SkillPackage& pkg,
    const std::optional<caps::CapabilityManifest>& manifest) {
  std::set<caps::ActionClass> declared;
  auto tokens = word_tokens(pkg.metadata.description);
  for (const auto& [cls, keywords] : class_vocabulary()) {
    for (const std::string& keyword : keywords) {
      if (stem_declares(tokens, keyword)) {
        declared.insert(cls);
        break;
      }
    }
  }
  if (manifest) {
    using caps::ActionClass;
    if (!manifest->read_globs.empty()) declared.insert(ActionClass::FileRead);
    if (!manifest->write_globs.empty())
      declared.insert(ActionClass::FileWrite);
    if (!manifest->network_domains.empty()) {
      declared.insert(ActionClass::NetworkFetch);
      declared.insert(ActionClass::NetworkSend);
    }
    if (manifest->subprocess) declared.insert(ActionClass::Subprocess);
  }
  return declared;
}

std::optional<caps::ActionClass> class_of_row(const PatternRule& rule) {
  using caps::ActionClass;
  static const std::map<std::string, ActionClass> rows = {
      {"class-file-read", ActionClass::FileRead},
      {"class-file-write", ActionClass::FileWrite},
      {"class-network-fetch", ActionClass::NetworkFetch},
      {"class-network-send", ActionClass::NetworkSend},
      {"class-subprocess", ActionClass::Subprocess},
      {"class-config-write", ActionClass::ConfigWrite},
  };
  auto it = rows.find(rule.rule);
  if (it == rows.end()) return std::nullopt;
  return it->second;
}

std::string line_text_of(std::string_view content, int line_number) {
  for (const LineRef& line : split_lines(content)) {
    if (line.number == line_number) return std::string(line.text);
  }
  return {};
}

std::set<caps::ActionClass> observed_classes(const RuleSet& rules,
                                             const SkillPackage& pkg,
                                             const std::vector<TextUnit>& units) {
  // A script invoking a bundled sibling script is orchestration the
  // package already carries, not a new subprocess capability.
  std::vector<std::string> bundled;
  for (const ScriptFile& script : pkg.scripts)
    bundled.push_back(basename_of(script.path));

  std::set<caps::ActionClass> observed;
  const auto& all = rules.rules();
  for (std::size_t idx = 0; idx < all.size(); ++idx) {
    auto cls = class_of_row(all[idx]);
    if (!cls || observed.count(*cls)) continue;
    for (const TextUnit& unit : units) {
      bool found = false;
      for (int hit : rules.hit_lines(idx, unit)) {
        if (*cls == caps::ActionClass::Subprocess) {
          std::string text = line_text_of(unit.content, hit);
          bool exempt = std::any_of(
              bundled.begin(), bundled.end(), [&](const std::string& name) {
                return !name.empty() &&
                       text.find(name) != std::string::npos;
              });
          if (exempt) continue;
        }
        found = true;
        break;
      }
      if (found) {
        observed.insert(*cls);
        break;
      }
    }
  }
  return observed;
}

std::vector<Finding> consent_gap_with(const RuleSet& rules,
                                      const SkillPackage& pkg,
                                      const std::optional<caps::CapabilityManifest>& manifest,
                                      const PolicyConfig& policy) {
  std::vector<Finding> findings;
  if (!policy.detector_enabled(DetectorId::T2_1)) return findings;

  auto units = package_units(pkg);
  auto declared = declared_classes(pkg, manifest);
  auto observed = observed_classes(rules, pkg, units);

  std::vector<caps::ActionClass> undeclared;
  for (caps::ActionClass cls : observed) {
    if (!declared.count(cls)) undeclared.push_back(cls);
  }
  if (undeclared.empty()) return findings;

  std::string listed;
  for (caps::ActionClass cls : undeclared) {
    if (!listed.empty()) listed += ", ";
    listed += caps::to_string(cls);
  }

  Finding f;
  f.detector = DetectorId::T2_1;
  f.severity = policy.apply_override(
      DetectorId::T2_1,
      undeclared.size() >= 2 ? Severity::High : Severity::Medium);
  f.confidence = Confidence::Heuristic;
  f.phase = detector_phase(DetectorId::T2_1);
  f.span = description_span(pkg);
  f.evidence = span_text(pkg, f.span);
  f.message = "observed behavior the description does not declare: " + listed;
  f.rule = "t2.1-consent-gap";
  findings.push_back(std::move(f));
  return findings;
}

Finding nested_skill_finding(const SkillPackage& pkg,
                             const PolicyConfig& policy,
                             const std::string& path) {
  Finding f;
  f.detector = DetectorId::T3_1;
  f.severity = policy.apply_override(DetectorId::T3_1, Severity::Info);
  f.confidence = Confidence::Confirmed;
  f.phase = detector_phase(DetectorId::T3_1);
  f.span.file = path;
  f.evidence = path;
  f.message =
      "nested SKILL.md carries instructions outside the consented entry "
      "point";
  f.rule = "t3.1-nested-skill";
  return f;
}

Finding manifest_malformed_finding(const SkillPackage& pkg,
                                   const PolicyConfig& policy,
                                   const caps::ManifestResult& result) {
  Finding f;
  f.detector = DetectorId::T2_1;
  f.severity = policy.apply_override(DetectorId::T2_1, Severity::Medium);
  f.confidence = Confidence::Confirmed;
  f.phase = detector_phase(DetectorId::T2_1);
  f.span = frontmatter_key_span(pkg, "capabilities");
  f.evidence = span_text(pkg, f.span);
  f.message = result.diagnostics.empty()
                  ? std::string("capability manifest is malformed")
                  : "capability manifest is malformed: " +
                        result.diagnostics.front().message;
  f.rule = "t2.1-manifest-malformed";
  return f;
}

std::vector<Finding> filter_detectors(std::vector<Finding> findings,
                                      std::initializer_list<DetectorId> keep) {
  std::set<DetectorId> wanted(keep);
  findings.erase(std::remove_if(findings.begin(), findings.end(),
                                [&](const Finding& f) {
                                  return wanted.count(f.detector) == 0;
                                }),
                 findings.end());
  return findings;
}

}  // namespace

SourceSpan name_span(const SkillPackage& pkg) {
  return frontmatter_key_span(pkg, "name");
}

SourceSpan description_span(const SkillPackage& pkg) {
  return frontmatter_key_span(pkg, "description");
}

std::vector<Finding> detect_consent_gap(
    const SkillPackage& pkg,
    const std::optional<caps::CapabilityManifest>& manifest,
    const PolicyConfig& policy) {
  RuleSet rules(builtin_rules(policy));
  return consent_gap_with(rules, pkg, manifest, policy);
}

Engine::Engine(const PolicyConfig& policy)
    : policy_(policy), rules_(builtin_rules(policy)) {}

ScanReport Engine::scan(const SkillPackage& pkg,
                        const ScanInputs& inputs) const {
  ScanReport report;
  report.package_name = pkg.metadata.name;
  report.package_digest = pkg.digest.combined;

  auto units = package_units(pkg);
  report.findings = rules_.apply(units, policy_);

  if (policy_.detector_enabled(DetectorId::T3_1)) {
    for (const FileEntry& entry : pkg.supplementary) {
      if (entry.path != "SKILL.md" && basename_of(entry.path) == "SKILL.md")
        report.findings.push_back(
            nested_skill_finding(pkg, policy_, entry.path));
    }
  }

  auto manifest_result = caps::parse_manifest(pkg.metadata);
  if (policy_.detector_enabled(DetectorId::T2_1)) {
    if (manifest_result.clause_present && !manifest_result.manifest)
      report.findings.push_back(
          manifest_malformed_finding(pkg, policy_, manifest_result));
    auto gap =
        consent_gap_with(rules_, pkg, manifest_result.manifest, policy_);
    report.findings.insert(report.findings.end(), gap.begin(), gap.end());
    if (manifest_result.manifest) {
      auto scope = caps::check_scope(*manifest_result.manifest, pkg, policy_);
      report.findings.insert(report.findings.end(), scope.begin(),
                             scope.end());
    }
  }

  if (policy_.detector_enabled(DetectorId::T2_2) && inputs.lockfile) {
    auto status = trust::verify(pkg, *inputs.lockfile, policy_);
    if (status.kind == trust::TrustStatus::Kind::Modified && status.diff) {
      Finding f = trust::modified_finding(pkg, *status.diff);
      f.severity = policy_.apply_override(DetectorId::T2_2, f.severity);
      report.findings.push_back(std::move(f));
    }
  }

  if (policy_.detector_enabled(DetectorId::T1_1) && inputs.index) {
    for (auto& match :
         squat::check_name(pkg.metadata, inputs.publisher, *inputs.index,
                           policy_, name_span(pkg)))
      report.findings.push_back(std::move(match.finding));
    auto shadows =
        squat::check_shadowing(pkg.metadata, inputs.publisher, *inputs.index,
                               policy_, description_span(pkg));
    report.findings.insert(report.findings.end(), shadows.begin(),
                           shadows.end());
  }

  auto extraction = deps::extract_dependencies(pkg);
  if (policy_.detector_enabled(DetectorId::T4_2)) {
    auto pins = deps::pinning_findings(extraction, policy_);
    report.findings.insert(report.findings.end(), pins.begin(), pins.end());
  }

  if (policy_.detector_enabled(DetectorId::T1_4) && inputs.registry) {
    std::optional<std::int64_t> approved_at;
    if (inputs.lockfile) {
      if (const trust::TrustRecord* rec =
              inputs.lockfile->find(pkg.metadata.name))
        approved_at = rec->approved_at;
    }
    auto verdicts = inputs.registry->verify_all(extraction.deps);
    for (std::size_t i = 0; i < extraction.deps.size(); ++i) {
      if (auto f = registry::existence_finding(extraction.deps[i],
                                               verdicts[i], approved_at)) {
        f->severity = policy_.apply_override(DetectorId::T1_4, f->severity);
        report.findings.push_back(std::move(*f));
      }
    }
  }

  for (DetectorId id : kAllDetectors) {
    DetectorRun run;
    run.id = id;
    if (!policy_.detector_enabled(id)) {
      run.skip_reason = "disabled by policy";
    } else if (id == DetectorId::T1_1 && !inputs.index) {
      run.skip_reason = "no skill index provided";
    } else if (id == DetectorId::T1_4 && !inputs.registry) {
      run.skip_reason = "registry lookups disabled";
    } else if (id == DetectorId::T2_2 && !inputs.lockfile) {
      run.skip_reason = "no trust lockfile provided";
    } else {
      run.ran = true;
    }
    report.detectors.push_back(run);
  }

  sort_findings(report.findings);
  return report;
}

ScanReport scan_package(const SkillPackage& pkg, const PolicyConfig& policy,
                        const ScanInputs& inputs) {
  return Engine(policy).scan(pkg, inputs);
}

std::vector<Finding> detect_injection(const SkillPackage& pkg,
                                      const PolicyConfig& policy) {
  return filter_detectors(scan_package(pkg, policy).findings,
                          {DetectorId::T3_1, DetectorId::T3_2});
}

std::vector<Finding> detect_execution_risks(const SkillPackage& pkg,
                                            const PolicyConfig& policy) {
  return filter_detectors(
      scan_package(pkg, policy).findings,
      {DetectorId::T4_1, DetectorId::T4_2, DetectorId::T4_3});
}

std::vector<Finding> detect_exfiltration(const SkillPackage& pkg,
                                         const PolicyConfig& policy) {
  return filter_detectors(
      scan_package(pkg, policy).findings,
      {DetectorId::T5_1, DetectorId::T5_2, DetectorId::T5_3});
}

std::vector<Finding> detect_persistence(const SkillPackage& pkg,
                                        const PolicyConfig& policy) {
  return filter_detectors(scan_package(pkg, policy).findings,
                          {DetectorId::T6_1, DetectorId::T6_2});
}

std::vector<Finding> detect_propagation(const SkillPackage& pkg,
                                        const PolicyConfig& policy) {
  return filter_detectors(scan_package(pkg, policy).findings,
                          {DetectorId::T7_1});
}

namespace {

ordered_json structural_row(const char* rule, DetectorId id,
                            const char* severity, const char* confidence,
                            const char* doc) {
  ordered_json row;
  row["rule"] = rule;
  row["detector"] = dotted_id(id);
  row["phase"] = to_string(detector_phase(id));
  row["layer"] = detector_layer(id);
  row["kind"] = "structural";
  row["severity"] = severity;
  row["confidence"] = confidence;
  row["doc"] = doc;
  return row;
}

ordered_json monitor_row(const char* rule, DetectorId id,
                         const char* severity, const char* doc) {
  ordered_json row = structural_row(rule, id, severity, "Confirmed", doc);
  row["kind"] = "monitor";
  return row;
}

}  // namespace

std::string rule_catalog_json(const PolicyConfig& policy) {
  ordered_json catalog;
  catalog["schema"] = 1;

  ordered_json rows = ordered_json::array();
  for (const PatternRule& rule : builtin_rules(policy)) {
    ordered_json row;
    row["rule"] = rule.rule;
    row["detector"] = dotted_id(rule.id);
    row["phase"] = to_string(detector_phase(rule.id));
    row["layer"] = detector_layer(rule.id);
    row["kind"] = rule.emits ? "pattern" : "classifier";
    row["severity"] = to_string(rule.severity);
    row["confidence"] = to_string(rule.confidence);
    row["targets"] = target_names(rule.targets);
    row["pattern"] = rule.pattern;
    row["gates"] = rule.gates;
    if (rule.window > 0) {
      row["window"] = rule.window;
      row["directional"] = rule.directional;
      row["secondary"] = rule.secondary;
    }
    if (rule.co) {
      ordered_json co;
      co["pattern"] = rule.co->pattern;
      co["required"] = rule.co->required;
      if (rule.co->escalate_to)
        co["escalate_to"] = to_string(*rule.co->escalate_to);
      row["co"] = co;
    }
    row["doc"] = rule.doc;
    rows.push_back(std::move(row));
  }

  rows.push_back(structural_row(
      "squat-name", DetectorId::T1_1, "High", "Likely",
      "skill name is within edit distance of a more popular entry from a "
      "different publisher; exact normalized collision is Critical"));
  rows.push_back(structural_row(
      "squat-shadow", DetectorId::T1_1, "Info", "Heuristic",
      "description shadows the wording of a more popular entry"));
  rows.push_back(structural_row(
      "dep-missing", DetectorId::T1_4, "High", "Confirmed",
      "declared dependency does not exist in its package registry"));
  rows.push_back(structural_row(
      "dep-unverified", DetectorId::T1_4, "Info", "Heuristic",
      "registry lookup could not confirm or deny the dependency"));
  rows.push_back(structural_row(
      "dep-claim-window", DetectorId::T1_4, "Info", "Likely",
      "dependency was first published after the skill was approved"));
  rows.push_back(structural_row(
      "t2.1-consent-gap", DetectorId::T2_1, "Medium", "Heuristic",
      "scripts or instructions exercise action classes the description "
      "never declares; two or more raise to High"));
  rows.push_back(structural_row(
      "t2.1-manifest-malformed", DetectorId::T2_1, "Medium", "Confirmed",
      "capabilities manifest failed to parse, so the declared scope is "
      "unknown"));
  rows.push_back(structural_row(
      "cap-net-undeclared", DetectorId::T2_1, "High", "Likely",
      "URL host outside the manifest's network allowance"));
  rows.push_back(structural_row(
      "cap-path-undeclared", DetectorId::T2_1, "Medium", "Heuristic",
      "path literal outside the manifest's read and write globs"));
  rows.push_back(structural_row(
      "cap-exec-undeclared", DetectorId::T2_1, "High", "Likely",
      "subprocess use without exec=yes in the manifest"));
  rows.push_back(structural_row(
      "trust-modified", DetectorId::T2_2, "High", "Confirmed",
      "package content changed since approval; executable changes are "
      "Critical"));
  rows.push_back(structural_row(
      "t3.1-nested-skill", DetectorId::T3_1, "Info", "Confirmed",
      "nested SKILL.md carries instructions outside the consented entry "
      "point"));
  rows.push_back(structural_row(
      "dep-unpinned", DetectorId::T4_2, "High", "Confirmed",
      "dependency without an exact version pin; auto-resolved origins are "
      "High, declaration files Medium, one level lower with a lockfile"));

  rows.push_back(monitor_row("monitor-memory-added", DetectorId::T6_1, "High",
                             "watched memory file appeared"));
  rows.push_back(monitor_row("monitor-memory-changed", DetectorId::T6_1,
                             "High", "watched memory file content changed"));
  rows.push_back(monitor_row("monitor-memory-removed", DetectorId::T6_1,
                             "High", "watched memory file disappeared"));
  rows.push_back(monitor_row("monitor-config-added", DetectorId::T6_2, "High",
                             "watched config file appeared"));
  rows.push_back(monitor_row("monitor-config-changed", DetectorId::T6_2,
                             "High", "watched config file changed"));
  rows.push_back(monitor_row("monitor-config-removed", DetectorId::T6_2,
                             "High", "watched config file disappeared"));
  rows.push_back(monitor_row("monitor-hook-added", DetectorId::T6_2,
                             "Critical", "hook entry appeared in a config"));
  rows.push_back(monitor_row("monitor-hook-changed", DetectorId::T6_2,
                             "Critical", "hook entry changed in a config"));
  rows.push_back(monitor_row("monitor-sensitive-added", DetectorId::T6_2,
                             "Critical", "sensitive config key appeared"));
  rows.push_back(monitor_row("monitor-sensitive-changed", DetectorId::T6_2,
                             "Critical", "sensitive config key changed"));
  rows.push_back(monitor_row("monitor-sensitive-removed", DetectorId::T6_2,
                             "High", "sensitive config key disappeared"));
  rows.push_back(monitor_row("monitor-auto-approve", DetectorId::T6_2, "High",
                             "auto-approve flag flipped on"));

  catalog["rules"] = std::move(rows);
  return catalog.dump(2) + "\n";
}

}  // namespace skillguard::detect
