// skillguard: scan Agent Skill packages for risky instructions and scripts,
// manage a trust lockfile, and watch agent config for tampering.

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "skillguard/detectors.hpp"
#include "skillguard/monitor.hpp"
#include "skillguard/report.hpp"
#include "skillguard/squat.hpp"
#include "skillguard/trust.hpp"

namespace fs = std::filesystem;
using namespace skillguard;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitFindings = 1;
constexpr int kExitError = 2;

struct Options {
  std::string policy_path;  // --policy / SKILLGUARD_POLICY
  std::string format = "text";
  bool offline = false;
  std::string lockfile_path;
  std::string index_path;
  std::string registry_fixture;
  std::string publisher;
  std::string baseline_path;
  std::string note;
  std::int64_t now = 0;  // 0: use wall clock
  std::string dir;
};

std::int64_t effective_now(const Options& opt) {
  return opt.now != 0 ? opt.now
                      : static_cast<std::int64_t>(std::time(nullptr));
}

void print_diagnostics(const std::vector<ParseDiagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    std::cerr << "skillguard: "
              << (d.severity == DiagSeverity::Error ? "error: " : "warning: ")
              << d.message << "\n";
  }
}

/// --policy beats SKILLGUARD_POLICY (CLI11 wires the env var); no file
/// means built-in defaults. --offline and --registry-fixture are applied
/// on top.
std::optional<PolicyConfig> resolve_policy(const Options& opt) {
  PolicyConfig policy = PolicyConfig::defaults();
  if (!opt.policy_path.empty()) {
    std::ifstream in(opt.policy_path, std::ios::binary);
    if (!in) {
      std::cerr << "skillguard: error: cannot read policy file '"
                << opt.policy_path << "'\n";
      return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    auto parsed = parse_policy(buf.str());
    if (!parsed.config) {
      for (const auto& e : parsed.errors)
        std::cerr << "skillguard: error: policy: " << e << "\n";
      return std::nullopt;
    }
    policy = *parsed.config;
  }
  if (opt.offline) policy.offline = true;
  if (!opt.registry_fixture.empty()) {
    policy.registry.mode = RegistrySettings::Mode::Fixture;
    policy.registry.fixture_path = opt.registry_fixture;
  }
  return policy;
}

std::optional<SkillPackage> load_or_report(const std::string& dir) {
  auto result = load_package(dir);
  print_diagnostics(result.diagnostics);
  if (!result.package || has_error(result.diagnostics)) return std::nullopt;
  return result.package;
}

report::Format output_format(const Options& opt) {
  auto f = report::format_from_string(opt.format);
  return f ? *f : report::Format::Text;
}

int emit(const ScanReport& rep, const Options& opt,
         const PolicyConfig& policy) {
  std::cout << report::render_report(rep, output_format(opt)).content;
  return report::exit_code_for(rep, policy.fail_threshold);
}

/// Report skeleton for single-purpose subcommands: the selected detectors
/// are marked ran, everything else is recorded as not selected so the
/// document stays self-describing.
ScanReport focused_report(const std::string& name, const std::string& digest,
                          std::vector<Finding> findings,
                          std::initializer_list<DetectorId> selected) {
  ScanReport rep;
  rep.package_name = name;
  rep.package_digest = digest;
  sort_findings(findings);
  rep.findings = std::move(findings);
  for (DetectorId id : kAllDetectors) {
    bool on = false;
    for (DetectorId s : selected) on = on || s == id;
    rep.detectors.push_back(
        {id, on, on ? std::string() : std::string("not selected")});
  }
  return rep;
}

int run_scan(const Options& opt) {
  auto policy = resolve_policy(opt);
  if (!policy) return kExitError;
  auto pkg = load_or_report(opt.dir);
  if (!pkg) return kExitError;

  detect::ScanInputs inputs;
  inputs.publisher = opt.publisher;

  squat::IndexParseResult index;
  if (!opt.index_path.empty()) {
    index = squat::load_index(opt.index_path);
    for (const auto& e : index.errors)
      std::cerr << "skillguard: warning: index: " << e << "\n";
    if (index.entries.empty() && !index.errors.empty()) return kExitError;
    inputs.index = &index.entries;
  }

  trust::TrustLockfile lockfile;
  if (!opt.lockfile_path.empty()) {
    auto loaded = trust::load_lockfile(opt.lockfile_path);
    if (!loaded.lockfile) {
      for (const auto& e : loaded.errors)
        std::cerr << "skillguard: error: lockfile: " << e << "\n";
      return kExitError;
    }
    lockfile = *loaded.lockfile;
    inputs.lockfile = &lockfile;
  }

  std::optional<registry::RegistryClient> client;
  if (!policy->offline &&
      policy->registry.mode != RegistrySettings::Mode::Off) {
    std::string error;
    auto source = registry::RegistrySource::from_settings(policy->registry,
                                                          &error);
    if (!error.empty()) {
      std::cerr << "skillguard: error: registry: " << error << "\n";
      return kExitError;
    }
    client.emplace(std::move(source));
    inputs.registry = &*client;
  }

  return emit(detect::Engine(*policy).scan(*pkg, inputs), opt, *policy);
}

int run_trust_approve(const Options& opt) {
  auto policy = resolve_policy(opt);
  if (!policy) return kExitError;
  auto pkg = load_or_report(opt.dir);
  if (!pkg) return kExitError;

  auto manifest = caps::parse_manifest(pkg->metadata);
  if (manifest.clause_present && !manifest.manifest) {
    print_diagnostics(manifest.diagnostics);
    std::cerr << "skillguard: error: cannot approve a package whose "
                 "capability manifest does not parse\n";
    return kExitError;
  }

  fs::path path = opt.lockfile_path.empty() ? trust::kDefaultLockfileName
                                            : fs::path(opt.lockfile_path);
  trust::TrustLockfile lockfile;
  if (fs::exists(path)) {
    auto loaded = trust::load_lockfile(path);
    if (!loaded.lockfile) {
      for (const auto& e : loaded.errors)
        std::cerr << "skillguard: error: lockfile: " << e << "\n";
      return kExitError;
    }
    lockfile = *loaded.lockfile;
  }

  lockfile = trust::approve(*pkg, manifest.manifest, opt.note,
                            std::move(lockfile), effective_now(opt));
  std::string error;
  if (!trust::save_lockfile(path, lockfile, &error)) {
    std::cerr << "skillguard: error: " << error << "\n";
    return kExitError;
  }

  if (output_format(opt) == report::Format::Json) {
    nlohmann::json doc;
    doc["approved"] = pkg->metadata.name;
    doc["digest"] = pkg->digest.combined;
    doc["lockfile"] = path.string();
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << "approved " << pkg->metadata.name << " ("
              << pkg->digest.combined.substr(0, 12) << ") -> " << path.string()
              << "\n";
  }
  return kExitClean;
}

int run_trust_verify(const Options& opt) {
  auto policy = resolve_policy(opt);
  if (!policy) return kExitError;
  fs::path path = opt.lockfile_path.empty() ? trust::kDefaultLockfileName
                                            : fs::path(opt.lockfile_path);
  auto loaded = trust::load_lockfile(path);
  if (!loaded.lockfile) {
    for (const auto& e : loaded.errors)
      std::cerr << "skillguard: error: lockfile: " << e << "\n";
    return kExitError;
  }

  trust::TrustStatus status = trust::verify_dir(opt.dir, *loaded.lockfile,
                                                *policy);
  const char* kind = status.kind == trust::TrustStatus::Kind::Trusted
                         ? "trusted"
                         : status.kind == trust::TrustStatus::Kind::Modified
                               ? "modified"
                               : "unknown";
  trust::ConsentDecision consent;
  if (status.diff) consent = trust::consent_delta(*status.diff, *policy);

  if (output_format(opt) == report::Format::Json) {
    nlohmann::json doc;
    doc["status"] = kind;
    doc["name"] = status.record_name;
    if (status.diff) {
      doc["diff"] = {{"added", status.diff->added},
                     {"removed", status.diff->removed},
                     {"modified", status.diff->modified},
                     {"body_change_ratio", status.diff->body_change_ratio},
                     {"script_changed", status.diff->script_changed}};
      doc["reapproval_required"] = !consent.auto_accept;
      doc["reasons"] = consent.reasons;
    }
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << kind << " " << status.record_name << "\n";
    if (status.diff) {
      for (const auto& p : status.diff->added)
        std::cout << "  added: " << p << "\n";
      for (const auto& p : status.diff->removed)
        std::cout << "  removed: " << p << "\n";
      for (const auto& p : status.diff->modified)
        std::cout << "  modified: " << p << "\n";
      for (const auto& r : consent.reasons) std::cout << "  " << r << "\n";
    }
  }
  return status.kind == trust::TrustStatus::Kind::Trusted ? kExitClean
                                                          : kExitFindings;
}

int run_monitor_baseline(const Options& opt) {
  auto policy = resolve_policy(opt);
  if (!policy) return kExitError;
  if (!fs::is_directory(opt.dir)) {
    std::cerr << "skillguard: error: '" << opt.dir << "' is not a directory\n";
    return kExitError;
  }
  auto result = monitor::take_baseline(opt.dir, policy->watchlist,
                                       effective_now(opt));
  print_diagnostics(result.diagnostics);

  fs::path path = opt.baseline_path.empty()
                      ? fs::path(opt.dir) / monitor::kDefaultBaselineName
                      : fs::path(opt.baseline_path);
  std::string error;
  if (!monitor::save_snapshot(path, result.snapshot, &error)) {
    std::cerr << "skillguard: error: " << error << "\n";
    return kExitError;
  }

  if (output_format(opt) == report::Format::Json) {
    nlohmann::json doc;
    doc["baseline"] = path.string();
    doc["entries"] = result.snapshot.entries.size();
    doc["configs"] = result.snapshot.configs.size();
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << "baseline written: " << path.string() << " ("
              << result.snapshot.entries.size() << " files, "
              << result.snapshot.configs.size() << " configs)\n";
  }
  return kExitClean;
}

int run_monitor_check(const Options& opt) {
  auto policy = resolve_policy(opt);
  if (!policy) return kExitError;
  fs::path path = opt.baseline_path.empty()
                      ? fs::path(opt.dir) / monitor::kDefaultBaselineName
                      : fs::path(opt.baseline_path);
  auto loaded = monitor::load_snapshot(path);
  if (!loaded.snapshot) {
    for (const auto& e : loaded.errors)
      std::cerr << "skillguard: error: baseline: " << e << "\n";
    return kExitError;
  }

  std::vector<Finding> findings =
      monitor::check(opt.dir, *loaded.snapshot, policy->watchlist);
  std::string name = fs::path(opt.dir).filename().string();
  if (name.empty()) name = opt.dir;
  ScanReport rep = focused_report(name, "", std::move(findings),
                                  {DetectorId::T6_1, DetectorId::T6_2});
  return emit(rep, opt, *policy);
}

int run_registry_check(const Options& opt) {
  auto policy = resolve_policy(opt);
  if (!policy) return kExitError;
  if (policy->offline) {
    std::cerr << "skillguard: error: registry check needs lookups but "
                 "--offline was given\n";
    return kExitError;
  }
  if (policy->registry.mode == RegistrySettings::Mode::Off) {
    std::cerr << "skillguard: error: no registry source configured; pass "
                 "--registry-fixture or set one in the policy\n";
    return kExitError;
  }
  auto pkg = load_or_report(opt.dir);
  if (!pkg) return kExitError;

  std::string error;
  auto source = registry::RegistrySource::from_settings(policy->registry,
                                                        &error);
  if (!error.empty()) {
    std::cerr << "skillguard: error: registry: " << error << "\n";
    return kExitError;
  }
  registry::RegistryClient client(std::move(source));

  std::optional<std::int64_t> approved_at;
  if (!opt.lockfile_path.empty()) {
    auto loaded = trust::load_lockfile(opt.lockfile_path);
    if (!loaded.lockfile) {
      for (const auto& e : loaded.errors)
        std::cerr << "skillguard: error: lockfile: " << e << "\n";
      return kExitError;
    }
    if (const auto* record = loaded.lockfile->find(pkg->metadata.name))
      approved_at = record->approved_at;
  }

  auto extraction = deps::extract_dependencies(*pkg);
  auto verdicts = client.verify_all(extraction.deps);
  std::vector<Finding> findings;
  for (std::size_t i = 0; i < extraction.deps.size(); ++i) {
    auto finding = registry::existence_finding(extraction.deps[i], verdicts[i],
                                               approved_at);
    if (finding) {
      finding->severity =
          policy->apply_override(DetectorId::T1_4, finding->severity);
      findings.push_back(*finding);
    }
  }
  ScanReport rep = focused_report(pkg->metadata.name, pkg->digest.combined,
                                  std::move(findings), {DetectorId::T1_4});
  return emit(rep, opt, *policy);
}

int run_squat_check(const Options& opt) {
  auto policy = resolve_policy(opt);
  if (!policy) return kExitError;
  auto pkg = load_or_report(opt.dir);
  if (!pkg) return kExitError;

  auto index = squat::load_index(opt.index_path);
  for (const auto& e : index.errors)
    std::cerr << "skillguard: warning: index: " << e << "\n";
  if (index.entries.empty() && !index.errors.empty()) return kExitError;

  std::vector<Finding> findings;
  for (auto& match :
       squat::check_name(pkg->metadata, opt.publisher, index.entries, *policy,
                         detect::name_span(*pkg))) {
    match.finding.severity =
        policy->apply_override(DetectorId::T1_1, match.finding.severity);
    findings.push_back(std::move(match.finding));
  }
  for (auto& finding :
       squat::check_shadowing(pkg->metadata, opt.publisher, index.entries,
                              *policy, detect::description_span(*pkg))) {
    finding.severity =
        policy->apply_override(DetectorId::T1_1, finding.severity);
    findings.push_back(std::move(finding));
  }
  ScanReport rep = focused_report(pkg->metadata.name, pkg->digest.combined,
                                  std::move(findings), {DetectorId::T1_1});
  return emit(rep, opt, *policy);
}

int run_policy_show(const Options& opt) {
  auto policy = resolve_policy(opt);
  if (!policy) return kExitError;
  std::cout << policy_to_json(*policy);
  return kExitClean;
}

int run_rules(const Options& opt) {
  auto policy = resolve_policy(opt);
  if (!policy) return kExitError;
  std::cout << detect::rule_catalog_json(*policy);
  return kExitClean;
}

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--policy", opt.policy_path, "Policy JSON file")
      ->envname("SKILLGUARD_POLICY");
  cmd->add_option("--format", opt.format, "Output format")
      ->check(CLI::IsMember({"json", "text"}))
      ->capture_default_str();
  cmd->add_flag("--offline", opt.offline,
                "Never touch the network; dependent checks report skipped");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "skillguard: static scanner and trust manager for Agent Skill "
      "packages"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* scan = app.add_subcommand(
      "scan", "Scan a skill directory and report findings");
  scan->add_option("dir", opt.dir, "Skill package directory")->required();
  add_common(scan, opt);
  scan->add_option("--lockfile", opt.lockfile_path,
                   "Trust lockfile for modification and claim-window checks");
  scan->add_option("--index", opt.index_path,
                   "Skill marketplace index (JSON lines) for name checks");
  scan->add_option("--publisher", opt.publisher,
                   "Publisher of the scanned package");
  scan->add_option("--registry-fixture", opt.registry_fixture,
                   "Registry fixture file; enables dependency existence "
                   "checks without the network");

  CLI::App* trust_cmd =
      app.add_subcommand("trust", "Approve packages and verify them later");
  trust_cmd->require_subcommand(1);
  CLI::App* approve = trust_cmd->add_subcommand(
      "approve", "Record the package's content digests in the lockfile");
  approve->add_option("dir", opt.dir, "Skill package directory")->required();
  add_common(approve, opt);
  approve->add_option("--lockfile", opt.lockfile_path, "Trust lockfile path");
  approve->add_option("--note", opt.note, "Free-form approval note");
  approve->add_option("--now", opt.now, "Approval timestamp (unix seconds)")
      ->group("");
  CLI::App* verify = trust_cmd->add_subcommand(
      "verify", "Compare a directory against its approved digests");
  verify->add_option("dir", opt.dir, "Skill package directory")->required();
  add_common(verify, opt);
  verify->add_option("--lockfile", opt.lockfile_path, "Trust lockfile path");

  CLI::App* monitor_cmd = app.add_subcommand(
      "monitor", "Baseline and re-check watched agent files");
  monitor_cmd->require_subcommand(1);
  CLI::App* baseline = monitor_cmd->add_subcommand(
      "baseline", "Snapshot watched memory and config files under a root");
  baseline->add_option("dir", opt.dir, "Workspace root")->required();
  add_common(baseline, opt);
  baseline->add_option("--baseline", opt.baseline_path, "Snapshot file path");
  baseline->add_option("--now", opt.now, "Snapshot timestamp (unix seconds)")
      ->group("");
  CLI::App* check = monitor_cmd->add_subcommand(
      "check", "Report watched files that changed since the baseline");
  check->add_option("dir", opt.dir, "Workspace root")->required();
  add_common(check, opt);
  check->add_option("--baseline", opt.baseline_path, "Snapshot file path");

  CLI::App* registry_cmd = app.add_subcommand(
      "registry", "Check declared dependencies against their registries");
  registry_cmd->require_subcommand(1);
  CLI::App* regcheck = registry_cmd->add_subcommand(
      "check", "Verify every extracted dependency exists upstream");
  regcheck->add_option("dir", opt.dir, "Skill package directory")->required();
  add_common(regcheck, opt);
  regcheck->add_option("--registry-fixture", opt.registry_fixture,
                       "Registry fixture file (ecosystem name per line)");
  regcheck->add_option("--lockfile", opt.lockfile_path,
                       "Trust lockfile (enables claim-window evidence)");

  CLI::App* squat_cmd = app.add_subcommand(
      "squat", "Check a package name against a marketplace index");
  squat_cmd->require_subcommand(1);
  CLI::App* squatcheck = squat_cmd->add_subcommand(
      "check", "Flag lookalike names and shadowed descriptions");
  squatcheck->add_option("dir", opt.dir, "Skill package directory")
      ->required();
  add_common(squatcheck, opt);
  squatcheck
      ->add_option("--index", opt.index_path,
                   "Skill marketplace index (JSON lines)")
      ->required();
  squatcheck->add_option("--publisher", opt.publisher,
                         "Publisher of the scanned package");

  CLI::App* policy_cmd =
      app.add_subcommand("policy", "Show the effective configuration");
  policy_cmd->require_subcommand(1);
  CLI::App* show = policy_cmd->add_subcommand(
      "show", "Print the effective policy as canonical JSON");
  add_common(show, opt);

  CLI::App* rules = app.add_subcommand(
      "rules", "Print the rule catalog as canonical JSON");
  add_common(rules, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (scan->parsed()) return run_scan(opt);
    if (approve->parsed()) return run_trust_approve(opt);
    if (verify->parsed()) return run_trust_verify(opt);
    if (baseline->parsed()) return run_monitor_baseline(opt);
    if (check->parsed()) return run_monitor_check(opt);
    if (regcheck->parsed()) return run_registry_check(opt);
    if (squatcheck->parsed()) return run_squat_check(opt);
    if (show->parsed()) return run_policy_show(opt);
    if (rules->parsed()) return run_rules(opt);
  } catch (const std::exception& e) {
    std::cerr << "skillguard: error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
