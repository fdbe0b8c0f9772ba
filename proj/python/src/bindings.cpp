// Python bindings for the scanner core. Structured results cross the
// boundary as canonical JSON strings; the package wrapper parses them.

#include <pybind11/pybind11.h>

#include <ctime>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillguard/caps.hpp"
#include "skillguard/detectors.hpp"
#include "skillguard/monitor.hpp"
#include "skillguard/policy.hpp"
#include "skillguard/registry.hpp"
#include "skillguard/report.hpp"
#include "skillguard/squat.hpp"
#include "skillguard/trust.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace skillguard;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const std::string& p : parts) {
    if (!out.empty()) out += "; ";
    out += p;
  }
  return out;
}

PolicyConfig policy_from_arg(const std::string& policy_json) {
  if (policy_json.empty()) return PolicyConfig::defaults();
  PolicyParseResult result = parse_policy(policy_json);
  if (!result.config)
    throw std::invalid_argument("invalid policy: " + join(result.errors));
  return *result.config;
}

SkillPackage load_or_throw(const std::string& dir) {
  LoadResult result = load_package(dir);
  if (!result.package || has_error(result.diagnostics)) {
    std::string msg = "failed to load package at " + dir;
    for (const ParseDiagnostic& d : result.diagnostics) {
      if (d.severity == DiagSeverity::Error) msg += "; " + d.message;
    }
    throw std::invalid_argument(msg);
  }
  return *result.package;
}

report::Format format_from_arg(const std::string& fmt) {
  auto parsed = report::format_from_string(fmt);
  if (!parsed) throw std::invalid_argument("format must be json or text");
  return *parsed;
}

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

std::string scan_json(const std::string& package_dir,
                      const std::string& index_path,
                      const std::string& publisher,
                      const std::string& lockfile_path,
                      const std::string& registry_fixture,
                      const std::string& policy_json, const std::string& fmt) {
  PolicyConfig policy = policy_from_arg(policy_json);
  report::Format format = format_from_arg(fmt);
  SkillPackage pkg = load_or_throw(package_dir);

  detect::ScanInputs inputs;
  std::vector<squat::SkillIndexEntry> index_entries;
  if (!index_path.empty()) {
    squat::IndexParseResult index = squat::load_index(index_path);
    if (index.entries.empty() && !index.errors.empty())
      throw std::invalid_argument("invalid skill index: " +
                                  join(index.errors));
    index_entries = std::move(index.entries);
    inputs.index = &index_entries;
  }
  if (!publisher.empty()) inputs.publisher = publisher;

  trust::TrustLockfile lockfile;
  if (!lockfile_path.empty()) {
    trust::LockfileParseResult loaded = trust::load_lockfile(lockfile_path);
    if (!loaded.lockfile)
      throw std::invalid_argument("invalid lockfile: " + join(loaded.errors));
    lockfile = std::move(*loaded.lockfile);
    inputs.lockfile = &lockfile;
  }

  std::unique_ptr<registry::RegistryClient> client;
  if (!registry_fixture.empty()) {
    policy.registry.mode = RegistrySettings::Mode::Fixture;
    policy.registry.fixture_path = registry_fixture;
  }
  if (!policy.offline &&
      policy.registry.mode != RegistrySettings::Mode::Off) {
    std::string error;
    auto source = registry::RegistrySource::from_settings(policy.registry,
                                                          &error);
    if (!error.empty())
      throw std::invalid_argument("registry source: " + error);
    client = std::make_unique<registry::RegistryClient>(std::move(source));
    inputs.registry = client.get();
  }

  ScanReport report = detect::Engine(policy).scan(pkg, inputs);
  return report::render_report(report, format).content;
}

std::string approve(const std::string& package_dir,
                    const std::string& lockfile_path, const std::string& note,
                    const std::string& policy_json) {
  policy_from_arg(policy_json);  // validate even though approval is
                                 // policy-independent today
  SkillPackage pkg = load_or_throw(package_dir);
  caps::ManifestResult caps_result = caps::parse_manifest(pkg.metadata);
  if (caps_result.clause_present && !caps_result.manifest) {
    std::string msg = "capability manifest is malformed";
    for (const ParseDiagnostic& d : caps_result.diagnostics)
      msg += "; " + d.message;
    throw std::invalid_argument(msg);
  }

  trust::TrustLockfile existing;
  fs::path path = lockfile_path;
  if (fs::exists(path)) {
    trust::LockfileParseResult loaded = trust::load_lockfile(path);
    if (!loaded.lockfile)
      throw std::invalid_argument("invalid lockfile: " + join(loaded.errors));
    existing = std::move(*loaded.lockfile);
  }

  trust::TrustLockfile updated =
      trust::approve(pkg, caps_result.manifest, note, existing,
                     static_cast<std::int64_t>(std::time(nullptr)));
  std::string error;
  if (!trust::save_lockfile(path, updated, &error))
    throw std::runtime_error("cannot write lockfile: " + error);
  return pkg.metadata.name;
}

std::string verify_json(const std::string& package_dir,
                        const std::string& lockfile_path,
                        const std::string& policy_json) {
  PolicyConfig policy = policy_from_arg(policy_json);
  trust::LockfileParseResult loaded = trust::load_lockfile(lockfile_path);
  if (!loaded.lockfile)
    throw std::invalid_argument("invalid lockfile: " + join(loaded.errors));

  trust::TrustStatus status =
      trust::verify_dir(package_dir, *loaded.lockfile, policy);
  const char* kind = status.kind == trust::TrustStatus::Kind::Trusted
                         ? "trusted"
                         : status.kind == trust::TrustStatus::Kind::Modified
                               ? "modified"
                               : "unknown";
  nlohmann::json doc;
  doc["status"] = kind;
  doc["name"] = status.record_name;
  if (status.diff) {
    trust::ConsentDecision consent = trust::consent_delta(*status.diff,
                                                          policy);
    doc["diff"] = {{"added", status.diff->added},
                   {"removed", status.diff->removed},
                   {"modified", status.diff->modified},
                   {"body_change_ratio", status.diff->body_change_ratio},
                   {"script_changed", status.diff->script_changed}};
    doc["reapproval_required"] = !consent.auto_accept;
    doc["reasons"] = consent.reasons;
  }
  return doc.dump(2) + "\n";
}

int monitor_baseline(const std::string& root, const std::string& baseline_path,
                     const std::string& policy_json) {
  PolicyConfig policy = policy_from_arg(policy_json);
  if (!fs::is_directory(root))
    throw std::invalid_argument("not a directory: " + root);
  monitor::BaselineResult result =
      monitor::take_baseline(root, policy.watchlist,
                             static_cast<std::int64_t>(std::time(nullptr)));
  std::string error;
  if (!monitor::save_snapshot(baseline_path, result.snapshot, &error))
    throw std::runtime_error("cannot write baseline: " + error);
  return static_cast<int>(result.snapshot.entries.size());
}

std::string monitor_check_json(const std::string& root,
                               const std::string& baseline_path,
                               const std::string& policy_json,
                               const std::string& fmt) {
  PolicyConfig policy = policy_from_arg(policy_json);
  report::Format format = format_from_arg(fmt);
  monitor::SnapshotParseResult loaded =
      monitor::load_snapshot(baseline_path);
  if (!loaded.snapshot)
    throw std::invalid_argument("invalid baseline: " + join(loaded.errors));

  std::vector<Finding> findings =
      monitor::check(root, *loaded.snapshot, policy.watchlist);
  ScanReport rep = focused_report(fs::path(root).filename().string(), "",
                                  std::move(findings),
                                  {DetectorId::T6_1, DetectorId::T6_2});
  return report::render_report(rep, format).content;
}

std::string rules_json(const std::string& policy_json) {
  return detect::rule_catalog_json(policy_from_arg(policy_json));
}

std::string default_policy_json() {
  return policy_to_json(PolicyConfig::defaults());
}

std::size_t edit_distance_py(const std::string& a, const std::string& b) {
  return squat::edit_distance(a, b);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core: skill package scanning, trust and monitoring.";

  m.def("version", [] { return std::string(kVersion); },
        "Version of the native core.");

  m.def("scan_json", &scan_json, py::arg("package_dir"),
        py::arg("index_path") = "", py::arg("publisher") = "",
        py::arg("lockfile_path") = "", py::arg("registry_fixture") = "",
        py::arg("policy_json") = "", py::arg("fmt") = "json",
        "Scan a skill package directory; returns the rendered report.");

  m.def("approve", &approve, py::arg("package_dir"), py::arg("lockfile_path"),
        py::arg("note") = "", py::arg("policy_json") = "",
        "Record the package's content digests in a trust lockfile; "
        "returns the approved record name.");

  m.def("verify_json", &verify_json, py::arg("package_dir"),
        py::arg("lockfile_path"), py::arg("policy_json") = "",
        "Compare a package directory against its approved digests; "
        "returns a JSON status document.");

  m.def("monitor_baseline", &monitor_baseline, py::arg("root"),
        py::arg("baseline_path"), py::arg("policy_json") = "",
        "Snapshot watched agent files under root; returns the number of "
        "entries recorded.");

  m.def("monitor_check_json", &monitor_check_json, py::arg("root"),
        py::arg("baseline_path"), py::arg("policy_json") = "",
        py::arg("fmt") = "json",
        "Compare watched files against a baseline snapshot; returns a "
        "rendered findings report.");

  m.def("rules_json", &rules_json, py::arg("policy_json") = "",
        "The rule catalog as canonical JSON.");

  m.def("default_policy_json", &default_policy_json,
        "The built-in policy as canonical JSON.");

  m.def("edit_distance", &edit_distance_py, py::arg("a"), py::arg("b"),
        "Byte-level Levenshtein distance between two names.");

  m.attr("DEFAULT_LOCKFILE_NAME") = trust::kDefaultLockfileName;
  m.attr("DEFAULT_BASELINE_NAME") = monitor::kDefaultBaselineName;
}
