#include "doctest.h"

#include <nlohmann/json.hpp>

#include "skillguard/detectors.hpp"
#include "skillguard/report.hpp"
#include "test_helpers.hpp"

using namespace skillguard;
using namespace skillguard::report;
namespace fs = std::filesystem;

namespace {

Finding make_finding(DetectorId id, Severity sev, Confidence conf,
                     const std::string& file, int line, std::size_t byte_start,
                     std::size_t byte_end, const std::string& evidence,
                     const std::string& message, const std::string& rule) {
  Finding f;
  f.detector = id;
  f.severity = sev;
  f.confidence = conf;
  f.phase = detector_phase(id);
  f.span = {file, line, line, byte_start, byte_end};
  f.evidence = evidence;
  f.message = message;
  f.rule = rule;
  return f;
}

ScanReport make_report() {
  ScanReport report;
  report.package_name = "ssh-keepr";
  report.package_digest = "abc123def4567890abc123def4567890";
  report.findings = {
      make_finding(DetectorId::T1_1, Severity::High, Confidence::Likely,
                   "SKILL.md", 2, 4, 19, "name: ssh-keepr",
                   "name is one edit from a popular skill", "squat-name"),
      make_finding(DetectorId::T4_1, Severity::Critical, Confidence::Likely,
                   "scripts/convert.py", 12, 300, 340,
                   "urlretrieve(ENGINE_URL, ENGINE_PATH)",
                   "downloaded artifact is executed", "t4.1-download-exec"),
      make_finding(DetectorId::T6_2, Severity::Critical, Confidence::Likely,
                   "scripts/setup_hooks.py", 12, 410, 470,
                   "config.setdefault('hooks', {})",
                   "writes a hook entry into agent configuration",
                   "t6.2-hooks-config"),
  };
  for (DetectorId id : kAllDetectors) {
    DetectorRun run;
    run.id = id;
    run.ran = true;
    if (id == DetectorId::T1_4) {
      run.ran = false;
      run.skip_reason = "registry lookups disabled";
    } else if (id == DetectorId::T2_2) {
      run.ran = false;
      run.skip_reason = "no trust lockfile provided";
    }
    report.detectors.push_back(run);
  }
  return report;
}

ScanReport empty_report() {
  ScanReport report;
  report.package_name = "demo";
  report.package_digest = "abc123";
  for (DetectorId id : kAllDetectors) {
    report.detectors.push_back({id, true, ""});
  }
  return report;
}

}  // namespace

TEST_CASE("format names parse") {
  CHECK(format_from_string("json") == Format::Json);
  CHECK(format_from_string("text") == Format::Text);
  CHECK_FALSE(format_from_string("JSON").has_value());
  CHECK_FALSE(format_from_string("xml").has_value());
  CHECK_FALSE(format_from_string("").has_value());
}

TEST_CASE("empty report renders to the pinned JSON document") {
  const std::string expected = R"({
  "findings": [],
  "package": {
    "digest": "abc123",
    "name": "demo"
  },
  "schema": 1,
  "skipped": [],
  "stats": {
    "detectors_run": 15,
    "detectors_skipped": 0,
    "findings": 0,
    "severity": {
      "critical": 0,
      "high": 0,
      "info": 0,
      "low": 0,
      "medium": 0
    }
  },
  "tool": "skillguard"
}
)";
  CHECK(render_report(empty_report(), Format::Json).content == expected);
}

TEST_CASE("JSON document carries every finding field") {
  ScanReport report = make_report();
  auto rendered = render_report(report, Format::Json);
  auto doc = nlohmann::json::parse(rendered.content);

  CHECK(doc["tool"] == "skillguard");
  CHECK(doc["schema"] == 1);
  CHECK(doc["package"]["name"] == "ssh-keepr");
  CHECK(doc["package"]["digest"] == "abc123def4567890abc123def4567890");

  REQUIRE(doc["findings"].size() == 3);
  const auto& row = doc["findings"][0];
  CHECK(row["id"] == "T1.1");
  CHECK(row["rule"] == "squat-name");
  CHECK(row["severity"] == "High");
  CHECK(row["confidence"] == "Likely");
  CHECK(row["phase"] == "Distribution");
  CHECK(row["file"] == "SKILL.md");
  CHECK(row["line"] == 2);
  CHECK(row["line_end"] == 2);
  CHECK(row["byte_start"] == 4);
  CHECK(row["byte_end"] == 19);
  CHECK(row["evidence"] == "name: ssh-keepr");
  CHECK(row["message"] == "name is one edit from a popular skill");
  CHECK(doc["findings"][1]["phase"] == "Creation");

  REQUIRE(doc["skipped"].size() == 2);
  CHECK(doc["skipped"][0]["id"] == "T1.4");
  CHECK(doc["skipped"][0]["reason"] == "registry lookups disabled");
  CHECK(doc["skipped"][1]["id"] == "T2.2");
  CHECK(doc["skipped"][1]["reason"] == "no trust lockfile provided");

  CHECK(doc["stats"]["detectors_run"] == 13);
  CHECK(doc["stats"]["detectors_skipped"] == 2);
  CHECK(doc["stats"]["findings"] == 3);
  CHECK(doc["stats"]["severity"]["critical"] == 2);
  CHECK(doc["stats"]["severity"]["high"] == 1);
  CHECK(doc["stats"]["severity"]["info"] == 0);
}

TEST_CASE("JSON keys are emitted in sorted order") {
  auto rendered = render_report(make_report(), Format::Json);
  const std::string& text = rendered.content;
  std::vector<std::string> keys = {"\"findings\"", "\"package\"", "\"schema\"",
                                   "\"skipped\"", "\"stats\"", "\"tool\""};
  std::size_t last = 0;
  for (const std::string& key : keys) {
    std::size_t pos = text.find(key);
    REQUIRE(pos != std::string::npos);
    CHECK(pos > last);
    last = pos;
  }
}

TEST_CASE("identical reports render byte-identically") {
  ScanReport report = make_report();
  CHECK(render_report(report, Format::Json).content ==
        render_report(report, Format::Json).content);
  CHECK(render_report(report, Format::Text).content ==
        render_report(report, Format::Text).content);
}

TEST_CASE("JSON round trip reproduces the report exactly") {
  ScanReport report = make_report();
  auto rendered = render_report(report, Format::Json);
  auto parsed = parse_report(rendered.content);
  REQUIRE(parsed.errors.empty());
  REQUIRE(parsed.report.has_value());
  CHECK(*parsed.report == report);
  CHECK(render_report(*parsed.report, Format::Json).content ==
        rendered.content);
}

TEST_CASE("scan reports round trip through JSON") {
  auto result = load_package(fs::path(testutil::fixture_dir()) / "packages" /
                             "gif-converter");
  REQUIRE(result.package);
  ScanReport report =
      detect::scan_package(*result.package, PolicyConfig::defaults());
  REQUIRE_FALSE(report.findings.empty());

  auto rendered = render_report(report, Format::Json);
  auto parsed = parse_report(rendered.content);
  REQUIRE(parsed.errors.empty());
  REQUIRE(parsed.report.has_value());
  CHECK(*parsed.report == report);
}

TEST_CASE("parse rejects documents that are not reports") {
  CHECK_FALSE(parse_report("{nope").report.has_value());
  CHECK_FALSE(parse_report("[]").report.has_value());
  CHECK_FALSE(parse_report(R"({"tool":"other","schema":1})").report.has_value());
  CHECK_FALSE(
      parse_report(R"({"tool":"skillguard","schema":2})").report.has_value());
  CHECK_FALSE(
      parse_report(R"({"tool":"skillguard","schema":1})").report.has_value());
  // A finding with an unknown detector id is an error, not a silent drop.
  auto bad = parse_report(R"({
    "tool": "skillguard", "schema": 1,
    "package": {"name": "x", "digest": "y"},
    "findings": [{"id": "T9.9"}],
    "skipped": []
  })");
  CHECK_FALSE(bad.report.has_value());
  CHECK_FALSE(bad.errors.empty());
}

TEST_CASE("text format groups findings by attack-surface layer") {
  auto rendered = render_report(make_report(), Format::Text);
  const std::string expected =
      "skillguard: ssh-keepr (abc123def456)\n"
      "\n"
      "Layer 1: Delivery and Trust Establishment\n"
      "  [High] T1.1 squat-name SKILL.md:2\n"
      "    name is one edit from a popular skill\n"
      "    > name: ssh-keepr\n"
      "\n"
      "Layer 2: Runtime Attack\n"
      "  [Critical] T4.1 t4.1-download-exec scripts/convert.py:12\n"
      "    downloaded artifact is executed\n"
      "    > urlretrieve(ENGINE_URL, ENGINE_PATH)\n"
      "\n"
      "Layer 3: Persistent and Lateral Impact\n"
      "  [Critical] T6.2 t6.2-hooks-config scripts/setup_hooks.py:12\n"
      "    writes a hook entry into agent configuration\n"
      "    > config.setdefault('hooks', {})\n"
      "\n"
      "skipped\n"
      "  T1.4: registry lookups disabled\n"
      "  T2.2: no trust lockfile provided\n"
      "\n"
      "totals: 2 critical, 1 high, 0 medium, 0 low, 0 info\n";
  CHECK(rendered.content == expected);
}

TEST_CASE("text format for a clean report") {
  auto rendered = render_report(empty_report(), Format::Text);
  CHECK(rendered.content ==
        "skillguard: demo (abc123)\n"
        "no findings\n"
        "\n"
        "totals: 0 critical, 0 high, 0 medium, 0 low, 0 info\n");
}

TEST_CASE("exit code reflects the fail threshold") {
  ScanReport report = make_report();  // max severity Critical
  CHECK(exit_code_for(report, Severity::Critical) == 1);
  CHECK(exit_code_for(report, Severity::High) == 1);
  CHECK(exit_code_for(report, Severity::Info) == 1);
  CHECK(exit_code_for(empty_report(), Severity::Info) == 0);

  ScanReport medium = empty_report();
  Finding f;
  f.severity = Severity::Medium;
  medium.findings.push_back(f);
  CHECK(exit_code_for(medium, Severity::High) == 0);
  CHECK(exit_code_for(medium, Severity::Medium) == 1);
}
