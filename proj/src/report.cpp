#include "skillguard/report.hpp"

#include <nlohmann/json.hpp>
#include <sstream>

namespace skillguard::report {

namespace {

using nlohmann::json;

json finding_to_json(const Finding& f) {
  json row;
  row["id"] = dotted_id(f.detector);
  row["rule"] = f.rule;
  row["severity"] = to_string(f.severity);
  row["confidence"] = to_string(f.confidence);
  row["phase"] = to_string(f.phase);
  row["file"] = f.span.file;
  row["line"] = f.span.line_start;
  row["line_end"] = f.span.line_end;
  row["byte_start"] = f.span.byte_start;
  row["byte_end"] = f.span.byte_end;
  row["evidence"] = f.evidence;
  row["message"] = f.message;
  return row;
}

std::optional<Finding> finding_from_json(const json& row,
                                         std::vector<std::string>& errors) {
  Finding f;
  auto fail = [&](const std::string& why) {
    errors.push_back("finding: " + why);
    return std::nullopt;
  };
  if (!row.is_object()) return fail("not an object");
  for (const char* key :
       {"id", "rule", "severity", "confidence", "phase", "file", "line",
        "line_end", "byte_start", "byte_end", "evidence", "message"}) {
    if (!row.contains(key)) return fail(std::string("missing key ") + key);
  }
  auto id = detector_from_dotted(row["id"].get<std::string>());
  if (!id) return fail("unknown detector id " + row["id"].get<std::string>());
  auto sev = severity_from_string(row["severity"].get<std::string>());
  auto conf = confidence_from_string(row["confidence"].get<std::string>());
  auto phase = phase_from_string(row["phase"].get<std::string>());
  if (!sev || !conf || !phase) return fail("bad enum value");
  f.detector = *id;
  f.severity = *sev;
  f.confidence = *conf;
  f.phase = *phase;
  f.rule = row["rule"].get<std::string>();
  f.span.file = row["file"].get<std::string>();
  f.span.line_start = row["line"].get<int>();
  f.span.line_end = row["line_end"].get<int>();
  f.span.byte_start = row["byte_start"].get<std::size_t>();
  f.span.byte_end = row["byte_end"].get<std::size_t>();
  f.evidence = row["evidence"].get<std::string>();
  f.message = row["message"].get<std::string>();
  return f;
}

std::string render_json(const ScanReport& report) {
  json doc;
  doc["tool"] = "skillguard";
  doc["schema"] = 1;
  doc["package"] = {{"name", report.package_name},
                    {"digest", report.package_digest}};
  doc["findings"] = json::array();
  for (const Finding& f : report.findings)
    doc["findings"].push_back(finding_to_json(f));
  doc["skipped"] = json::array();
  for (const DetectorRun& run : report.detectors) {
    if (!run.ran)
      doc["skipped"].push_back(
          {{"id", dotted_id(run.id)}, {"reason", run.skip_reason}});
  }
  auto counts = report.severity_counts();
  int ran = 0;
  for (const DetectorRun& run : report.detectors) ran += run.ran ? 1 : 0;
  doc["stats"] = {
      {"detectors_run", ran},
      {"detectors_skipped", int(report.detectors.size()) - ran},
      {"findings", report.findings.size()},
      {"severity",
       {{"info", counts[0]},
        {"low", counts[1]},
        {"medium", counts[2]},
        {"high", counts[3]},
        {"critical", counts[4]}}},
  };
  return doc.dump(2) + "\n";
}

std::string render_text(const ScanReport& report) {
  std::ostringstream out;
  std::string digest = report.package_digest.substr(0, 12);
  out << "skillguard: " << report.package_name << " (" << digest << ")\n";
  if (report.findings.empty()) {
    out << "no findings\n";
  } else {
    for (int layer = 1; layer <= 3; ++layer) {
      bool any = false;
      for (const Finding& f : report.findings) {
        if (detector_layer(f.detector) != layer) continue;
        if (!any) out << "\n" << layer_name(layer) << "\n";
        any = true;
        out << "  [" << to_string(f.severity) << "] " << dotted_id(f.detector)
            << " " << f.rule << " " << f.span.file << ":" << f.span.line_start
            << "\n    " << f.message << "\n";
        if (!f.evidence.empty()) out << "    > " << f.evidence << "\n";
      }
    }
  }
  bool any_skipped = false;
  for (const DetectorRun& run : report.detectors) {
    if (run.ran) continue;
    if (!any_skipped) out << "\nskipped\n";
    any_skipped = true;
    out << "  " << dotted_id(run.id) << ": " << run.skip_reason << "\n";
  }
  auto counts = report.severity_counts();
  out << "\ntotals: " << counts[4] << " critical, " << counts[3] << " high, "
      << counts[2] << " medium, " << counts[1] << " low, " << counts[0]
      << " info\n";
  return out.str();
}

}  // namespace

std::optional<Format> format_from_string(std::string_view s) {
  if (s == "json") return Format::Json;
  if (s == "text") return Format::Text;
  return std::nullopt;
}

RenderedReport render_report(const ScanReport& report, Format format) {
  RenderedReport rendered;
  rendered.format = format;
  rendered.content =
      format == Format::Json ? render_json(report) : render_text(report);
  return rendered;
}

ReportParseResult parse_report(std::string_view json_text) {
  ReportParseResult result;
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) {
    result.errors.push_back("not valid JSON");
    return result;
  }
  if (!doc.is_object() || doc.value("tool", "") != "skillguard") {
    result.errors.push_back("not a skillguard report");
    return result;
  }
  if (doc.value("schema", 0) != 1) {
    result.errors.push_back("unsupported schema version");
    return result;
  }
  ScanReport report;
  if (!doc.contains("package") || !doc["package"].is_object() ||
      !doc["package"].contains("name") || !doc["package"].contains("digest")) {
    result.errors.push_back("missing package block");
    return result;
  }
  report.package_name = doc["package"]["name"].get<std::string>();
  report.package_digest = doc["package"]["digest"].get<std::string>();

  if (!doc.contains("findings") || !doc["findings"].is_array()) {
    result.errors.push_back("missing findings array");
    return result;
  }
  for (const json& row : doc["findings"]) {
    auto f = finding_from_json(row, result.errors);
    if (!f) return result;
    report.findings.push_back(*f);
  }

  // The detector table is reconstructed from the skipped list: every
  // in-scope detector not listed there ran.
  std::vector<std::pair<DetectorId, std::string>> skipped;
  if (doc.contains("skipped")) {
    if (!doc["skipped"].is_array()) {
      result.errors.push_back("skipped is not an array");
      return result;
    }
    for (const json& row : doc["skipped"]) {
      if (!row.is_object() || !row.contains("id") || !row.contains("reason")) {
        result.errors.push_back("bad skipped entry");
        return result;
      }
      auto id = detector_from_dotted(row["id"].get<std::string>());
      if (!id) {
        result.errors.push_back("unknown detector id in skipped list");
        return result;
      }
      skipped.emplace_back(*id, row["reason"].get<std::string>());
    }
  }
  for (DetectorId id : kAllDetectors) {
    DetectorRun run;
    run.id = id;
    run.ran = true;
    for (const auto& [skipped_id, reason] : skipped) {
      if (skipped_id == id) {
        run.ran = false;
        run.skip_reason = reason;
        break;
      }
    }
    report.detectors.push_back(run);
  }
  result.report = std::move(report);
  return result;
}

int exit_code_for(const ScanReport& report, Severity fail_threshold) {
  for (const Finding& f : report.findings) {
    if (f.severity >= fail_threshold) return 1;
  }
  return 0;
}

}  // namespace skillguard::report
