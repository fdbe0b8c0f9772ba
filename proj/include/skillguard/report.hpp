#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "skillguard/finding.hpp"
#include "skillguard/policy.hpp"

namespace skillguard::report {

enum class Format { Json, Text };

std::optional<Format> format_from_string(std::string_view s);

struct RenderedReport {
  Format format = Format::Json;
  std::string content;
};

/// JSON: canonical sorted-key document, schema 1. Text: findings grouped
/// by attack-surface layer, one line per finding, then skipped detectors
/// and severity totals.
RenderedReport render_report(const ScanReport& report, Format format);

struct ReportParseResult {
  std::optional<ScanReport> report;
  std::vector<std::string> errors;
};

/// Inverse of the JSON rendering; render(parse(render(r))) is
/// byte-identical to render(r).
ReportParseResult parse_report(std::string_view json_text);

/// 0 when no finding reaches the fail threshold, 1 otherwise. Usage and
/// IO failures exit 2 at the CLI layer.
int exit_code_for(const ScanReport& report, Severity fail_threshold);

}  // namespace skillguard::report
