#include "skillguard/finding.hpp"

#include <algorithm>
#include <cctype>
#include <tuple>

namespace skillguard {

const std::array<DetectorId, kDetectorCount> kAllDetectors = {
    DetectorId::T1_1, DetectorId::T1_4, DetectorId::T2_1, DetectorId::T2_2,
    DetectorId::T3_1, DetectorId::T3_2, DetectorId::T4_1, DetectorId::T4_2,
    DetectorId::T4_3, DetectorId::T5_1, DetectorId::T5_2, DetectorId::T5_3,
    DetectorId::T6_1, DetectorId::T6_2, DetectorId::T7_1,
};

std::string dotted_id(DetectorId id) {
  switch (id) {
    case DetectorId::T1_1: return "T1.1";
    case DetectorId::T1_4: return "T1.4";
    case DetectorId::T2_1: return "T2.1";
    case DetectorId::T2_2: return "T2.2";
    case DetectorId::T3_1: return "T3.1";
    case DetectorId::T3_2: return "T3.2";
    case DetectorId::T4_1: return "T4.1";
    case DetectorId::T4_2: return "T4.2";
    case DetectorId::T4_3: return "T4.3";
    case DetectorId::T5_1: return "T5.1";
    case DetectorId::T5_2: return "T5.2";
    case DetectorId::T5_3: return "T5.3";
    case DetectorId::T6_1: return "T6.1";
    case DetectorId::T6_2: return "T6.2";
    case DetectorId::T7_1: return "T7.1";
  }
  return "T?";
}

std::optional<DetectorId> detector_from_dotted(std::string_view dotted) {
  for (DetectorId id : kAllDetectors) {
    if (dotted_id(id) == dotted) return id;
  }
  return std::nullopt;
}

const char* to_string(Severity s) {
  switch (s) {
    case Severity::Info: return "Info";
    case Severity::Low: return "Low";
    case Severity::Medium: return "Medium";
    case Severity::High: return "High";
    case Severity::Critical: return "Critical";
  }
  return "Info";
}

const char* to_string(Confidence c) {
  switch (c) {
    case Confidence::Heuristic: return "Heuristic";
    case Confidence::Likely: return "Likely";
    case Confidence::Confirmed: return "Confirmed";
  }
  return "Heuristic";
}

const char* to_string(Phase p) {
  switch (p) {
    case Phase::Creation: return "Creation";
    case Phase::Distribution: return "Distribution";
    case Phase::Deployment: return "Deployment";
    case Phase::Execution: return "Execution";
  }
  return "Execution";
}

std::optional<Severity> severity_from_string(std::string_view s) {
  // Case-insensitive so hand-written policy files can use lowercase.
  std::string lower(s);
  for (char& c : lower) c = char(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "info") return Severity::Info;
  if (lower == "low") return Severity::Low;
  if (lower == "medium") return Severity::Medium;
  if (lower == "high") return Severity::High;
  if (lower == "critical") return Severity::Critical;
  return std::nullopt;
}

std::optional<Confidence> confidence_from_string(std::string_view s) {
  if (s == "Heuristic") return Confidence::Heuristic;
  if (s == "Likely") return Confidence::Likely;
  if (s == "Confirmed") return Confidence::Confirmed;
  return std::nullopt;
}

std::optional<Phase> phase_from_string(std::string_view s) {
  if (s == "Creation") return Phase::Creation;
  if (s == "Distribution") return Phase::Distribution;
  if (s == "Deployment") return Phase::Deployment;
  if (s == "Execution") return Phase::Execution;
  return std::nullopt;
}

Phase detector_phase(DetectorId id) {
  switch (id) {
    case DetectorId::T1_1: return Phase::Distribution;
    case DetectorId::T1_4: return Phase::Creation;
    case DetectorId::T2_1: return Phase::Deployment;
    case DetectorId::T2_2: return Phase::Deployment;
    case DetectorId::T3_1: return Phase::Creation;
    case DetectorId::T3_2: return Phase::Execution;
    case DetectorId::T4_1: return Phase::Creation;
    case DetectorId::T4_2: return Phase::Creation;
    case DetectorId::T4_3: return Phase::Creation;
    case DetectorId::T5_1: return Phase::Execution;
    case DetectorId::T5_2: return Phase::Execution;
    case DetectorId::T5_3: return Phase::Execution;
    case DetectorId::T6_1: return Phase::Execution;
    case DetectorId::T6_2: return Phase::Execution;
    case DetectorId::T7_1: return Phase::Execution;
  }
  return Phase::Execution;
}

int detector_layer(DetectorId id) {
  switch (id) {
    case DetectorId::T1_1:
    case DetectorId::T1_4:
    case DetectorId::T2_1:
    case DetectorId::T2_2:
      return 1;
    case DetectorId::T3_1:
    case DetectorId::T3_2:
    case DetectorId::T4_1:
    case DetectorId::T4_2:
    case DetectorId::T4_3:
    case DetectorId::T5_1:
    case DetectorId::T5_2:
    case DetectorId::T5_3:
      return 2;
    case DetectorId::T6_1:
    case DetectorId::T6_2:
    case DetectorId::T7_1:
      return 3;
  }
  return 2;
}

const char* layer_name(int layer) {
  switch (layer) {
    case 1: return "Layer 1: Delivery and Trust Establishment";
    case 2: return "Layer 2: Runtime Attack";
    case 3: return "Layer 3: Persistent and Lateral Impact";
  }
  return "Layer ?";
}

const char* detector_title(DetectorId id) {
  switch (id) {
    case DetectorId::T1_1: return "Typosquatting";
    case DetectorId::T1_4: return "Hallucinated Package";
    case DetectorId::T2_1: return "Consent Gap";
    case DetectorId::T2_2: return "Post-Installation Modification";
    case DetectorId::T3_1: return "Direct Injection";
    case DetectorId::T3_2: return "Indirect Injection";
    case DetectorId::T4_1: return "Malicious Script";
    case DetectorId::T4_2: return "Deferred Dependency";
    case DetectorId::T4_3: return "Remote Code Fetch";
    case DetectorId::T5_1: return "Credential Harvesting";
    case DetectorId::T5_2: return "Environment Variable Harvesting";
    case DetectorId::T5_3: return "Codebase Exfiltration";
    case DetectorId::T6_1: return "Memory File Poisoning";
    case DetectorId::T6_2: return "Config Injection";
    case DetectorId::T7_1: return "Prompt Infection";
  }
  return "";
}

std::array<int, 5> ScanReport::severity_counts() const {
  std::array<int, 5> counts{};
  for (const Finding& f : findings) {
    counts[static_cast<std::size_t>(f.severity)]++;
  }
  return counts;
}

void sort_findings(std::vector<Finding>& findings) {
  // The message tiebreak keeps distinct findings that share a span (two
  // lookalike names anchored at the same line) in a reproducible order.
  std::sort(findings.begin(), findings.end(),
            [](const Finding& a, const Finding& b) {
              return std::tie(a.span.file, a.span.byte_start, a.detector,
                              a.rule, a.message) <
                     std::tie(b.span.file, b.span.byte_start, b.detector,
                              b.rule, b.message);
            });
  findings.erase(std::unique(findings.begin(), findings.end()), findings.end());
}

}  // namespace skillguard
