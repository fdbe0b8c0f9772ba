#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skillguard/skill_model.hpp"

namespace skillguard {

/// Threat scenario identifiers. Rendered with a dot ("T4.3") everywhere a
/// human or another tool reads them.
enum class DetectorId {
  T1_1,  // typosquatted skill name
  T1_4,  // dependency missing from its registry
  T2_1,  // consent gap: behavior beyond the described scope
  T2_2,  // post-approval content modification
  T3_1,  // direct prompt injection in instructions
  T3_2,  // indirect injection: fetch-and-follow external content
  T4_1,  // malicious script behavior
  T4_2,  // unpinned or floating dependency
  T4_3,  // remote code fetch at instruction level
  T5_1,  // credential harvesting
  T5_2,  // environment variable harvesting
  T5_3,  // codebase exfiltration
  T6_1,  // agent memory file poisoning
  T6_2,  // agent config injection
  T7_1,  // cross-agent prompt infection
};

inline constexpr int kDetectorCount = 15;

extern const std::array<DetectorId, kDetectorCount> kAllDetectors;

enum class Severity { Info, Low, Medium, High, Critical };
enum class Confidence { Heuristic, Likely, Confirmed };
enum class Phase { Creation, Distribution, Deployment, Execution };

std::string dotted_id(DetectorId id);
std::optional<DetectorId> detector_from_dotted(std::string_view dotted);

const char* to_string(Severity s);
const char* to_string(Confidence c);
const char* to_string(Phase p);
std::optional<Severity> severity_from_string(std::string_view s);
std::optional<Confidence> confidence_from_string(std::string_view s);
std::optional<Phase> phase_from_string(std::string_view s);

/// Primary lifecycle phase of each scenario.
Phase detector_phase(DetectorId id);

/// Attack-surface layer, 1..3.
int detector_layer(DetectorId id);
const char* layer_name(int layer);

const char* detector_title(DetectorId id);

struct Finding {
  DetectorId detector = DetectorId::T3_1;
  Severity severity = Severity::Info;
  Confidence confidence = Confidence::Heuristic;
  Phase phase = Phase::Execution;
  SourceSpan span;
  std::string evidence;  // verbatim bytes at span for scan findings
  std::string message;
  std::string rule;  // catalog id, e.g. "t4.3-pipe-shell"

  bool operator==(const Finding&) const = default;
};

struct DetectorRun {
  DetectorId id = DetectorId::T1_1;
  bool ran = false;
  std::string skip_reason;  // non-empty iff !ran

  bool operator==(const DetectorRun&) const = default;
};

struct ScanReport {
  std::string package_name;
  std::string package_digest;
  std::vector<Finding> findings;       // sorted, see sort_findings
  std::vector<DetectorRun> detectors;  // one entry per in-scope detector

  std::array<int, 5> severity_counts() const;
  bool operator==(const ScanReport&) const = default;
};

/// Orders findings by (file, byte_start, detector, rule) so reports are
/// byte-stable across runs.
void sort_findings(std::vector<Finding>& findings);

}  // namespace skillguard
