#pragma once

#include <optional>
#include <string>
#include <vector>

#include "skillguard/caps.hpp"
#include "skillguard/finding.hpp"
#include "skillguard/pattern.hpp"
#include "skillguard/policy.hpp"
#include "skillguard/registry.hpp"
#include "skillguard/squat.hpp"
#include "skillguard/trust.hpp"

namespace skillguard::detect {

/// Scan-time inputs that are not part of the package itself. Absent
/// optionals make the dependent detectors report as skipped, never
/// silently vanish.
struct ScanInputs {
  const std::vector<squat::SkillIndexEntry>* index = nullptr;
  const trust::TrustLockfile* lockfile = nullptr;
  registry::RegistryClient* registry = nullptr;
  std::string publisher;  // candidate publisher for T1.1, may be empty
};

class Engine {
 public:
  explicit Engine(const PolicyConfig& policy);

  ScanReport scan(const SkillPackage& pkg, const ScanInputs& inputs = {}) const;

  const RuleSet& rules() const { return rules_; }
  const PolicyConfig& policy() const { return policy_; }

 private:
  PolicyConfig policy_;
  RuleSet rules_;
};

/// Convenience wrapper: builds an Engine and scans once.
ScanReport scan_package(const SkillPackage& pkg, const PolicyConfig& policy,
                        const ScanInputs& inputs = {});

// Focused detector entry points. Each returns sorted findings for its
// scenario family only.
std::vector<Finding> detect_injection(const SkillPackage& pkg,
                                      const PolicyConfig& policy);
std::vector<Finding> detect_execution_risks(const SkillPackage& pkg,
                                            const PolicyConfig& policy);
std::vector<Finding> detect_exfiltration(const SkillPackage& pkg,
                                         const PolicyConfig& policy);
std::vector<Finding> detect_persistence(const SkillPackage& pkg,
                                        const PolicyConfig& policy);
std::vector<Finding> detect_propagation(const SkillPackage& pkg,
                                        const PolicyConfig& policy);

/// Consent gap: high-risk action classes evidenced in body or scripts that
/// neither the description's vocabulary nor the manifest declares. One
/// finding listing the undeclared classes; two or more raise Medium to
/// High.
std::vector<Finding> detect_consent_gap(
    const SkillPackage& pkg,
    const std::optional<caps::CapabilityManifest>& manifest,
    const PolicyConfig& policy);

/// Span of the frontmatter `name:` value inside SKILL.md (package-level
/// findings anchor here).
SourceSpan name_span(const SkillPackage& pkg);

/// Span of the first `description:` line.
SourceSpan description_span(const SkillPackage& pkg);

/// Machine-readable rule catalog (canonical JSON): every pattern rule plus
/// the structural detectors, with patterns, defaults and scenario notes.
std::string rule_catalog_json(const PolicyConfig& policy);

}  // namespace skillguard::detect
