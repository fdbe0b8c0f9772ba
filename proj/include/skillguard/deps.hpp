#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "skillguard/finding.hpp"
#include "skillguard/policy.hpp"
#include "skillguard/skill_model.hpp"

namespace skillguard::deps {

/// Where a dependency declaration was found; decides both the pinning
/// grammar and the finding severity.
enum class DepOrigin {
  Pep723Block,        // # /// script ... # ///
  RequirementsFile,   // requirements*.txt
  PackageManifest,    // package.json dependency maps
  InlineInstall,      // pip/npm/npx/uv command in a script
  BodyCommand,        // same commands inside SKILL.md instructions
};

const char* to_string(DepOrigin origin);

struct DependencyRef {
  std::string ecosystem;  // "python-pypi", "node-npm", "shell-tool"
  std::string name;
  std::string constraint;  // raw version expression, may be empty
  DepOrigin origin = DepOrigin::InlineInstall;
  SourceSpan span;

  bool operator==(const DependencyRef&) const = default;
};

struct ExtractionResult {
  std::vector<DependencyRef> deps;
  std::vector<ParseDiagnostic> diagnostics;
  bool lockfile_present = false;  // uv.lock or package-lock.json shipped
};

/// Collects every dependency declaration in the package: PEP 723 blocks
/// and inline install commands in scripts, install commands in the body,
/// requirements*.txt and package.json among the supplementary files.
ExtractionResult extract_dependencies(const SkillPackage& pkg);

enum class PinStatus { Pinned, Unpinned, Floating };

const char* to_string(PinStatus s);

/// Grammar-based: python is Pinned only for a single `==`/`===` clause
/// with no wildcard; node only for a bare x.y.z; shell tools are always
/// Floating. Anything with a range operator is never Pinned.
PinStatus check_pinning(const DependencyRef& dep);

/// T4.2 findings for every non-Pinned dependency. Auto-resolved origins
/// (PEP 723, inline commands) are High, declaration files Medium; a
/// shipped lockfile lowers each one level but never suppresses it.
std::vector<Finding> pinning_findings(const ExtractionResult& extraction,
                                      const PolicyConfig& policy);

}  // namespace skillguard::deps
