#pragma once

#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "skillguard/finding.hpp"
#include "skillguard/policy.hpp"

namespace skillguard::detect {

struct LineRef {
  int number = 1;          // 1-based within the unit
  std::size_t begin = 0;   // byte offset of first char
  std::size_t end = 0;     // byte offset past last char, excludes \n and \r
  std::string_view text;
};

std::vector<LineRef> split_lines(std::string_view content);

/// What a rule scans. Units carry one of these kinds.
enum TargetMask : unsigned {
  kTargetBody = 1u << 0,
  kTargetScripts = 1u << 1,
  kTargetSuppMarkdown = 1u << 2,
};

std::string target_names(unsigned mask);

/// File-level co-occurrence requirement: `required` rules fire only when
/// the file also matches, escalation rules raise severity when it does.
struct CoPattern {
  std::string pattern;
  std::vector<std::string> gates;
  bool required = false;
  std::optional<Severity> escalate_to;
};

/// One textual detection rule. `pattern` is a case-insensitive ECMAScript
/// regex applied per line; `gates` are lowercase substrings, at least one
/// of which must appear in a line before the regex runs (pure
/// optimization, never changes the hit set). window > 0 makes the rule
/// compound: `secondary` must match within `window` lines (after the
/// primary line when `directional`).
struct PatternRule {
  DetectorId id = DetectorId::T3_1;
  std::string rule;           // catalog id, e.g. "t3.1-override"
  std::string pattern_class;  // e.g. "override-directive"
  std::string pattern;
  std::vector<std::string> gates;
  unsigned targets = kTargetBody;
  Severity severity = Severity::Medium;
  Confidence confidence = Confidence::Heuristic;
  int window = 0;
  bool directional = false;
  std::string secondary;
  std::vector<std::string> secondary_gates;
  std::optional<CoPattern> co;
  bool emits = true;  // classifier rows feed T2.1 instead of findings
  std::string doc;
};

struct TextUnit {
  std::string file;
  int base_line = 1;           // file line of unit line 1
  std::size_t base_offset = 0; // file offset of unit byte 0
  std::string_view content;
  unsigned kind = kTargetBody;
};

class RuleSet {
 public:
  explicit RuleSet(std::vector<PatternRule> rules);

  const std::vector<PatternRule>& rules() const { return rules_; }

  /// Line numbers (1-based, unit-relative) where `rule_index` fires on the
  /// unit, window and co-pattern semantics included.
  std::vector<int> hit_lines(std::size_t rule_index, const TextUnit& unit) const;

  /// Findings for every emitting rule across the units, sorted.
  std::vector<Finding> apply(const std::vector<TextUnit>& units,
                             const PolicyConfig& policy) const;

  /// True when any line of the unit matches rule_index's primary pattern
  /// (classifier rows; ignores window/co).
  bool any_primary_match(std::size_t rule_index, const TextUnit& unit) const;

 private:
  struct Compiled {
    std::regex primary;
    std::optional<std::regex> secondary;
    std::optional<std::regex> co;
  };
  bool co_matches(std::size_t rule_index, const std::vector<LineRef>& lines) const;

  std::vector<PatternRule> rules_;
  std::vector<Compiled> compiled_;
};

/// The built-in rule catalog. Watchlist- and credential-path-derived
/// patterns are expanded from the policy, so the catalog is a pure
/// function of it.
std::vector<PatternRule> builtin_rules(const PolicyConfig& policy);

/// Regex source fragment matching any of the literal needles with
/// non-word boundary guards (shared by rules and the consent-gap
/// classifier).
std::string needle_alternation(const std::vector<std::string>& needles);

std::string regex_escape(std::string_view literal);

}  // namespace skillguard::detect
