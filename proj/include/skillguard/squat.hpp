#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skillguard/finding.hpp"
#include "skillguard/policy.hpp"
#include "skillguard/skill_model.hpp"

namespace skillguard::squat {

struct SkillIndexEntry {
  std::string name;
  std::string publisher;
  long long popularity = 0;
  std::string description;

  bool operator==(const SkillIndexEntry&) const = default;
};

struct IndexParseResult {
  std::vector<SkillIndexEntry> entries;
  std::vector<std::string> errors;
};

/// Parses a JSON-lines index: one object per line with name, publisher,
/// popularity, description. Blank lines are skipped; malformed lines are
/// reported and skipped.
IndexParseResult parse_index(std::string_view jsonl);
IndexParseResult load_index(const std::filesystem::path& file);

struct NormalizedName {
  std::string value;
  std::vector<std::string> trace;  // applied transforms, in order
};

/// Canonical comparison form: lowercase, {-,_,.} mapped to '-', and the
/// homoglyph table rn->m, 0->o, 1->l, 5->s applied. Idempotent.
NormalizedName normalize_name(std::string_view name);

/// Levenshtein distance over bytes.
std::size_t edit_distance(std::string_view a, std::string_view b);

/// edit_distance(normalize(a), normalize(b)) / max(len). Symmetric, zero
/// iff the normalized forms are equal.
double name_distance(std::string_view a, std::string_view b);

struct SimilarityVerdict {
  SkillIndexEntry entry;
  double distance = 0.0;
  std::vector<std::string> trace;
};

struct SquatMatch {
  SimilarityVerdict verdict;
  Finding finding;
};

/// Flags index entries within the distance threshold that have a different
/// publisher and at least the popularity floor. Exact normalized match is
/// distance 0 and Critical. `name_span` anchors the findings at the
/// candidate's name in SKILL.md.
std::vector<SquatMatch> check_name(const SkillMetadata& metadata,
                                   std::string_view publisher,
                                   const std::vector<SkillIndexEntry>& index,
                                   const PolicyConfig& policy,
                                   const SourceSpan& name_span);

/// Jaccard similarity of the descriptions' word sets with stopwords
/// removed. 1.0 for identical sets, 0.0 for disjoint.
double shadow_score(std::string_view description_a, std::string_view description_b);

/// Info findings for descriptions shadowing a more popular entry
/// (score above the policy threshold, different publisher).
std::vector<Finding> check_shadowing(const SkillMetadata& metadata,
                                     std::string_view publisher,
                                     const std::vector<SkillIndexEntry>& index,
                                     const PolicyConfig& policy,
                                     const SourceSpan& description_span);

/// Word set used by shadow_score: lowercased [a-z0-9]+ runs minus the
/// stopword list. Exposed for the oracle test.
std::vector<std::string> description_words(std::string_view text);

}  // namespace skillguard::squat
