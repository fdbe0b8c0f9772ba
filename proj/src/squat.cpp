#include "skillguard/squat.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace skillguard::squat {

namespace {

using nlohmann::json;

/// Grammar words that carry no topical signal. Deliberately short:
/// verbs like "use" or connectives like "when" often are the topical
/// signal in one-line skill descriptions.
const std::set<std::string>& stopwords() {
  static const std::set<std::string> kStopwords = {
      "a",    "an",   "am",    "i",     "is",    "are",  "was",
      "were", "be",   "been",  "being", "do",    "does", "did",
      "has",  "have", "had",   "having", "it",   "its",  "of",
      "in",   "at",   "by",    "to",    "as",    "that", "this",
      "these", "those",
  };
  return kStopwords;
}

std::string format_distance(double d) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", d);
  return buf;
}

}  // namespace

IndexParseResult parse_index(std::string_view jsonl) {
  IndexParseResult result;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= jsonl.size()) {
    std::size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(start, end - start);
    start = end + 1;
    ++line_no;
    // Trim to decide blankness; parse the raw slice.
    bool blank = true;
    for (char c : line) {
      if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
    }
    if (blank) {
      if (start > jsonl.size()) break;
      continue;
    }
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      result.errors.push_back("line " + std::to_string(line_no) +
                              ": not a JSON object");
      continue;
    }
    if (!doc.contains("name") || !doc["name"].is_string() ||
        !doc.contains("publisher") || !doc["publisher"].is_string() ||
        !doc.contains("popularity") || !doc["popularity"].is_number() ||
        !doc.contains("description") || !doc["description"].is_string()) {
      result.errors.push_back("line " + std::to_string(line_no) +
                              ": needs name, publisher, popularity, description");
      continue;
    }
    SkillIndexEntry e;
    e.name = doc["name"].get<std::string>();
    e.publisher = doc["publisher"].get<std::string>();
    e.popularity = doc["popularity"].get<long long>();
    e.description = doc["description"].get<std::string>();
    result.entries.push_back(std::move(e));
  }
  return result;
}

IndexParseResult load_index(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    IndexParseResult r;
    r.errors.push_back("cannot read index file " + file.string());
    return r;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_index(buf.str());
}

NormalizedName normalize_name(std::string_view name) {
  NormalizedName out;
  std::string value(name);

  bool lowered = false;
  for (char& c : value) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isupper(u)) {
      c = char(std::tolower(u));
      lowered = true;
    }
  }
  if (lowered) out.trace.push_back("lowercase");

  bool separators = false;
  for (char& c : value) {
    if (c == '_' || c == '.') {
      c = '-';
      separators = true;
    }
  }
  if (separators) out.trace.push_back("separators");

  // Homoglyph folds. "rn" reads as "m" in most UI fonts.
  std::string folded;
  folded.reserve(value.size());
  bool rn = false;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] == 'r' && i + 1 < value.size() && value[i + 1] == 'n') {
      folded.push_back('m');
      ++i;
      rn = true;
    } else {
      folded.push_back(value[i]);
    }
  }
  value = std::move(folded);
  if (rn) out.trace.push_back("rn->m");

  static const std::pair<char, char> kDigitFolds[] = {
      {'0', 'o'}, {'1', 'l'}, {'5', 's'}};
  for (auto [from, to] : kDigitFolds) {
    bool applied = false;
    for (char& c : value) {
      if (c == from) {
        c = to;
        applied = true;
      }
    }
    if (applied) {
      out.trace.push_back(std::string(1, from) + "->" + std::string(1, to));
    }
  }

  out.value = std::move(value);
  return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  if (a.size() > b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(a.size() + 1), cur(a.size() + 1);
  for (std::size_t i = 0; i <= a.size(); ++i) prev[i] = i;
  for (std::size_t j = 1; j <= b.size(); ++j) {
    cur[0] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
      std::size_t sub = prev[i - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[i] = std::min({prev[i] + 1, cur[i - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[a.size()];
}

double name_distance(std::string_view a, std::string_view b) {
  std::string na = normalize_name(a).value;
  std::string nb = normalize_name(b).value;
  std::size_t longest = std::max(na.size(), nb.size());
  if (longest == 0) return 0.0;
  return double(edit_distance(na, nb)) / double(longest);
}

std::vector<SquatMatch> check_name(const SkillMetadata& metadata,
                                   std::string_view publisher,
                                   const std::vector<SkillIndexEntry>& index,
                                   const PolicyConfig& policy,
                                   const SourceSpan& name_span) {
  std::vector<SquatMatch> matches;
  NormalizedName candidate = normalize_name(metadata.name);

  for (const SkillIndexEntry& entry : index) {
    if (entry.publisher == publisher) continue;
    if (entry.popularity < policy.typosquat_popularity_floor) continue;

    NormalizedName target = normalize_name(entry.name);
    std::size_t longest = std::max(candidate.value.size(), target.value.size());
    if (longest == 0) continue;
    double dist =
        double(edit_distance(candidate.value, target.value)) / double(longest);
    if (dist > policy.typosquat_threshold) continue;

    SquatMatch m;
    m.verdict.entry = entry;
    m.verdict.distance = dist;
    m.verdict.trace = candidate.trace;

    Finding& f = m.finding;
    f.detector = DetectorId::T1_1;
    f.confidence = dist == 0.0 ? Confidence::Confirmed : Confidence::Likely;
    f.severity = policy.apply_override(
        DetectorId::T1_1, dist == 0.0 ? Severity::Critical : Severity::High);
    f.phase = detector_phase(DetectorId::T1_1);
    f.span = name_span;
    f.evidence = metadata.name;
    f.rule = "squat-name";
    if (dist == 0.0) {
      f.message = "name \"" + metadata.name + "\" collides with \"" +
                  entry.name + "\" by " + entry.publisher +
                  " after normalization";
    } else {
      f.message = "name \"" + metadata.name + "\" is " +
                  format_distance(dist) + " from \"" + entry.name + "\" by " +
                  entry.publisher;
    }
    matches.push_back(std::move(m));
  }

  std::sort(matches.begin(), matches.end(),
            [](const SquatMatch& a, const SquatMatch& b) {
              if (a.verdict.distance != b.verdict.distance)
                return a.verdict.distance < b.verdict.distance;
              return a.verdict.entry.name < b.verdict.entry.name;
            });
  return matches;
}

std::vector<std::string> description_words(std::string_view text) {
  std::set<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !stopwords().count(current)) {
      words.insert(current);
    }
    current.clear();
  };
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      current.push_back(char(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  return {words.begin(), words.end()};
}

double shadow_score(std::string_view description_a,
                    std::string_view description_b) {
  std::vector<std::string> a = description_words(description_a);
  std::vector<std::string> b = description_words(description_b);
  if (a.empty() && b.empty()) return 0.0;
  std::vector<std::string> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(common));
  std::size_t unions = a.size() + b.size() - common.size();
  return unions == 0 ? 0.0 : double(common.size()) / double(unions);
}

std::vector<Finding> check_shadowing(const SkillMetadata& metadata,
                                     std::string_view publisher,
                                     const std::vector<SkillIndexEntry>& index,
                                     const PolicyConfig& policy,
                                     const SourceSpan& description_span) {
  std::vector<Finding> findings;
  for (const SkillIndexEntry& entry : index) {
    if (entry.publisher == publisher) continue;
    if (entry.popularity < policy.typosquat_popularity_floor) continue;
    // Same canonical name is the typosquat case, not shadowing.
    if (normalize_name(entry.name).value == normalize_name(metadata.name).value)
      continue;
    double score = shadow_score(metadata.description, entry.description);
    if (score < policy.shadow_threshold) continue;

    Finding f;
    f.detector = DetectorId::T1_1;
    f.severity = policy.apply_override(DetectorId::T1_1, Severity::Info);
    f.confidence = Confidence::Heuristic;
    f.phase = detector_phase(DetectorId::T1_1);
    f.span = description_span;
    f.evidence = metadata.description;
    f.message = "description overlaps " + format_distance(score) +
                " with \"" + entry.name + "\" by " + entry.publisher;
    f.rule = "squat-shadow";
    findings.push_back(std::move(f));
  }
  sort_findings(findings);
  return findings;
}

}  // namespace skillguard::squat
