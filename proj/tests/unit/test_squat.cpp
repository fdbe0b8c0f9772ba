#include "doctest.h"

#include <random>

#include "skillguard/squat.hpp"
#include "support/oracles.hpp"

using namespace skillguard;
using namespace skillguard::squat;

namespace {

SkillIndexEntry entry(const char* name, const char* publisher, long long pop,
                      const char* desc = "") {
  return {name, publisher, pop, desc};
}

SkillMetadata meta(const char* name, const char* desc) {
  SkillMetadata m;
  m.name = name;
  m.description = desc;
  return m;
}

const char* kTable2Desc =
    "Extract text and tables from PDF files. Use when working with PDF files "
    "or when the user mentions PDFs.";

}  // namespace

TEST_CASE("index parsing") {
  const std::string jsonl =
      R"({"name":"pdf-processing","publisher":"anthropic","popularity":99000,"description":"Extract text from PDFs"})"
      "\n"
      "\n"
      R"({"name":"ssh-keeper","publisher":"keeper-labs","popularity":4200,"description":"Manage ssh keys"})"
      "\n"
      "not json\n"
      R"({"name":"x","publisher":"y"})"
      "\n";
  auto r = parse_index(jsonl);
  REQUIRE(r.entries.size() == 2);
  CHECK(r.entries[0].name == "pdf-processing");
  CHECK(r.entries[0].popularity == 99000);
  CHECK(r.entries[1].publisher == "keeper-labs");
  REQUIRE(r.errors.size() == 2);
  CHECK(r.errors[0].find("line 4") != std::string::npos);
  CHECK(r.errors[1].find("line 5") != std::string::npos);
}

TEST_CASE("name normalization") {
  CHECK(normalize_name("PDF_Processing").value == "pdf-processing");
  CHECK(normalize_name("pdf.processing").value == "pdf-processing");
  CHECK(normalize_name("rnodel-tools").value == "model-tools");
  CHECK(normalize_name("c0re-t00ls").value == "core-tools");
  CHECK(normalize_name("s1ick").value == "slick");
  CHECK(normalize_name("fa5t-zip").value == "fast-zip");

  auto traced = normalize_name("PDF_Proce55ing");
  CHECK(traced.value == "pdf-processing");
  CHECK(traced.trace == std::vector<std::string>{"lowercase", "separators",
                                                 "5->s"});

  // Idempotent on arbitrary ASCII.
  std::mt19937 rng(11);
  const char alphabet[] = "abcrnRN015._-XYZ";
  for (int i = 0; i < 300; ++i) {
    std::string s;
    int n = 1 + int(rng() % 12);
    for (int j = 0; j < n; ++j) s.push_back(alphabet[rng() % 16]);
    std::string once = normalize_name(s).value;
    CHECK(normalize_name(once).value == once);
  }
}

TEST_CASE("edit distance: frozen cases") {
  CHECK(edit_distance("", "") == 0);
  CHECK(edit_distance("abc", "") == 3);
  CHECK(edit_distance("", "abc") == 3);
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("flaw", "lawn") == 2);
  CHECK(edit_distance("same", "same") == 0);
}

TEST_CASE("edit distance matches the memoized reference") {
  std::mt19937 rng(57);
  const char alphabet[] = "abcde-";
  for (int i = 0; i < 1000; ++i) {
    auto gen = [&] {
      std::string s;
      int n = int(rng() % 12);
      for (int j = 0; j < n; ++j) s.push_back(alphabet[rng() % 6]);
      return s;
    };
    std::string a = gen(), b = gen();
    CAPTURE(a);
    CAPTURE(b);
    CHECK(edit_distance(a, b) == oracles::edit_distance(a, b));
  }
}

TEST_CASE("name distance: frozen lookalike pair") {
  CHECK(name_distance("pdf-procesing", "pdf-processing") ==
        doctest::Approx(1.0 / 14.0));
  CHECK(name_distance("pdf_processing", "pdf-processing") == 0.0);
  CHECK(name_distance("rnodel", "model") == 0.0);
  CHECK(name_distance("", "") == 0.0);
}

TEST_CASE("check_name verdicts") {
  PolicyConfig policy = PolicyConfig::defaults();
  std::vector<SkillIndexEntry> index = {
      entry("pdf-processing", "anthropic", 99000, "Extract text from PDFs"),
      entry("tiny-skill", "someone", 3),
      entry("unrelated-video-cutter", "other", 5000),
  };
  SourceSpan span;
  span.file = "SKILL.md";
  span.line_start = span.line_end = 2;

  SUBCASE("one-letter typo: High, Likely") {
    auto matches =
        check_name(meta("pdf-procesing", "d"), "newcomer", index, policy, span);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].verdict.entry.name == "pdf-processing");
    CHECK(matches[0].verdict.distance == doctest::Approx(1.0 / 14.0));
    CHECK(matches[0].finding.detector == DetectorId::T1_1);
    CHECK(matches[0].finding.severity == Severity::High);
    CHECK(matches[0].finding.confidence == Confidence::Likely);
  }
  SUBCASE("normalized collision: Critical, Confirmed") {
    auto matches =
        check_name(meta("pdf_pr0cessing", "d"), "newcomer", index, policy, span);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].verdict.distance == 0.0);
    CHECK(matches[0].finding.severity == Severity::Critical);
    CHECK(matches[0].finding.confidence == Confidence::Confirmed);
  }
  SUBCASE("same publisher is not squatting") {
    auto matches = check_name(meta("pdf-processing", "d"), "anthropic", index,
                              policy, span);
    CHECK(matches.empty());
  }
  SUBCASE("popularity floor filters noise") {
    auto matches =
        check_name(meta("tiny-skil", "d"), "newcomer", index, policy, span);
    CHECK(matches.empty());
  }
  SUBCASE("distant names are not flagged") {
    auto matches =
        check_name(meta("csv-splitter", "d"), "newcomer", index, policy, span);
    CHECK(matches.empty());
  }
}

TEST_CASE("description word extraction") {
  auto words = description_words(kTable2Desc);
  CHECK(words.size() == 16);  // unique words, none stopworded
  auto has = [&](const char* w) {
    return std::find(words.begin(), words.end(), w) != words.end();
  };
  CHECK(has("extract"));
  CHECK(has("pdf"));
  CHECK(has("when"));
  CHECK(has("the"));

  auto filtered = description_words("This is a test of the filter");
  // "this", "is", "a", "of" are grammar words; "the" stays by design.
  CHECK(filtered == std::vector<std::string>{"filter", "test", "the"});
}

TEST_CASE("shadow score: frozen cases") {
  CHECK(shadow_score(kTable2Desc, kTable2Desc) == 1.0);
  const char* swapped =
      "Extract text and charts from PDF files. Use when working with PDF "
      "files or when the user mentions PDFs.";
  CHECK(shadow_score(kTable2Desc, swapped) == doctest::Approx(15.0 / 17.0));
  CHECK(shadow_score("alpha beta", "gamma delta") == 0.0);
  CHECK(shadow_score("", "") == 0.0);
}

TEST_CASE("check_shadowing") {
  PolicyConfig policy = PolicyConfig::defaults();
  std::vector<SkillIndexEntry> index = {
      entry("pdf-processing", "anthropic", 99000, kTable2Desc),
  };
  SourceSpan span;
  span.file = "SKILL.md";
  span.line_start = span.line_end = 3;

  SUBCASE("near-identical description is flagged Info") {
    auto findings = check_shadowing(meta("pdf-helper", kTable2Desc), "newcomer",
                                    index, policy, span);
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].detector == DetectorId::T1_1);
    CHECK(findings[0].severity == Severity::Info);
    CHECK(findings[0].rule == "squat-shadow");
  }
  SUBCASE("same canonical name defers to the typosquat check") {
    auto findings = check_shadowing(meta("pdf_processing", kTable2Desc),
                                    "newcomer", index, policy, span);
    CHECK(findings.empty());
  }
  SUBCASE("unrelated description passes") {
    auto findings = check_shadowing(
        meta("pdf-helper", "Rotate and crop video clips quickly."), "newcomer",
        index, policy, span);
    CHECK(findings.empty());
  }
}
