#include "doctest.h"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "skillguard/caps.hpp"
#include "skillguard/policy.hpp"
#include "skillguard/trust.hpp"
#include "support/oracles.hpp"
#include "test_helpers.hpp"

using namespace skillguard;
using namespace skillguard::trust;
using testutil::TempDir;
using testutil::make_package;
using testutil::read_file;
using testutil::table2_skill_md;
using testutil::write_file;

namespace {

TrustLockfile two_record_lockfile() {
  TrustLockfile lf;
  TrustRecord zeta;
  zeta.name = "zeta";
  zeta.combined = "2222bbbb";
  zeta.files = {{"SKILL.md", "cc"}};
  zeta.approved_at = 1700000500;
  lf.records.push_back(zeta);

  TrustRecord alpha;
  alpha.name = "alpha";
  alpha.combined = "1111aaaa";
  alpha.files = {{"scripts/run.py", "bb"}, {"SKILL.md", "aa"}};
  alpha.approved_at = 1700000000;
  alpha.capabilities = {"net=api.example.com", "read=data/**"};
  alpha.note = "first approval";
  lf.records.push_back(alpha);
  return lf;
}

}  // namespace

TEST_CASE("lockfile serialization is canonical") {
  SUBCASE("golden bytes, records and files sorted") {
    // Hand-assembled from the schema: version, then skills sorted by
    // name, each record name/combined/files/approved_at/capabilities/
    // note, files sorted by path, two-space indent, trailing newline.
    const std::string expected =
        "{\n"
        "  \"version\": 1,\n"
        "  \"skills\": [\n"
        "    {\n"
        "      \"name\": \"alpha\",\n"
        "      \"combined\": \"1111aaaa\",\n"
        "      \"files\": [\n"
        "        {\n"
        "          \"path\": \"SKILL.md\",\n"
        "          \"sha256\": \"aa\"\n"
        "        },\n"
        "        {\n"
        "          \"path\": \"scripts/run.py\",\n"
        "          \"sha256\": \"bb\"\n"
        "        }\n"
        "      ],\n"
        "      \"approved_at\": 1700000000,\n"
        "      \"capabilities\": [\n"
        "        \"net=api.example.com\",\n"
        "        \"read=data/**\"\n"
        "      ],\n"
        "      \"note\": \"first approval\"\n"
        "    },\n"
        "    {\n"
        "      \"name\": \"zeta\",\n"
        "      \"combined\": \"2222bbbb\",\n"
        "      \"files\": [\n"
        "        {\n"
        "          \"path\": \"SKILL.md\",\n"
        "          \"sha256\": \"cc\"\n"
        "        }\n"
        "      ],\n"
        "      \"approved_at\": 1700000500,\n"
        "      \"capabilities\": [],\n"
        "      \"note\": \"\"\n"
        "    }\n"
        "  ]\n"
        "}\n";
    CHECK(serialize_lockfile(two_record_lockfile()) == expected);
  }

  SUBCASE("serialize, parse, serialize is byte identical") {
    std::string first = serialize_lockfile(two_record_lockfile());
    LockfileParseResult parsed = parse_lockfile(first);
    REQUIRE(parsed.lockfile.has_value());
    CHECK(parsed.errors.empty());
    CHECK(serialize_lockfile(*parsed.lockfile) == first);
  }

  SUBCASE("parse restores every field") {
    LockfileParseResult parsed =
        parse_lockfile(serialize_lockfile(two_record_lockfile()));
    REQUIRE(parsed.lockfile.has_value());
    REQUIRE(parsed.lockfile->records.size() == 2);
    const TrustRecord& alpha = parsed.lockfile->records[0];
    CHECK(alpha.name == "alpha");
    CHECK(alpha.combined == "1111aaaa");
    CHECK(alpha.files ==
          std::vector<std::pair<std::string, std::string>>{
              {"SKILL.md", "aa"}, {"scripts/run.py", "bb"}});
    CHECK(alpha.approved_at == 1700000000);
    CHECK(alpha.capabilities ==
          std::vector<std::string>{"net=api.example.com", "read=data/**"});
    CHECK(alpha.note == "first approval");
    CHECK(parsed.lockfile->records[1].name == "zeta");
  }

  SUBCASE("rejects foreign versions and malformed records") {
    CHECK_FALSE(parse_lockfile("not json").lockfile.has_value());
    CHECK_FALSE(parse_lockfile("[]").lockfile.has_value());
    CHECK_FALSE(
        parse_lockfile("{\"version\": 2, \"skills\": []}").lockfile.has_value());
    CHECK_FALSE(parse_lockfile("{\"version\": 1}").lockfile.has_value());
    // Record without a combined digest.
    CHECK_FALSE(parse_lockfile("{\"version\": 1, \"skills\": [{\"name\": "
                               "\"x\", \"files\": [], \"approved_at\": 1}]}")
                    .lockfile.has_value());
    // File entry without a hash.
    CHECK_FALSE(
        parse_lockfile(
            "{\"version\": 1, \"skills\": [{\"name\": \"x\", \"combined\": "
            "\"ab\", \"files\": [{\"path\": \"SKILL.md\"}], \"approved_at\": "
            "1}]}")
            .lockfile.has_value());
    // Wrong capability type.
    CHECK_FALSE(
        parse_lockfile(
            "{\"version\": 1, \"skills\": [{\"name\": \"x\", \"combined\": "
            "\"ab\", \"files\": [], \"approved_at\": 1, \"capabilities\": "
            "\"net\"}]}")
            .lockfile.has_value());
  }

  SUBCASE("find and upsert") {
    TrustLockfile lf = two_record_lockfile();
    REQUIRE(lf.find("zeta") != nullptr);
    CHECK(lf.find("zeta")->combined == "2222bbbb");
    CHECK(lf.find("missing") == nullptr);

    TrustRecord replacement;
    replacement.name = "zeta";
    replacement.combined = "ffff";
    lf.upsert(replacement);
    CHECK(lf.records.size() == 2);
    CHECK(lf.find("zeta")->combined == "ffff");

    TrustRecord fresh;
    fresh.name = "beta";
    fresh.combined = "abcd";
    lf.upsert(fresh);
    REQUIRE(lf.records.size() == 3);
    CHECK(lf.records[1].name == "beta");  // kept sorted
  }
}

TEST_CASE("lockfile save and load round-trips bodies through the sidecar") {
  TempDir tmp("lockfile");
  const auto path = tmp.path() / kDefaultLockfileName;

  TrustLockfile lf = two_record_lockfile();
  lf.records[0].approved_body = "zeta instructions body\n";
  lf.records[1].approved_body = "alpha instructions body\n";

  REQUIRE(save_lockfile(path, lf));
  CHECK(read_file(path) == serialize_lockfile(lf));

  SUBCASE("sidecar holds one body per record") {
    const auto sidecar = lockfile_sidecar_dir(path);
    CHECK(sidecar.filename() == "skillguard.lock.d");
    CHECK(read_file(sidecar / "alpha.body") == "alpha instructions body\n");
    CHECK(read_file(sidecar / "zeta.body") == "zeta instructions body\n");
  }

  SUBCASE("load restores records and bodies") {
    LockfileParseResult loaded = load_lockfile(path);
    REQUIRE(loaded.lockfile.has_value());
    REQUIRE(loaded.lockfile->records.size() == 2);
    CHECK(loaded.lockfile->find("alpha")->approved_body ==
          "alpha instructions body\n");
    CHECK(loaded.lockfile->find("zeta")->approved_body ==
          "zeta instructions body\n");
  }

  SUBCASE("revoking a record removes its body file") {
    TrustLockfile shrunk = lf;
    shrunk.records.erase(shrunk.records.begin());  // drop zeta
    REQUIRE(save_lockfile(path, shrunk));
    CHECK(std::filesystem::exists(lockfile_sidecar_dir(path) / "alpha.body"));
    CHECK_FALSE(
        std::filesystem::exists(lockfile_sidecar_dir(path) / "zeta.body"));
  }

  SUBCASE("missing sidecar is tolerated") {
    std::filesystem::remove_all(lockfile_sidecar_dir(path));
    LockfileParseResult loaded = load_lockfile(path);
    REQUIRE(loaded.lockfile.has_value());
    CHECK(loaded.lockfile->find("alpha")->approved_body.empty());
  }

  SUBCASE("loading a missing lockfile reports an error") {
    LockfileParseResult missing = load_lockfile(tmp.path() / "absent.lock");
    CHECK_FALSE(missing.lockfile.has_value());
    CHECK_FALSE(missing.errors.empty());
  }
}

TEST_CASE("approve records the package digest, manifest and body") {
  TempDir tmp("approve");
  LoadResult load = make_package(
      tmp.path() / "pdf-processing", table2_skill_md(),
      {{"scripts/extract.py", "print('extract')\n"},
       {"docs/usage.md", "# Usage\n"}});
  REQUIRE(load.package.has_value());
  const SkillPackage& pkg = *load.package;

  SkillMetadata with_caps = pkg.metadata;
  with_caps.extras.emplace_back("capabilities",
                                "read=data/**; net=api.example.com");
  caps::ManifestResult manifest = caps::parse_manifest(with_caps);
  REQUIRE(manifest.manifest.has_value());

  TrustLockfile lf =
      approve(pkg, manifest.manifest, "reviewed by tester", {}, 1723400000);
  REQUIRE(lf.records.size() == 1);
  const TrustRecord& rec = lf.records[0];
  CHECK(rec.name == "pdf-processing");
  CHECK(rec.combined == pkg.digest.combined);
  CHECK(rec.files == pkg.digest.per_file);
  CHECK(rec.approved_at == 1723400000);
  CHECK(rec.capabilities == manifest.manifest->clause_ids());
  CHECK(rec.note == "reviewed by tester");
  CHECK(rec.approved_body == pkg.body);

  SUBCASE("re-approval replaces the record in place") {
    write_file(tmp.path() / "pdf-processing/scripts/extract.py",
               "print('v2')\n");
    LoadResult reload = load_package(tmp.path() / "pdf-processing");
    REQUIRE(reload.package.has_value());
    TrustLockfile updated =
        approve(*reload.package, std::nullopt, "", lf, 1723400100);
    REQUIRE(updated.records.size() == 1);
    CHECK(updated.records[0].combined == reload.package->digest.combined);
    CHECK(updated.records[0].combined != rec.combined);
    CHECK(updated.records[0].approved_at == 1723400100);
    CHECK(updated.records[0].capabilities.empty());
  }
}

TEST_CASE("verify classifies packages against the lockfile") {
  TempDir tmp("verify");
  const auto dir = tmp.path() / "pdf-processing";
  LoadResult load = make_package(dir, table2_skill_md(),
                                 {{"scripts/extract.py", "print('x')\n"},
                                  {"docs/usage.md", "# Usage\n"}});
  REQUIRE(load.package.has_value());
  PolicyConfig policy = PolicyConfig::defaults();
  TrustLockfile lf = approve(*load.package, std::nullopt, "", {}, 1723400000);

  SUBCASE("unchanged package is Trusted") {
    TrustStatus status = verify(*load.package, lf, policy);
    CHECK(status.kind == TrustStatus::Kind::Trusted);
    CHECK(status.record_name == "pdf-processing");
    CHECK_FALSE(status.diff.has_value());
  }

  SUBCASE("unknown name is Unknown") {
    TrustLockfile empty;
    TrustStatus status = verify(*load.package, empty, policy);
    CHECK(status.kind == TrustStatus::Kind::Unknown);
  }

  SUBCASE("edited script is Modified with script_changed") {
    write_file(dir / "scripts/extract.py", "print('tampered')\n");
    LoadResult reload = load_package(dir);
    TrustStatus status = verify(*reload.package, lf, policy);
    REQUIRE(status.kind == TrustStatus::Kind::Modified);
    REQUIRE(status.diff.has_value());
    CHECK(status.diff->modified ==
          std::vector<std::string>{"scripts/extract.py"});
    CHECK(status.diff->added.empty());
    CHECK(status.diff->removed.empty());
    CHECK(status.diff->script_changed);
    CHECK(status.diff->body_change_ratio == 0.0);
  }

  SUBCASE("added and removed files are reported") {
    write_file(dir / "payload.txt", "x\n");
    std::filesystem::remove(dir / "docs/usage.md");
    LoadResult reload = load_package(dir);
    TrustStatus status = verify(*reload.package, lf, policy);
    REQUIRE(status.diff.has_value());
    CHECK(status.diff->added == std::vector<std::string>{"payload.txt"});
    CHECK(status.diff->removed == std::vector<std::string>{"docs/usage.md"});
    CHECK_FALSE(status.diff->script_changed);
  }

  SUBCASE("edited body yields the word-diff ratio") {
    std::string reflowed = table2_skill_md();
    std::size_t pos = reflowed.find("bundled extract.py script");
    REQUIRE(pos != std::string::npos);
    reflowed.replace(pos, std::string("bundled extract.py script").size(),
                     "bundled extract.py helper");
    write_file(dir / "SKILL.md", reflowed);
    LoadResult reload = load_package(dir);
    TrustStatus status = verify(*reload.package, lf, policy);
    REQUIRE(status.diff.has_value());
    CHECK(status.diff->modified == std::vector<std::string>{"SKILL.md"});
    // One replaced word out of the body's words: ratio is 2/N where N
    // is the approved body word count.
    double expected = oracles::word_diff_ratio(load.package->body,
                                               reload.package->body);
    CHECK(status.diff->body_change_ratio == doctest::Approx(expected));
    CHECK(status.diff->body_change_ratio > 0.0);
    CHECK_FALSE(status.diff->script_changed);
  }
}

TEST_CASE("verify_dir measures tampered trees without trusting frontmatter") {
  TempDir tmp("verifydir");
  const auto dir = tmp.path() / "pdf-processing";
  LoadResult load = make_package(dir, table2_skill_md(),
                                 {{"scripts/extract.py", "print('x')\n"}});
  REQUIRE(load.package.has_value());
  PolicyConfig policy = PolicyConfig::defaults();
  TrustLockfile lf = approve(*load.package, std::nullopt, "", {}, 1723400000);

  SUBCASE("clean tree is Trusted") {
    TrustStatus status = verify_dir(dir, lf, policy);
    CHECK(status.kind == TrustStatus::Kind::Trusted);
  }

  SUBCASE("scanner state files next to the package do not break trust") {
    REQUIRE(save_lockfile(dir / kDefaultLockfileName, lf));
    write_file(dir / "skillguard.baseline.json", "{}\n");
    TrustStatus status = verify_dir(dir, lf, policy);
    CHECK(status.kind == TrustStatus::Kind::Trusted);
  }

  SUBCASE("single byte flips are always Modified") {
    std::mt19937 rng(20240815);
    std::vector<std::string> rel_paths = {"SKILL.md", "scripts/extract.py"};
    for (int trial = 0; trial < 64; ++trial) {
      const std::string& rel = rel_paths[trial % rel_paths.size()];
      std::string original = read_file(dir / rel);
      std::string mutated = original;
      std::size_t at = rng() % mutated.size();
      mutated[at] = char(mutated[at] ^ 0x01);
      write_file(dir / rel, mutated);
      TrustStatus status = verify_dir(dir, lf, policy);
      CHECK(status.kind == TrustStatus::Kind::Modified);
      write_file(dir / rel, original);
    }
    CHECK(verify_dir(dir, lf, policy).kind == TrustStatus::Kind::Trusted);
  }

  SUBCASE("corrupted frontmatter falls back to the only record") {
    write_file(dir / "SKILL.md", "injected content, no frontmatter\n");
    TrustStatus status = verify_dir(dir, lf, policy);
    REQUIRE(status.kind == TrustStatus::Kind::Modified);
    CHECK(status.record_name == "pdf-processing");
    REQUIRE(status.diff.has_value());
    CHECK(status.diff->modified == std::vector<std::string>{"SKILL.md"});
    // No parseable body on disk: the ratio is pinned to worst case.
    CHECK(status.diff->body_change_ratio == 1.0);
  }

  SUBCASE("multi-record lockfile falls back to the directory name") {
    TrustRecord other;
    other.name = "aaa-decoy";
    other.combined = "00";
    TrustLockfile multi = lf;
    multi.upsert(other);
    write_file(dir / "SKILL.md", "no frontmatter here\n");
    TrustStatus status = verify_dir(dir, multi, policy);
    CHECK(status.kind == TrustStatus::Kind::Modified);
    CHECK(status.record_name == "pdf-processing");
  }

  SUBCASE("deleted SKILL.md still verifies") {
    std::filesystem::remove(dir / "SKILL.md");
    TrustStatus status = verify_dir(dir, lf, policy);
    REQUIRE(status.kind == TrustStatus::Kind::Modified);
    REQUIRE(status.diff.has_value());
    CHECK(status.diff->removed == std::vector<std::string>{"SKILL.md"});
    CHECK(status.diff->body_change_ratio == 1.0);
  }

  SUBCASE("unrelated directory is Unknown") {
    TrustLockfile empty;
    CHECK(verify_dir(dir, empty, policy).kind == TrustStatus::Kind::Unknown);
  }
}

TEST_CASE("word_diff_ratio") {
  SUBCASE("frozen values") {
    CHECK(word_diff_ratio("", "") == 0.0);
    CHECK(word_diff_ratio("a b c", "a b c") == 0.0);
    // Pure reflow: same words, different whitespace.
    CHECK(word_diff_ratio("Extract text and tables\nfrom PDF files.",
                          "Extract  text and tables from\nPDF files.") == 0.0);
    // One substitution in nine words: one removed plus one added.
    CHECK(word_diff_ratio("the quick brown fox jumps over the lazy dog",
                          "the quick red fox jumps over the lazy dog") ==
          doctest::Approx(2.0 / 9.0));
    // Pure append: five new words over ten old.
    CHECK(word_diff_ratio("one two three four five six seven eight nine ten",
                          "one two three four five six seven eight nine ten "
                          "plus a few more words") == doctest::Approx(0.5));
    // Old side empty: every new word counts, denominator floors at 1.
    CHECK(word_diff_ratio("", "a b c") == 3.0);
    // Full replacement.
    CHECK(word_diff_ratio("alpha beta", "gamma delta") == 2.0);
  }

  SUBCASE("matches the reference implementation on random pairs") {
    std::mt19937 rng(987123);
    const std::vector<std::string> vocab = {"read", "write", "pdf",  "file",
                                            "the",  "tool",  "call", "merge",
                                            "text", "table"};
    for (int trial = 0; trial < 400; ++trial) {
      auto make_text = [&](std::size_t max_len) {
        std::size_t n = rng() % (max_len + 1);
        std::string text;
        for (std::size_t i = 0; i < n; ++i) {
          if (!text.empty()) text += (rng() % 4 == 0) ? '\n' : ' ';
          text += vocab[rng() % vocab.size()];
        }
        return text;
      };
      std::string old_text = make_text(12);
      std::string new_text;
      if (rng() % 2 == 0) {
        new_text = make_text(12);
      } else {
        // Mutate the old text so near-identical pairs are covered too.
        new_text = old_text;
        if (!new_text.empty() && rng() % 2 == 0) {
          new_text += " " + vocab[rng() % vocab.size()];
        }
      }
      CAPTURE(old_text);
      CAPTURE(new_text);
      CHECK(word_diff_ratio(old_text, new_text) ==
            doctest::Approx(oracles::word_diff_ratio(old_text, new_text)));
    }
  }
}

TEST_CASE("consent_delta separates cosmetic edits from consequential ones") {
  PolicyConfig policy = PolicyConfig::defaults();  // threshold 0.05

  SUBCASE("empty diff auto-accepts") {
    ConsentDecision d = consent_delta({}, policy);
    CHECK(d.auto_accept);
    CHECK(d.reasons.empty());
  }

  SUBCASE("body drift under the threshold auto-accepts") {
    DiffReport diff;
    diff.modified = {"SKILL.md"};
    diff.body_change_ratio = 0.03;
    ConsentDecision d = consent_delta(diff, policy);
    CHECK(d.auto_accept);
  }

  SUBCASE("threshold is strict: exactly at the limit still auto-accepts") {
    DiffReport diff;
    diff.modified = {"SKILL.md"};
    diff.body_change_ratio = 0.05;
    CHECK(consent_delta(diff, policy).auto_accept);
  }

  SUBCASE("body drift over the threshold re-prompts") {
    DiffReport diff;
    diff.modified = {"SKILL.md"};
    diff.body_change_ratio = 0.0501;
    ConsentDecision d = consent_delta(diff, policy);
    CHECK_FALSE(d.auto_accept);
    REQUIRE(d.reasons.size() == 1);
    CHECK(d.reasons[0].find("instruction body changed") != std::string::npos);
  }

  SUBCASE("script change always re-prompts") {
    DiffReport diff;
    diff.modified = {"scripts/run.py"};
    diff.script_changed = true;
    ConsentDecision d = consent_delta(diff, policy);
    CHECK_FALSE(d.auto_accept);
    REQUIRE(d.reasons.size() == 1);
    CHECK(d.reasons[0] == "executable content changed");
  }

  SUBCASE("added or removed files always re-prompt") {
    DiffReport diff;
    diff.added = {"new.txt"};
    diff.removed = {"a.txt", "b.txt"};
    ConsentDecision d = consent_delta(diff, policy);
    CHECK_FALSE(d.auto_accept);
    REQUIRE(d.reasons.size() == 2);
    CHECK(d.reasons[0] == "1 file(s) added");
    CHECK(d.reasons[1] == "2 file(s) removed");
  }

  SUBCASE("modified supporting file re-prompts") {
    DiffReport diff;
    diff.modified = {"docs/usage.md"};
    ConsentDecision d = consent_delta(diff, policy);
    CHECK_FALSE(d.auto_accept);
    REQUIRE(d.reasons.size() == 1);
    CHECK(d.reasons[0] == "supporting file changed: docs/usage.md");
  }

  SUBCASE("all reasons accumulate") {
    DiffReport diff;
    diff.added = {"x"};
    diff.modified = {"SKILL.md", "docs/usage.md"};
    diff.script_changed = true;
    diff.body_change_ratio = 0.9;
    ConsentDecision d = consent_delta(diff, policy);
    CHECK_FALSE(d.auto_accept);
    CHECK(d.reasons.size() == 4);
  }

  SUBCASE("policy can raise the allowance") {
    PolicyConfig loose = policy;
    loose.body_delta_threshold = 0.5;
    DiffReport diff;
    diff.modified = {"SKILL.md"};
    diff.body_change_ratio = 0.3;
    CHECK(consent_delta(diff, loose).auto_accept);
    CHECK_FALSE(consent_delta(diff, policy).auto_accept);
  }
}

TEST_CASE("modified_finding renders the diff as a T2.2 finding") {
  TempDir tmp("modfinding");
  LoadResult load =
      make_package(tmp.path() / "pdf-processing", table2_skill_md());
  REQUIRE(load.package.has_value());

  DiffReport diff;
  diff.added = {"payload.py"};
  diff.modified = {"scripts/run.py"};
  diff.script_changed = true;
  Finding f = modified_finding(*load.package, diff);
  CHECK(f.detector == DetectorId::T2_2);
  CHECK(f.severity == Severity::Critical);
  CHECK(f.confidence == Confidence::Confirmed);
  CHECK(f.span.file == "SKILL.md");
  CHECK(f.evidence == "pdf-processing");
  CHECK(f.message ==
        "content changed since approval: 1 added, 0 removed, 1 modified; "
        "executable content affected");
  CHECK(f.rule == "trust-modified");

  DiffReport doc_only;
  doc_only.modified = {"SKILL.md"};
  Finding g = modified_finding(*load.package, doc_only);
  CHECK(g.severity == Severity::High);
  CHECK(g.message ==
        "content changed since approval: 0 added, 0 removed, 1 modified");
}
