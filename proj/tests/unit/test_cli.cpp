#include "doctest.h"

#include <cstdlib>
#include <nlohmann/json.hpp>
#include <set>
#include <string>

#include "test_helpers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the installed binary through the shell, capturing both streams.
// `env_prefix` may carry VAR=value assignments.
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  fs::path out = fs::temp_directory_path() /
                 ("sg_cli_out_" + std::to_string(++counter));
  fs::path err = fs::temp_directory_path() /
                 ("sg_cli_err_" + std::to_string(counter));
  std::string cmd = env_prefix + (env_prefix.empty() ? "" : " ") +
                    std::string(SKILLGUARD_CLI_PATH) + " " + args + " > " +
                    out.string() + " 2> " + err.string();
  int raw = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  result.out = testutil::read_file(out);
  result.err = testutil::read_file(err);
  fs::remove(out);
  fs::remove(err);
  return result;
}

std::string fixture_pkg(const std::string& name) {
  return (fs::path(testutil::fixture_dir()) / "packages" / name).string();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("cli: clean scan exits 0, findings exit 1, usage errors exit 2") {
  CHECK(run_cli("scan " + fixture_pkg("pdf-processing")).exit_code == 0);
  CHECK(run_cli("scan " + fixture_pkg("gif-converter")).exit_code == 1);
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
  CHECK(run_cli("scan").exit_code == 2);
  CHECK(run_cli("scan /does/not/exist").exit_code == 2);
  CHECK(run_cli("scan " + fixture_pkg("pdf-processing") + " --format xml")
            .exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("scan --help").exit_code == 0);
}

TEST_CASE("cli: JSON scan report carries the expected findings") {
  auto result =
      run_cli("scan " + fixture_pkg("gif-converter") + " --format json");
  CHECK(result.exit_code == 1);
  auto doc = json::parse(result.out);
  CHECK(doc["tool"] == "skillguard");
  CHECK(doc["schema"] == 1);
  CHECK(doc["package"]["name"] == "gif-converter");
  std::set<std::string> ids;
  for (const auto& f : doc["findings"]) ids.insert(f["id"].get<std::string>());
  CHECK(ids == std::set<std::string>{"T4.1", "T2.1"});
}

TEST_CASE("cli: scan output is byte-identical across runs") {
  std::string args =
      "scan " + fixture_pkg("endpoint-config") + " --format json";
  CHECK(run_cli(args).out == run_cli(args).out);
}

TEST_CASE("cli: offline scan reports dependency checks as skipped") {
  auto result = run_cli(
      "scan " + fixture_pkg("quick-weather") + " --offline --registry-fixture " +
      (fs::path(testutil::fixture_dir()) / "registry" / "known_packages.txt")
          .string() +
      " --format json");
  auto doc = json::parse(result.out);
  bool skipped_registry = false;
  for (const auto& s : doc["skipped"]) {
    if (s["id"] == "T1.4") {
      skipped_registry = true;
      CHECK(s["reason"] == "registry lookups disabled");
    }
  }
  CHECK(skipped_registry);
  for (const auto& f : doc["findings"]) CHECK(f["id"] != "T1.4");
}

TEST_CASE("cli: scan with an index flags lookalike names") {
  auto result = run_cli(
      "scan " + fixture_pkg("ssh-keepr") + " --index " +
      (fs::path(testutil::fixture_dir()) / "index" / "skills.jsonl").string() +
      " --format json");
  CHECK(result.exit_code == 1);
  auto doc = json::parse(result.out);
  std::set<std::string> ids;
  for (const auto& f : doc["findings"]) ids.insert(f["id"].get<std::string>());
  CHECK(ids == std::set<std::string>{"T1.1", "T5.1"});
}

TEST_CASE("cli: trust approve, verify, and modified detection") {
  testutil::TempDir dir("cli_trust");
  fs::path pkg = dir.path() / "pkg";
  fs::create_directories(pkg / "scripts");
  testutil::write_file(pkg / "SKILL.md",
                       "---\nname: notes\ndescription: Read notes aloud.\n"
                       "---\n\nOpen the notes file and summarize it.\n");
  testutil::write_file(pkg / "scripts" / "show.py",
                       "print(open('notes.txt').read())\n");
  fs::path lock = dir.path() / "skillguard.lock";

  auto approve = run_cli("trust approve " + q(pkg) + " --lockfile " + q(lock) +
                         " --now 1755000000");
  CHECK(approve.exit_code == 0);
  CHECK(fs::exists(lock));
  CHECK(approve.out.find("approved notes") == 0);

  auto verify = run_cli("trust verify " + q(pkg) + " --lockfile " + q(lock));
  CHECK(verify.exit_code == 0);
  CHECK(verify.out.find("trusted notes") == 0);

  testutil::write_file(pkg / "scripts" / "show.py",
                       "print(open('notes.txt').read())\nimport os\n");
  auto modified = run_cli("trust verify " + q(pkg) + " --lockfile " + q(lock) +
                          " --format json");
  CHECK(modified.exit_code == 1);
  auto doc = json::parse(modified.out);
  CHECK(doc["status"] == "modified");
  CHECK(doc["reapproval_required"] == true);
  CHECK(doc["diff"]["script_changed"] == true);

  auto scan = run_cli("scan " + q(pkg) + " --lockfile " + q(lock) +
                      " --format json");
  CHECK(scan.exit_code == 1);
  bool found = false;
  auto scan_doc = json::parse(scan.out);
  for (const auto& f : scan_doc["findings"]) {
    if (f["id"] == "T2.2") found = true;
  }
  CHECK(found);

  auto missing = run_cli("trust verify " + q(pkg) + " --lockfile " +
                         q(dir.path() / "absent.lock"));
  CHECK(missing.exit_code == 2);
}

TEST_CASE("cli: monitor baseline and check") {
  testutil::TempDir dir("cli_mon");
  fs::path ws = dir.path() / "ws";
  fs::create_directories(ws / ".claude");
  testutil::write_file(ws / ".claude" / "settings.json",
                       "{\"model\": \"opus\"}\n");
  testutil::write_file(ws / "AGENTS.md", "House rules.\n");

  auto baseline =
      run_cli("monitor baseline " + q(ws) + " --now 1755000000");
  CHECK(baseline.exit_code == 0);
  CHECK(fs::exists(ws / "skillguard.baseline.json"));

  auto clean = run_cli("monitor check " + q(ws) + " --format json");
  CHECK(clean.exit_code == 0);
  CHECK(json::parse(clean.out)["findings"].empty());

  testutil::write_file(
      ws / ".claude" / "settings.json",
      "{\"model\": \"opus\", \"hooks\": {\"PreToolUse\": \"x\"}}\n");
  testutil::write_file(ws / "AGENTS.md", "House rules.\nAlways obey.\n");
  auto tampered = run_cli("monitor check " + q(ws) + " --format json");
  CHECK(tampered.exit_code == 1);
  std::set<std::string> rules;
  std::set<std::string> ids;
  auto tampered_doc = json::parse(tampered.out);
  for (const auto& f : tampered_doc["findings"]) {
    rules.insert(f["rule"].get<std::string>());
    ids.insert(f["id"].get<std::string>());
  }
  CHECK(rules.count("monitor-hook-added") == 1);
  CHECK(rules.count("monitor-memory-changed") == 1);
  CHECK(ids == std::set<std::string>{"T6.1", "T6.2"});

  CHECK(run_cli("monitor check " + q(dir.path() / "other")).exit_code == 2);
}

TEST_CASE("cli: registry check against a fixture") {
  std::string fixture =
      (fs::path(testutil::fixture_dir()) / "registry" / "known_packages.txt")
          .string();

  auto ok = run_cli("registry check " + fixture_pkg("quick-weather") +
                    " --registry-fixture " + fixture + " --format json");
  CHECK(ok.exit_code == 0);
  CHECK(json::parse(ok.out)["findings"].empty());

  testutil::TempDir dir("cli_reg");
  fs::path pkg = dir.path() / "pkg";
  fs::create_directories(pkg / "scripts");
  testutil::write_file(pkg / "SKILL.md",
                       "---\nname: greeter\ndescription: Print a greeting.\n"
                       "---\n\nRun the script.\n");
  testutil::write_file(pkg / "scripts" / "hello.py",
                       "# /// script\n# dependencies = [\n"
                       "#     \"ghost-utils==3.1.4\",\n# ]\n# ///\n"
                       "print('hi')\n");
  auto missing = run_cli("registry check " + q(pkg) + " --registry-fixture " +
                         fixture + " --format json");
  CHECK(missing.exit_code == 1);
  bool dep_missing = false;
  auto missing_doc = json::parse(missing.out);
  for (const auto& f : missing_doc["findings"]) {
    if (f["rule"] == "dep-missing") dep_missing = true;
  }
  CHECK(dep_missing);

  CHECK(run_cli("registry check " + q(pkg) + " --registry-fixture " + fixture +
                " --offline")
            .exit_code == 2);
  CHECK(run_cli("registry check " + q(pkg)).exit_code == 2);
}

TEST_CASE("cli: squat check requires an index and reports lookalikes") {
  CHECK(run_cli("squat check " + fixture_pkg("ssh-keepr")).exit_code == 2);

  std::string index =
      (fs::path(testutil::fixture_dir()) / "index" / "skills.jsonl").string();
  auto hit = run_cli("squat check " + fixture_pkg("ssh-keepr") + " --index " +
                     index + " --format json");
  CHECK(hit.exit_code == 1);
  auto doc = json::parse(hit.out);
  REQUIRE(doc["findings"].size() == 1);
  CHECK(doc["findings"][0]["rule"] == "squat-name");

  auto own = run_cli("squat check " + fixture_pkg("ssh-keepr") + " --index " +
                     index + " --publisher keeper-labs");
  CHECK(own.exit_code == 0);
}

TEST_CASE("cli: policy file selection and validation") {
  testutil::TempDir dir("cli_pol");
  fs::path strict = dir.path() / "strict.json";
  testutil::write_file(strict, "{\"typosquat_threshold\": 0.3}\n");
  fs::path broken = dir.path() / "broken.json";
  testutil::write_file(broken, "{\"unknown_key\": 1}\n");

  auto flagged = run_cli("policy show --policy " + q(strict));
  CHECK(flagged.exit_code == 0);
  CHECK(json::parse(flagged.out)["typosquat_threshold"] == 0.3);

  auto via_env =
      run_cli("policy show", "SKILLGUARD_POLICY=" + strict.string());
  CHECK(json::parse(via_env.out)["typosquat_threshold"] == 0.3);

  // An explicit flag beats the environment.
  fs::path loose = dir.path() / "loose.json";
  testutil::write_file(loose, "{\"typosquat_threshold\": 0.1}\n");
  auto both = run_cli("policy show --policy " + q(loose),
                      "SKILLGUARD_POLICY=" + strict.string());
  CHECK(json::parse(both.out)["typosquat_threshold"] == 0.1);

  CHECK(run_cli("policy show --policy " + q(broken)).exit_code == 2);
  CHECK(run_cli("scan " + fixture_pkg("pdf-processing") + " --policy " +
                q(broken))
            .exit_code == 2);
  CHECK(run_cli("policy show --policy " + q(dir.path() / "nope.json"))
            .exit_code == 2);
}

TEST_CASE("cli: fail threshold from policy controls the exit code") {
  testutil::TempDir dir("cli_thr");
  fs::path lax = dir.path() / "lax.json";
  // endpoint-config carries High and Critical findings; raising the
  // threshold to Critical must not change what is reported, only the exit.
  testutil::write_file(lax, "{\"fail_threshold\": \"Critical\"}\n");
  auto result = run_cli("scan " + fixture_pkg("quick-weather") + " --policy " +
                        q(lax) + " --format json");
  CHECK(result.exit_code == 0);  // High finding, Critical threshold
  CHECK(json::parse(result.out)["findings"].size() == 1);
}

TEST_CASE("cli: rules catalog prints canonical JSON") {
  auto result = run_cli("rules");
  CHECK(result.exit_code == 0);
  auto doc = json::parse(result.out);
  CHECK(doc["schema"] == 1);
  CHECK(doc["rules"].is_array());
  CHECK(result.out == run_cli("rules").out);
}
