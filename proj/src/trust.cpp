#include "skillguard/trust.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "skillguard/hash.hpp"

namespace skillguard::trust {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

bool is_script_path(const std::string& path, const PolicyConfig& policy) {
  return !script_ecosystem(path, policy.model_config()).empty();
}

/// Diff of two sorted (path, hex) lists.
DiffReport diff_files(
    const std::vector<std::pair<std::string, std::string>>& approved,
    const std::vector<std::pair<std::string, std::string>>& current,
    const PolicyConfig& policy) {
  DiffReport diff;
  std::size_t i = 0, j = 0;
  auto track = [&](const std::string& path, std::vector<std::string>* bucket) {
    bucket->push_back(path);
    if (is_script_path(path, policy)) diff.script_changed = true;
  };
  while (i < approved.size() || j < current.size()) {
    if (j == current.size() ||
        (i < approved.size() && approved[i].first < current[j].first)) {
      track(approved[i].first, &diff.removed);
      ++i;
    } else if (i == approved.size() || current[j].first < approved[i].first) {
      track(current[j].first, &diff.added);
      ++j;
    } else {
      if (approved[i].second != current[j].second) {
        track(approved[i].first, &diff.modified);
      }
      ++i;
      ++j;
    }
  }
  return diff;
}

bool in_list(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

TrustStatus status_against_record(
    const TrustRecord& record,
    const std::vector<std::pair<std::string, std::string>>& per_file,
    const std::string& combined, std::string_view body, bool body_known,
    const PolicyConfig& policy) {
  TrustStatus status;
  status.record_name = record.name;
  if (combined == record.combined) {
    status.kind = TrustStatus::Kind::Trusted;
    return status;
  }
  status.kind = TrustStatus::Kind::Modified;
  DiffReport diff = diff_files(record.files, per_file, policy);
  if (in_list(diff.modified, "SKILL.md") || in_list(diff.added, "SKILL.md") ||
      in_list(diff.removed, "SKILL.md")) {
    if (body_known && !record.approved_body.empty()) {
      diff.body_change_ratio = word_diff_ratio(record.approved_body, body);
    } else {
      // No approved body to compare against: assume the worst.
      diff.body_change_ratio = 1.0;
    }
  }
  status.diff = std::move(diff);
  return status;
}

}  // namespace

const TrustRecord* TrustLockfile::find(std::string_view name) const {
  for (const TrustRecord& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

void TrustLockfile::upsert(TrustRecord record) {
  for (TrustRecord& r : records) {
    if (r.name == record.name) {
      r = std::move(record);
      return;
    }
  }
  records.push_back(std::move(record));
  std::sort(records.begin(), records.end(),
            [](const TrustRecord& a, const TrustRecord& b) {
              return a.name < b.name;
            });
}

std::string serialize_lockfile(const TrustLockfile& lf) {
  ordered_json doc;
  doc["version"] = lf.version;
  doc["skills"] = ordered_json::array();
  std::vector<const TrustRecord*> sorted;
  for (const TrustRecord& r : lf.records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const TrustRecord* a, const TrustRecord* b) {
              return a->name < b->name;
            });
  for (const TrustRecord* r : sorted) {
    ordered_json rec;
    rec["name"] = r->name;
    rec["combined"] = r->combined;
    rec["files"] = ordered_json::array();
    auto files = r->files;
    std::sort(files.begin(), files.end());
    for (const auto& [path, hex] : files) {
      ordered_json f;
      f["path"] = path;
      f["sha256"] = hex;
      rec["files"].push_back(std::move(f));
    }
    rec["approved_at"] = r->approved_at;
    rec["capabilities"] = r->capabilities;
    rec["note"] = r->note;
    doc["skills"].push_back(std::move(rec));
  }
  return doc.dump(2) + "\n";
}

LockfileParseResult parse_lockfile(std::string_view json_text) {
  LockfileParseResult result;
  ordered_json doc = ordered_json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    result.errors.push_back("lockfile is not a JSON object");
    return result;
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer() ||
      doc["version"].get<int>() != 1) {
    result.errors.push_back("unsupported lockfile version");
    return result;
  }
  if (!doc.contains("skills") || !doc["skills"].is_array()) {
    result.errors.push_back("lockfile has no skills array");
    return result;
  }

  TrustLockfile lf;
  for (const auto& rec : doc["skills"]) {
    if (!rec.is_object() || !rec.contains("name") ||
        !rec["name"].is_string() || !rec.contains("combined") ||
        !rec["combined"].is_string() || !rec.contains("files") ||
        !rec["files"].is_array() || !rec.contains("approved_at") ||
        !rec["approved_at"].is_number_integer()) {
      result.errors.push_back("malformed skill record");
      return result;
    }
    TrustRecord r;
    r.name = rec["name"].get<std::string>();
    r.combined = rec["combined"].get<std::string>();
    for (const auto& f : rec["files"]) {
      if (!f.is_object() || !f.contains("path") || !f["path"].is_string() ||
          !f.contains("sha256") || !f["sha256"].is_string()) {
        result.errors.push_back("malformed file record in " + r.name);
        return result;
      }
      r.files.emplace_back(f["path"].get<std::string>(),
                           f["sha256"].get<std::string>());
    }
    std::sort(r.files.begin(), r.files.end());
    r.approved_at = rec["approved_at"].get<std::int64_t>();
    if (rec.contains("capabilities")) {
      if (!rec["capabilities"].is_array()) {
        result.errors.push_back("capabilities must be an array in " + r.name);
        return result;
      }
      for (const auto& c : rec["capabilities"]) {
        if (!c.is_string()) {
          result.errors.push_back("capabilities must be strings in " + r.name);
          return result;
        }
        r.capabilities.push_back(c.get<std::string>());
      }
    }
    if (rec.contains("note")) {
      if (!rec["note"].is_string()) {
        result.errors.push_back("note must be a string in " + r.name);
        return result;
      }
      r.note = rec["note"].get<std::string>();
    }
    lf.records.push_back(std::move(r));
  }
  std::sort(lf.records.begin(), lf.records.end(),
            [](const TrustRecord& a, const TrustRecord& b) {
              return a.name < b.name;
            });
  result.lockfile = std::move(lf);
  return result;
}

std::filesystem::path lockfile_sidecar_dir(
    const std::filesystem::path& lockfile) {
  std::filesystem::path dir = lockfile;
  dir += ".d";
  return dir;
}

bool save_lockfile(const std::filesystem::path& path, const TrustLockfile& lf,
                   std::string* error) {
  namespace fs = std::filesystem;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
      if (error) *error = "cannot write " + path.string();
      return false;
    }
    out << serialize_lockfile(lf);
    if (!out) {
      if (error) *error = "write failed for " + path.string();
      return false;
    }
  }

  const fs::path sidecar = lockfile_sidecar_dir(path);
  std::error_code ec;
  fs::create_directories(sidecar, ec);
  if (ec) {
    if (error) *error = "cannot create " + sidecar.string();
    return false;
  }
  for (const TrustRecord& r : lf.records) {
    std::ofstream out(sidecar / (r.name + ".body"),
                      std::ios::binary | std::ios::trunc);
    if (!out) {
      if (error) *error = "cannot write body sidecar for " + r.name;
      return false;
    }
    out << r.approved_body;
  }
  // Bodies of revoked records must not linger.
  for (const auto& entry : fs::directory_iterator(sidecar, ec)) {
    if (entry.path().extension() != ".body") continue;
    std::string name = entry.path().stem().string();
    if (!lf.find(name)) fs::remove(entry.path(), ec);
  }
  return true;
}

LockfileParseResult load_lockfile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    LockfileParseResult r;
    r.errors.push_back("cannot read " + path.string());
    return r;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  LockfileParseResult result = parse_lockfile(buf.str());
  if (!result.lockfile) return result;

  const std::filesystem::path sidecar = lockfile_sidecar_dir(path);
  for (TrustRecord& r : result.lockfile->records) {
    std::ifstream body(sidecar / (r.name + ".body"), std::ios::binary);
    if (!body) continue;  // tolerated: ratio falls back to worst case
    std::ostringstream b;
    b << body.rdbuf();
    r.approved_body = b.str();
  }
  return result;
}

TrustLockfile approve(const SkillPackage& pkg,
                      const std::optional<caps::CapabilityManifest>& manifest,
                      std::string note, TrustLockfile lockfile,
                      std::int64_t now) {
  TrustRecord record;
  record.name = pkg.metadata.name;
  record.combined = pkg.digest.combined;
  record.files = pkg.digest.per_file;
  record.approved_at = now;
  if (manifest) record.capabilities = manifest->clause_ids();
  record.note = std::move(note);
  record.approved_body = pkg.body;
  lockfile.upsert(std::move(record));
  return lockfile;
}

TrustStatus verify(const SkillPackage& pkg, const TrustLockfile& lockfile,
                   const PolicyConfig& policy) {
  const TrustRecord* record = lockfile.find(pkg.metadata.name);
  if (!record) return {};
  return status_against_record(*record, pkg.digest.per_file,
                               pkg.digest.combined, pkg.body, true, policy);
}

TrustStatus verify_dir(const std::filesystem::path& dir,
                       const TrustLockfile& lockfile,
                       const PolicyConfig& policy) {
  DirDigest dd = digest_dir(dir, policy.model_config());

  // Name resolution is best effort: parsed frontmatter, then the only
  // record, then the directory basename.
  const TrustRecord* record = nullptr;
  std::string body;
  bool body_known = false;
  if (dd.skill_md) {
    FrontmatterResult fm = parse_frontmatter(*dd.skill_md);
    if (fm.metadata) {
      record = lockfile.find(fm.metadata->name);
      body = std::move(fm.body);
      body_known = true;
    }
  }
  if (!record && lockfile.records.size() == 1) {
    record = &lockfile.records.front();
  }
  if (!record) {
    record = lockfile.find(dir.filename().string());
  }
  if (!record) return {};
  return status_against_record(*record, dd.digest.per_file,
                               dd.digest.combined, body, body_known, policy);
}

ConsentDecision consent_delta(const DiffReport& diff,
                              const PolicyConfig& policy) {
  ConsentDecision decision;
  if (diff.script_changed) {
    decision.reasons.push_back("executable content changed");
  }
  if (!diff.added.empty()) {
    decision.reasons.push_back(std::to_string(diff.added.size()) +
                               " file(s) added");
  }
  if (!diff.removed.empty()) {
    decision.reasons.push_back(std::to_string(diff.removed.size()) +
                               " file(s) removed");
  }
  // Only the SKILL.md body gets the similarity allowance; every other
  // modified file re-prompts outright.
  for (const std::string& path : diff.modified) {
    if (path != "SKILL.md" && !is_script_path(path, policy)) {
      decision.reasons.push_back("supporting file changed: " + path);
    }
  }
  if (diff.body_change_ratio > policy.body_delta_threshold) {
    std::ostringstream why;
    why << "instruction body changed beyond the threshold ("
        << diff.body_change_ratio << " > " << policy.body_delta_threshold
        << ")";
    decision.reasons.push_back(why.str());
  }
  decision.auto_accept = decision.reasons.empty();
  return decision;
}

double word_diff_ratio(std::string_view old_body, std::string_view new_body) {
  std::vector<std::string> old_words = split_words(old_body);
  std::vector<std::string> new_words = split_words(new_body);

  // LCS length via row-rolling DP.
  std::vector<std::size_t> prev(new_words.size() + 1, 0);
  std::vector<std::size_t> cur(new_words.size() + 1, 0);
  for (std::size_t i = 1; i <= old_words.size(); ++i) {
    for (std::size_t j = 1; j <= new_words.size(); ++j) {
      if (old_words[i - 1] == new_words[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  std::size_t lcs = prev[new_words.size()];
  std::size_t removed = old_words.size() - lcs;
  std::size_t added = new_words.size() - lcs;
  return double(removed + added) /
         double(std::max<std::size_t>(1, old_words.size()));
}

Finding modified_finding(const SkillPackage& pkg, const DiffReport& diff) {
  Finding f;
  f.detector = DetectorId::T2_2;
  f.severity = diff.script_changed ? Severity::Critical : Severity::High;
  f.confidence = Confidence::Confirmed;
  f.phase = detector_phase(DetectorId::T2_2);
  f.span.file = "SKILL.md";
  f.span.line_start = f.span.line_end = 1;
  f.evidence = pkg.metadata.name;
  std::ostringstream msg;
  msg << "content changed since approval: " << diff.added.size() << " added, "
      << diff.removed.size() << " removed, " << diff.modified.size()
      << " modified";
  if (diff.script_changed) msg << "; executable content affected";
  f.message = msg.str();
  f.rule = "trust-modified";
  return f;
}

}  // namespace skillguard::trust
