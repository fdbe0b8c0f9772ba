#include "skillguard/pattern.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <stdexcept>

namespace skillguard::detect {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

/// Lines plus their lowercase shadow for gate prefiltering.
struct PreparedUnit {
  std::vector<LineRef> lines;
  std::vector<std::string> lowered;
};

PreparedUnit prepare(std::string_view content) {
  PreparedUnit prep;
  prep.lines = split_lines(content);
  prep.lowered.reserve(prep.lines.size());
  for (const LineRef& line : prep.lines) prep.lowered.push_back(to_lower(line.text));
  return prep;
}

bool gates_pass(const std::vector<std::string>& gates,
                const std::string& lowered_line) {
  if (gates.empty()) return true;
  for (const std::string& gate : gates) {
    if (lowered_line.find(gate) != std::string::npos) return true;
  }
  return false;
}

std::vector<int> match_lines(const std::regex& re,
                             const std::vector<std::string>& gates,
                             const PreparedUnit& prep) {
  std::vector<int> hits;
  for (std::size_t i = 0; i < prep.lines.size(); ++i) {
    if (!gates_pass(gates, prep.lowered[i])) continue;
    if (std::regex_search(prep.lines[i].text.begin(), prep.lines[i].text.end(),
                          re)) {
      hits.push_back(prep.lines[i].number);
    }
  }
  return hits;
}

/// The outbound-send pattern shared by the exfiltration rules and the
/// network-send classifier: POST-style client calls, data-carrying curl
/// and wget, scp, fetch with an explicit method.
const char* kOutboundSendPattern =
    R"REGEX(\b(requests|httpx|axios)\.(post|put|patch)\s*\(|\burlopen\s*\([^)]*,|\.post\s*\(|\bcurl\b[^\n]*(\s-d\b|\s--data\b|\s--data-raw\b|\s--data-binary\b|\s-F\b|\s-T\b|\s--upload-file\b)|\bwget\b[^\n]*--post|\bscp\s|\bfetch\s*\([^)]*method)REGEX";

const std::vector<std::string> kOutboundSendGates = {
    "post", "put", "patch", "urlopen", "curl", "wget", "scp", "fetch"};

/// Write indicators shared by the persistence rules: redirection, write
/// calls, write-mode opens.
const char* kWriteIndicator =
    R"REGEX(>>|\bwrite\w*\s*\(|\bjson\.dump\b|\bfs\.writeFile\w*\b|\bopen\s*\([^\n]{0,80},\s*["'][wa]|\btee\b|\bsave\w*\s*\()REGEX";

const std::vector<std::string> kWriteGates = {">>",   "write", "json.dump",
                                              "open", "tee",   "save"};

/// Single-line "writes to <target>" pattern: write indicator before or
/// after the target, plus the open("target", "w") call shape where the
/// mode trails the name.
std::string write_near(const std::string& target) {
  const std::string write = std::string("(?:") + kWriteIndicator + ")";
  return write + "[^\\n]{0,80}" + target + "|" + target + "[^\\n]{0,80}" +
         write + "|\\bopen\\s*\\([^\\n]{0,120}" + target +
         "[^\\n]{0,120},\\s*[\"'][wa]";
}

/// Config globs become literal needles by cutting at the first
/// metacharacter: ".claude/**" watches anything under ".claude/".
std::vector<std::string> config_needles(const PolicyConfig& policy) {
  std::vector<std::string> needles;
  for (const std::string& glob : policy.watchlist.config_globs) {
    std::size_t meta = glob.find_first_of("*?");
    std::string needle = meta == std::string::npos ? glob : glob.substr(0, meta);
    if (!needle.empty()) needles.push_back(needle);
  }
  return needles;
}

std::vector<std::string> lowered(const std::vector<std::string>& v) {
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const std::string& s : v) out.push_back(to_lower(s));
  return out;
}

}  // namespace

std::vector<LineRef> split_lines(std::string_view content) {
  std::vector<LineRef> lines;
  std::size_t start = 0;
  int number = 1;
  while (start < content.size()) {
    std::size_t nl = content.find('\n', start);
    std::size_t end = nl == std::string_view::npos ? content.size() : nl;
    std::size_t text_end = end;
    if (text_end > start && content[text_end - 1] == '\r') --text_end;
    lines.push_back(
        {number, start, text_end, content.substr(start, text_end - start)});
    if (nl == std::string_view::npos) break;
    start = nl + 1;
    ++number;
  }
  return lines;
}

std::string target_names(unsigned mask) {
  std::string out;
  auto add = [&](const char* name) {
    if (!out.empty()) out += '+';
    out += name;
  };
  if (mask & kTargetBody) add("body");
  if (mask & kTargetScripts) add("scripts");
  if (mask & kTargetSuppMarkdown) add("supp-markdown");
  return out;
}

std::string regex_escape(std::string_view literal) {
  std::string out;
  for (char c : literal) {
    switch (c) {
      case '.': case '^': case '$': case '|': case '(': case ')':
      case '[': case ']': case '{': case '}': case '*': case '+':
      case '?': case '\\': case '/':
        out += '\\';
        [[fallthrough]];
      default:
        out += c;
    }
  }
  return out;
}

std::string needle_alternation(const std::vector<std::string>& needles) {
  std::string out = "(?:";
  bool first = true;
  for (const std::string& needle : needles) {
    if (needle.empty()) continue;
    if (!first) out += '|';
    first = false;
    // Boundary guards only where the needle edge is a word character;
    // needles like ".claude/" carry their own separators.
    if (is_word_char(needle.front())) out += "(?:^|[^A-Za-z0-9_])";
    out += regex_escape(needle);
    if (is_word_char(needle.back())) out += "(?:[^A-Za-z0-9_]|$)";
  }
  if (first) return "(?!)";  // no needles: never matches
  out += ')';
  return out;
}

RuleSet::RuleSet(std::vector<PatternRule> rules) : rules_(std::move(rules)) {
  constexpr auto kFlags = std::regex::ECMAScript | std::regex::icase |
                          std::regex::optimize;
  compiled_.reserve(rules_.size());
  for (const PatternRule& rule : rules_) {
    try {
      Compiled c;
      c.primary = std::regex(rule.pattern, kFlags);
      if (!rule.secondary.empty()) {
        c.secondary = std::regex(rule.secondary, kFlags);
      }
      if (rule.co) c.co = std::regex(rule.co->pattern, kFlags);
      compiled_.push_back(std::move(c));
    } catch (const std::regex_error& e) {
      throw std::runtime_error("rule " + rule.rule +
                               " has a malformed pattern: " + e.what());
    }
  }
}

bool RuleSet::co_matches(std::size_t rule_index,
                         const std::vector<LineRef>& lines) const {
  const PatternRule& rule = rules_[rule_index];
  if (!rule.co) return false;
  const std::regex& re = *compiled_[rule_index].co;
  for (const LineRef& line : lines) {
    if (!rule.co->gates.empty() &&
        !gates_pass(rule.co->gates, to_lower(line.text))) {
      continue;
    }
    if (std::regex_search(line.text.begin(), line.text.end(), re)) return true;
  }
  return false;
}

std::vector<int> RuleSet::hit_lines(std::size_t rule_index,
                                    const TextUnit& unit) const {
  const PatternRule& rule = rules_[rule_index];
  if (!(rule.targets & unit.kind)) return {};
  PreparedUnit prep = prepare(unit.content);
  if (rule.co && rule.co->required && !co_matches(rule_index, prep.lines)) {
    return {};
  }

  std::vector<int> primary =
      match_lines(compiled_[rule_index].primary, rule.gates, prep);
  if (rule.window <= 0 || rule.secondary.empty()) return primary;

  std::vector<int> secondary = match_lines(*compiled_[rule_index].secondary,
                                           rule.secondary_gates, prep);
  std::vector<int> hits;
  for (int i : primary) {
    for (int j : secondary) {
      int d = j - i;
      bool within = rule.directional ? (d >= 0 && d <= rule.window)
                                     : (std::abs(d) <= rule.window);
      if (within) {
        hits.push_back(i);
        break;
      }
    }
  }
  return hits;
}

bool RuleSet::any_primary_match(std::size_t rule_index,
                                const TextUnit& unit) const {
  const PatternRule& rule = rules_[rule_index];
  if (!(rule.targets & unit.kind)) return false;
  PreparedUnit prep = prepare(unit.content);
  return !match_lines(compiled_[rule_index].primary, rule.gates, prep).empty();
}

std::vector<Finding> RuleSet::apply(const std::vector<TextUnit>& units,
                                    const PolicyConfig& policy) const {
  std::vector<Finding> findings;
  for (const TextUnit& unit : units) {
    PreparedUnit prep = prepare(unit.content);
    for (std::size_t idx = 0; idx < rules_.size(); ++idx) {
      const PatternRule& rule = rules_[idx];
      if (!rule.emits) continue;
      if (!(rule.targets & unit.kind)) continue;
      if (!policy.detector_enabled(rule.id)) continue;
      if (rule.co && rule.co->required && !co_matches(idx, prep.lines)) {
        continue;
      }

      std::vector<int> hits;
      std::vector<int> primary =
          match_lines(compiled_[idx].primary, rule.gates, prep);
      if (rule.window <= 0 || rule.secondary.empty()) {
        hits = std::move(primary);
      } else {
        std::vector<int> secondary = match_lines(*compiled_[idx].secondary,
                                                 rule.secondary_gates, prep);
        for (int i : primary) {
          for (int j : secondary) {
            int d = j - i;
            bool within = rule.directional ? (d >= 0 && d <= rule.window)
                                           : (std::abs(d) <= rule.window);
            if (within) {
              hits.push_back(i);
              break;
            }
          }
        }
      }
      if (hits.empty()) continue;

      Severity severity = rule.severity;
      if (rule.co && rule.co->escalate_to && co_matches(idx, prep.lines)) {
        severity = *rule.co->escalate_to;
      }
      severity = policy.apply_override(rule.id, severity);

      for (int hit : hits) {
        const LineRef& line = prep.lines[std::size_t(hit - 1)];
        Finding f;
        f.detector = rule.id;
        f.severity = severity;
        f.confidence = rule.confidence;
        f.phase = detector_phase(rule.id);
        f.span.file = unit.file;
        f.span.line_start = f.span.line_end = unit.base_line + hit - 1;
        f.span.byte_start = unit.base_offset + line.begin;
        f.span.byte_end = unit.base_offset + line.end;
        f.evidence = std::string(trim(line.text));
        f.message = rule.doc;
        f.rule = rule.rule;
        findings.push_back(std::move(f));
      }
    }
  }
  sort_findings(findings);
  return findings;
}

std::vector<PatternRule> builtin_rules(const PolicyConfig& policy) {
  std::vector<PatternRule> rules;
  const unsigned kInstruction = kTargetBody | kTargetSuppMarkdown;
  const unsigned kAnywhere = kTargetBody | kTargetScripts | kTargetSuppMarkdown;

  {
    PatternRule r;
    r.id = DetectorId::T3_1;
    r.rule = "t3.1-override";
    r.pattern_class = "override-directive";
    r.pattern =
        R"REGEX(\b(ignore|disregard|override|bypass)\b[^.\n]{0,60}\b(previous|prior|above|earlier|system|safety|security|all other)\b[^.\n]{0,40}\b(instructions?|prompts?|rules?|policies|guidance|guidelines?|warnings?)\b|\btakes? precedence over\b[^.\n]{0,40}\b(instructions?|rules?|guidance|system)\b)REGEX";
    r.gates = {"ignore", "disregard", "override", "bypass", "precedence"};
    r.targets = kInstruction;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    r.doc = "instruction tries to countermand higher-priority or safety guidance";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T3_1;
    r.rule = "t3.1-conceal";
    r.pattern_class = "concealment-directive";
    r.pattern =
        R"REGEX(\b(silently|covertly|secretly)\b|\bwithout (telling|informing|notifying|alerting)\b[^.\n]{0,30}\buser\b|\bdo not (tell|inform|mention|reveal|disclose)\b[^.\n]{0,40}\b(user|anyone)\b)REGEX";
    r.gates = {"silently", "covertly", "secretly", "without", "do not"};
    r.targets = kInstruction;
    r.severity = Severity::Medium;
    r.confidence = Confidence::Heuristic;
    r.doc = "instruction asks for actions hidden from the user";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T3_1;
    r.rule = "t3.1-covert-send";
    r.pattern_class = "covert-exfil-directive";
    r.pattern =
        R"REGEX(\b(send|post|upload|forward|transmit)\b[^.\n]{0,60}\b(conversation|chat history|message history|transcript|context|session|api key|credentials?|environment)\b[^.\n]{0,60}\b(to|at)\b)REGEX";
    r.gates = {"send", "post", "upload", "forward", "transmit"};
    r.targets = kInstruction;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    r.doc =
        "instruction directs conversation or secret material to an external "
        "destination";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T3_2;
    r.rule = "t3.2-fetch-follow";
    r.pattern_class = "remote-instruction-fetch";
    r.pattern = R"REGEX(\b(fetch|retrieve|download|get|load|read)\b[^.\n]{0,60}\bhttps?://)REGEX";
    r.gates = {"http"};
    r.secondary =
        R"REGEX(\b(follow|execute|apply|obey|carry out|treat)\b[^.\n]{0,40}\b(instructions?|steps|directives?|commands?|contents?|it|them|response)\b)REGEX";
    r.secondary_gates = {"follow", "execute", "apply", "obey", "carry", "treat"};
    r.window = 3;
    r.targets = kInstruction;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    r.doc = "instruction fetches remote content and treats it as instructions";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T4_3;
    r.rule = "t4.3-pipe-shell";
    r.pattern_class = "pipe-to-shell";
    r.pattern = R"REGEX((curl|wget)\b[^|\n]{0,120}\|\s*(sudo\s+)?(ba|z|da)?sh\b)REGEX";
    r.gates = {"curl", "wget"};
    r.targets = kInstruction;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    r.doc = "instruction pipes downloaded content straight into a shell";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T4_3;
    r.rule = "t4.3-fetch-exec";
    r.pattern_class = "fetch-then-exec";
    r.pattern = R"REGEX(\b(download|curl|wget|fetch)\b[^.\n]{0,80}\bhttps?://)REGEX";
    r.gates = {"http"};
    r.secondary =
        R"REGEX(\b(run|execute|bash|sh|python3?|node)\b[^.\n]{0,60}\b(it|the (script|file|installer|binary)|[\w.-]+\.(sh|py|js|bin))\b)REGEX";
    r.secondary_gates = {"run", "execute", "bash", "sh", "python", "node"};
    r.window = 5;
    r.directional = true;
    r.targets = kInstruction;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    r.doc = "instruction downloads a payload and then executes it";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T4_3;
    r.rule = "t4.3-encoded-eval";
    r.pattern_class = "encoded-exec";
    r.pattern =
        R"REGEX(\b(base64|b64decode|atob|rot13)\b[^.\n]{0,60}\b(decode|decoded|decoding)\b[^.\n]{0,80}\b(eval|exec|run|execute|sh|bash|interpret)\b|\b(eval|exec)\s*\(\s*(base64|b64decode|atob)\b|base64\s+(-d|--decode)\b[^|\n]{0,40}\|\s*(ba|z)?sh\b)REGEX";
    r.gates = {"base64", "b64decode", "atob", "rot13"};
    r.targets = kInstruction;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    r.doc = "instruction decodes obfuscated content and executes it";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T4_1;
    r.rule = "t4.1-download-exec";
    r.pattern_class = "download-exec";
    r.pattern =
        R"REGEX(\b(urlretrieve|urlopen|requests\.get|httpx\.get|axios\.get|fetch)\s*\(|(curl|wget)\b[^\n]*\shttps?://)REGEX";
    r.gates = {"urlretrieve", "urlopen", "requests.get", "httpx.get",
               "axios.get",   "fetch",   "curl",         "wget"};
    r.secondary =
        R"REGEX(\bsubprocess\.(run|Popen|call|check_call|check_output)\b|\bos\.(system|popen|exec\w*)\b|\b(exec|eval)\s*\(|\b(execSync|spawnSync|execFile)\s*\(|\bchild_process\b|\bchmod\b[^\n]{0,20}\+x\b)REGEX";
    r.secondary_gates = {"subprocess", "os.",  "exec", "eval",
                         "child_process", "chmod", "spawn"};
    r.window = 5;
    r.directional = true;
    r.targets = kTargetScripts;
    r.severity = Severity::Critical;
    r.confidence = Confidence::Likely;
    r.doc = "script downloads content and executes it";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T4_1;
    r.rule = "t4.1-encoded-exec";
    r.pattern_class = "encoded-exec";
    r.pattern =
        R"REGEX(\b(b64decode|a85decode|b32decode|atob|unhexlify)\s*\(|\bcodecs\.decode\s*\(|base64\s+(-d|--decode)\b)REGEX";
    r.gates = {"b64decode", "a85decode", "b32decode",
               "atob",      "unhexlify", "codecs.decode",
               "base64"};
    r.secondary =
        R"REGEX(\bsubprocess\.(run|Popen|call|check_call|check_output)\b|\bos\.(system|popen|exec\w*)\b|\b(exec|eval)\s*\(|\b(execSync|spawnSync|execFile)\s*\(|\bchild_process\b)REGEX";
    r.secondary_gates = {"subprocess", "os.", "exec", "eval", "child_process",
                         "spawn"};
    r.window = 3;
    r.targets = kTargetScripts;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    r.doc = "script decodes an embedded payload and executes it";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T4_1;
    r.rule = "t4.1-ransom-loop";
    r.pattern_class = "bulk-overwrite";
    r.pattern =
        R"REGEX(\bos\.walk\s*\(|\.rglob\s*\(|\bglob\.glob\s*\([^)]*\*\*|\breaddirSync\s*\(|\bwalkSync\s*\()REGEX";
    r.gates = {"os.walk", "rglob", "glob.glob", "readdirsync", "walksync"};
    r.secondary =
        R"REGEX(\b(encrypt\w*|fernet|cipher\w*)\b|\bAES\b|\bos\.remove\s*\(|\bos\.unlink\s*\(|\bshutil\.rmtree\s*\()REGEX";
    r.secondary_gates = {"encrypt", "fernet", "cipher", "aes", "os.remove",
                         "os.unlink", "rmtree"};
    r.window = 5;
    r.targets = kTargetScripts;
    r.severity = Severity::High;
    r.confidence = Confidence::Heuristic;
    r.doc = "script iterates the file tree while encrypting or destroying entries";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T5_1;
    r.rule = "t5.1-credential-path";
    r.pattern_class = "credential-access";
    r.pattern = needle_alternation(policy.credential_paths);
    r.gates = lowered(policy.credential_paths);
    r.targets = kAnywhere;
    r.severity = Severity::Medium;
    r.confidence = Confidence::Heuristic;
    CoPattern co;
    co.pattern = kOutboundSendPattern;
    co.gates = kOutboundSendGates;
    co.escalate_to = Severity::High;
    r.co = co;
    r.doc =
        "touches credential stores; escalated when the same file sends "
        "network traffic";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T5_1;
    r.rule = "t5.1-baseurl-redirect";
    r.pattern_class = "endpoint-redirect";
    r.pattern =
        R"REGEX(\b\w+_BASE_URL\b\s*[:=]\s*["']?https?://(?!api\.openai\.com|api\.anthropic\.com)\S)REGEX";
    r.gates = {"_base_url"};
    r.targets = kAnywhere;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    r.doc =
        "rebinding a provider base URL routes requests and keys through "
        "another host";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T5_2;
    r.rule = "t5.2-env-dump";
    r.pattern_class = "env-harvest";
    r.pattern =
        R"REGEX(\bos\.environ\b(?!\.get\b|\[)|\bprocess\.env\b(?![.\[\w])|\bprintenv\b)REGEX";
    r.gates = {"os.environ", "process.env", "printenv"};
    r.targets = kTargetScripts;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    CoPattern co;
    co.pattern = kOutboundSendPattern;
    co.gates = kOutboundSendGates;
    co.required = true;
    r.co = co;
    r.doc =
        "reads the whole environment in a file that also performs outbound "
        "requests";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T5_3;
    r.rule = "t5.3-archive-root";
    r.pattern_class = "bulk-archive";
    r.pattern =
        R"REGEX(\bos\.walk\s*\(\s*["'](\.|/|~)|\bshutil\.make_archive\s*\(|\.rglob\s*\(\s*["']\*|\bglob\.glob\s*\([^)]*\*\*|\btar\s+(-[a-z]*c[a-z]*|--create)\b|\bzip\s+-[a-z]*r\b)REGEX";
    r.gates = {"os.walk", "make_archive", "rglob", "glob.glob", "tar", "zip"};
    r.targets = kTargetScripts;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    CoPattern co;
    co.pattern = kOutboundSendPattern;
    co.gates = kOutboundSendGates;
    co.required = true;
    r.co = co;
    r.doc =
        "archives broad file trees in a file that also performs outbound "
        "requests";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T6_1;
    r.rule = "t6.1-memory-write";
    r.pattern_class = "memory-write";
    r.pattern = write_near(needle_alternation(policy.watchlist.memory_files));
    r.gates = lowered(policy.watchlist.memory_files);
    r.targets = kAnywhere;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    r.doc = "writes to agent memory files that persist across sessions";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T6_2;
    r.rule = "t6.2-config-write";
    r.pattern_class = "config-write";
    r.pattern = needle_alternation(config_needles(policy));
    r.gates = lowered(config_needles(policy));
    r.secondary = kWriteIndicator;
    r.secondary_gates = kWriteGates;
    r.window = 3;
    r.targets = kAnywhere;
    r.severity = Severity::High;
    r.confidence = Confidence::Likely;
    r.doc = "modifies agent configuration files";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T6_2;
    r.rule = "t6.2-hooks-config";
    r.pattern_class = "hook-install";
    r.pattern =
        R"REGEX(["']hooks["']\s*[:=]|\bhooks?\s*=\s*\{|\b(PreToolUse|PostToolUse|SessionStart|UserPromptSubmit)\b)REGEX";
    r.gates = {"hook", "pretooluse", "posttooluse", "sessionstart",
               "userpromptsubmit"};
    r.secondary = needle_alternation(config_needles(policy)) + "|" +
                  kWriteIndicator;
    r.secondary_gates = lowered(config_needles(policy));
    for (const std::string& g : kWriteGates) r.secondary_gates.push_back(g);
    r.window = 5;
    r.targets = kAnywhere;
    r.severity = Severity::Critical;
    r.confidence = Confidence::Likely;
    r.doc = "installs agent hooks that execute on future sessions";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T6_2;
    r.rule = "t6.2-baseurl-set";
    r.pattern_class = "endpoint-persist";
    r.pattern = R"REGEX(\b\w+_BASE_URL\b\s*["']?\s*[:=])REGEX";
    r.gates = {"_base_url"};
    r.secondary = needle_alternation(config_needles(policy)) + "|" +
                  kWriteIndicator +
                  R"REGEX(|\.(bashrc|zshrc|profile)\b)REGEX";
    r.secondary_gates = lowered(config_needles(policy));
    for (const std::string& g : kWriteGates) r.secondary_gates.push_back(g);
    r.secondary_gates.push_back("bashrc");
    r.secondary_gates.push_back("zshrc");
    r.secondary_gates.push_back("profile");
    r.window = 3;
    r.targets = kAnywhere;
    r.severity = Severity::Critical;
    r.confidence = Confidence::Likely;
    r.doc = "persists a provider base URL override into configuration";
    rules.push_back(std::move(r));
  }
  {
    PatternRule r;
    r.id = DetectorId::T7_1;
    r.rule = "t7.1-agent-propagation";
    r.pattern_class = "self-propagation";
    r.pattern =
        R"REGEX(\b(copy|cp|install|replicate|propagate|distribute)\w*\b[^.\n]{0,60}\b(skills?|SKILL\.md|itself|this package)\b)REGEX";
    r.gates = {"copy", "cp", "install", "replicate", "propagate", "distribute"};
    r.secondary =
        R"REGEX(\b(other|every|all|each|another)\b[^.\n]{0,30}\b(agents?|workspaces?|machines?|repositories|repos|projects?|teammates?)\b|~/\.claude/skills|\bshared\b)REGEX";
    r.secondary_gates = {"agent", "workspace", "machine", "repo",
                         "project", "teammate", "skill", "shared"};
    r.window = 3;
    r.targets = kAnywhere;
    r.severity = Severity::Medium;
    r.confidence = Confidence::Heuristic;
    r.doc = "spreads itself into other agents or workspaces";
    rules.push_back(std::move(r));
  }

  // Classifier rows: non-emitting, they feed the declared-versus-observed
  // capability comparison.
  const unsigned kClassifierTargets = kTargetBody | kTargetScripts;
  auto classifier = [&](std::string rule, std::string klass,
                        std::string pattern, std::vector<std::string> gates,
                        std::string doc) {
    PatternRule r;
    r.id = DetectorId::T2_1;
    r.rule = std::move(rule);
    r.pattern_class = std::move(klass);
    r.pattern = std::move(pattern);
    r.gates = std::move(gates);
    r.targets = kClassifierTargets;
    r.severity = Severity::Info;
    r.confidence = Confidence::Heuristic;
    r.emits = false;
    r.doc = std::move(doc);
    rules.push_back(std::move(r));
  };
  classifier(
      "class-file-read", "file-read",
      R"REGEX(\bopen\s*\((?!.{0,160}["'][wax])|\bread_text\s*\(|\bread_bytes\s*\(|\breadFileSync\s*\(|\breadFile\s*\(|\bcat\s+\S)REGEX",
      {"open", "read", "cat"}, "classifier row for file reads");
  // The open() mode scan is line-bounded, not paren-bounded, so nested
  // calls like open(expanduser(p), 'w') land in the write class. Redirect
  // targets must look like paths so comparisons ("x > 5") and markdown
  // blockquotes stay out of it.
  classifier(
      "class-file-write", "file-write",
      R"REGEX(\bopen\s*\(.{0,160}["'][wax]|\bwrite_text\s*\(|\bwrite_bytes\s*\(|\bwriteFileSync\s*\(|\bwriteFile\s*\(|\.write\s*\(|\bjson\.dump\b|>>?\s*\S*/\S+|>>?\s*[~.\w-]+\.\w+)REGEX",
      {"open", "write", ">", "json.dump"}, "classifier row for file writes");
  classifier(
      "class-network-fetch", "network-fetch",
      R"REGEX(\b(requests|httpx)\.get\s*\(|\burlopen\s*\(|\burlretrieve\s*\(|\bfetch\s*\(|\baxios(\.get)?\s*\(|\b(curl|wget)\s+\S*https?://)REGEX",
      {"requests", "httpx", "urlopen", "urlretrieve", "fetch", "axios", "curl",
       "wget"},
      "classifier row for network fetches");
  classifier("class-network-send", "network-send", kOutboundSendPattern,
             kOutboundSendGates, "classifier row for outbound sends");
  classifier(
      "class-subprocess", "subprocess",
      R"REGEX(\bsubprocess\.(run|Popen|call|check_call|check_output)\b|\bos\.system\b|\bos\.exec\w*\b|\bos\.popen\b|\bchild_process\b|\bexecSync\b|\bspawnSync\b)REGEX",
      {"subprocess", "os.", "child_process", "exec", "spawn"},
      "classifier row for subprocess use");
  {
    const std::string memory = needle_alternation(policy.watchlist.memory_files);
    const std::string config = needle_alternation(config_needles(policy));
    std::string target = "(?:" + memory + "|" + config + ")";
    std::vector<std::string> gates = lowered(policy.watchlist.memory_files);
    for (const std::string& n : lowered(config_needles(policy))) {
      gates.push_back(n);
    }
    classifier("class-config-write", "config-write", write_near(target), gates,
               "classifier row for agent state writes");
  }

  return rules;
}

}  // namespace skillguard::detect
