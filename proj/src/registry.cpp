#include "skillguard/registry.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace skillguard::registry {

namespace {

std::int64_t steady_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

/// "{name}" substitution; '/' in scoped npm names must stay one path
/// segment.
std::string expand_endpoint(const std::string& tmpl, const std::string& name) {
  std::string escaped;
  for (char c : name) {
    if (c == '/') {
      escaped += "%2F";
    } else {
      escaped += c;
    }
  }
  std::string url = tmpl;
  std::size_t at = url.find("{name}");
  if (at != std::string::npos) url.replace(at, 6, escaped);
  return url;
}

std::optional<std::int64_t> parse_iso8601_utc(std::string_view iso) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (std::sscanf(std::string(iso).c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d,
                  &h, &mi, &s) != 6) {
    return std::nullopt;
  }
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = s;
  std::time_t t = timegm(&tm);
  if (t == -1) return std::nullopt;
  return std::int64_t(t);
}

class HttpTransport : public Transport {
 public:
  HttpResult get(const std::string& url, int timeout_ms) override {
    std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      return {0, "", "unsupported url: " + url};
    }
    std::size_t path_start = url.find('/', scheme_end + 3);
    std::string origin =
        path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path =
        path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(std::chrono::milliseconds(timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(timeout_ms));
    client.set_follow_location(true);
    httplib::Result res = client.Get(path);
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() {
  return std::make_shared<HttpTransport>();
}

std::map<std::string, std::set<std::string>> parse_fixture(
    std::string_view text) {
  std::map<std::string, std::set<std::string>> fixture;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string ecosystem, name, extra;
    if (!(fields >> ecosystem)) continue;        // blank
    if (ecosystem.front() == '#') continue;      // comment
    if (!(fields >> name)) continue;             // dangling ecosystem
    if (fields >> extra) continue;               // not a pair, skip
    fixture[ecosystem].insert(name);
  }
  return fixture;
}

RegistrySource RegistrySource::from_settings(const RegistrySettings& s,
                                             std::string* error) {
  RegistrySource src;
  src.cache_ttl_seconds = s.cache_ttl_seconds;
  src.timeout_ms = s.timeout_ms;
  src.max_parallel = s.max_parallel;
  src.rate_per_second = s.rate_per_second;

  switch (s.mode) {
    case RegistrySettings::Mode::Off:
      if (error) *error = "registry checks are disabled";
      return src;
    case RegistrySettings::Mode::Fixture: {
      src.mode = Mode::Fixture;
      std::ifstream in(s.fixture_path, std::ios::binary);
      if (!in) {
        if (error) *error = "cannot read registry fixture " + s.fixture_path;
        return src;
      }
      std::ostringstream buf;
      buf << in.rdbuf();
      src.fixture = parse_fixture(buf.str());
      return src;
    }
    case RegistrySettings::Mode::Live:
      src.mode = Mode::Live;
      src.endpoints = s.endpoints.empty() ? RegistrySettings::default_endpoints()
                                          : s.endpoints;
      return src;
  }
  return src;
}

TokenBucket::TokenBucket(double capacity, double per_second,
                         std::function<std::int64_t()> now_ms)
    : capacity_(capacity),
      per_second_(per_second),
      tokens_(capacity),
      last_ms_(now_ms ? now_ms() : 0),
      now_ms_(std::move(now_ms)) {}

std::int64_t TokenBucket::acquire_delay_ms() {
  std::lock_guard<std::mutex> lock(mu_);
  if (per_second_ <= 0) return 0;  // rate limiting disabled
  std::int64_t now = now_ms_ ? now_ms_() : 0;
  tokens_ = std::min(capacity_,
                     tokens_ + double(now - last_ms_) * per_second_ / 1000.0);
  last_ms_ = now;
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return 0;
  }
  return std::int64_t(std::ceil((1.0 - tokens_) * 1000.0 / per_second_));
}

RegistryClient::RegistryClient(RegistrySource source,
                               std::shared_ptr<Transport> transport,
                               std::function<std::int64_t()> now_ms)
    : source_(std::move(source)),
      transport_(std::move(transport)),
      now_ms_(now_ms ? std::move(now_ms) : steady_now_ms),
      bucket_(std::max(1.0, source_.rate_per_second), source_.rate_per_second,
              now_ms_) {
  if (!transport_ && source_.mode == RegistrySource::Mode::Live) {
    transport_ = make_http_transport();
  }
}

RegistryVerdict RegistryClient::verify_existence(
    const deps::DependencyRef& dep) {
  const std::pair<std::string, std::string> key{dep.ecosystem, dep.name};
  const std::int64_t ttl_ms = std::int64_t(source_.cache_ttl_seconds) * 1000;
  {
    std::shared_lock<std::shared_mutex> rl(cache_mu_);
    auto it = cache_.find(key);
    if (it != cache_.end() && now_ms_() - it->second.at_ms < ttl_ms) {
      return it->second.verdict;
    }
  }

  RegistryVerdict verdict;
  if (source_.mode == RegistrySource::Mode::Fixture) {
    auto eco = source_.fixture.find(dep.ecosystem);
    if (eco == source_.fixture.end()) {
      verdict.kind = RegistryVerdict::Kind::Unknown;
      verdict.reason = "no registry data for ecosystem " + dep.ecosystem;
    } else if (eco->second.count(dep.name)) {
      verdict.kind = RegistryVerdict::Kind::Exists;
    } else {
      verdict.kind = RegistryVerdict::Kind::Missing;
    }
  } else {
    verdict = lookup_live(dep);
  }

  // Unknown is never cached: a transient failure must not mask the next
  // attempt for a whole TTL.
  if (verdict.kind != RegistryVerdict::Kind::Unknown) {
    std::unique_lock<std::shared_mutex> wl(cache_mu_);
    cache_[key] = {verdict, now_ms_()};
  }
  return verdict;
}

RegistryVerdict RegistryClient::lookup_live(const deps::DependencyRef& dep) {
  RegistryVerdict verdict;
  auto endpoint = source_.endpoints.find(dep.ecosystem);
  if (endpoint == source_.endpoints.end()) {
    verdict.kind = RegistryVerdict::Kind::Unknown;
    verdict.reason = "unsupported ecosystem: " + dep.ecosystem;
    return verdict;
  }

  // Waits at most one refill interval; a stalled injected clock cannot
  // deadlock the scan, it only overshoots the rate.
  std::int64_t delay = bucket_.acquire_delay_ms();
  if (delay > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    bucket_.acquire_delay_ms();
  }

  const std::string url = expand_endpoint(endpoint->second, dep.name);
  ++requests_;
  HttpResult res = transport_->get(url, source_.timeout_ms);

  if (res.status == 404) {
    verdict.kind = RegistryVerdict::Kind::Missing;
    return verdict;
  }
  if (res.status == 200) {
    verdict.kind = RegistryVerdict::Kind::Exists;
    nlohmann::json doc = nlohmann::json::parse(res.body, nullptr, false);
    if (doc.is_object() && doc.contains("time") && doc["time"].is_object() &&
        doc["time"].contains("created") && doc["time"]["created"].is_string()) {
      verdict.first_published = doc["time"]["created"].get<std::string>();
    }
    return verdict;
  }
  verdict.kind = RegistryVerdict::Kind::Unknown;
  if (res.status == 0) {
    verdict.reason = res.error.empty() ? "transport failure" : res.error;
  } else {
    verdict.reason = "http status " + std::to_string(res.status);
  }
  return verdict;
}

std::vector<RegistryVerdict> RegistryClient::verify_all(
    const std::vector<deps::DependencyRef>& deps) {
  std::vector<RegistryVerdict> verdicts(deps.size());
  if (deps.empty()) return verdicts;

  std::size_t workers = std::min<std::size_t>(
      std::max(1, source_.max_parallel), deps.size());
  if (workers <= 1 || source_.mode == RegistrySource::Mode::Fixture) {
    for (std::size_t i = 0; i < deps.size(); ++i) {
      verdicts[i] = verify_existence(deps[i]);
    }
    return verdicts;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < deps.size();) {
        verdicts[i] = verify_existence(deps[i]);
      }
    });
  }
  for (std::thread& t : pool) t.join();
  return verdicts;
}

std::optional<Finding> existence_finding(
    const deps::DependencyRef& dep, const RegistryVerdict& verdict,
    std::optional<std::int64_t> approved_at) {
  Finding f;
  f.detector = DetectorId::T1_4;
  f.phase = detector_phase(DetectorId::T1_4);
  f.span = dep.span;
  f.evidence = dep.name;

  switch (verdict.kind) {
    case RegistryVerdict::Kind::Missing:
      f.severity = Severity::High;
      f.confidence = Confidence::Confirmed;
      f.rule = "dep-missing";
      f.message = "dependency " + dep.name + " is not registered in the " +
                  dep.ecosystem + " registry";
      return f;
    case RegistryVerdict::Kind::Unknown:
      f.severity = Severity::Info;
      f.confidence = Confidence::Heuristic;
      f.rule = "dep-unverified";
      f.message = "existence of " + dep.name + " could not be verified (" +
                  verdict.reason + ")";
      return f;
    case RegistryVerdict::Kind::Exists:
      if (verdict.first_published && approved_at) {
        auto published = parse_iso8601_utc(*verdict.first_published);
        if (published && *published > *approved_at) {
          f.severity = Severity::Info;
          f.confidence = Confidence::Likely;
          f.rule = "dep-claim-window";
          f.message = "dependency " + dep.name +
                      " was first published after this skill was approved (" +
                      *verdict.first_published + ")";
          return f;
        }
      }
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace skillguard::registry
