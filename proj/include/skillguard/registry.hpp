#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "skillguard/deps.hpp"
#include "skillguard/finding.hpp"
#include "skillguard/policy.hpp"

namespace skillguard::registry {

struct HttpResult {
  int status = 0;        // 0 means transport failure
  std::string body;
  std::string error;     // non-empty iff transport failure
};

/// Seam for live lookups; tests inject fakes and fault generators.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResult get(const std::string& url, int timeout_ms) = 0;
};

std::shared_ptr<Transport> make_http_transport();

struct RegistrySource {
  enum class Mode { Fixture, Live };
  Mode mode = Mode::Fixture;
  std::map<std::string, std::set<std::string>> fixture;  // ecosystem -> names
  std::map<std::string, std::string> endpoints;          // ecosystem -> url template
  int cache_ttl_seconds = 900;
  int timeout_ms = 3000;
  int max_parallel = 4;
  double rate_per_second = 5.0;

  static RegistrySource from_settings(const RegistrySettings& s,
                                      std::string* error = nullptr);
};

/// Fixture format: one `ecosystem name` pair per line, '#' comments and
/// blank lines ignored.
std::map<std::string, std::set<std::string>> parse_fixture(std::string_view text);

struct RegistryVerdict {
  enum class Kind { Exists, Missing, Unknown };
  Kind kind = Kind::Unknown;
  std::string reason;  // set for Unknown
  std::optional<std::string> first_published;  // ISO timestamp when supplied

  bool operator==(const RegistryVerdict&) const = default;
};

/// Token bucket with an injectable clock so rate behavior is testable
/// without sleeping.
class TokenBucket {
 public:
  TokenBucket(double capacity, double per_second,
              std::function<std::int64_t()> now_ms);
  /// Milliseconds to wait before a token is available; 0 consumes one.
  std::int64_t acquire_delay_ms();

 private:
  double capacity_;
  double per_second_;
  double tokens_;
  std::int64_t last_ms_;
  std::function<std::int64_t()> now_ms_;
  std::mutex mu_;
};

/// Existence checks with a TTL cache. Fixture mode performs zero network
/// operations. Only an authoritative 404 maps to Missing; every transport
/// failure, odd status or unsupported ecosystem is Unknown.
class RegistryClient {
 public:
  explicit RegistryClient(RegistrySource source,
                          std::shared_ptr<Transport> transport = nullptr,
                          std::function<std::int64_t()> now_ms = nullptr);

  RegistryVerdict verify_existence(const deps::DependencyRef& dep);

  /// Batch lookup in input order; at most max_parallel concurrent
  /// transport calls.
  std::vector<RegistryVerdict> verify_all(
      const std::vector<deps::DependencyRef>& deps);

  /// Network requests performed so far (cache coherence tests).
  std::int64_t network_requests() const { return requests_.load(); }

 private:
  RegistryVerdict lookup_live(const deps::DependencyRef& dep);

  RegistrySource source_;
  std::shared_ptr<Transport> transport_;
  std::function<std::int64_t()> now_ms_;
  TokenBucket bucket_;
  struct CacheEntry {
    RegistryVerdict verdict;
    std::int64_t at_ms;
  };
  mutable std::shared_mutex cache_mu_;
  std::map<std::pair<std::string, std::string>, CacheEntry> cache_;
  std::atomic<std::int64_t> requests_{0};
};

/// T1.4 finding for a Missing dependency, Info for Unknown. Exists yields
/// nothing unless the registry's first-publish timestamp postdates
/// `approved_at` (claim-window evidence, Info).
std::optional<Finding> existence_finding(const deps::DependencyRef& dep,
                                         const RegistryVerdict& verdict,
                                         std::optional<std::int64_t> approved_at);

}  // namespace skillguard::registry
