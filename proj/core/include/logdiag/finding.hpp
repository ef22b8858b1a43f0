#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "logdiag/diagnosis_parser.hpp"
#include "logdiag/log_model.hpp"

namespace logdiag {

class UnknownFinding : public std::runtime_error {
 public:
  explicit UnknownFinding(const std::string& finding_id)
      : std::runtime_error("unknown finding: " + finding_id) {}
};

/// Rendered diagnosis ready for posting: markdown body plus one link per
/// resolved citation. finding_id is derived from the bundle id and body, so
/// identical diagnoses share an id.
struct Finding {
  std::string finding_id;
  std::string bundle_id;
  Outcome outcome = Outcome::Unparseable;
  std::string body_markdown;
  std::vector<std::pair<std::string, std::string>> links;  // (display, uri)
  std::string created_at;  // RFC 3339, UTC
  std::chrono::milliseconds generation_latency{0};
};

inline constexpr std::string_view kDefaultLinkScheme =
    "log://{bundle}/{file}#L{line}";

/// Renders the finding body: outcome banner, conclusion, linked citations.
/// Unresolved citations stay plain text flagged "(unresolved)";
/// InsufficientInformation findings quote the ingestion notes.
Finding render_finding(const ResolvedDiagnosis& resolved,
                       const LogBundle& bundle,
                       std::string_view link_scheme = kDefaultLinkScheme);

enum class FeedbackKind { PleaseFix, Helpful, NotHelpful };

std::string_view feedback_kind_name(FeedbackKind kind);
std::optional<FeedbackKind> parse_feedback_kind(std::string_view name);

struct FeedbackEvent {
  std::string finding_id;
  FeedbackKind kind = FeedbackKind::Helpful;
  std::string user;
  std::string at;  // RFC 3339, UTC
};

/// Engagement metrics over a finding store.
struct MetricsReport {
  std::size_t findings_total = 0;
  std::size_t findings_with_feedback = 0;
  std::size_t pf = 0;
  std::size_t h = 0;
  std::size_t n = 0;
  double feedback_rate = 0.0;
  std::optional<double> helpfulness_rate;   // h / (h + n)
  std::optional<double> not_helpful_rate;   // n / (pf + h + n)
  bool guideline_violated = false;          // not_helpful_rate > 0.10, strict
};

/// Durable store for findings and feedback under one directory:
///   findings/<id>.md    finding body, byte-exact
///   findings.jsonl      one metadata record per finding
///   feedback.jsonl      one event per line, idempotent per (id, user, kind)
/// Writes serialize; reads see a consistent snapshot.
class FindingStore {
 public:
  explicit FindingStore(std::filesystem::path dir);

  /// Idempotent on finding_id. Returns the id. An optional idempotency key
  /// (e.g. bundle path + content hash) can later be looked up.
  std::string save(const Finding& finding, const std::string& idempotency_key = "");

  bool exists(const std::string& finding_id) const;
  std::optional<Finding> get(const std::string& finding_id) const;
  std::optional<std::string> find_by_key(const std::string& idempotency_key) const;
  std::vector<std::string> finding_ids() const;

  /// Throws UnknownFinding; duplicate (finding, user, kind) triples are
  /// stored once.
  void record_feedback(const FeedbackEvent& event);
  std::vector<FeedbackEvent> feedback_events() const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  void load_locked();

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::map<std::string, Finding> findings_;  // bodies loaded lazily
  std::map<std::string, std::string> key_to_id_;
  std::vector<FeedbackEvent> events_;
  std::set<std::string> event_triples_;
};

MetricsReport compute_metrics(const FindingStore& store);

std::string render_metrics(const MetricsReport& report);

std::string rfc3339_now_utc();

}  // namespace logdiag
