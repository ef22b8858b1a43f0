#include "logdiag/finding.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "logdiag/sha256.hpp"
#include "logdiag/strings.hpp"

namespace logdiag {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string outcome_banner(Outcome outcome) {
  switch (outcome) {
    case Outcome::Conclusive:
      return "**Outcome: conclusive root-cause diagnosis**";
    case Outcome::InsufficientInformation:
      return "**Outcome: insufficient information**";
    case Outcome::Unparseable:
      return "**Outcome: response did not follow the expected format**";
  }
  return "**Outcome: unknown**";
}

std::string expand_link(std::string_view scheme, const std::string& bundle,
                        const std::string& file, int line) {
  std::string uri = strings::replace_all(scheme, "{bundle}", bundle);
  uri = strings::replace_all(uri, "{file}", file);
  uri = strings::replace_all(uri, "{line}", std::to_string(line));
  return uri;
}

std::string outcome_json_name(Outcome outcome) {
  return std::string(outcome_name(outcome));
}

std::optional<Outcome> outcome_from_name(std::string_view name) {
  if (name == "Conclusive") return Outcome::Conclusive;
  if (name == "InsufficientInformation") return Outcome::InsufficientInformation;
  if (name == "Unparseable") return Outcome::Unparseable;
  return std::nullopt;
}

}  // namespace

Finding render_finding(const ResolvedDiagnosis& resolved,
                       const LogBundle& bundle, std::string_view link_scheme) {
  Finding finding;
  finding.bundle_id = bundle.bundle_id;
  finding.outcome = resolved.outcome;

  std::string body;
  body += outcome_banner(resolved.outcome);
  body += "\n\n";

  if (resolved.outcome == Outcome::InsufficientInformation) {
    body +=
        "The diagnosis could not be completed: more information is needed to "
        "diagnose the root cause of the failure.\n";
    if (!bundle.ingestion_notes.empty()) {
      body += "\nMissing or degraded inputs:\n";
      for (const IngestionNote& note : bundle.ingestion_notes) {
        body += "> " + note.to_line() + "\n";
      }
    }
    body += "\n";
  }

  const auto& diagnosis = resolved.diagnosis;
  if (diagnosis.conclusion && !diagnosis.conclusion->empty()) {
    body += "## Conclusion\n";
    body += *diagnosis.conclusion;
    body += "\n\n";
  }

  if (!resolved.resolutions.empty()) {
    body += "## Most relevant log lines\n";
    for (const CitationResolution& res : resolved.resolutions) {
      if (res.resolved) {
        const auto& [file, line] = *res.resolved;
        const std::string display = file + ":L" + std::to_string(line);
        const std::string uri =
            expand_link(link_scheme, bundle.bundle_id, file, line);
        body += "- [" + display + "](" + uri + "): " + res.citation.content +
                "\n";
        finding.links.emplace_back(display, uri);
      } else {
        body += "- " + res.citation.log_file_name + " (unresolved): " +
                res.citation.content + "\n";
      }
    }
    body += "\n";
  }

  if (diagnosis.investigation_steps && !diagnosis.investigation_steps->empty()) {
    body += "## Investigation steps\n";
    body += *diagnosis.investigation_steps;
    body += "\n";
  }

  finding.body_markdown = normalize_response(body);
  finding.finding_id =
      sha256_hex(finding.bundle_id + "\n" + finding.body_markdown).substr(0, 16);
  finding.created_at = rfc3339_now_utc();
  return finding;
}

std::string_view feedback_kind_name(FeedbackKind kind) {
  switch (kind) {
    case FeedbackKind::PleaseFix: return "PleaseFix";
    case FeedbackKind::Helpful: return "Helpful";
    case FeedbackKind::NotHelpful: return "NotHelpful";
  }
  return "Helpful";
}

std::optional<FeedbackKind> parse_feedback_kind(std::string_view name) {
  if (name == "PleaseFix") return FeedbackKind::PleaseFix;
  if (name == "Helpful") return FeedbackKind::Helpful;
  if (name == "NotHelpful") return FeedbackKind::NotHelpful;
  return std::nullopt;
}

FindingStore::FindingStore(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_ / "findings");
  std::lock_guard<std::mutex> lock(mutex_);
  load_locked();
}

void FindingStore::load_locked() {
  findings_.clear();
  key_to_id_.clear();
  events_.clear();
  event_triples_.clear();

  std::ifstream index(dir_ / "findings.jsonl");
  std::string line;
  while (index && std::getline(index, line)) {
    if (strings::trim(line).empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded()) continue;
    Finding finding;
    finding.finding_id = record.value("finding_id", "");
    finding.bundle_id = record.value("bundle_id", "");
    finding.outcome =
        outcome_from_name(record.value("outcome", "")).value_or(Outcome::Unparseable);
    finding.created_at = record.value("created_at", "");
    finding.generation_latency =
        std::chrono::milliseconds(record.value("generation_latency_ms", 0));
    if (record.contains("links")) {
      for (const auto& link : record["links"]) {
        finding.links.emplace_back(link.value("text", ""), link.value("uri", ""));
      }
    }
    if (finding.finding_id.empty()) continue;
    const std::string key = record.value("idempotency_key", "");
    if (!key.empty()) key_to_id_[key] = finding.finding_id;
    findings_[finding.finding_id] = std::move(finding);
  }

  std::ifstream feedback(dir_ / "feedback.jsonl");
  while (feedback && std::getline(feedback, line)) {
    if (strings::trim(line).empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded()) continue;
    const auto kind = parse_feedback_kind(record.value("kind", ""));
    if (!kind) continue;
    FeedbackEvent event{record.value("finding_id", ""), *kind,
                        record.value("user", ""), record.value("at", "")};
    const std::string triple = event.finding_id + "\x1f" + event.user + "\x1f" +
                               std::string(feedback_kind_name(event.kind));
    if (event_triples_.insert(triple).second) {
      events_.push_back(std::move(event));
    }
  }
}

std::string FindingStore::save(const Finding& finding,
                               const std::string& idempotency_key) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (findings_.count(finding.finding_id) > 0) {
    if (!idempotency_key.empty()) key_to_id_[idempotency_key] = finding.finding_id;
    return finding.finding_id;
  }

  {
    std::ofstream body(dir_ / "findings" / (finding.finding_id + ".md"),
                       std::ios::binary | std::ios::trunc);
    body.write(finding.body_markdown.data(),
               static_cast<std::streamsize>(finding.body_markdown.size()));
  }

  json links = json::array();
  for (const auto& [text, uri] : finding.links) {
    links.push_back({{"text", text}, {"uri", uri}});
  }
  json record = {
      {"finding_id", finding.finding_id},
      {"bundle_id", finding.bundle_id},
      {"outcome", outcome_json_name(finding.outcome)},
      {"created_at", finding.created_at},
      {"generation_latency_ms", finding.generation_latency.count()},
      {"links", links},
  };
  if (!idempotency_key.empty()) record["idempotency_key"] = idempotency_key;
  std::ofstream index(dir_ / "findings.jsonl", std::ios::app);
  index << record.dump() << '\n';

  findings_[finding.finding_id] = finding;
  if (!idempotency_key.empty()) key_to_id_[idempotency_key] = finding.finding_id;
  return finding.finding_id;
}

bool FindingStore::exists(const std::string& finding_id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return findings_.count(finding_id) > 0;
}

std::optional<Finding> FindingStore::get(const std::string& finding_id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = findings_.find(finding_id);
  if (it == findings_.end()) return std::nullopt;
  Finding finding = it->second;
  if (finding.body_markdown.empty()) {
    std::ifstream body(dir_ / "findings" / (finding_id + ".md"),
                       std::ios::binary);
    std::ostringstream buf;
    buf << body.rdbuf();
    finding.body_markdown = buf.str();
  }
  return finding;
}

std::optional<std::string> FindingStore::find_by_key(
    const std::string& idempotency_key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = key_to_id_.find(idempotency_key);
  if (it == key_to_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> FindingStore::finding_ids() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<std::string> ids;
  ids.reserve(findings_.size());
  for (const auto& [id, _] : findings_) ids.push_back(id);
  return ids;
}

void FindingStore::record_feedback(const FeedbackEvent& event) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (findings_.count(event.finding_id) == 0) {
    throw UnknownFinding(event.finding_id);
  }
  const std::string triple = event.finding_id + "\x1f" + event.user + "\x1f" +
                             std::string(feedback_kind_name(event.kind));
  if (!event_triples_.insert(triple).second) return;  // idempotent

  json record = {
      {"finding_id", event.finding_id},
      {"kind", std::string(feedback_kind_name(event.kind))},
      {"user", event.user},
      {"at", event.at},
  };
  std::ofstream out(dir_ / "feedback.jsonl", std::ios::app);
  out << record.dump() << '\n';
  events_.push_back(event);
}

std::vector<FeedbackEvent> FindingStore::feedback_events() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return events_;
}

MetricsReport compute_metrics(const FindingStore& store) {
  MetricsReport report;
  report.findings_total = store.finding_ids().size();

  std::set<std::string> with_feedback;
  for (const FeedbackEvent& event : store.feedback_events()) {
    with_feedback.insert(event.finding_id);
    switch (event.kind) {
      case FeedbackKind::PleaseFix: ++report.pf; break;
      case FeedbackKind::Helpful: ++report.h; break;
      case FeedbackKind::NotHelpful: ++report.n; break;
    }
  }
  report.findings_with_feedback = with_feedback.size();

  if (report.findings_total > 0) {
    report.feedback_rate = static_cast<double>(report.findings_with_feedback) /
                           static_cast<double>(report.findings_total);
  }
  if (report.h + report.n > 0) {
    report.helpfulness_rate = static_cast<double>(report.h) /
                              static_cast<double>(report.h + report.n);
  }
  if (report.pf + report.h + report.n > 0) {
    report.not_helpful_rate =
        static_cast<double>(report.n) /
        static_cast<double>(report.pf + report.h + report.n);
  }
  report.guideline_violated =
      report.not_helpful_rate.has_value() && *report.not_helpful_rate > 0.10;
  return report;
}

std::string render_metrics(const MetricsReport& report) {
  auto rate = [](const std::optional<double>& value) -> std::string {
    if (!value) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *value);
    return buf;
  };
  std::ostringstream out;
  out << "findings_total: " << report.findings_total << '\n'
      << "findings_with_feedback: " << report.findings_with_feedback << '\n'
      << "please_fix: " << report.pf << '\n'
      << "helpful: " << report.h << '\n'
      << "not_helpful: " << report.n << '\n';
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", report.feedback_rate);
  out << "feedback_rate: " << buf << '\n'
      << "helpfulness_rate: " << rate(report.helpfulness_rate) << '\n'
      << "not_helpful_rate: " << rate(report.not_helpful_rate) << '\n'
      << "guideline_violated: " << (report.guideline_violated ? "true" : "false")
      << '\n';
  return out.str();
}

std::string rfc3339_now_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                utc.tm_year + 1900, utc.tm_mon + 1, utc.tm_mday, utc.tm_hour,
                utc.tm_min, utc.tm_sec);
  return buf;
}

}  // namespace logdiag
