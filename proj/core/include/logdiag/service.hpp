#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "logdiag/latency_stats.hpp"
#include "logdiag/llm_backend.hpp"
#include "logdiag/pipeline.hpp"

namespace logdiag {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds any free port
  std::optional<std::string> webhook_url;
  std::filesystem::path store_dir = ".logdiag";
  PipelineConfig pipeline{};
};

/// HTTP service mirroring the deployed flow: a failure notification comes in,
/// the pipeline runs, the finding is persisted and optionally delivered to a
/// webhook, and feedback flows back.
///
///   POST /failures {"bundle_path": p}        -> 202 {"finding_id": ...}
///   GET  /findings/<id>                      -> 200 finding | 404
///   POST /findings/<id>/feedback {kind,user} -> 204 | 400 | 404
///   GET  /metrics                            -> 200 metrics + latency stats
///
/// Duplicate POST /failures for the same path and content returns the
/// existing finding_id without rerunning the pipeline. Webhook delivery is
/// retried twice and never fails the pipeline.
class DiagnosisService {
 public:
  DiagnosisService(ServiceConfig config, CompletionBackend& backend);
  ~DiagnosisService();

  DiagnosisService(const DiagnosisService&) = delete;
  DiagnosisService& operator=(const DiagnosisService&) = delete;

  /// Binds and serves on a background thread. Returns false when the port
  /// cannot be bound.
  bool start();
  void stop();

  int port() const;
  LatencyStats latency_snapshot() const;

  /// Serves on the calling thread until stop() (for the CLI serve command).
  bool run_blocking();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace logdiag
