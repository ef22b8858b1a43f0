#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "logdiag/log_model.hpp"
#include "logdiag/merging.hpp"
#include "logdiag/prompting.hpp"

namespace logdiag {

struct LlmParams {
  double temperature = 0.1;
  double top_p = 0.8;
  std::string model_name = "diagnoser-flash";
  int max_output_tokens = 4096;

  /// Throws std::invalid_argument when temperature or top_p fall outside
  /// [0, 2] and (0, 1].
  void validate() const;
};

struct RawResponse {
  std::string text;
  std::size_t input_tokens = 0;
  std::size_t output_tokens = 0;
  std::chrono::milliseconds latency{0};
  std::string backend;
};

enum class BackendErrorKind { Unavailable, Timeout, EmptyResponse };

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendErrorKind kind, const std::string& detail)
      : std::runtime_error(detail), kind_(kind) {}

  BackendErrorKind kind() const { return kind_; }

 private:
  BackendErrorKind kind_;
};

/// Single-turn completion interface. Implementations must be safe for
/// concurrent complete() calls.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string name() const = 0;
  virtual RawResponse complete(const DiagnosisPrompt& prompt,
                               const LlmParams& params) = 0;
};

/// Deterministic rule-based diagnosis over sectioned logs: refuses with a
/// "need access" response when ingestion notes report missing logs, otherwise
/// cites the most recent relevant error lines of the failing component in the
/// exact output grammar. Serves as the hermetic stand-in for a real model.
RawResponse mock_diagnose(const SectionedLogs& prompt_sections,
                          const std::vector<IngestionNote>& notes);

class MockBackend final : public CompletionBackend {
 public:
  std::string name() const override { return "mock"; }
  RawResponse complete(const DiagnosisPrompt& prompt,
                       const LlmParams& params) override;
};

/// One recording file per prompt, keyed by the SHA-256 of the prompt text.
class ReplayStore {
 public:
  explicit ReplayStore(std::filesystem::path dir);

  static std::string key_for(std::string_view prompt_text);

  void record(std::string_view prompt_text, const RawResponse& response);
  std::optional<RawResponse> replay(std::string_view prompt_text) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
};

/// Replays recorded responses; unknown prompts raise
/// BackendError(Unavailable, "no recording ...").
class ReplayBackend final : public CompletionBackend {
 public:
  explicit ReplayBackend(std::filesystem::path dir) : store_(std::move(dir)) {}

  std::string name() const override { return "replay"; }
  RawResponse complete(const DiagnosisPrompt& prompt,
                       const LlmParams& params) override;

 private:
  ReplayStore store_;
};

/// Serves recorded responses when available, otherwise delegates to the
/// inner backend and records the result.
class RecordingBackend final : public CompletionBackend {
 public:
  RecordingBackend(CompletionBackend& inner, std::filesystem::path dir)
      : inner_(inner), store_(std::move(dir)) {}

  std::string name() const override { return "record"; }
  RawResponse complete(const DiagnosisPrompt& prompt,
                       const LlmParams& params) override;

 private:
  CompletionBackend& inner_;
  ReplayStore store_;
};

struct HttpBackendConfig {
  std::string url;  // e.g. http://127.0.0.1:8089/v1/complete
  std::string credential_env;  // env var holding the bearer token; may be empty
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;  // retries on Unavailable only, exponential backoff
};

/// Minimal generic completion API: POST {model, temperature, top_p,
/// max_output_tokens, prompt} as JSON, expect {text, input_tokens?,
/// output_tokens?} back.
class HttpBackend final : public CompletionBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string name() const override { return "http"; }
  RawResponse complete(const DiagnosisPrompt& prompt,
                       const LlmParams& params) override;

 private:
  HttpBackendConfig config_;
};

}  // namespace logdiag
