#include "logdiag/llm_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "logdiag/sha256.hpp"
#include "logdiag/strings.hpp"

namespace logdiag {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::string_view kRecordingHeader = "logdiag-recording v1";

}  // namespace

void LlmParams::validate() const {
  if (temperature < 0.0 || temperature > 2.0) {
    throw std::invalid_argument("temperature must be within [0, 2]");
  }
  if (top_p <= 0.0 || top_p > 1.0) {
    throw std::invalid_argument("top_p must be within (0, 1]");
  }
}

ReplayStore::ReplayStore(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

std::string ReplayStore::key_for(std::string_view prompt_text) {
  return sha256_hex(prompt_text);
}

void ReplayStore::record(std::string_view prompt_text,
                         const RawResponse& response) {
  std::lock_guard<std::mutex> lock(mutex_);
  const fs::path path = dir_ / (key_for(prompt_text) + ".txt");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write recording: " + path.string());
  }
  out << kRecordingHeader << '\n'
      << "backend: " << response.backend << '\n'
      << "input_tokens: " << response.input_tokens << '\n'
      << "output_tokens: " << response.output_tokens << '\n'
      << '\n';
  out.write(response.text.data(),
            static_cast<std::streamsize>(response.text.size()));
}

std::optional<RawResponse> ReplayStore::replay(
    std::string_view prompt_text) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const fs::path path = dir_ / (key_for(prompt_text) + ".txt");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string raw = buf.str();

  RawResponse response;
  response.backend = "replay";
  std::size_t pos = 0;
  bool first = true;
  while (pos < raw.size()) {
    const auto nl = raw.find('\n', pos);
    if (nl == std::string::npos) return std::nullopt;  // malformed recording
    const std::string_view line{raw.data() + pos, nl - pos};
    pos = nl + 1;
    if (first) {
      if (line != kRecordingHeader) return std::nullopt;
      first = false;
      continue;
    }
    if (line.empty()) break;  // header/body separator
    if (line.rfind("input_tokens: ", 0) == 0) {
      response.input_tokens = std::strtoull(line.data() + 14, nullptr, 10);
    } else if (line.rfind("output_tokens: ", 0) == 0) {
      response.output_tokens = std::strtoull(line.data() + 15, nullptr, 10);
    }
  }
  response.text = raw.substr(pos);
  return response;
}

RawResponse ReplayBackend::complete(const DiagnosisPrompt& prompt,
                                    const LlmParams& params) {
  params.validate();
  auto hit = store_.replay(prompt.text);
  if (!hit) {
    throw BackendError(BackendErrorKind::Unavailable,
                       "no recording for prompt " +
                           ReplayStore::key_for(prompt.text).substr(0, 12) +
                           " under " + store_.dir().string());
  }
  return *hit;
}

RawResponse RecordingBackend::complete(const DiagnosisPrompt& prompt,
                                       const LlmParams& params) {
  if (auto hit = store_.replay(prompt.text)) return *hit;
  RawResponse response = inner_.complete(prompt, params);
  store_.record(prompt.text, response);
  return response;
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("backend url must include a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config)
    : config_(std::move(config)) {
  parse_url(config_.url);  // fail fast on malformed configuration
}

RawResponse HttpBackend::complete(const DiagnosisPrompt& prompt,
                                  const LlmParams& params) {
  params.validate();
  const ParsedUrl url = parse_url(config_.url);

  json request = {
      {"model", params.model_name},
      {"temperature", params.temperature},
      {"top_p", params.top_p},
      {"max_output_tokens", params.max_output_tokens},
      {"prompt", prompt.text},
  };
  const std::string body = request.dump();

  std::string bearer;
  if (!config_.credential_env.empty()) {
    if (const char* value = std::getenv(config_.credential_env.c_str())) {
      bearer = value;
    }
  }

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
    }

    httplib::Client client(url.origin);
    const auto timeout_s = std::chrono::duration_cast<std::chrono::seconds>(
        config_.timeout);
    const auto timeout_us =
        std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout);
    client.set_connection_timeout(timeout_s.count(),
                                  timeout_us.count() % 1000000);
    client.set_read_timeout(timeout_s.count(), timeout_us.count() % 1000000);
    client.set_write_timeout(timeout_s.count(), timeout_us.count() % 1000000);
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);

    const auto started = std::chrono::steady_clock::now();
    httplib::Result result =
        client.Post(url.path, headers, body, "application/json");
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);

    if (!result) {
      const auto err = result.error();
      if (err == httplib::Error::ConnectionTimeout ||
          err == httplib::Error::Read || err == httplib::Error::Write) {
        // Do not retry once the deadline was hit; report it as a timeout.
        throw BackendError(BackendErrorKind::Timeout,
                           "backend request timed out after " +
                               std::to_string(config_.timeout.count()) + " ms");
      }
      last_error = "connection failed: " + httplib::to_string(err);
      continue;
    }
    if (result->status >= 500) {
      last_error = "backend returned status " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      throw BackendError(BackendErrorKind::Unavailable,
                         "backend returned status " +
                             std::to_string(result->status) + ": " +
                             result->body.substr(0, 200));
    }

    std::string text;
    std::size_t input_tokens = 0, output_tokens = 0;
    try {
      const json reply = json::parse(result->body);
      text = reply.value("text", "");
      input_tokens = reply.value("input_tokens", estimate_tokens(prompt.text));
      output_tokens = reply.value("output_tokens", estimate_tokens(text));
    } catch (const json::exception& e) {
      throw BackendError(BackendErrorKind::Unavailable,
                         std::string("malformed backend response: ") +
                             e.what());
    }
    if (text.empty()) {
      throw BackendError(BackendErrorKind::EmptyResponse,
                         "backend returned an empty completion");
    }

    RawResponse response;
    response.text = std::move(text);
    response.input_tokens = input_tokens;
    response.output_tokens = output_tokens;
    response.latency = elapsed;
    response.backend = "http";
    return response;
  }

  throw BackendError(BackendErrorKind::Unavailable,
                     last_error.empty() ? "backend unavailable" : last_error);
}

}  // namespace logdiag
