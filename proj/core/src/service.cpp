#include "logdiag/service.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "logdiag/finding.hpp"
#include "logdiag/sha256.hpp"

namespace logdiag {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json finding_to_json(const Finding& finding) {
  json links = json::array();
  for (const auto& [text, uri] : finding.links) {
    links.push_back({{"text", text}, {"uri", uri}});
  }
  return json{
      {"finding_id", finding.finding_id},
      {"bundle_id", finding.bundle_id},
      {"outcome", std::string(outcome_name(finding.outcome))},
      {"body_markdown", finding.body_markdown},
      {"links", links},
      {"created_at", finding.created_at},
      {"generation_latency_ms", finding.generation_latency.count()},
  };
}

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Content hash over the bundle directory: file names, sizes and bytes of
// every regular file, in name order.
std::optional<std::string> bundle_content_hash(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec) || ec) return std::nullopt;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (ec) return std::nullopt;
    std::error_code type_ec;
    if (entry.is_regular_file(type_ec) && !type_ec) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::string blob;
  for (const fs::path& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    blob += file.filename().string();
    blob += '\0';
    blob += std::to_string(bytes.size());
    blob += '\0';
    blob += bytes;
  }
  return sha256_hex(blob);
}

}  // namespace

struct DiagnosisService::Impl {
  Impl(ServiceConfig cfg, CompletionBackend& be)
      : config(std::move(cfg)), backend(be), store(config.store_dir) {
    register_routes();
  }

  ServiceConfig config;
  CompletionBackend& backend;
  FindingStore store;
  LatencyRecorder latency;
  httplib::Server server;
  std::thread thread;
  std::atomic<int> bound_port{0};

  void register_routes() {
    server.Post("/failures", [this](const httplib::Request& req,
                                    httplib::Response& res) {
      handle_failure(req, res);
    });

    server.Get(R"(/findings/([A-Za-z0-9_-]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 if (auto finding = store.get(id)) {
                   reply_json(res, 200, finding_to_json(*finding));
                 } else {
                   reply_json(res, 404, {{"error", "unknown finding"}});
                 }
               });

    server.Post(R"(/findings/([A-Za-z0-9_-]+)/feedback)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle_feedback(req, res);
                });

    server.Get("/metrics", [this](const httplib::Request&,
                                  httplib::Response& res) {
      const MetricsReport metrics = compute_metrics(store);
      const LatencyStats stats = latency.snapshot();
      json body = {
          {"findings_total", metrics.findings_total},
          {"findings_with_feedback", metrics.findings_with_feedback},
          {"pf", metrics.pf},
          {"h", metrics.h},
          {"n", metrics.n},
          {"feedback_rate", metrics.feedback_rate},
          {"guideline_violated", metrics.guideline_violated},
          {"latency",
           {{"count", stats.count},
            {"p50_ms", stats.p50.count()},
            {"p90_ms", stats.p90.count()}}},
      };
      body["helpfulness_rate"] =
          metrics.helpfulness_rate ? json(*metrics.helpfulness_rate) : json();
      body["not_helpful_rate"] =
          metrics.not_helpful_rate ? json(*metrics.not_helpful_rate) : json();
      reply_json(res, 200, body);
    });
  }

  void handle_failure(const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() ||
        !body.contains("bundle_path") || !body["bundle_path"].is_string()) {
      reply_json(res, 400, {{"error", "body must be {\"bundle_path\": string}"}});
      return;
    }
    const std::string bundle_path = body["bundle_path"];

    const auto content_hash = bundle_content_hash(bundle_path);
    if (!content_hash) {
      reply_json(res, 422, {{"error", "bundle path unreadable: " + bundle_path}});
      return;
    }
    const std::string key = bundle_path + "#" + *content_hash;
    if (auto existing = store.find_by_key(key)) {
      reply_json(res, 202,
                 {{"finding_id", *existing}, {"existing", true}});
      return;
    }

    PipelineResult result;
    try {
      result = run_pipeline(bundle_path, backend, config.pipeline);
    } catch (const RootDirUnreadable& e) {
      reply_json(res, 422, {{"error", e.what()}});
      return;
    } catch (const BackendError& e) {
      reply_json(res, 502, {{"error", e.what()}});
      return;
    } catch (const std::exception& e) {
      reply_json(res, 500, {{"error", e.what()}});
      return;
    }

    store.save(result.finding, key);
    latency.add(result.latency);
    if (config.webhook_url) deliver_webhook(result.finding);

    reply_json(res, 202,
               {{"finding_id", result.finding.finding_id},
                {"existing", false},
                {"outcome", std::string(outcome_name(result.finding.outcome))}});
  }

  void handle_feedback(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("kind") ||
        !body["kind"].is_string()) {
      reply_json(res, 400, {{"error", "body must be {\"kind\", \"user\"}"}});
      return;
    }
    const auto kind = parse_feedback_kind(body["kind"].get<std::string>());
    if (!kind) {
      reply_json(res, 400,
                 {{"error", "kind must be PleaseFix, Helpful or NotHelpful"}});
      return;
    }
    FeedbackEvent event{id, *kind, body.value("user", "anonymous"),
                        rfc3339_now_utc()};
    try {
      store.record_feedback(event);
    } catch (const UnknownFinding&) {
      reply_json(res, 404, {{"error", "unknown finding"}});
      return;
    }
    res.status = 204;
  }

  void deliver_webhook(const Finding& finding) {
    const std::string& url = *config.webhook_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      std::fprintf(stderr, "webhook url malformed, not delivering: %s\n",
                   url.c_str());
      return;
    }
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin =
        path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : url.substr(path_start);

    json links = json::array();
    for (const auto& [text, uri] : finding.links) {
      links.push_back({{"text", text}, {"uri", uri}});
    }
    const json payload = {
        {"finding_id", finding.finding_id},
        {"bundle_id", finding.bundle_id},
        {"outcome", std::string(outcome_name(finding.outcome))},
        {"body_markdown", finding.body_markdown},
        {"links", links},
    };
    const std::string body = payload.dump();

    for (int attempt = 0; attempt < 3; ++attempt) {  // initial try + 2 retries
      httplib::Client client(origin);
      client.set_connection_timeout(5, 0);
      client.set_read_timeout(5, 0);
      auto result = client.Post(path, body, "application/json");
      if (result && result->status >= 200 && result->status < 300) return;
      if (attempt < 2) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50 << attempt));
      }
    }
    std::fprintf(stderr, "webhook delivery failed for finding %s\n",
                 finding.finding_id.c_str());
  }
};

DiagnosisService::DiagnosisService(ServiceConfig config,
                                   CompletionBackend& backend)
    : impl_(std::make_unique<Impl>(std::move(config), backend)) {}

DiagnosisService::~DiagnosisService() { stop(); }

bool DiagnosisService::start() {
  int port = impl_->config.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->config.host);
    if (port < 0) return false;
  } else if (!impl_->server.bind_to_port(impl_->config.host, port)) {
    return false;
  }
  impl_->bound_port = port;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  for (int i = 0; i < 200 && !impl_->server.is_running(); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return impl_->server.is_running();
}

void DiagnosisService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int DiagnosisService::port() const { return impl_->bound_port.load(); }

LatencyStats DiagnosisService::latency_snapshot() const {
  return impl_->latency.snapshot();
}

bool DiagnosisService::run_blocking() {
  int port = impl_->config.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->config.host);
    if (port < 0) return false;
  } else if (!impl_->server.bind_to_port(impl_->config.host, port)) {
    return false;
  }
  impl_->bound_port = port;
  return impl_->server.listen_after_bind();
}

}  // namespace logdiag
