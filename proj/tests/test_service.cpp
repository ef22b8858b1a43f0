#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "logdiag/eval_harness.hpp"
#include "logdiag/latency_stats.hpp"
#include "logdiag/service.hpp"
#include "test_util.hpp"

using namespace logdiag;
using logdiag::testing::TmpDir;
using nlohmann::json;

namespace {

std::filesystem::path make_crash_bundle(const TmpDir& dir,
                                        std::uint64_t seed = 21) {
  CaseSpec spec;
  spec.components = 2;
  spec.lines_per_file = {20, 40};
  spec.noise_error_rate = 0.02;
  spec.fault = {FaultType::ComponentCrash, "server-a"};
  spec.seed = seed;
  const auto bundle_dir = dir.path() / "bundle";
  generate_bundle(spec, bundle_dir);
  return bundle_dir;
}

}  // namespace

TEST_CASE("nearest-rank latency percentiles") {
  CHECK(compute_latency_stats({}).count == 0);

  const LatencyStats one = compute_latency_stats({7});
  CHECK(one.count == 1);
  CHECK(one.p50.count() == 7);
  CHECK(one.p90.count() == 7);

  // nearest-rank on 1..10: p50 -> rank 5, p90 -> rank 9
  std::vector<std::int64_t> ten;
  for (int i = 10; i >= 1; --i) ten.push_back(i);
  const LatencyStats stats = compute_latency_stats(ten);
  CHECK(stats.p50.count() == 5);
  CHECK(stats.p90.count() == 9);
  CHECK(stats.p50 <= stats.p90);
}

TEST_CASE("service conformance over the documented endpoints") {
  TmpDir store_dir, bundle_dir;
  const auto bundle_path = make_crash_bundle(bundle_dir);

  MockBackend backend;
  ServiceConfig config;
  config.port = 0;
  config.store_dir = store_dir.path() / "store";
  DiagnosisService service(config, backend);
  REQUIRE(service.start());

  httplib::Client client("127.0.0.1", service.port());
  client.set_read_timeout(30, 0);

  std::string finding_id;

  SUBCASE("scripted sequence: failure, finding, feedback, metrics") {
    // POST /failures -> 202 with finding id
    auto post = client.Post("/failures",
                            json{{"bundle_path", bundle_path.string()}}.dump(),
                            "application/json");
    REQUIRE(post);
    CHECK(post->status == 202);
    json posted = json::parse(post->body);
    finding_id = posted["finding_id"];
    CHECK_FALSE(finding_id.empty());
    CHECK(posted["existing"] == false);
    CHECK(posted["outcome"] == "Conclusive");

    // duplicate POST returns the existing finding id, no second pipeline run
    auto dup = client.Post("/failures",
                           json{{"bundle_path", bundle_path.string()}}.dump(),
                           "application/json");
    REQUIRE(dup);
    CHECK(dup->status == 202);
    json duplicated = json::parse(dup->body);
    CHECK(duplicated["finding_id"] == finding_id);
    CHECK(duplicated["existing"] == true);

    // GET /findings/{id}
    auto got = client.Get(("/findings/" + finding_id).c_str());
    REQUIRE(got);
    CHECK(got->status == 200);
    json finding = json::parse(got->body);
    CHECK(finding["outcome"] == "Conclusive");
    CHECK(finding["body_markdown"].get<std::string>().find("**Outcome:") == 0);
    CHECK_FALSE(finding["links"].empty());

    // POST feedback -> 204
    auto fb = client.Post(("/findings/" + finding_id + "/feedback").c_str(),
                          json{{"kind", "Helpful"}, {"user", "alice"}}.dump(),
                          "application/json");
    REQUIRE(fb);
    CHECK(fb->status == 204);

    // GET /metrics reflects the feedback and latency invariant
    auto metrics = client.Get("/metrics");
    REQUIRE(metrics);
    CHECK(metrics->status == 200);
    json m = json::parse(metrics->body);
    CHECK(m["h"] == 1);
    CHECK(m["findings_total"] == 1);
    CHECK(m["findings_with_feedback"] == 1);
    CHECK(m["latency"]["count"] == 1);  // duplicate POST did not rerun
    CHECK(m["latency"]["p50_ms"].get<std::int64_t>() <=
          m["latency"]["p90_ms"].get<std::int64_t>());
  }

  SUBCASE("error statuses") {
    CHECK(client.Post("/failures", "not json", "application/json")->status ==
          400);
    CHECK(client
              .Post("/failures", json{{"wrong_key", 1}}.dump(),
                    "application/json")
              ->status == 400);
    CHECK(client
              .Post("/failures",
                    json{{"bundle_path", "/nonexistent/path"}}.dump(),
                    "application/json")
              ->status == 422);
    CHECK(client.Get("/findings/deadbeef")->status == 404);
    CHECK(client
              .Post("/findings/deadbeef/feedback",
                    json{{"kind", "Helpful"}, {"user", "a"}}.dump(),
                    "application/json")
              ->status == 404);

    auto post = client.Post("/failures",
                            json{{"bundle_path", bundle_path.string()}}.dump(),
                            "application/json");
    REQUIRE(post->status == 202);
    const std::string id = json::parse(post->body)["finding_id"];
    CHECK(client
              .Post(("/findings/" + id + "/feedback").c_str(),
                    json{{"kind", "Meh"}, {"user", "a"}}.dump(),
                    "application/json")
              ->status == 400);
    CHECK(client
              .Post(("/findings/" + id + "/feedback").c_str(), "garbage",
                    "application/json")
              ->status == 400);
  }

  service.stop();
}

TEST_CASE("webhook delivery with retries that never fail the pipeline") {
  TmpDir store_dir, bundle_dir;
  const auto bundle_path = make_crash_bundle(bundle_dir, 33);

  // Stub webhook: fails twice, succeeds on the third attempt.
  httplib::Server webhook;
  std::atomic<int> attempts{0};
  std::string delivered_body;
  std::mutex delivered_mutex;
  webhook.Post("/hook", [&](const httplib::Request& req,
                            httplib::Response& res) {
    const int attempt = ++attempts;
    if (attempt < 3) {
      res.status = 500;
      return;
    }
    std::lock_guard<std::mutex> lock(delivered_mutex);
    delivered_body = req.body;
    res.status = 200;
  });
  const int webhook_port = webhook.bind_to_any_port("127.0.0.1");
  REQUIRE(webhook_port > 0);
  std::thread webhook_thread([&] { webhook.listen_after_bind(); });
  while (!webhook.is_running()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }

  MockBackend backend;
  ServiceConfig config;
  config.port = 0;
  config.store_dir = store_dir.path() / "store";
  config.webhook_url =
      "http://127.0.0.1:" + std::to_string(webhook_port) + "/hook";
  DiagnosisService service(config, backend);
  REQUIRE(service.start());

  httplib::Client client("127.0.0.1", service.port());
  client.set_read_timeout(30, 0);
  auto post = client.Post("/failures",
                          json{{"bundle_path", bundle_path.string()}}.dump(),
                          "application/json");
  REQUIRE(post);
  CHECK(post->status == 202);  // webhook failures never fail the pipeline
  CHECK(attempts == 3);
  {
    std::lock_guard<std::mutex> lock(delivered_mutex);
    const json payload = json::parse(delivered_body);
    CHECK(payload["outcome"] == "Conclusive");
    CHECK_FALSE(payload["finding_id"].get<std::string>().empty());
    CHECK(payload.contains("links"));
  }

  service.stop();
  webhook.stop();
  webhook_thread.join();
}

TEST_CASE("service keeps serving when the webhook is unreachable") {
  TmpDir store_dir, bundle_dir;
  const auto bundle_path = make_crash_bundle(bundle_dir, 44);

  MockBackend backend;
  ServiceConfig config;
  config.port = 0;
  config.store_dir = store_dir.path() / "store";
  config.webhook_url = "http://127.0.0.1:1/hook";  // connection refused
  DiagnosisService service(config, backend);
  REQUIRE(service.start());

  httplib::Client client("127.0.0.1", service.port());
  client.set_read_timeout(30, 0);
  auto post = client.Post("/failures",
                          json{{"bundle_path", bundle_path.string()}}.dump(),
                          "application/json");
  REQUIRE(post);
  CHECK(post->status == 202);
  service.stop();
}
