#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "logdiag/eval_harness.hpp"
#include "logdiag/ingestion.hpp"
#include "test_util.hpp"

using namespace logdiag;
using logdiag::testing::TmpDir;

namespace {

std::map<std::string, std::string> read_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    out[entry.path().filename().string()] = buf.str();
  }
  return out;
}

CaseSpec small_spec(FaultType type, const std::string& target,
                    std::uint64_t seed) {
  CaseSpec spec;
  spec.components = 3;
  spec.lines_per_file = {25, 60};
  spec.noise_error_rate = 0.05;
  spec.fault = {type, target};
  spec.seed = seed;
  return spec;
}

class ThrowingBackend final : public CompletionBackend {
 public:
  std::string name() const override { return "throwing"; }
  RawResponse complete(const DiagnosisPrompt&, const LlmParams&) override {
    throw BackendError(BackendErrorKind::Unavailable, "synthetic outage");
  }
};

}  // namespace

TEST_CASE("generation is byte-identical for a fixed seed") {
  TmpDir a, b;
  const CaseSpec spec = small_spec(FaultType::ComponentCrash, "server-b", 42);
  generate_bundle(spec, a.path());
  generate_bundle(spec, b.path());
  CHECK(read_dir(a.path()) == read_dir(b.path()));

  TmpDir c;
  CaseSpec other = spec;
  other.seed = 43;
  generate_bundle(other, c.path());
  CHECK(read_dir(a.path()) != read_dir(c.path()));
}

TEST_CASE("crash fault writes the shutdown line last in the culprit error log") {
  TmpDir dir;
  const CaseSpec spec = small_spec(FaultType::ComponentCrash, "server-a", 7);
  const GroundTruth truth = generate_bundle(spec, dir.path());
  REQUIRE(truth.culprit_file == std::string("server-a.error"));
  REQUIRE(truth.culprit_line_content);

  const auto files = read_dir(dir.path());
  REQUIRE(files.count("server-a.error") == 1);
  const std::string& content = files.at("server-a.error");
  const auto last_newline = content.rfind('\n', content.size() - 2);
  const std::string last_line = content.substr(last_newline + 1);
  CHECK(last_line.find("shutting down") != std::string::npos);

  // driver names the failed component
  REQUIRE(files.count("test_driver.error") == 1);
  CHECK(files.at("test_driver.error").find("component server-a failed") !=
        std::string::npos);
}

TEST_CASE("missing-log faults omit the corresponding files") {
  SUBCASE("driver log missing") {
    TmpDir dir;
    const GroundTruth truth =
        generate_bundle(small_spec(FaultType::MissingDriverLog, "", 9),
                        dir.path());
    CHECK(truth.expect_insufficient);
    const auto files = read_dir(dir.path());
    for (const auto& [name, _] : files) {
      CHECK(name.find("test_driver") == std::string::npos);
    }
  }
  SUBCASE("component log missing") {
    TmpDir dir;
    const GroundTruth truth = generate_bundle(
        small_spec(FaultType::MissingComponentLog, "server-b", 10), dir.path());
    CHECK(truth.expect_insufficient);
    const auto files = read_dir(dir.path());
    for (const auto& [name, _] : files) {
      CHECK(name.find("server-b") == std::string::npos);
    }
    CHECK(files.count("test_driver.error") == 1);
  }
}

TEST_CASE("timeout fault truncates the culprit log mid-startup") {
  TmpDir dir;
  const GroundTruth truth = generate_bundle(
      small_spec(FaultType::StartupTimeout, "server-c", 11), dir.path());
  REQUIRE(truth.culprit_file == std::string("server-c.info"));
  REQUIRE(truth.culprit_line_content);
  CHECK(truth.culprit_line_content->find("Initializing subsystem") !=
        std::string::npos);

  const auto files = read_dir(dir.path());
  const std::string& content = files.at("server-c.info");
  CHECK(content.back() != '\n');  // tail lost mid-write
  CHECK(content.find("became healthy") == std::string::npos);
  CHECK(files.at("test_driver.error").find("component server-c failed") !=
        std::string::npos);
}

TEST_CASE("generated files parse cleanly under ingestion") {
  // Grammar closure: no unparseable-line notes except the intentionally
  // truncated timeout tails (which fold into the previous message).
  const IngestionConfig config;
  const FaultType kinds[] = {FaultType::ComponentCrash,
                             FaultType::StartupTimeout,
                             FaultType::AssertionFailure};
  for (FaultType type : kinds) {
    for (std::uint64_t seed = 50; seed < 55; ++seed) {
      TmpDir dir;
      const std::string target =
          type == FaultType::AssertionFailure ? "expected 1, got 2" : "server-a";
      generate_bundle(small_spec(type, target, seed), dir.path());
      IngestionConfig all_levels = config;
      all_levels.min_level = LogLevel::Debug;
      const LogBundle bundle = load_bundle(dir.path(), all_levels);
      for (const IngestionNote& note : bundle.ingestion_notes) {
        CHECK(note.kind != NoteKind::UnparseableLine);
        CHECK(note.kind != NoteKind::CorruptFile);
      }
    }
  }
}

TEST_CASE("score_diagnosis follows the accuracy rule") {
  GroundTruth crash;
  crash.fault = {FaultType::ComponentCrash, "server-a"};
  crash.culprit_file = "server-a.error";
  crash.culprit_line_content = "Server encountered an error, shutting down";

  SUBCASE("citation resolving to the culprit line is accurate") {
    ResolvedDiagnosis r;
    r.outcome = Outcome::Conclusive;
    r.diagnosis.conclusion = "irrelevant";
    r.resolutions.push_back(
        {{"server-a.error", std::nullopt, std::nullopt, "shutting down"},
         std::make_pair(std::string("server-a.error"), 4)});
    const Verdict verdict = score_diagnosis(r, crash);
    CHECK(verdict.accurate);
  }
  SUBCASE("unparseable outcome is inaccurate with reason") {
    ResolvedDiagnosis r;
    r.outcome = Outcome::Unparseable;
    const Verdict verdict = score_diagnosis(r, crash);
    CHECK_FALSE(verdict.accurate);
    CHECK(verdict.reason == "unparseable");
  }
  SUBCASE("conclusion quoting the culprit counts without citations") {
    ResolvedDiagnosis r;
    r.outcome = Outcome::Conclusive;
    r.diagnosis.conclusion =
        "root cause: Server encountered an error, shutting down";
    r.resolutions.push_back(
        {{"other.error", std::nullopt, std::nullopt, "x"}, std::nullopt});
    CHECK(score_diagnosis(r, crash).accurate);
  }
  SUBCASE("citation into the wrong file is inaccurate") {
    ResolvedDiagnosis r;
    r.outcome = Outcome::Conclusive;
    r.diagnosis.conclusion = "something else";
    r.resolutions.push_back(
        {{"server-b.error", std::nullopt, std::nullopt, "shutting down"},
         std::make_pair(std::string("server-b.error"), 0)});
    CHECK_FALSE(score_diagnosis(r, crash).accurate);
  }
  SUBCASE("missing-log truth expects InsufficientInformation") {
    GroundTruth missing;
    missing.fault = {FaultType::MissingComponentLog, "server-b"};
    missing.expect_insufficient = true;
    ResolvedDiagnosis insufficient;
    insufficient.outcome = Outcome::InsufficientInformation;
    CHECK(score_diagnosis(insufficient, missing).accurate);
    ResolvedDiagnosis conclusive;
    conclusive.outcome = Outcome::Conclusive;
    CHECK_FALSE(score_diagnosis(conclusive, missing).accurate);
  }
}

TEST_CASE("build_corpus rotates fault kinds and seeds") {
  const auto corpus = build_corpus(
      60, 1000, {"crash", "timeout", "assertion", "missing"}, 5, 0.02,
      {50, 100});
  REQUIRE(corpus.size() == 60);
  std::map<FaultType, int> counts;
  for (const CaseSpec& spec : corpus) ++counts[spec.fault.type];
  CHECK(counts[FaultType::ComponentCrash] == 15);
  CHECK(counts[FaultType::StartupTimeout] == 15);
  CHECK(counts[FaultType::AssertionFailure] == 15);
  CHECK(counts[FaultType::MissingDriverLog] +
            counts[FaultType::MissingComponentLog] ==
        15);
  CHECK(counts[FaultType::MissingDriverLog] == 8);
  CHECK(counts[FaultType::MissingComponentLog] == 7);
  CHECK(corpus[0].seed == 1000);
  CHECK(corpus[59].seed == 1059);

  CHECK_THROWS_AS(build_corpus(4, 0, {"bogus"}, 5, 0.02, {50, 100}),
                  std::invalid_argument);
}

TEST_CASE("run_eval over a mixed corpus with the mock backend") {
  TmpDir work;
  const auto corpus = build_corpus(
      12, 500, {"crash", "timeout", "assertion", "missing"}, 3, 0.05,
      {25, 60});
  MockBackend backend;
  EvalOptions options;
  options.work_dir = work.path();
  const EvalReport report = run_eval(corpus, backend, options);

  CHECK(report.cases == 12);
  REQUIRE(report.accuracy);
  CHECK(report.accurate == 12);  // the mock solves every generated fault
  for (const auto& [fault, acc] : report.per_fault) {
    CHECK(acc.accurate == acc.cases);
  }

  // breakdown is consistent with the overall counts
  std::size_t sum_cases = 0, sum_accurate = 0;
  for (const auto& [_, acc] : report.per_fault) {
    sum_cases += acc.cases;
    sum_accurate += acc.accurate;
  }
  CHECK(sum_cases == report.cases);
  CHECK(sum_accurate == report.accurate);
}

TEST_CASE("run_eval treats backend failures as inaccurate cases") {
  TmpDir work;
  const auto corpus = build_corpus(3, 2, {"crash"}, 2, 0.0, {20, 30});
  ThrowingBackend backend;
  EvalOptions options;
  options.work_dir = work.path();
  const EvalReport report = run_eval(corpus, backend, options);
  CHECK(report.cases == 3);
  CHECK(report.accurate == 0);
  for (const EvalCaseOutcome& outcome : report.case_outcomes) {
    CHECK(outcome.reason.find("synthetic outage") != std::string::npos);
  }
}

TEST_CASE("empty corpus renders an n/a accuracy") {
  TmpDir work;
  MockBackend backend;
  EvalOptions options;
  options.work_dir = work.path();
  const EvalReport report = run_eval({}, backend, options);
  CHECK(report.cases == 0);
  CHECK_FALSE(report.accuracy);
  const std::string text = render_eval_report(report, false);
  CHECK(text.find("accuracy: n/a") != std::string::npos);
}

TEST_CASE("eval report rendering is stable without latency") {
  TmpDir work;
  const auto corpus = build_corpus(4, 9, {"crash", "missing"}, 2, 0.0, {20, 30});
  MockBackend backend;
  EvalOptions options;
  options.work_dir = work.path();
  const EvalReport a = run_eval(corpus, backend, options);
  const EvalReport b = run_eval(corpus, backend, options);
  CHECK(render_eval_report(a, false) == render_eval_report(b, false));

  TmpDir out;
  write_eval_report_json(a, out.path() / "report.json", false);
  write_eval_report_json(b, out.path() / "report2.json", false);
  CHECK(read_dir(out.path()).begin()->second ==
        std::next(read_dir(out.path()).begin())->second);
}
