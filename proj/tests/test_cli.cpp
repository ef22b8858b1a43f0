// Drives the real CLI binary (path via LOGDIAG_CLI_PATH, set by ctest) and
// checks the documented exit-code taxonomy:
//   0 conclusive, 2 insufficient information, 3 unparseable, 1 operational.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "logdiag/eval_harness.hpp"
#include "logdiag/ingestion.hpp"
#include "logdiag/llm_backend.hpp"
#include "logdiag/merging.hpp"
#include "logdiag/prompting.hpp"
#include "test_util.hpp"

using namespace logdiag;
using logdiag::testing::TmpDir;

namespace {

std::string cli_path() {
  const char* path = std::getenv("LOGDIAG_CLI_PATH");
  REQUIRE_MESSAGE(path != nullptr, "LOGDIAG_CLI_PATH must point at the CLI");
  return path;
}

struct CommandResult {
  int exit_code = -1;
  std::string stdout_text;
};

CommandResult run(const std::string& args) {
  const std::string command = cli_path() + " " + args + " 2>/dev/null";
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CommandResult result;
  char buffer[4096];
  std::size_t got;
  while ((got = fread(buffer, 1, sizeof(buffer), pipe)) > 0) {
    result.stdout_text.append(buffer, got);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::filesystem::path generate_case(const TmpDir& dir, FaultType type,
                                    const std::string& target,
                                    std::uint64_t seed) {
  CaseSpec spec;
  spec.components = 2;
  spec.lines_per_file = {20, 40};
  spec.noise_error_rate = 0.02;
  spec.fault = {type, target};
  spec.seed = seed;
  const auto bundle = dir.path() / "bundle";
  generate_bundle(spec, bundle);
  return bundle;
}

}  // namespace

TEST_CASE("diagnose exit codes by outcome") {
  TmpDir store;
  const std::string store_flag = " --store-dir " + (store.path() / "s").string();

  SUBCASE("conclusive crash diagnosis exits 0") {
    TmpDir dir;
    const auto bundle =
        generate_case(dir, FaultType::ComponentCrash, "server-a", 301);
    const CommandResult result =
        run("diagnose " + bundle.string() + store_flag);
    CHECK(result.exit_code == 0);
    CHECK(result.stdout_text.find("**Outcome: conclusive") == 0);
  }
  SUBCASE("missing driver logs exit 2") {
    TmpDir dir;
    const auto bundle =
        generate_case(dir, FaultType::MissingDriverLog, "", 302);
    const CommandResult result =
        run("diagnose " + bundle.string() + store_flag);
    CHECK(result.exit_code == 2);
    CHECK(result.stdout_text.find("more information is needed") !=
          std::string::npos);
  }
  SUBCASE("nonexistent directory exits 1") {
    const CommandResult result =
        run("diagnose /nonexistent/logdiag-dir" + store_flag);
    CHECK(result.exit_code == 1);
  }
  SUBCASE("an unparseable replayed response exits 3") {
    // Record garbage under the exact prompt the CLI will build, then point
    // the CLI's replay backend at it. Doubles as a check that the CLI's
    // prompt construction is byte-identical to the library path.
    TmpDir dir, recordings;
    const auto bundle =
        generate_case(dir, FaultType::ComponentCrash, "server-b", 303);

    const IngestionConfig config;
    const LogBundle loaded = load_bundle(bundle, config);
    const DiagnosisPrompt prompt = build_prompt(
        PromptTemplate::builtin(),
        assemble_sections(filter_by_level(loaded, config.min_level)),
        ComponentContext{});
    ReplayStore replay(recordings.path());
    RawResponse garbage;
    garbage.text = "model rambled with no recognizable structure";
    garbage.backend = "test";
    replay.record(prompt.text, garbage);

    const CommandResult result =
        run("diagnose " + bundle.string() + store_flag +
            " --backend replay --record-dir " + recordings.path().string());
    CHECK(result.exit_code == 3);
  }
  SUBCASE("replay miss is an operational error, exit 1") {
    TmpDir dir, recordings;
    const auto bundle =
        generate_case(dir, FaultType::ComponentCrash, "server-a", 304);
    const CommandResult result =
        run("diagnose " + bundle.string() + store_flag +
            " --backend replay --record-dir " + recordings.path().string());
    CHECK(result.exit_code == 1);
  }
}

TEST_CASE("eval completes with exit 0 and prints the report") {
  TmpDir work;
  const CommandResult result = run(
      "eval --cases 4 --seed 11 --faults crash,missing --components 2 "
      "--lines-min 15 --lines-max 30 --stable --work-dir " +
      (work.path() / "w").string());
  CHECK(result.exit_code == 0);
  CHECK(result.stdout_text.find("cases: 4") != std::string::npos);
  CHECK(result.stdout_text.find("accuracy: 1.0000") != std::string::npos);
  CHECK(result.stdout_text.find("mean_latency_ms") == std::string::npos);
}

TEST_CASE("metrics prints a report for an empty store") {
  TmpDir store;
  const CommandResult result =
      run("metrics --store-dir " + (store.path() / "s").string());
  CHECK(result.exit_code == 0);
  CHECK(result.stdout_text.find("findings_total: 0") != std::string::npos);
}
