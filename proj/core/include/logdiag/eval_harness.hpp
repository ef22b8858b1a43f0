#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "logdiag/diagnosis_parser.hpp"
#include "logdiag/pipeline.hpp"

namespace logdiag {

enum class FaultType {
  ComponentCrash,
  StartupTimeout,
  AssertionFailure,
  MissingDriverLog,
  MissingComponentLog,
};

std::string_view fault_type_name(FaultType type);

/// The injected root cause. `target` is the culprit component for crash,
/// timeout and missing-component faults, and the assertion message for
/// assertion faults.
struct Fault {
  FaultType type = FaultType::ComponentCrash;
  std::string target;
};

struct LineCountRange {
  int min_lines = 200;
  int max_lines = 2000;
};

struct CaseSpec {
  int components = 5;
  LineCountRange lines_per_file{};
  double noise_error_rate = 0.02;  // benign ERROR lines per operational line
  Fault fault{};
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct GroundTruth {
  Fault fault;
  std::optional<std::string> culprit_file;
  std::optional<std::string> culprit_line_content;
  bool expect_insufficient = false;  // true iff the fault is a Missing* kind
};

/// Writes a synthetic failing-test log directory in the line grammar,
/// deterministic in the seed, and returns the injected ground truth.
GroundTruth generate_bundle(const CaseSpec& spec,
                            const std::filesystem::path& out_dir);

/// Component names used by the generator, in order: "server-a", "server-b"...
std::vector<std::string> generator_component_names(int count);

/// Benign error phrases drawn as noise; never a valid root cause.
const std::vector<std::string>& benign_noise_phrases();

struct Verdict {
  bool accurate = false;
  std::string reason;
};

/// Missing-log cases are accurate iff the outcome is InsufficientInformation.
/// Concrete faults are accurate iff the outcome is Conclusive and either a
/// resolved citation lands in the culprit file with overlapping content, or
/// the conclusion text quotes the culprit line.
Verdict score_diagnosis(const ResolvedDiagnosis& resolved,
                        const GroundTruth& truth);

struct FaultAccuracy {
  std::size_t cases = 0;
  std::size_t accurate = 0;
};

struct EvalCaseOutcome {
  std::string case_name;
  FaultType fault = FaultType::ComponentCrash;
  bool accurate = false;
  std::string reason;
  std::chrono::milliseconds latency{0};
};

struct EvalReport {
  std::size_t cases = 0;
  std::size_t accurate = 0;
  std::optional<double> accuracy;
  std::map<std::string, FaultAccuracy> per_fault;
  std::chrono::milliseconds mean_latency{0};
  std::vector<EvalCaseOutcome> case_outcomes;
};

struct EvalOptions {
  std::filesystem::path work_dir;
  bool keep_work = false;
  PipelineConfig pipeline{};
};

/// generate -> ingest -> filter -> section -> prompt -> complete -> parse ->
/// resolve -> score, per case. Backend failures score as inaccurate; the run
/// itself never aborts on a case.
EvalReport run_eval(const std::vector<CaseSpec>& corpus,
                    CompletionBackend& backend, const EvalOptions& options);

/// Round-robin corpus over the requested fault tokens: "crash", "timeout",
/// "assertion", "missing" (alternates between the two missing-log kinds),
/// "missing-driver", "missing-component". Case seeds are seed + index.
std::vector<CaseSpec> build_corpus(int cases, std::uint64_t seed,
                                   const std::vector<std::string>& fault_tokens,
                                   int components, double noise_error_rate,
                                   LineCountRange lines_per_file);

/// Stable text report; latency lines are emitted only when requested since
/// they vary run to run.
std::string render_eval_report(const EvalReport& report, bool include_latency);

void write_eval_report_json(const EvalReport& report,
                            const std::filesystem::path& path,
                            bool include_latency);

}  // namespace logdiag
