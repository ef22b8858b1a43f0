#include "logdiag/eval_harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "logdiag/strings.hpp"

namespace logdiag {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  int below(int n) {
    if (n <= 0) return 0;
    return static_cast<int>(engine_() % static_cast<std::uint64_t>(n));
  }
  int range(int lo, int hi) { return lo + below(hi - lo + 1); }
  double unit() {
    return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
  }
  const std::string& pick(const std::vector<std::string>& pool) {
    return pool[static_cast<std::size_t>(below(static_cast<int>(pool.size())))];
  }

 private:
  std::mt19937_64 engine_;
};

const std::vector<std::string> kComponentCallsites = {
    "server.py:142", "startup.cc:88",   "rpc/client.cc:512",
    "handler.py:77", "scheduler.cc:310"};

const std::vector<std::string> kDriverCallsites = {
    "driver.py:52", "driver.py:133", "harness/run.py:201"};

const std::vector<std::string> kOpsMessages = {
    "Handling request %d for client c-%d",
    "Heartbeat OK",
    "Cache refresh completed in %d ms",
    "Checkpoint persisted to ckpt-%d",
    "Connection accepted from peer %d",
};

const std::vector<std::string> kDriverStepMessages = {
    "Running test step %d: issuing read request",
    "Running test step %d: issuing write request",
    "Running test step %d: verifying replica state",
};

constexpr std::string_view kCrashMessage =
    "Server encountered an error, shutting down";

// Accumulates the physical lines of one log file; timestamps advance
// 0-3 seconds per line so ties across files exist.
struct FileBuilder {
  std::string component;
  LogLevel level;
  std::string datacenter;
  std::string process;
  std::int64_t cursor = 0;
  std::vector<std::string> lines;
  std::string trailing_fragment;

  std::string last_message;

  void add(Rng& rng, const std::string& callsite, const std::string& message) {
    cursor += rng.below(4);
    lines.push_back(Timestamp::from_epoch_seconds(cursor).to_string() + " | " +
                    datacenter + " | " + process + " | t-" +
                    std::to_string(rng.below(8)) + " | " + callsite + " | " +
                    message);
    last_message = message;
  }

  std::string file_name() const {
    return component + "." + std::string(log_level_name(level));
  }

  bool empty() const { return lines.empty() && trailing_fragment.empty(); }

  void write(const fs::path& dir) const {
    std::ofstream out(dir / file_name(), std::ios::binary | std::ios::trunc);
    for (const std::string& line : lines) out << line << '\n';
    out << trailing_fragment;  // timeout tails end mid-line, no newline
  }
};

std::string format_msg(const std::string& pattern, Rng& rng) {
  std::string out;
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    const auto next = pattern.find("%d", pos);
    if (next == std::string::npos) {
      out += pattern.substr(pos);
      break;
    }
    out += pattern.substr(pos, next - pos);
    out += std::to_string(rng.range(1, 9999));
    pos = next + 2;
  }
  return out;
}

std::string fault_slug(FaultType type) {
  switch (type) {
    case FaultType::ComponentCrash: return "crash";
    case FaultType::StartupTimeout: return "timeout";
    case FaultType::AssertionFailure: return "assertion";
    case FaultType::MissingDriverLog: return "missing-driver";
    case FaultType::MissingComponentLog: return "missing-component";
  }
  return "crash";
}

bool contents_overlap(const std::string& a, const std::string& b) {
  return a.find(b) != std::string::npos || b.find(a) != std::string::npos;
}

}  // namespace

std::string_view fault_type_name(FaultType type) {
  switch (type) {
    case FaultType::ComponentCrash: return "ComponentCrash";
    case FaultType::StartupTimeout: return "StartupTimeout";
    case FaultType::AssertionFailure: return "AssertionFailure";
    case FaultType::MissingDriverLog: return "MissingDriverLog";
    case FaultType::MissingComponentLog: return "MissingComponentLog";
  }
  return "ComponentCrash";
}

void CaseSpec::validate() const {
  if (components < 1) throw std::invalid_argument("components must be >= 1");
  if (noise_error_rate < 0.0 || noise_error_rate > 1.0) {
    throw std::invalid_argument("noise_error_rate must be within [0, 1]");
  }
  if (lines_per_file.min_lines < 1 ||
      lines_per_file.max_lines < lines_per_file.min_lines) {
    throw std::invalid_argument("invalid lines_per_file range");
  }
}

std::vector<std::string> generator_component_names(int count) {
  std::vector<std::string> names;
  for (int i = 0; i < count; ++i) {
    std::string name = "server-";
    name += static_cast<char>('a' + (i % 26));
    if (i >= 26) name += std::to_string(i / 26 + 1);
    names.push_back(std::move(name));
  }
  return names;
}

const std::vector<std::string>& benign_noise_phrases() {
  static const std::vector<std::string> phrases = {
      "transient RPC error, recovered",
      "retry succeeded after 2 attempts",
      "connection reset by peer, retrying",
      "lease renewal slow, recovered",
  };
  return phrases;
}

GroundTruth generate_bundle(const CaseSpec& spec, const fs::path& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  Rng rng(spec.seed);

  const std::int64_t base =
      Timestamp{2025, 9, 17, 6, 0, 0}.epoch_seconds() +
      static_cast<std::int64_t>(spec.seed % 3600);

  const std::vector<std::string> names =
      generator_component_names(spec.components);

  GroundTruth truth;
  truth.fault = spec.fault;
  truth.expect_insufficient =
      spec.fault.type == FaultType::MissingDriverLog ||
      spec.fault.type == FaultType::MissingComponentLog;

  const bool has_culprit_component =
      spec.fault.type == FaultType::ComponentCrash ||
      spec.fault.type == FaultType::StartupTimeout ||
      spec.fault.type == FaultType::MissingComponentLog;
  const std::string culprit =
      has_culprit_component ? spec.fault.target : std::string{};

  for (const std::string& name : names) {
    const bool is_culprit = has_culprit_component && name == culprit;
    if (is_culprit && spec.fault.type == FaultType::MissingComponentLog) {
      continue;  // its log files were never saved
    }

    FileBuilder info{name, LogLevel::Info};
    info.datacenter = "dc" + std::to_string(rng.range(1, 9));
    info.process = "p" + std::to_string(rng.range(10, 99));
    info.cursor = base + rng.below(4);
    FileBuilder error{name, LogLevel::Error};
    error.datacenter = info.datacenter;
    error.process = info.process;
    error.cursor = base + rng.below(8);

    const int subsystems = rng.range(3, 6);
    const int target_lines =
        rng.range(spec.lines_per_file.min_lines, spec.lines_per_file.max_lines);

    if (is_culprit && spec.fault.type == FaultType::StartupTimeout) {
      // Startup stops partway through; the tail of the file was lost
      // mid-write, leaving a fragment without a line header.
      info.add(rng, rng.pick(kComponentCallsites), "Server is starting");
      info.add(rng, rng.pick(kComponentCallsites),
               "Loading configuration from /etc/" + name + ".conf");
      const int completed = rng.range(1, subsystems - 1);
      for (int j = 1; j <= completed; ++j) {
        info.add(rng, rng.pick(kComponentCallsites),
                 "Initializing subsystem " + std::to_string(j) + " of " +
                     std::to_string(subsystems));
      }
      info.trailing_fragment =
          Timestamp::from_epoch_seconds(info.cursor + 1).to_string() + " | " +
          info.datacenter + " | " + info.process.substr(0, 2);
      truth.culprit_file = info.file_name();
      truth.culprit_line_content = info.last_message;
      info.write(out_dir);
      continue;
    }

    info.add(rng, rng.pick(kComponentCallsites), "Server is starting");
    info.add(rng, rng.pick(kComponentCallsites),
             "Loading configuration from /etc/" + name + ".conf");
    for (int j = 1; j <= subsystems; ++j) {
      info.add(rng, rng.pick(kComponentCallsites),
               "Initializing subsystem " + std::to_string(j) + " of " +
                   std::to_string(subsystems));
    }
    info.add(rng, rng.pick(kComponentCallsites),
             "Listening on port " + std::to_string(8000 + rng.below(1000)));
    info.add(rng, rng.pick(kComponentCallsites), "Server became healthy");

    const int ops = std::max(0, target_lines - static_cast<int>(info.lines.size()));
    for (int j = 0; j < ops; ++j) {
      info.add(rng, rng.pick(kComponentCallsites),
               format_msg(rng.pick(kOpsMessages), rng));
      if (rng.unit() < spec.noise_error_rate) {
        error.add(rng, rng.pick(kComponentCallsites),
                  rng.pick(benign_noise_phrases()));
      }
    }

    if (is_culprit && spec.fault.type == FaultType::ComponentCrash) {
      error.cursor = std::max(error.cursor, info.cursor);
      error.add(rng, rng.pick(kComponentCallsites), std::string(kCrashMessage));
      truth.culprit_file = error.file_name();
      truth.culprit_line_content = std::string(kCrashMessage);
    }

    info.write(out_dir);
    if (!error.empty()) error.write(out_dir);
  }

  if (spec.fault.type != FaultType::MissingDriverLog) {
    FileBuilder info{"test_driver", LogLevel::Info};
    info.datacenter = "dc" + std::to_string(rng.range(1, 9));
    info.process = "p" + std::to_string(rng.range(10, 99));
    info.cursor = base;
    FileBuilder error{"test_driver", LogLevel::Error};
    error.datacenter = info.datacenter;
    error.process = info.process;
    error.cursor = base;

    info.add(rng, rng.pick(kDriverCallsites),
             "Test run " + std::to_string(rng.range(1000, 9999)) + " starting");
    info.add(rng, rng.pick(kDriverCallsites),
             "Parsed test configuration: " + std::to_string(spec.components) +
                 " components");
    for (const std::string& name : names) {
      info.add(rng, rng.pick(kDriverCallsites), "Bringing up component " + name);
    }
    for (const std::string& name : names) {
      const bool failed_startup =
          (spec.fault.type == FaultType::StartupTimeout ||
           spec.fault.type == FaultType::MissingComponentLog) &&
          name == culprit;
      if (!failed_startup) {
        info.add(rng, rng.pick(kDriverCallsites),
                 "Component " + name + " became healthy");
      }
    }

    const int target_lines =
        rng.range(spec.lines_per_file.min_lines, spec.lines_per_file.max_lines);
    const int steps = std::max(0, target_lines - static_cast<int>(info.lines.size()) - 1);
    for (int j = 0; j < steps; ++j) {
      info.add(rng, rng.pick(kDriverCallsites),
               format_msg(rng.pick(kDriverStepMessages), rng));
    }

    switch (spec.fault.type) {
      case FaultType::ComponentCrash:
        error.cursor = info.cursor;
        error.add(rng, rng.pick(kDriverCallsites),
                  "Test failed: component " + culprit + " failed");
        break;
      case FaultType::StartupTimeout:
        error.cursor = info.cursor;
        error.add(rng, rng.pick(kDriverCallsites),
                  "Timeout: component " + culprit +
                      " failed to become operational within 120 seconds");
        break;
      case FaultType::AssertionFailure: {
        error.cursor = info.cursor;
        const std::string msg = "Assertion failed: " + spec.fault.target;
        error.add(rng, rng.pick(kDriverCallsites), msg);
        truth.culprit_file = error.file_name();
        truth.culprit_line_content = msg;
        break;
      }
      case FaultType::MissingComponentLog:
        error.cursor = info.cursor;
        error.add(rng, rng.pick(kDriverCallsites),
                  "Test failed: component " + culprit + " failed");
        break;
      case FaultType::MissingDriverLog:
        break;
    }

    info.add(rng, rng.pick(kDriverCallsites), "Test exiting due to SIGINT");
    info.write(out_dir);
    if (!error.empty()) error.write(out_dir);
  }

  return truth;
}

Verdict score_diagnosis(const ResolvedDiagnosis& resolved,
                        const GroundTruth& truth) {
  if (truth.expect_insufficient) {
    if (resolved.outcome == Outcome::InsufficientInformation) {
      return {true, "reported insufficient information for missing logs"};
    }
    return {false, "expected InsufficientInformation, got " +
                       std::string(outcome_name(resolved.outcome))};
  }

  if (resolved.outcome == Outcome::Unparseable) return {false, "unparseable"};
  if (resolved.outcome != Outcome::Conclusive) {
    return {false, "expected Conclusive, got " +
                       std::string(outcome_name(resolved.outcome))};
  }

  if (truth.culprit_file && truth.culprit_line_content) {
    for (const CitationResolution& res : resolved.resolutions) {
      if (!res.resolved) continue;
      if (res.resolved->first == *truth.culprit_file &&
          contents_overlap(res.citation.content, *truth.culprit_line_content)) {
        return {true, "citation resolves to the culprit line"};
      }
    }
    const auto& conclusion = resolved.diagnosis.conclusion;
    if (conclusion &&
        conclusion->find(*truth.culprit_line_content) != std::string::npos) {
      return {true, "conclusion quotes the culprit line"};
    }
  }
  return {false, "no citation or conclusion matched the culprit"};
}

EvalReport run_eval(const std::vector<CaseSpec>& corpus,
                    CompletionBackend& backend, const EvalOptions& options) {
  fs::create_directories(options.work_dir);

  EvalReport report;
  std::int64_t latency_total_ms = 0;

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const CaseSpec& spec = corpus[i];
    char idx[8];
    std::snprintf(idx, sizeof(idx), "%03zu", i);
    const std::string case_name =
        "case-" + std::string(idx) + "-" + fault_slug(spec.fault.type);
    const fs::path case_dir = options.work_dir / case_name;
    fs::remove_all(case_dir);

    Verdict verdict;
    std::chrono::milliseconds latency{0};
    try {
      const GroundTruth truth = generate_bundle(spec, case_dir);
      const auto started = std::chrono::steady_clock::now();
      const PipelineResult result =
          run_pipeline(case_dir, backend, options.pipeline);
      latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);
      verdict = score_diagnosis(result.resolved, truth);
    } catch (const std::exception& e) {
      verdict = {false, std::string("pipeline error: ") + e.what()};
    }
    latency_total_ms += latency.count();

    ++report.cases;
    if (verdict.accurate) ++report.accurate;
    auto& per_fault = report.per_fault[std::string(fault_type_name(spec.fault.type))];
    ++per_fault.cases;
    if (verdict.accurate) ++per_fault.accurate;
    report.case_outcomes.push_back(
        {case_name, spec.fault.type, verdict.accurate, verdict.reason, latency});

    if (!options.keep_work) fs::remove_all(case_dir);
  }

  if (report.cases > 0) {
    report.accuracy = static_cast<double>(report.accurate) /
                      static_cast<double>(report.cases);
    report.mean_latency = std::chrono::milliseconds(
        latency_total_ms / static_cast<std::int64_t>(report.cases));
  }
  return report;
}

std::vector<CaseSpec> build_corpus(int cases, std::uint64_t seed,
                                   const std::vector<std::string>& fault_tokens,
                                   int components, double noise_error_rate,
                                   LineCountRange lines_per_file) {
  if (cases < 0) throw std::invalid_argument("cases must be >= 0");
  if (fault_tokens.empty()) {
    throw std::invalid_argument("at least one fault kind is required");
  }

  const std::vector<std::string> names = generator_component_names(components);
  const std::vector<std::string> assertion_messages = {
      "expected 200 OK, got 500",
      "expected row count 10, got 7",
      "response payload mismatch for key user_42",
  };

  std::vector<CaseSpec> corpus;
  int missing_counter = 0;
  for (int i = 0; i < cases; ++i) {
    const std::string& token = fault_tokens[i % fault_tokens.size()];
    const int rotation = i / static_cast<int>(fault_tokens.size());

    Fault fault;
    if (token == "crash") {
      fault = {FaultType::ComponentCrash, names[rotation % names.size()]};
    } else if (token == "timeout") {
      fault = {FaultType::StartupTimeout, names[rotation % names.size()]};
    } else if (token == "assertion") {
      fault = {FaultType::AssertionFailure,
               assertion_messages[rotation % assertion_messages.size()]};
    } else if (token == "missing") {
      if (missing_counter++ % 2 == 0) {
        fault = {FaultType::MissingDriverLog, ""};
      } else {
        fault = {FaultType::MissingComponentLog, names[rotation % names.size()]};
      }
    } else if (token == "missing-driver") {
      fault = {FaultType::MissingDriverLog, ""};
    } else if (token == "missing-component") {
      fault = {FaultType::MissingComponentLog, names[rotation % names.size()]};
    } else {
      throw std::invalid_argument("unknown fault kind: " + token);
    }

    CaseSpec spec;
    spec.components = components;
    spec.lines_per_file = lines_per_file;
    spec.noise_error_rate = noise_error_rate;
    spec.fault = fault;
    spec.seed = seed + static_cast<std::uint64_t>(i);
    corpus.push_back(std::move(spec));
  }
  return corpus;
}

std::string render_eval_report(const EvalReport& report, bool include_latency) {
  std::ostringstream out;
  out << "cases: " << report.cases << '\n';
  out << "accurate: " << report.accurate << '\n';
  if (report.accuracy) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *report.accuracy);
    out << "accuracy: " << buf << '\n';
  } else {
    out << "accuracy: n/a\n";
  }
  out << "per-fault:\n";
  for (const auto& [name, acc] : report.per_fault) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f",
                  acc.cases > 0 ? static_cast<double>(acc.accurate) /
                                      static_cast<double>(acc.cases)
                                : 0.0);
    out << "  " << name << ": " << acc.accurate << "/" << acc.cases << " ("
        << buf << ")\n";
  }
  bool any_inaccurate = false;
  for (const EvalCaseOutcome& outcome : report.case_outcomes) {
    if (!outcome.accurate) {
      if (!any_inaccurate) out << "inaccurate cases:\n";
      any_inaccurate = true;
      out << "  " << outcome.case_name << ": " << outcome.reason << '\n';
    }
  }
  if (!any_inaccurate) out << "inaccurate cases: none\n";
  if (include_latency) {
    out << "mean_latency_ms: " << report.mean_latency.count() << '\n';
  }
  return out.str();
}

void write_eval_report_json(const EvalReport& report,
                            const std::filesystem::path& path,
                            bool include_latency) {
  json doc;
  doc["cases"] = report.cases;
  doc["accurate"] = report.accurate;
  if (report.accuracy) doc["accuracy"] = *report.accuracy;
  json per_fault = json::object();
  for (const auto& [name, acc] : report.per_fault) {
    per_fault[name] = {{"cases", acc.cases}, {"accurate", acc.accurate}};
  }
  doc["per_fault"] = per_fault;
  json cases = json::array();
  for (const EvalCaseOutcome& outcome : report.case_outcomes) {
    json entry = {
        {"case", outcome.case_name},
        {"fault", std::string(fault_type_name(outcome.fault))},
        {"accurate", outcome.accurate},
        {"reason", outcome.reason},
    };
    if (include_latency) entry["latency_ms"] = outcome.latency.count();
    cases.push_back(entry);
  }
  doc["case_outcomes"] = cases;
  if (include_latency) doc["mean_latency_ms"] = report.mean_latency.count();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write report file: " + path.string());
  }
  out << doc.dump(2) << '\n';
}

}  // namespace logdiag
