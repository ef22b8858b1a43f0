// logdiag: diagnose integration-test failures from their log directories.
//
// Subcommands:
//   diagnose <dir>   run the pipeline on one failing-test log directory
//   eval             score the pipeline against synthetic failure bundles
//   metrics          print feedback metrics from the findings store
//   serve            HTTP service: failures in, findings out, feedback back

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "logdiag/eval_harness.hpp"
#include "logdiag/finding.hpp"
#include "logdiag/pipeline.hpp"
#include "logdiag/service.hpp"
#include "logdiag/strings.hpp"

namespace {

namespace fs = std::filesystem;
using namespace logdiag;

// Plain key = value configuration file; '#' starts a comment. Keys are the
// long option names without the leading dashes. Command-line flags win.
std::map<std::string, std::string> load_kv_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::map<std::string, std::string> values;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key{strings::trim(line.substr(0, eq))};
    const std::string value{strings::trim(line.substr(eq + 1))};
    if (!key.empty()) values[key] = value;
  }
  return values;
}

struct CommonOpts {
  std::string backend = "mock";
  std::string model = "diagnoser-flash";
  double temperature = 0.1;
  double top_p = 0.8;
  int max_output_tokens = 4096;
  std::string base_url;
  std::string credential_env = "LOGDIAG_API_TOKEN";
  int timeout_ms = 30000;
  std::string record_dir = ".logdiag/recordings";
  std::size_t budget_tokens = kDefaultBudgetTokens;
  std::string min_level = "info";
  std::vector<std::string> drivers = {"test_driver"};
  std::uint64_t max_file_bytes = 32ull << 20;
  std::string link_scheme{kDefaultLinkScheme};
  std::string template_file;
  std::string context_file;
  std::string store_dir = ".logdiag";
  std::string config_file;  // consumed during the pre-scan
};

void apply_kv(const std::map<std::string, std::string>& kv, CommonOpts& opts) {
  auto str = [&](const char* key, std::string& out) {
    auto it = kv.find(key);
    if (it != kv.end()) out = it->second;
  };
  str("backend", opts.backend);
  str("model", opts.model);
  str("base-url", opts.base_url);
  str("credential-env", opts.credential_env);
  str("record-dir", opts.record_dir);
  str("min-level", opts.min_level);
  str("link-scheme", opts.link_scheme);
  str("template-file", opts.template_file);
  str("context-file", opts.context_file);
  str("store-dir", opts.store_dir);
  if (auto it = kv.find("temperature"); it != kv.end()) opts.temperature = std::stod(it->second);
  if (auto it = kv.find("top-p"); it != kv.end()) opts.top_p = std::stod(it->second);
  if (auto it = kv.find("max-output-tokens"); it != kv.end()) opts.max_output_tokens = std::stoi(it->second);
  if (auto it = kv.find("timeout-ms"); it != kv.end()) opts.timeout_ms = std::stoi(it->second);
  if (auto it = kv.find("budget-tokens"); it != kv.end()) opts.budget_tokens = std::stoull(it->second);
  if (auto it = kv.find("max-file-bytes"); it != kv.end()) opts.max_file_bytes = std::stoull(it->second);
  if (auto it = kv.find("driver"); it != kv.end()) {
    opts.drivers.clear();
    for (const auto part : strings::split(it->second, ",")) {
      if (!strings::trim(part).empty()) opts.drivers.emplace_back(strings::trim(part));
    }
  }
}

void add_common_options(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_file,
                  "key = value config file (flags take precedence)");
  cmd->add_option("--backend", opts.backend, "mock | http | replay | record")
      ->check(CLI::IsMember({"mock", "http", "replay", "record"}));
  cmd->add_option("--model", opts.model, "model name sent to the backend");
  cmd->add_option("--temperature", opts.temperature, "sampling temperature");
  cmd->add_option("--top-p", opts.top_p, "nucleus sampling cutoff");
  cmd->add_option("--max-output-tokens", opts.max_output_tokens,
                  "completion length limit");
  cmd->add_option("--base-url", opts.base_url,
                  "completion endpoint for the http backend");
  cmd->add_option("--credential-env", opts.credential_env,
                  "env var holding the bearer token for the http backend");
  cmd->add_option("--timeout-ms", opts.timeout_ms, "backend deadline");
  cmd->add_option("--record-dir", opts.record_dir,
                  "recording directory for replay/record backends");
  cmd->add_option("--budget-tokens", opts.budget_tokens,
                  "prompt token budget (estimated)");
  cmd->add_option("--min-level", opts.min_level,
                  "minimum log level included in the prompt")
      ->check(CLI::IsMember({"debug", "info", "warning", "error", "fatal"}));
  cmd->add_option("--driver", opts.drivers,
                  "driver component name (repeatable)");
  cmd->add_option("--max-file-bytes", opts.max_file_bytes,
                  "per-file byte cap during ingestion");
  cmd->add_option("--link-scheme", opts.link_scheme,
                  "uri template with {bundle}, {file}, {line}");
  cmd->add_option("--template-file", opts.template_file,
                  "override the built-in prompt template");
  cmd->add_option("--context-file", opts.context_file,
                  "component context file (component:/description:/args: blocks)");
  cmd->add_option("--store-dir", opts.store_dir,
                  "findings and feedback store directory");
}

PipelineConfig make_pipeline_config(const CommonOpts& opts) {
  PipelineConfig config;
  config.ingest.driver_component_names = {opts.drivers.begin(),
                                          opts.drivers.end()};
  if (const auto level = parse_log_level(opts.min_level)) {
    config.ingest.min_level = *level;
  }
  config.ingest.max_file_bytes = opts.max_file_bytes;
  if (!opts.template_file.empty()) {
    config.prompt_template = PromptTemplate::load_file(opts.template_file);
  }
  if (!opts.context_file.empty()) {
    config.context = ComponentContext::load_file(opts.context_file);
  }
  config.params.model_name = opts.model;
  config.params.temperature = opts.temperature;
  config.params.top_p = opts.top_p;
  config.params.max_output_tokens = opts.max_output_tokens;
  config.budget_tokens = opts.budget_tokens;
  config.link_scheme = opts.link_scheme;
  return config;
}

struct BackendHolder {
  std::unique_ptr<CompletionBackend> inner;
  std::unique_ptr<CompletionBackend> backend;

  CompletionBackend& get() { return *backend; }
};

BackendHolder make_backend(const CommonOpts& opts) {
  BackendHolder holder;
  if (opts.backend == "mock") {
    holder.backend = std::make_unique<MockBackend>();
  } else if (opts.backend == "replay") {
    holder.backend = std::make_unique<ReplayBackend>(opts.record_dir);
  } else if (opts.backend == "http" || opts.backend == "record") {
    if (opts.base_url.empty()) {
      throw std::runtime_error("--base-url is required for the " +
                               opts.backend + " backend");
    }
    HttpBackendConfig config;
    config.url = opts.base_url;
    config.credential_env = opts.credential_env;
    config.timeout = std::chrono::milliseconds(opts.timeout_ms);
    auto http = std::make_unique<HttpBackend>(std::move(config));
    if (opts.backend == "http") {
      holder.backend = std::move(http);
    } else {
      holder.inner = std::move(http);
      holder.backend =
          std::make_unique<RecordingBackend>(*holder.inner, opts.record_dir);
    }
  }
  return holder;
}

int exit_code_for(Outcome outcome) {
  switch (outcome) {
    case Outcome::Conclusive: return 0;
    case Outcome::InsufficientInformation: return 2;
    case Outcome::Unparseable: return 3;
  }
  return 3;
}

int cmd_diagnose(const CommonOpts& opts, const std::string& root_dir) {
  BackendHolder backend = make_backend(opts);
  const PipelineConfig config = make_pipeline_config(opts);
  const PipelineResult result =
      run_pipeline(root_dir, backend.get(), config);

  FindingStore store(opts.store_dir);
  store.save(result.finding);
  const fs::path finding_path =
      fs::path(opts.store_dir) / "findings" / (result.finding.finding_id + ".md");

  std::fputs(result.finding.body_markdown.c_str(), stdout);
  std::fprintf(stderr, "finding: %s\n", finding_path.string().c_str());
  return exit_code_for(result.finding.outcome);
}

int cmd_eval(const CommonOpts& opts, int cases, std::uint64_t seed,
             const std::string& faults_csv, int components, double noise,
             int lines_min, int lines_max, const std::string& work_dir,
             bool keep_work, const std::string& report_file, bool stable) {
  std::vector<std::string> fault_tokens;
  for (const auto part : strings::split(faults_csv, ",")) {
    const auto token = strings::trim(part);
    if (!token.empty()) fault_tokens.emplace_back(token);
  }
  const auto corpus = build_corpus(cases, seed, fault_tokens, components,
                                   noise, {lines_min, lines_max});

  BackendHolder backend = make_backend(opts);
  EvalOptions options;
  options.work_dir = work_dir.empty()
                         ? fs::temp_directory_path() / "logdiag-eval"
                         : fs::path(work_dir);
  options.keep_work = keep_work;
  options.pipeline = make_pipeline_config(opts);

  const EvalReport report = run_eval(corpus, backend.get(), options);
  std::fputs(render_eval_report(report, !stable).c_str(), stdout);
  if (!report_file.empty()) {
    write_eval_report_json(report, report_file, !stable);
  }
  return 0;
}

int cmd_metrics(const CommonOpts& opts) {
  FindingStore store(opts.store_dir);
  std::fputs(render_metrics(compute_metrics(store)).c_str(), stdout);
  return 0;
}

int cmd_serve(const CommonOpts& opts, const std::string& host, int port,
              const std::string& webhook_url) {
  BackendHolder backend = make_backend(opts);
  ServiceConfig config;
  config.host = host;
  config.port = port;
  if (!webhook_url.empty()) config.webhook_url = webhook_url;
  config.store_dir = opts.store_dir;
  config.pipeline = make_pipeline_config(opts);

  DiagnosisService service(config, backend.get());
  std::fprintf(stderr, "serving on %s:%d (store: %s)\n", host.c_str(), port,
               opts.store_dir.c_str());
  if (!service.run_blocking()) {
    std::fprintf(stderr, "error: cannot bind %s:%d\n", host.c_str(), port);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-assisted diagnosis of integration-test failures from logs"};
  app.require_subcommand(1);

  CommonOpts opts;

  // Pre-scan for --config so file values become defaults under the flags.
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    std::string path;
    if (arg == "--config" && i + 1 < argc) path = argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) path = arg.substr(9);
    if (!path.empty()) {
      try {
        apply_kv(load_kv_config(path), opts);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
      }
    }
  }

  std::string root_dir;
  auto* diagnose = app.add_subcommand(
      "diagnose", "Diagnose one failing-test log directory");
  diagnose->add_option("root_dir", root_dir, "directory of log files")
      ->required();
  add_common_options(diagnose, opts);

  int cases = 60;
  std::uint64_t seed = 1;
  std::string faults_csv = "crash,timeout,assertion,missing";
  int components = 5;
  double noise = 0.02;
  int lines_min = 200;
  int lines_max = 2000;
  std::string work_dir;
  bool keep_work = false;
  std::string report_file;
  bool stable = false;
  auto* eval = app.add_subcommand(
      "eval", "Score the pipeline on synthetic failure bundles");
  eval->add_option("--cases", cases, "number of cases")->check(CLI::NonNegativeNumber);
  eval->add_option("--seed", seed, "base seed (case i uses seed + i)");
  eval->add_option("--faults", faults_csv,
                   "comma list: crash,timeout,assertion,missing,"
                   "missing-driver,missing-component");
  eval->add_option("--components", components, "SUT components per case");
  eval->add_option("--noise", noise, "benign error rate")
      ->check(CLI::Range(0.0, 1.0));
  eval->add_option("--lines-min", lines_min, "min lines per file");
  eval->add_option("--lines-max", lines_max, "max lines per file");
  eval->add_option("--work-dir", work_dir, "where case bundles are generated");
  eval->add_flag("--keep-work", keep_work, "keep generated case directories");
  eval->add_option("--report-file", report_file, "also write a JSON report");
  eval->add_flag("--stable", stable,
                 "omit latency lines so output is byte-reproducible");
  add_common_options(eval, opts);

  auto* metrics = app.add_subcommand(
      "metrics", "Print feedback metrics from the findings store");
  add_common_options(metrics, opts);

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string webhook_url;
  auto* serve = app.add_subcommand("serve", "Run the diagnosis HTTP service");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "bind port (0 = any)");
  serve->add_option("--webhook-url", webhook_url,
                    "POST findings to this URL after diagnosis");
  add_common_options(serve, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (diagnose->parsed()) return cmd_diagnose(opts, root_dir);
    if (eval->parsed()) {
      return cmd_eval(opts, cases, seed, faults_csv, components, noise,
                      lines_min, lines_max, work_dir, keep_work, report_file,
                      stable);
    }
    if (metrics->parsed()) return cmd_metrics(opts);
    if (serve->parsed()) return cmd_serve(opts, host, port, webhook_url);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
