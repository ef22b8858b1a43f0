#pragma once

#include <chrono>
#include <filesystem>
#include <string>

#include "logdiag/diagnosis_parser.hpp"
#include "logdiag/finding.hpp"
#include "logdiag/ingestion.hpp"
#include "logdiag/llm_backend.hpp"
#include "logdiag/merging.hpp"
#include "logdiag/prompting.hpp"

namespace logdiag {

struct PipelineConfig {
  IngestionConfig ingest{};
  PromptTemplate prompt_template = PromptTemplate::builtin();
  ComponentContext context{};
  LlmParams params{};
  std::size_t budget_tokens = kDefaultBudgetTokens;
  std::string link_scheme{kDefaultLinkScheme};
};

struct PipelineResult {
  LogBundle bundle;
  DiagnosisPrompt prompt;
  RawResponse response;
  ResolvedDiagnosis resolved;
  Finding finding;
  std::chrono::milliseconds latency{0};
};

/// End-to-end run over one failing-test directory:
/// ingest -> filter -> section -> prompt -> complete -> parse -> resolve ->
/// render. Propagates RootDirUnreadable, BudgetTooSmall and BackendError.
PipelineResult run_pipeline(const std::filesystem::path& root_dir,
                            CompletionBackend& backend,
                            const PipelineConfig& config);

}  // namespace logdiag
