#include "logdiag/pipeline.hpp"

namespace logdiag {

PipelineResult run_pipeline(const std::filesystem::path& root_dir,
                            CompletionBackend& backend,
                            const PipelineConfig& config) {
  const auto started = std::chrono::steady_clock::now();

  PipelineResult result;
  result.bundle = load_bundle(root_dir, config.ingest);

  const LogBundle filtered =
      filter_by_level(result.bundle, config.ingest.min_level);
  const SectionedLogs sectioned = assemble_sections(filtered);

  result.prompt = build_prompt(config.prompt_template, sectioned,
                               config.context, config.budget_tokens);
  result.response = backend.complete(result.prompt, config.params);

  const Diagnosis diagnosis = parse_response(result.response);
  result.resolved = resolve_citations(diagnosis, result.bundle);
  result.finding =
      render_finding(result.resolved, result.bundle, config.link_scheme);

  result.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  result.finding.generation_latency = result.latency;
  return result;
}

}  // namespace logdiag
