#include <benchmark/benchmark.h>

#include <string>

#include "logdiag/ingestion.hpp"
#include "logdiag/merging.hpp"
#include "logdiag/prompting.hpp"
#include "logdiag/sha256.hpp"

namespace {

using namespace logdiag;

std::string synthetic_content(int lines) {
  std::string content;
  content.reserve(static_cast<std::size_t>(lines) * 96);
  std::int64_t cursor = Timestamp{2025, 9, 17, 6, 0, 0}.epoch_seconds();
  for (int i = 0; i < lines; ++i) {
    cursor += i % 3;
    content += Timestamp::from_epoch_seconds(cursor).to_string();
    content += " | dc7 | p41 | t-2 | file.py:444 | Handling request ";
    content += std::to_string(i);
    content += "\n";
  }
  return content;
}

LogBundle synthetic_bundle(int files, int lines_per_file) {
  std::vector<LogFile> out;
  for (int f = 0; f < files; ++f) {
    const FileParseResult parsed = parse_log_file(
        "comp-" + std::to_string(f) + ".info", synthetic_content(lines_per_file), f);
    out.push_back(parsed.file);
  }
  return make_bundle("bench", std::move(out), {});
}

void BM_ParseLogFile(benchmark::State& state) {
  const std::string content = synthetic_content(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const FileParseResult parsed = parse_log_file("server-a.info", content, 0);
    benchmark::DoNotOptimize(parsed.file.lines.size());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(content.size()));
}
BENCHMARK(BM_ParseLogFile)->Arg(1000)->Arg(10000);

void BM_MergeStreams(benchmark::State& state) {
  const LogBundle bundle =
      synthetic_bundle(static_cast<int>(state.range(0)), 2000);
  for (auto _ : state) {
    const MergedStream merged = merge_streams(bundle);
    benchmark::DoNotOptimize(merged.entries.size());
  }
}
BENCHMARK(BM_MergeStreams)->Arg(4)->Arg(12);

void BM_BuildPrompt(benchmark::State& state) {
  const LogBundle bundle =
      synthetic_bundle(static_cast<int>(state.range(0)), 2000);
  const SectionedLogs sections = assemble_sections(bundle);
  const ComponentContext context;
  for (auto _ : state) {
    const DiagnosisPrompt prompt =
        build_prompt(PromptTemplate::builtin(), sections, context);
    benchmark::DoNotOptimize(prompt.estimated_tokens);
  }
}
BENCHMARK(BM_BuildPrompt)->Arg(4)->Arg(12);

void BM_Sha256(benchmark::State& state) {
  const std::string data(static_cast<std::size_t>(state.range(0)), 'x');
  for (auto _ : state) {
    benchmark::DoNotOptimize(sha256_hex(data));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(65536);

}  // namespace

BENCHMARK_MAIN();
