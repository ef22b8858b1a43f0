#include "logdiag/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

#include "logdiag/strings.hpp"

namespace logdiag {

namespace {

// Default prompt template, version v1. The trailing "%s" slots receive the
// sectioned logs and the component context.
constexpr std::string_view kBuiltinTemplate =
    R"(You are helping developers at Google understand the root cause of a failed integration test. Available log lines about the test are listed under the LOGS section, and context about SUT components is listed under the CONTEXT section.

Your goal is to find the root cause from the log lines under LOGS and potentially CONTEXT. Let's think about the analysis step-by-step and show your thought process after each step:
1. Scan all sections in LOGS as subsection headers. No need to print all of them out at this point, but you will need to refer to them later.
2. If CONTEXT is provided, read it and treat it as context and potentially instructions to help you understand the log lines and debug test failures better.
3. Inspect the section that contains test failures.
4. Inspect the logs section if it exists. Summarize the errors, and what component failed.
5. Inspect the other sections and summarize what those lines are signaling and print the most likely cause of the error. Also take into consideration of the command line arguments passed to the component, and see if the error is related to the arguments. For example, if the command line argument contains a keyword that's also mentioned in the error message, it's likely that the argument is a contributing factor to the error.
6. Try to reach a conclusion on the root cause of the failure. You must not skip the rest of the steps.
7. Judge if you have enough information to reach a conclusion in step 6. You must ruthlessly adhere to the following rules:
  - If the logs clearly point out the SUT component that failed to start up, you MUST locate the corresponding component log lines and *ONLY* use those to reach a conclusion.
  - If the logs do not contain any log lines from the component that failed to become healthy, you *MUST NOT* draw any conclusion from the information you have.
  - You MUST not make any assumptions about the SUT infrastructure: if specific SUT components are pointed out, you MUST *ONLY* use those components' log lines to reach a conclusion.
  - Any conclusion about a SUT component must be based on its log lines, and you MUST NOT draw any conclusions by guessing.
8. From step 7, if you don't understand the root cause of the failure, think about what other information you might need. For example, if there are errors complaining about processes not mentioned in the log lines, you should mention in your response that you need access to those logs and you must not draw any conclusion from the information you have.

Things to keep in mind:
 - Every test will have a log about the test exiting due to SIGINT. This is normal and not the cause of the failure.
 - The response should be in human readable sentences. The format depends on the conclusion of your investigation (i.e. if step 7 is satisfied and if step 8 is performed).

If you reached a conclusion in step 6 and verified that you have enough information to reach that conclusion in step 7, start with the conclusion of your investigation under a "==Conclusion==" header. This is the most important part of the response.

Finally, list the steps you have taken in the process under a "==Investigation Steps==" header. After that, print the most relevant log lines under a "==Most Relevant Log Lines==" header. These log lines must be from the sections printed in step-5. For each log line, print it in the following format:
- log-file-name: <log-file-name> (e.g. foo-bar.info, must be the same as the log-file-name in the section header)
- timestamp: <timestamp-in-the-format-of-YYYY-MM-DD-hh:mm:ss> (e.g. 2025-03-27-06:00:00, if you can't find the timestamp, leave this empty)
- callsite: <callsite-file-name:callsite-line> (e.g. foo/bar/baz.cc:123, if callsite-filename is long, only include the suffix)
**content**: <root-cause-relevant-part-of-the-log-line> (e.g. The server encountered an error: the root cause of the failure)

This log line format is important and should be followed exactly. It's VERY IMPORTANT to only include the interesting part of the log line content.

<LOGS=>
%s

<CONTEXT=>
%s
)";

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("prompt template invalid: " + what);
}

}  // namespace

const PromptTemplate& PromptTemplate::builtin() {
  static const PromptTemplate tmpl{std::string(kBuiltinTemplate), "v1"};
  return tmpl;
}

PromptTemplate PromptTemplate::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::invalid_argument("cannot read prompt template file: " +
                                path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  PromptTemplate tmpl{buf.str(), path.filename().string()};
  tmpl.validate();
  return tmpl;
}

void PromptTemplate::validate() const {
  using strings::count_occurrences;
  require(count_occurrences(text, "<LOGS=>") == 1,
          "\"<LOGS=>\" must appear exactly once");
  require(count_occurrences(text, "<CONTEXT=>") == 1,
          "\"<CONTEXT=>\" must appear exactly once");
  require(count_occurrences(text, "==Conclusion==") == 1,
          "\"==Conclusion==\" must appear exactly once");
  require(count_occurrences(text, "==Investigation Steps==") == 1,
          "\"==Investigation Steps==\" must appear exactly once");
  require(count_occurrences(text, "==Most Relevant Log Lines==") == 1,
          "\"==Most Relevant Log Lines==\" must appear exactly once");
  require(count_occurrences(text, "%s") == 2,
          "exactly two %s substitution slots required");
  const auto logs_pos = text.find("<LOGS=>");
  const auto ctx_pos = text.find("<CONTEXT=>");
  const auto slot1 = text.find("%s");
  const auto slot2 = text.find("%s", slot1 + 2);
  require(logs_pos < slot1 && slot1 < ctx_pos && ctx_pos < slot2,
          "slots must follow their section markers");
}

std::string ComponentContext::render() const {
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i > 0) out += "\n";
    out += "component: " + entries[i].component + "\n";
    out += "description: " + entries[i].description + "\n";
    out += "args: " + entries[i].command_line + "\n";
  }
  return out;
}

ComponentContext ComponentContext::load_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot read context file: " + path.string());
  }
  ComponentContext ctx;
  std::string line;
  ContextEntry entry;
  auto flush = [&]() {
    if (!entry.component.empty()) ctx.entries.push_back(entry);
    entry = {};
  };
  while (std::getline(in, line)) {
    const std::string_view t = strings::trim(line);
    if (t.rfind("component:", 0) == 0) {
      flush();
      entry.component = std::string(strings::trim(t.substr(10)));
    } else if (t.rfind("description:", 0) == 0) {
      entry.description = std::string(strings::trim(t.substr(12)));
    } else if (t.rfind("args:", 0) == 0) {
      entry.command_line = std::string(strings::trim(t.substr(5)));
    }
  }
  flush();
  return ctx;
}

std::size_t estimate_tokens(std::string_view text) {
  return (text.size() + 3) / 4;
}

namespace {

struct DropCandidate {
  std::tuple<Timestamp, int, int> key;  // oldest-first within a level
  std::size_t section_idx;
  std::size_t line_pos;
  std::size_t char_cost;  // rendered text plus newline
};

std::vector<DropCandidate> candidates_for_levels(const SectionedLogs& logs,
                                                 LogLevel lo, LogLevel hi) {
  std::vector<DropCandidate> out;
  for (std::size_t s = 0; s < logs.sections.size(); ++s) {
    const LogSection& section = logs.sections[s];
    if (section.is_notes) continue;
    if (section.level < lo || section.level > hi) continue;
    for (std::size_t i = 0; i < section.lines.size(); ++i) {
      const SectionLine& line = section.lines[i];
      out.push_back({{line.timestamp, line.source_file_rank, line.line_index},
                     s,
                     i,
                     line.text.size() + 1});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const DropCandidate& a, const DropCandidate& b) {
              return a.key < b.key;
            });
  return out;
}

}  // namespace

TruncationResult truncate_to_budget(const SectionedLogs& sectioned,
                                    const ComponentContext& context,
                                    const PromptTemplate& tmpl,
                                    std::size_t budget_tokens) {
  const std::string context_text = context.render();
  const std::size_t overhead_estimate =
      estimate_tokens(tmpl.text) + estimate_tokens(context_text);
  if (budget_tokens <= overhead_estimate) {
    throw BudgetTooSmall(overhead_estimate, budget_tokens);
  }

  // Characters of the final prompt: the template loses its two "%s" slots
  // and gains the rendered logs and context.
  const std::size_t fixed_chars = tmpl.text.size() - 4 + context_text.size();
  std::size_t current_chars = fixed_chars + sectioned.render().size();
  auto fits = [&]() { return (current_chars + 3) / 4 <= budget_tokens; };

  TruncationResult result{sectioned, false, 0};
  if (fits()) return result;

  std::vector<std::vector<bool>> dropped(result.sectioned.sections.size());
  for (std::size_t s = 0; s < result.sectioned.sections.size(); ++s) {
    dropped[s].assign(result.sectioned.sections[s].lines.size(), false);
  }
  std::vector<std::size_t> drop_count(result.sectioned.sections.size(), 0);

  // Phases: each lower level alone, oldest first; then ERROR and FATAL
  // together as the last resort.
  const std::pair<LogLevel, LogLevel> phases[] = {
      {LogLevel::Debug, LogLevel::Debug},
      {LogLevel::Info, LogLevel::Info},
      {LogLevel::Warning, LogLevel::Warning},
      {LogLevel::Error, LogLevel::Fatal},
  };

  for (const auto& [lo, hi] : phases) {
    if (fits()) break;
    for (const DropCandidate& cand :
         candidates_for_levels(result.sectioned, lo, hi)) {
      if (fits()) break;
      dropped[cand.section_idx][cand.line_pos] = true;
      current_chars -= cand.char_cost;
      const std::size_t n = ++drop_count[cand.section_idx];
      if (n == 1) {
        current_chars += truncation_marker(1).size() + 1;
      } else {
        current_chars += truncation_marker(n).size() - truncation_marker(n - 1).size();
      }
      ++result.lines_dropped;
    }
  }

  if (result.lines_dropped > 0) {
    result.truncated = true;
    for (std::size_t s = 0; s < result.sectioned.sections.size(); ++s) {
      if (drop_count[s] == 0) continue;
      LogSection& section = result.sectioned.sections[s];
      std::vector<SectionLine> kept;
      kept.reserve(section.lines.size() - drop_count[s]);
      for (std::size_t i = 0; i < section.lines.size(); ++i) {
        if (!dropped[s][i]) kept.push_back(std::move(section.lines[i]));
      }
      section.lines = std::move(kept);
      section.truncated_lines = drop_count[s];
    }
    result.sectioned.recompute_total_chars();
  }
  return result;
}

DiagnosisPrompt build_prompt(const PromptTemplate& tmpl,
                             const SectionedLogs& sectioned,
                             const ComponentContext& context,
                             std::size_t budget_tokens) {
  tmpl.validate();
  TruncationResult trunc =
      truncate_to_budget(sectioned, context, tmpl, budget_tokens);

  const std::string logs_text = trunc.sectioned.render();
  const std::string context_text = context.render();

  const auto slot1 = tmpl.text.find("%s");
  const auto slot2 = tmpl.text.find("%s", slot1 + 2);
  std::string text;
  text.reserve(tmpl.text.size() + logs_text.size() + context_text.size());
  text.append(tmpl.text, 0, slot1);
  text.append(logs_text);
  text.append(tmpl.text, slot1 + 2, slot2 - slot1 - 2);
  text.append(context_text);
  text.append(tmpl.text, slot2 + 2, std::string::npos);

  DiagnosisPrompt prompt;
  prompt.text = std::move(text);
  prompt.estimated_tokens = estimate_tokens(prompt.text);
  prompt.truncated = trunc.truncated;
  for (const LogSection& section : trunc.sectioned.sections) {
    if (!section.is_notes) prompt.sections_included.push_back(section.file_name);
  }
  return prompt;
}

}  // namespace logdiag
