#include <algorithm>
#include <regex>
#include <tuple>

#include "logdiag/diagnosis_parser.hpp"
#include "logdiag/ingestion.hpp"
#include "logdiag/llm_backend.hpp"
#include "logdiag/strings.hpp"

namespace logdiag {

namespace {

// Error lines that report their own recovery are not root-cause candidates.
bool is_benign_message(const std::string& message) {
  return strings::contains_icase(message, "recovered") ||
         strings::contains_icase(message, "retry") ||
         strings::contains_icase(message, "succeeded");
}

struct MockLine {
  Timestamp timestamp;
  std::string callsite;
  std::string content;  // one physical line's message field
  std::string file_name;
  std::string component;
  LogLevel level = LogLevel::Info;
  std::size_t section_idx = 0;
  std::size_t order = 0;

  std::tuple<Timestamp, std::size_t, std::size_t> key() const {
    return {timestamp, section_idx, order};
  }
};

const std::regex kFailedComponentPattern("component ([A-Za-z0-9_-]+) failed",
                                         std::regex::icase);

std::vector<MockLine> collect_lines(const SectionedLogs& sections) {
  std::vector<MockLine> all;
  for (std::size_t s = 0; s < sections.sections.size(); ++s) {
    const LogSection& section = sections.sections[s];
    if (section.is_notes) continue;
    const auto name = split_log_file_name(section.file_name);
    if (!name) continue;
    for (std::size_t i = 0; i < section.lines.size(); ++i) {
      LineParse parsed = parse_log_line(section.lines[i].text);
      auto* line = std::get_if<ParsedLine>(&parsed);
      if (line == nullptr) continue;  // continuation or marker text
      all.push_back({line->timestamp, line->callsite, line->message,
                     section.file_name, name->first, name->second, s, i});
    }
  }
  return all;
}

std::vector<MockLine> last_chronological(std::vector<MockLine> lines,
                                         std::size_t count) {
  std::sort(lines.begin(), lines.end(),
            [](const MockLine& a, const MockLine& b) { return a.key() < b.key(); });
  if (lines.size() > count) lines.erase(lines.begin(), lines.end() - count);
  return lines;
}

std::vector<CitedLogLine> to_citations(const std::vector<MockLine>& lines) {
  std::vector<CitedLogLine> cited;
  for (const MockLine& line : lines) {
    cited.push_back({line.file_name, line.timestamp, line.callsite,
                     line.content});
  }
  return cited;
}

RawResponse finish(Diagnosis diagnosis) {
  RawResponse response;
  response.text = render_diagnosis(diagnosis);
  response.output_tokens = estimate_tokens(response.text);
  response.backend = "mock";
  return response;
}

RawResponse refusal_response(const std::vector<std::string>& missing_notes,
                             std::size_t section_count) {
  Diagnosis d;
  std::string steps =
      "1. Scanned " + std::to_string(section_count) + " log sections.\n";
  if (!missing_notes.empty()) {
    steps += "2. The ingestion notes report log files that were not saved:\n";
    for (const std::string& note : missing_notes) {
      steps += "   - " + note + "\n";
    }
  } else {
    steps +=
        "2. The available sections contain no log lines from the component "
        "that failed.\n";
  }
  steps +=
      "3. I need access to those logs and must not draw any conclusion from "
      "the information I have.";
  d.investigation_steps = steps;
  d.has_citations_section = true;
  return finish(std::move(d));
}

struct PromptView {
  SectionedLogs sections;
  std::vector<IngestionNote> notes;
};

NoteKind note_kind_from_name(std::string_view name) {
  if (name == "MissingDriverLog") return NoteKind::MissingDriverLog;
  if (name == "MissingComponentLog") return NoteKind::MissingComponentLog;
  if (name == "UnparseableLine") return NoteKind::UnparseableLine;
  return NoteKind::CorruptFile;
}

// Recovers the sectioned logs and ingestion notes embedded in a built prompt.
PromptView extract_prompt_view(std::string_view prompt_text) {
  PromptView view;
  bool in_logs = false;
  bool in_notes = false;
  LogSection* current = nullptr;

  std::size_t pos = 0;
  while (pos <= prompt_text.size()) {
    if (pos == prompt_text.size()) break;
    auto nl = prompt_text.find('\n', pos);
    if (nl == std::string_view::npos) nl = prompt_text.size();
    const std::string_view line = prompt_text.substr(pos, nl - pos);
    pos = nl + 1;

    if (!in_logs) {
      if (line == "<LOGS=>") in_logs = true;
      continue;
    }
    if (line == "<CONTEXT=>") break;

    if (line.size() >= kFileHeaderPrefix.size() + kFileHeaderSuffix.size() &&
        line.substr(0, kFileHeaderPrefix.size()) == kFileHeaderPrefix &&
        line.substr(line.size() - kFileHeaderSuffix.size()) ==
            kFileHeaderSuffix) {
      LogSection section;
      section.file_name = std::string(
          line.substr(kFileHeaderPrefix.size(),
                      line.size() - kFileHeaderPrefix.size() -
                          kFileHeaderSuffix.size()));
      section.header = std::string(line);
      if (auto split = split_log_file_name(section.file_name)) {
        section.level = split->second;
      }
      view.sections.sections.push_back(std::move(section));
      current = &view.sections.sections.back();
      in_notes = false;
      continue;
    }
    if (line == kNotesHeader) {
      in_notes = true;
      current = nullptr;
      continue;
    }
    if (in_notes) {
      const std::string_view t = strings::trim(line);
      if (t.empty()) continue;
      IngestionNote note;
      auto colon = t.find(':');
      std::string_view head = (colon == std::string_view::npos)
                                  ? t
                                  : strings::trim(t.substr(0, colon));
      if (auto paren = head.find(" ("); paren != std::string_view::npos) {
        auto close = head.find(')', paren);
        if (close != std::string_view::npos) {
          note.file_name =
              std::string(head.substr(paren + 2, close - paren - 2));
        }
        head = head.substr(0, paren);
      }
      note.kind = note_kind_from_name(head);
      if (colon != std::string_view::npos) {
        note.detail = std::string(strings::trim(t.substr(colon + 1)));
      }
      view.notes.push_back(std::move(note));
      continue;
    }
    if (current != nullptr) {
      if (line.empty()) continue;  // section separator
      current->lines.push_back({std::string(line), Timestamp{}, current->level,
                                0, static_cast<int>(current->lines.size())});
    }
  }
  view.sections.recompute_total_chars();
  return view;
}

}  // namespace

RawResponse mock_diagnose(const SectionedLogs& prompt_sections,
                          const std::vector<IngestionNote>& notes) {
  std::size_t section_count = 0;
  for (const LogSection& s : prompt_sections.sections) {
    if (!s.is_notes) ++section_count;
  }

  std::vector<std::string> missing;
  for (const IngestionNote& note : notes) {
    if (note.kind == NoteKind::MissingDriverLog ||
        note.kind == NoteKind::MissingComponentLog) {
      missing.push_back(note.to_line());
    }
  }
  if (!missing.empty()) return refusal_response(missing, section_count);

  const std::vector<MockLine> all = collect_lines(prompt_sections);

  // The driver names the failing component as "component <name> failed".
  std::optional<std::string> failing;
  for (const MockLine& line : all) {
    std::smatch match;
    if (std::regex_search(line.content, match, kFailedComponentPattern)) {
      failing = match[1].str();
      break;
    }
  }

  std::vector<MockLine> cited;
  std::string conclusion;
  std::string how;

  if (failing) {
    std::vector<MockLine> errors, any;
    for (const MockLine& line : all) {
      if (line.component != *failing) continue;
      any.push_back(line);
      if (line.level >= LogLevel::Error && !is_benign_message(line.content)) {
        errors.push_back(line);
      }
    }
    if (!errors.empty()) {
      cited = last_chronological(std::move(errors), 3);
      conclusion = "Component " + *failing +
                   " failed. The most relevant error is: " +
                   cited.back().content;
      how = "Selected the most recent error-level lines from the " +
            *failing + " logs.";
    } else if (!any.empty()) {
      cited = last_chronological(std::move(any), 3);
      conclusion = "Component " + *failing +
                   " failed to become healthy. Its log ends during startup "
                   "after: " +
                   cited.back().content;
      how = "The " + *failing +
            " logs contain no error lines; selected the last lines before "
            "they stop.";
    } else {
      return refusal_response({}, section_count);
    }
  } else {
    std::vector<MockLine> errors;
    for (const MockLine& line : all) {
      if (line.level >= LogLevel::Error && !is_benign_message(line.content)) {
        errors.push_back(line);
      }
    }
    if (!errors.empty()) {
      cited = last_chronological(std::move(errors), 1);
      conclusion = "The test failed. The last error reported in the logs is: " +
                   cited.back().content;
      how = "No failing component was named by the driver; selected the last "
            "non-recovered error across all sections.";
    } else if (!all.empty()) {
      std::vector<MockLine> tail = last_chronological(all, 1);
      cited = tail;
      conclusion =
          "The test failed without an explicit error line. The logs end "
          "with: " +
          cited.back().content;
      how = "No error-level lines were found; selected the final log line.";
    } else {
      return refusal_response({}, section_count);
    }
  }

  Diagnosis d;
  d.conclusion = conclusion;
  d.investigation_steps =
      "1. Scanned " + std::to_string(section_count) + " log sections.\n" +
      (failing ? "2. The driver logs name the failing component: " + *failing +
                     ".\n"
               : std::string("2. The driver logs name no failing component.\n")) +
      "3. " + how;
  d.has_citations_section = true;
  d.cited_lines = to_citations(cited);
  return finish(std::move(d));
}

RawResponse MockBackend::complete(const DiagnosisPrompt& prompt,
                                  const LlmParams& params) {
  params.validate();
  if (prompt.text.empty()) {
    throw BackendError(BackendErrorKind::EmptyResponse, "empty prompt");
  }
  const PromptView view = extract_prompt_view(prompt.text);
  RawResponse response = mock_diagnose(view.sections, view.notes);
  response.input_tokens = estimate_tokens(prompt.text);
  return response;
}

}  // namespace logdiag
