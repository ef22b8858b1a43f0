#include "logdiag/diagnosis_parser.hpp"

#include <algorithm>

#include "logdiag/strings.hpp"

namespace logdiag {

namespace {

constexpr std::string_view kConclusionHeader = "==Conclusion==";
constexpr std::string_view kStepsHeader = "==Investigation Steps==";
constexpr std::string_view kCitationsHeader = "==Most Relevant Log Lines==";

// Strips whitespace plus leading '#' and surrounding '**' decoration, so
// "## ==Conclusion==" and "**==Conclusion==**" match the bare header.
std::string_view strip_header_decoration(std::string_view line) {
  std::string_view t = strings::trim(line);
  while (!t.empty() && t.front() == '#') t.remove_prefix(1);
  t = strings::trim(t);
  if (t.size() >= 4 && t.substr(0, 2) == "**" && t.substr(t.size() - 2) == "**") {
    t = strings::trim(t.substr(2, t.size() - 4));
  }
  return t;
}

enum class SectionId { None, Conclusion, Steps, Citations };

std::optional<SectionId> header_for(std::string_view line) {
  const std::string_view t = strip_header_decoration(line);
  if (t == kConclusionHeader) return SectionId::Conclusion;
  if (t == kStepsHeader) return SectionId::Steps;
  if (t == kCitationsHeader) return SectionId::Citations;
  return std::nullopt;
}

std::string join_section(const std::vector<std::string>& lines) {
  std::size_t begin = 0, end = lines.size();
  while (begin < end && lines[begin].empty()) ++begin;
  while (end > begin && lines[end - 1].empty()) --end;
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += '\n';
    out += lines[i];
  }
  return out;
}

// "- log-file-name: x" -> field value after the prefix, if the line carries it.
std::optional<std::string_view> field_value(std::string_view line,
                                            std::string_view field) {
  std::string_view t = strings::trim(line);
  if (t.rfind("- ", 0) == 0) t = strings::trim(t.substr(2));
  if (t.rfind(field, 0) != 0) return std::nullopt;
  return strings::trim(t.substr(field.size()));
}

struct GroupBuilder {
  bool active = false;
  std::string file_name;
  std::optional<Timestamp> timestamp;
  std::optional<std::string> callsite;
  std::optional<std::string> content;

  void reset() { *this = GroupBuilder{}; }

  void flush(Diagnosis& d) {
    if (!active) return;
    if (file_name.empty()) {
      d.parse_warnings.push_back("citation group without a log-file-name");
    } else if (!content || strings::trim(*content).empty()) {
      d.parse_warnings.push_back("citation group for " + file_name +
                                 " has no content");
    } else {
      d.cited_lines.push_back({file_name, timestamp, callsite, *content});
    }
    reset();
  }
};

void parse_citation_lines(const std::vector<std::string>& lines, Diagnosis& d) {
  GroupBuilder group;
  for (const std::string& raw : lines) {
    if (strings::trim(raw).empty()) continue;
    if (auto v = field_value(raw, "log-file-name:")) {
      group.flush(d);
      group.active = true;
      group.file_name = std::string(*v);
      continue;
    }
    if (auto v = field_value(raw, "timestamp:")) {
      if (!group.active) group.active = true;
      if (!v->empty()) {
        group.timestamp = Timestamp::parse(*v);
        if (!group.timestamp) {
          d.parse_warnings.push_back("unparseable citation timestamp \"" +
                                     std::string(*v) + "\"");
        }
      }
      continue;
    }
    if (auto v = field_value(raw, "callsite:")) {
      if (!group.active) group.active = true;
      if (!v->empty()) group.callsite = std::string(*v);
      continue;
    }
    auto content = field_value(raw, "**content**:");
    if (!content) content = field_value(raw, "content:");
    if (content) {
      if (!group.active) group.active = true;
      group.content = std::string(*content);
      continue;
    }
    d.parse_warnings.push_back("unrecognized line in citations block: \"" +
                               std::string(strings::trim(raw)).substr(0, 60) +
                               "\"");
  }
  group.flush(d);
}

}  // namespace

std::string_view outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::Conclusive: return "Conclusive";
    case Outcome::InsufficientInformation: return "InsufficientInformation";
    case Outcome::Unparseable: return "Unparseable";
  }
  return "Unparseable";
}

std::string normalize_response(std::string_view text) {
  std::string out;
  out.reserve(text.size() + 1);
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    const std::string_view line = (nl == std::string_view::npos)
                                      ? text.substr(pos)
                                      : text.substr(pos, nl - pos);
    out += strings::rstrip(line);
    out += '\n';
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  while (out.size() >= 2 && out[out.size() - 1] == '\n' &&
         out[out.size() - 2] == '\n') {
    out.pop_back();
  }
  if (out.empty()) return out;
  if (out.back() != '\n') out += '\n';
  return out;
}

Diagnosis parse_response(std::string_view text) {
  Diagnosis d;
  d.body = normalize_response(text);

  std::vector<std::string> conclusion_lines, steps_lines, citation_lines;
  SectionId current = SectionId::None;
  bool any_header = false;

  std::size_t pos = 0;
  while (pos < d.body.size()) {
    auto nl = d.body.find('\n', pos);
    if (nl == std::string::npos) nl = d.body.size();
    const std::string line = d.body.substr(pos, nl - pos);
    pos = nl + 1;

    if (auto id = header_for(line)) {
      current = *id;
      any_header = true;
      if (*id == SectionId::Conclusion) d.conclusion = std::string{};
      if (*id == SectionId::Steps) d.investigation_steps = std::string{};
      if (*id == SectionId::Citations) d.has_citations_section = true;
      continue;
    }
    switch (current) {
      case SectionId::Conclusion: conclusion_lines.push_back(line); break;
      case SectionId::Steps: steps_lines.push_back(line); break;
      case SectionId::Citations: citation_lines.push_back(line); break;
      case SectionId::None: break;  // preamble before any header
    }
  }

  if (!any_header) {
    d.parse_warnings.push_back("no headers found");
    return d;
  }
  if (d.conclusion) *d.conclusion = join_section(conclusion_lines);
  if (d.investigation_steps) *d.investigation_steps = join_section(steps_lines);
  if (d.has_citations_section) parse_citation_lines(citation_lines, d);
  return d;
}

Diagnosis parse_response(const RawResponse& raw) {
  return parse_response(raw.text);
}

Outcome classify_outcome(const Diagnosis& diagnosis) {
  if (diagnosis.conclusion && !diagnosis.cited_lines.empty()) {
    return Outcome::Conclusive;
  }
  if (!diagnosis.conclusion) {
    static constexpr std::string_view kRefusalPhrases[] = {
        "need access", "not enough information", "must not draw any conclusion"};
    std::string searchable = diagnosis.body;
    if (diagnosis.investigation_steps) {
      searchable += '\n';
      searchable += *diagnosis.investigation_steps;
    }
    for (std::string_view phrase : kRefusalPhrases) {
      if (strings::contains_icase(searchable, phrase)) {
        return Outcome::InsufficientInformation;
      }
    }
  }
  return Outcome::Unparseable;
}

ResolvedDiagnosis resolve_citations(const Diagnosis& diagnosis,
                                    const LogBundle& bundle) {
  ResolvedDiagnosis out;
  out.diagnosis = diagnosis;
  out.outcome = classify_outcome(diagnosis);

  for (const CitedLogLine& citation : diagnosis.cited_lines) {
    CitationResolution res{citation, std::nullopt};
    const LogFile* file = bundle.find_file(citation.log_file_name);
    if (file == nullptr) {
      out.diagnosis.parse_warnings.push_back(
          "cited file not in bundle: " + citation.log_file_name);
      out.resolutions.push_back(std::move(res));
      continue;
    }

    std::vector<const LogLine*> candidates;
    for (const LogLine& line : file->lines) {
      if (line.message.find(citation.content) != std::string::npos) {
        candidates.push_back(&line);
      }
    }
    if (citation.timestamp) {
      std::vector<const LogLine*> narrowed;
      for (const LogLine* line : candidates) {
        if (line->timestamp == *citation.timestamp) narrowed.push_back(line);
      }
      if (!narrowed.empty()) candidates = std::move(narrowed);
    }
    if (citation.callsite) {
      std::vector<const LogLine*> narrowed;
      for (const LogLine* line : candidates) {
        if (line->callsite == *citation.callsite) narrowed.push_back(line);
      }
      if (!narrowed.empty()) candidates = std::move(narrowed);
    }

    if (candidates.empty()) {
      out.diagnosis.parse_warnings.push_back(
          "cited content not found in " + citation.log_file_name + ": \"" +
          citation.content.substr(0, 60) + "\"");
    } else {
      const LogLine* best = *std::min_element(
          candidates.begin(), candidates.end(),
          [](const LogLine* a, const LogLine* b) {
            return a->line_index < b->line_index;
          });
      res.resolved = std::make_pair(file->file_name, best->line_index);
    }
    out.resolutions.push_back(std::move(res));
  }
  return out;
}

std::string render_diagnosis(const Diagnosis& diagnosis) {
  std::string out;
  if (diagnosis.conclusion) {
    out += kConclusionHeader;
    out += '\n';
    out += *diagnosis.conclusion;
    out += "\n\n";
  }
  if (diagnosis.investigation_steps) {
    out += kStepsHeader;
    out += '\n';
    out += *diagnosis.investigation_steps;
    out += "\n\n";
  }
  if (diagnosis.has_citations_section) {
    out += kCitationsHeader;
    out += '\n';
    for (std::size_t i = 0; i < diagnosis.cited_lines.size(); ++i) {
      const CitedLogLine& cite = diagnosis.cited_lines[i];
      if (i > 0) out += '\n';
      out += "- log-file-name: " + cite.log_file_name + '\n';
      out += cite.timestamp
                 ? "- timestamp: " + cite.timestamp->to_string() + "\n"
                 : std::string("- timestamp:\n");
      out += cite.callsite ? "- callsite: " + *cite.callsite + "\n"
                           : std::string("- callsite:\n");
      out += "**content**: " + cite.content + '\n';
    }
  }
  return normalize_response(out);
}

}  // namespace logdiag
