#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "logdiag/llm_backend.hpp"
#include "logdiag/log_model.hpp"

namespace logdiag {

/// One cited log line in the response grammar's 4-field format.
struct CitedLogLine {
  std::string log_file_name;
  std::optional<Timestamp> timestamp;
  std::optional<std::string> callsite;
  std::string content;

  friend bool operator==(const CitedLogLine&, const CitedLogLine&) = default;
};

/// Structured view of a model response. `conclusion` is present iff the
/// "==Conclusion==" header was found; the raw normalized text is kept in
/// `body` for phrase-based outcome classification.
struct Diagnosis {
  std::optional<std::string> conclusion;
  std::optional<std::string> investigation_steps;
  bool has_citations_section = false;
  std::vector<CitedLogLine> cited_lines;
  std::vector<std::string> parse_warnings;
  std::string body;
};

enum class Outcome { Conclusive, InsufficientInformation, Unparseable };

std::string_view outcome_name(Outcome outcome);

/// Total, lenient parse of a response against the output grammar. Headers
/// tolerate surrounding whitespace and leading "#" / "**" decoration;
/// malformed citation groups become warnings, never failures.
Diagnosis parse_response(std::string_view text);
Diagnosis parse_response(const RawResponse& raw);

/// Conclusive when a conclusion and at least one citation are present;
/// InsufficientInformation when the conclusion is absent and the body admits
/// it lacks information; Unparseable otherwise.
Outcome classify_outcome(const Diagnosis& diagnosis);

struct CitationResolution {
  CitedLogLine citation;
  std::optional<std::pair<std::string, int>> resolved;  // (file_name, line_index)
};

struct ResolvedDiagnosis {
  Diagnosis diagnosis;
  std::vector<CitationResolution> resolutions;
  Outcome outcome = Outcome::Unparseable;
};

/// Matches each citation to a concrete (file, line) in the bundle: exact
/// file name, content as a message substring, then timestamp equality,
/// callsite equality and earliest line index as tie-breakers. A resolution
/// never points at a line that does not contain the cited content.
ResolvedDiagnosis resolve_citations(const Diagnosis& diagnosis,
                                    const LogBundle& bundle);

/// Canonical rendering of a diagnosis back into the response grammar.
/// parse_response(render_diagnosis(d)) recovers d for well-formed values.
std::string render_diagnosis(const Diagnosis& diagnosis);

/// Strips trailing whitespace from each line and normalizes the text to end
/// with exactly one newline.
std::string normalize_response(std::string_view text);

}  // namespace logdiag
