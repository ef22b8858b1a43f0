#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "logdiag/merging.hpp"

namespace logdiag {

class BudgetTooSmall : public std::runtime_error {
 public:
  BudgetTooSmall(std::size_t needed_tokens, std::size_t budget_tokens)
      : std::runtime_error("prompt budget too small: template and context "
                           "alone need " +
                           std::to_string(needed_tokens) +
                           " tokens, budget is " +
                           std::to_string(budget_tokens)),
        needed(needed_tokens),
        budget(budget_tokens) {}

  std::size_t needed;
  std::size_t budget;
};

/// The diagnostic prompt template. Two "%s" slots receive the sectioned logs
/// and the component context; the "<LOGS=>" and "<CONTEXT=>" section markers
/// appear exactly once each.
struct PromptTemplate {
  std::string text;
  std::string version;

  static const PromptTemplate& builtin();
  static PromptTemplate load_file(const std::filesystem::path& path);

  /// Throws std::invalid_argument when the required markers, output-format
  /// headers or substitution slots are missing or duplicated.
  void validate() const;
};

struct ContextEntry {
  std::string component;
  std::string description;
  std::string command_line;
};

/// Metadata about SUT components, rendered under the context marker.
struct ComponentContext {
  std::vector<ContextEntry> entries;

  std::string render() const;

  /// Reads blocks of "component:"/"description:"/"args:" lines.
  static ComponentContext load_file(const std::filesystem::path& path);
};

inline constexpr std::size_t kDefaultBudgetTokens = 200000;

/// ceil(chars / 4); backend-independent and reproducible.
std::size_t estimate_tokens(std::string_view text);

struct TruncationResult {
  SectionedLogs sectioned;
  bool truncated = false;
  std::size_t lines_dropped = 0;
};

/// Drops whole lines until the assembled prompt fits the budget. Drop order:
/// oldest lines first, lowest levels first; ERROR/FATAL lines go only after
/// every lower level is exhausted. Each truncated section gains a first body
/// line marking how many lines were removed. Throws BudgetTooSmall when the
/// template plus context alone exceed the budget.
TruncationResult truncate_to_budget(const SectionedLogs& sectioned,
                                    const ComponentContext& context,
                                    const PromptTemplate& tmpl,
                                    std::size_t budget_tokens);

struct DiagnosisPrompt {
  std::string text;
  std::size_t estimated_tokens = 0;
  bool truncated = false;
  std::vector<std::string> sections_included;
};

DiagnosisPrompt build_prompt(const PromptTemplate& tmpl,
                             const SectionedLogs& sectioned,
                             const ComponentContext& context,
                             std::size_t budget_tokens = kDefaultBudgetTokens);

}  // namespace logdiag
