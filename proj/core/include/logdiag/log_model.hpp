#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace logdiag {

/// Severity attached to a whole log file via its name suffix.
/// DEBUG sits below the pipeline's default inclusion threshold.
enum class LogLevel : int {
  Debug = 0,
  Info = 1,
  Warning = 2,
  Error = 3,
  Fatal = 4,
};

inline constexpr LogLevel kAllLogLevels[] = {
    LogLevel::Debug, LogLevel::Info, LogLevel::Warning,
    LogLevel::Error, LogLevel::Fatal};

/// Lowercase suffix ("debug".."fatal") to level. Unknown suffixes return nullopt.
std::optional<LogLevel> parse_log_level(std::string_view name);

/// Canonical lowercase name, as used in file-name suffixes.
std::string_view log_level_name(LogLevel level);

/// Naive calendar timestamp at second resolution, no timezone.
/// Wire format: YYYY-MM-DD-hh:mm:ss
struct Timestamp {
  int year = 1970;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;

  static std::optional<Timestamp> parse(std::string_view text);
  static Timestamp from_epoch_seconds(std::int64_t seconds);

  std::int64_t epoch_seconds() const;
  std::string to_string() const;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// One logical log line. `message` may span several physical lines after
/// continuation folding; embedded '\n' separates the physical pieces.
struct LogLine {
  Timestamp timestamp;
  std::string datacenter;
  std::string process;
  std::string thread;
  std::string callsite;
  std::string message;
  int source_file_rank = 0;  // position of the owning file in bundle order
  int line_index = 0;        // 0-based index of this logical line in its file

  /// The line as it appeared on disk (continuations included via '\n').
  std::string physical_text() const;
};

struct LogFile {
  std::string file_name;  // always component + "." + level suffix
  std::string component;
  LogLevel level = LogLevel::Info;
  bool is_driver = false;
  std::vector<LogLine> lines;
};

/// Validating constructor for LogFile. Derives file_name, checks the
/// component token, message non-emptiness and line_index sequence.
/// Throws std::invalid_argument on violation.
LogFile make_log_file(std::string component, LogLevel level, bool is_driver,
                      std::vector<LogLine> lines);

/// Exact on-disk content of the retained lines (each physical line
/// newline-terminated).
std::string reconstruct_content(const LogFile& file);

enum class NoteKind {
  MissingDriverLog,
  MissingComponentLog,
  CorruptFile,
  UnparseableLine,
};

std::string_view note_kind_name(NoteKind kind);

/// Degradation observed while ingesting a bundle; never a hard failure.
struct IngestionNote {
  NoteKind kind = NoteKind::CorruptFile;
  std::optional<std::string> file_name;
  std::string detail;

  /// One-line rendering, e.g. "UnparseableLine (a.info): ...".
  std::string to_line() const;
};

/// All log files one failing test execution left behind.
/// Files are ordered driver-first, then lexicographic by file name.
struct LogBundle {
  std::string bundle_id;
  std::vector<LogFile> files;
  std::vector<IngestionNote> ingestion_notes;

  const LogFile* find_file(std::string_view file_name) const;
};

/// Validating constructor: sorts files into canonical order, enforces unique
/// file names and the UnparseableLine note constraint, and restamps each
/// line's source_file_rank to the file's bundle position.
/// Throws std::invalid_argument on violation.
LogBundle make_bundle(std::string bundle_id, std::vector<LogFile> files,
                      std::vector<IngestionNote> notes);

/// Splits "<component>.<level>" at the final dot. Returns nullopt when the
/// name does not match the closed grammar (bad token or unknown suffix).
std::optional<std::pair<std::string, LogLevel>> split_log_file_name(
    std::string_view file_name);

/// Component tokens: [A-Za-z0-9_-]+, no dots.
bool is_component_token(std::string_view token);

}  // namespace logdiag
