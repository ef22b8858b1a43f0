#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "logdiag/log_model.hpp"

namespace logdiag {

class RootDirUnreadable : public std::runtime_error {
 public:
  explicit RootDirUnreadable(const std::string& detail)
      : std::runtime_error("log root directory unreadable: " + detail) {}
};

struct IngestionConfig {
  std::set<std::string> driver_component_names = {"test_driver"};
  LogLevel min_level = LogLevel::Info;
  std::uint64_t max_file_bytes = 32ull << 20;

  /// Throws std::invalid_argument when driver_component_names is empty or
  /// max_file_bytes is zero.
  void validate() const;
};

struct DiscoveredFile {
  std::string file_name;
  bool is_driver = false;
};

/// Lists every regular file in root_dir whose name matches
/// <component>.<level> with level >= config.min_level.
/// Drivers first, then lexicographic. Throws RootDirUnreadable.
std::vector<DiscoveredFile> discover_log_files(
    const std::filesystem::path& root_dir, const IngestionConfig& config);

struct ParsedLine {
  Timestamp timestamp;
  std::string datacenter;
  std::string process;
  std::string thread;
  std::string callsite;
  std::string message;
};

struct ContinuationText {
  std::string text;
};

using LineParse = std::variant<ParsedLine, ContinuationText>;

/// Total function over one physical line (no trailing newline). A line is a
/// ParsedLine when it splits on " | " into >= 6 fields and the first field is
/// a valid timestamp; everything else is continuation text.
LineParse parse_log_line(std::string_view line);

struct FileParseResult {
  LogFile file;
  std::vector<IngestionNote> notes;
};

/// Parses one file's content. Continuations after a parsed line fold into the
/// previous message; leading continuations are dropped with an
/// UnparseableLine note. Content beyond max_file_bytes is cut at the last
/// complete line with a CorruptFile note.
/// file_name must match the discovery grammar (throws std::invalid_argument
/// otherwise).
FileParseResult parse_log_file(std::string_view file_name,
                               std::string_view content, int rank,
                               bool is_driver = false,
                               std::uint64_t max_file_bytes = 32ull << 20);

/// Discovers, reads and parses a full bundle. Never fails on file content;
/// all degradation lands in ingestion_notes. Throws only RootDirUnreadable.
LogBundle load_bundle(const std::filesystem::path& root_dir,
                      const IngestionConfig& config);

/// Base name of the directory, used as the bundle id.
std::string bundle_id_from_path(const std::filesystem::path& root_dir);

}  // namespace logdiag
