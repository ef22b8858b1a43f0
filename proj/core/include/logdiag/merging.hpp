#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "logdiag/log_model.hpp"

namespace logdiag {

struct MergedEntry {
  std::string file_name;
  LogLine line;
};

/// All lines of a bundle in one timestamp-ordered stream.
/// Ties break by (source_file_rank, line_index), so the order is total.
struct MergedStream {
  std::vector<MergedEntry> entries;
};

/// Keeps only files whose level is at or above min_level; notes survive.
LogBundle filter_by_level(const LogBundle& bundle, LogLevel min_level);

/// K-way merge of every file's lines keyed by
/// (timestamp, source_file_rank, line_index).
MergedStream merge_streams(const LogBundle& bundle);

using LineRenderer = std::function<std::string(const LogLine&)>;

std::string render_physical_line(const LogLine& line);

struct SectionLine {
  std::string text;
  Timestamp timestamp;
  LogLevel level = LogLevel::Info;
  int source_file_rank = 0;
  int line_index = 0;
};

struct LogSection {
  std::string header;
  std::string file_name;  // empty for the notes section
  LogLevel level = LogLevel::Info;
  bool is_notes = false;
  std::size_t truncated_lines = 0;
  std::vector<SectionLine> lines;

  /// Body text: optional truncation marker first, then one rendered line per
  /// retained entry, each newline-terminated.
  std::string body() const;
};

/// Per-file prompt sections in bundle order, with an optional trailing
/// ingestion-notes section.
struct SectionedLogs {
  std::vector<LogSection> sections;
  std::size_t total_chars = 0;

  std::string render() const;
  void recompute_total_chars();
};

inline constexpr std::string_view kFileHeaderPrefix = "== FILE: ";
inline constexpr std::string_view kFileHeaderSuffix = " ==";
inline constexpr std::string_view kNotesHeader = "== INGESTION NOTES ==";

/// One section per file ("== FILE: <name> ==") in bundle order, plus a notes
/// section iff the bundle carries ingestion notes.
SectionedLogs assemble_sections(const LogBundle& bundle,
                                const LineRenderer& render = render_physical_line);

std::string truncation_marker(std::size_t dropped);

}  // namespace logdiag
