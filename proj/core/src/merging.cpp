#include "logdiag/merging.hpp"

#include <queue>
#include <tuple>

namespace logdiag {

LogBundle filter_by_level(const LogBundle& bundle, LogLevel min_level) {
  std::vector<LogFile> kept;
  for (const LogFile& file : bundle.files) {
    if (file.level >= min_level) kept.push_back(file);
  }
  return make_bundle(bundle.bundle_id, std::move(kept),
                     bundle.ingestion_notes);
}

MergedStream merge_streams(const LogBundle& bundle) {
  using Key = std::tuple<Timestamp, int, int>;
  struct Head {
    Key key;
    std::size_t file_idx;
    std::size_t line_idx;
  };
  struct HeadGreater {
    bool operator()(const Head& a, const Head& b) const { return b.key < a.key; }
  };

  std::priority_queue<Head, std::vector<Head>, HeadGreater> heads;
  std::size_t total = 0;
  for (std::size_t i = 0; i < bundle.files.size(); ++i) {
    total += bundle.files[i].lines.size();
    if (!bundle.files[i].lines.empty()) {
      const LogLine& first = bundle.files[i].lines.front();
      heads.push({Key{first.timestamp, first.source_file_rank,
                      first.line_index},
                  i, 0});
    }
  }

  MergedStream stream;
  stream.entries.reserve(total);
  while (!heads.empty()) {
    const Head head = heads.top();
    heads.pop();
    const LogFile& file = bundle.files[head.file_idx];
    stream.entries.push_back({file.file_name, file.lines[head.line_idx]});
    const std::size_t next = head.line_idx + 1;
    if (next < file.lines.size()) {
      const LogLine& line = file.lines[next];
      heads.push({Key{line.timestamp, line.source_file_rank, line.line_index},
                  head.file_idx, next});
    }
  }
  return stream;
}

std::string render_physical_line(const LogLine& line) {
  return line.physical_text();
}

std::string truncation_marker(std::size_t dropped) {
  return "[... " + std::to_string(dropped) + " lines truncated ...]";
}

std::string LogSection::body() const {
  std::string out;
  if (truncated_lines > 0) {
    out += truncation_marker(truncated_lines);
    out += '\n';
  }
  for (const SectionLine& line : lines) {
    out += line.text;
    out += '\n';
  }
  return out;
}

std::string SectionedLogs::render() const {
  std::string out;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i > 0) out += '\n';
    out += sections[i].header;
    out += '\n';
    out += sections[i].body();
  }
  return out;
}

void SectionedLogs::recompute_total_chars() { total_chars = render().size(); }

SectionedLogs assemble_sections(const LogBundle& bundle,
                                const LineRenderer& render) {
  SectionedLogs out;
  for (const LogFile& file : bundle.files) {
    LogSection section;
    section.header = std::string(kFileHeaderPrefix) + file.file_name +
                     std::string(kFileHeaderSuffix);
    section.file_name = file.file_name;
    section.level = file.level;
    for (const LogLine& line : file.lines) {
      section.lines.push_back({render(line), line.timestamp, file.level,
                               line.source_file_rank, line.line_index});
    }
    out.sections.push_back(std::move(section));
  }
  if (!bundle.ingestion_notes.empty()) {
    LogSection notes;
    notes.header = std::string(kNotesHeader);
    notes.is_notes = true;
    for (const IngestionNote& note : bundle.ingestion_notes) {
      notes.lines.push_back({note.to_line(), Timestamp{}, LogLevel::Info, 0,
                             static_cast<int>(notes.lines.size())});
    }
    out.sections.push_back(std::move(notes));
  }
  out.recompute_total_chars();
  return out;
}

}  // namespace logdiag
