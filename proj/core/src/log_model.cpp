#include "logdiag/log_model.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace logdiag {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
      static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return static_cast<std::int64_t>(era) * 146097 +
         static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe =
      (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  y = static_cast<int>(yy + (m <= 2));
}

}  // namespace

std::optional<LogLevel> parse_log_level(std::string_view name) {
  if (name == "debug") return LogLevel::Debug;
  if (name == "info") return LogLevel::Info;
  if (name == "warning") return LogLevel::Warning;
  if (name == "error") return LogLevel::Error;
  if (name == "fatal") return LogLevel::Fatal;
  return std::nullopt;
}

std::string_view log_level_name(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warning: return "warning";
    case LogLevel::Error: return "error";
    case LogLevel::Fatal: return "fatal";
  }
  return "info";
}

std::optional<Timestamp> Timestamp::parse(std::string_view text) {
  // YYYY-MM-DD-hh:mm:ss, fixed width.
  if (text.size() != 19) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || text[10] != '-' ||
      text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  const std::string_view y = text.substr(0, 4), mo = text.substr(5, 2),
                         d = text.substr(8, 2), h = text.substr(11, 2),
                         mi = text.substr(14, 2), s = text.substr(17, 2);
  if (!all_digits(y) || !all_digits(mo) || !all_digits(d) || !all_digits(h) ||
      !all_digits(mi) || !all_digits(s)) {
    return std::nullopt;
  }
  Timestamp ts{to_int(y), to_int(mo), to_int(d),
               to_int(h), to_int(mi), to_int(s)};
  if (ts.month < 1 || ts.month > 12) return std::nullopt;
  if (ts.day < 1 || ts.day > 31) return std::nullopt;
  if (ts.hour > 23 || ts.minute > 59 || ts.second > 59) return std::nullopt;
  return ts;
}

Timestamp Timestamp::from_epoch_seconds(std::int64_t seconds) {
  std::int64_t days = seconds / 86400;
  std::int64_t rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  Timestamp ts;
  civil_from_days(days, ts.year, ts.month, ts.day);
  ts.hour = static_cast<int>(rem / 3600);
  ts.minute = static_cast<int>((rem % 3600) / 60);
  ts.second = static_cast<int>(rem % 60);
  return ts;
}

std::int64_t Timestamp::epoch_seconds() const {
  return days_from_civil(year, month, day) * 86400 + hour * 3600 +
         minute * 60 + second;
}

std::string Timestamp::to_string() const {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d-%02d:%02d:%02d", year, month,
                day, hour, minute, second);
  return buf;
}

std::string LogLine::physical_text() const {
  std::string out;
  out.reserve(40 + datacenter.size() + process.size() + thread.size() +
              callsite.size() + message.size());
  out += timestamp.to_string();
  out += " | ";
  out += datacenter;
  out += " | ";
  out += process;
  out += " | ";
  out += thread;
  out += " | ";
  out += callsite;
  out += " | ";
  out += message;
  return out;
}

LogFile make_log_file(std::string component, LogLevel level, bool is_driver,
                      std::vector<LogLine> lines) {
  if (!is_component_token(component)) {
    throw std::invalid_argument("invalid component token: \"" + component +
                                "\"");
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i].message)) {
      throw std::invalid_argument("log line " + std::to_string(i) + " of " +
                                  component + " has an empty message");
    }
    if (lines[i].line_index != static_cast<int>(i)) {
      throw std::invalid_argument("line_index out of sequence in " + component);
    }
  }
  LogFile file;
  file.component = std::move(component);
  file.level = level;
  file.is_driver = is_driver;
  file.file_name = file.component + "." + std::string(log_level_name(level));
  file.lines = std::move(lines);
  return file;
}

std::string reconstruct_content(const LogFile& file) {
  std::string out;
  for (const LogLine& line : file.lines) {
    out += line.physical_text();
    out += '\n';
  }
  return out;
}

std::string_view note_kind_name(NoteKind kind) {
  switch (kind) {
    case NoteKind::MissingDriverLog: return "MissingDriverLog";
    case NoteKind::MissingComponentLog: return "MissingComponentLog";
    case NoteKind::CorruptFile: return "CorruptFile";
    case NoteKind::UnparseableLine: return "UnparseableLine";
  }
  return "CorruptFile";
}

std::string IngestionNote::to_line() const {
  std::string out{note_kind_name(kind)};
  if (file_name) {
    out += " (";
    out += *file_name;
    out += ")";
  }
  out += ": ";
  out += detail;
  return out;
}

const LogFile* LogBundle::find_file(std::string_view file_name) const {
  for (const LogFile& f : files) {
    if (f.file_name == file_name) return &f;
  }
  return nullptr;
}

LogBundle make_bundle(std::string bundle_id, std::vector<LogFile> files,
                      std::vector<IngestionNote> notes) {
  std::stable_sort(files.begin(), files.end(),
                   [](const LogFile& a, const LogFile& b) {
                     if (a.is_driver != b.is_driver) return a.is_driver;
                     return a.file_name < b.file_name;
                   });
  for (std::size_t i = 1; i < files.size(); ++i) {
    if (files[i].file_name == files[i - 1].file_name) {
      throw std::invalid_argument("duplicate file name in bundle: " +
                                  files[i].file_name);
    }
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    for (LogLine& line : files[i].lines) {
      line.source_file_rank = static_cast<int>(i);
    }
  }
  for (const IngestionNote& note : notes) {
    if (note.kind == NoteKind::UnparseableLine && !note.file_name) {
      throw std::invalid_argument(
          "UnparseableLine note requires a file name: " + note.detail);
    }
  }
  LogBundle bundle;
  bundle.bundle_id = std::move(bundle_id);
  bundle.files = std::move(files);
  bundle.ingestion_notes = std::move(notes);
  return bundle;
}

std::optional<std::pair<std::string, LogLevel>> split_log_file_name(
    std::string_view file_name) {
  const auto dot = file_name.rfind('.');
  if (dot == std::string_view::npos || dot == 0 ||
      dot + 1 >= file_name.size()) {
    return std::nullopt;
  }
  const std::string_view component = file_name.substr(0, dot);
  const std::string_view suffix = file_name.substr(dot + 1);
  const auto level = parse_log_level(suffix);
  if (!level || !is_component_token(component)) return std::nullopt;
  return std::make_pair(std::string(component), *level);
}

bool is_component_token(std::string_view token) {
  if (token.empty()) return false;
  for (char c : token) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_';
    if (!ok) return false;
  }
  return true;
}

}  // namespace logdiag
