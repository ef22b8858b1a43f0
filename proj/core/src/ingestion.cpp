#include "logdiag/ingestion.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "logdiag/strings.hpp"

namespace logdiag {

namespace {

namespace fs = std::filesystem;

struct ScanResult {
  std::vector<DiscoveredFile> files;
  std::vector<IngestionNote> rejects;  // dotted names that miss the grammar
};

ScanResult scan_log_dir(const fs::path& root_dir,
                        const IngestionConfig& config) {
  config.validate();
  std::error_code ec;
  fs::directory_iterator it(root_dir, ec);
  if (ec) {
    throw RootDirUnreadable(root_dir.string() + " (" + ec.message() + ")");
  }

  ScanResult result;
  for (const auto& entry : it) {
    std::error_code type_ec;
    if (!entry.is_regular_file(type_ec) || type_ec) continue;
    const std::string name = entry.path().filename().string();
    const auto dot = name.rfind('.');
    if (dot == std::string::npos) continue;  // not a level-split log name

    const std::string component = name.substr(0, dot);
    const std::string suffix = name.substr(dot + 1);
    const auto level = parse_log_level(suffix);
    if (!level) {
      result.rejects.push_back(
          {NoteKind::CorruptFile, name,
           "unrecognized log level suffix \"" + suffix + "\"; file skipped"});
      continue;
    }
    if (!is_component_token(component)) {
      result.rejects.push_back(
          {NoteKind::CorruptFile, name,
           "invalid component token \"" + component + "\"; file skipped"});
      continue;
    }
    if (*level < config.min_level) continue;
    result.files.push_back(
        {name, config.driver_component_names.count(component) > 0});
  }

  std::sort(result.files.begin(), result.files.end(),
            [](const DiscoveredFile& a, const DiscoveredFile& b) {
              if (a.is_driver != b.is_driver) return a.is_driver;
              return a.file_name < b.file_name;
            });
  std::sort(result.rejects.begin(), result.rejects.end(),
            [](const IngestionNote& a, const IngestionNote& b) {
              return a.file_name < b.file_name;
            });
  return result;
}

bool read_file(const fs::path& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buf;
  buf << in.rdbuf();
  out = buf.str();
  return in.good() || in.eof();
}

const std::regex kFailedComponentPattern(
    "component ([A-Za-z0-9_-]+) failed",
    std::regex::icase | std::regex::optimize);

}  // namespace

void IngestionConfig::validate() const {
  if (driver_component_names.empty()) {
    throw std::invalid_argument("driver_component_names must be non-empty");
  }
  if (max_file_bytes == 0) {
    throw std::invalid_argument("max_file_bytes must be positive");
  }
}

std::vector<DiscoveredFile> discover_log_files(const fs::path& root_dir,
                                               const IngestionConfig& config) {
  return scan_log_dir(root_dir, config).files;
}

LineParse parse_log_line(std::string_view line) {
  const auto fields = strings::split(line, " | ");
  if (fields.size() < 6) return ContinuationText{std::string(line)};
  const auto ts = Timestamp::parse(fields[0]);
  if (!ts) return ContinuationText{std::string(line)};

  std::string message{fields[5]};
  for (std::size_t i = 6; i < fields.size(); ++i) {
    message += " | ";
    message += fields[i];
  }
  return ParsedLine{*ts, std::string(fields[1]), std::string(fields[2]),
                    std::string(fields[3]), std::string(fields[4]),
                    std::move(message)};
}

FileParseResult parse_log_file(std::string_view file_name,
                               std::string_view content, int rank,
                               bool is_driver, std::uint64_t max_file_bytes) {
  const auto split_name = split_log_file_name(file_name);
  if (!split_name) {
    throw std::invalid_argument("file name does not match the log grammar: " +
                                std::string(file_name));
  }

  std::vector<IngestionNote> notes;
  std::string_view retained = content;
  if (content.size() > max_file_bytes) {
    retained = content.substr(0, max_file_bytes);
    const auto cut = retained.rfind('\n');
    retained = (cut == std::string_view::npos) ? std::string_view{}
                                               : retained.substr(0, cut + 1);
    notes.push_back({NoteKind::CorruptFile, std::string(file_name),
                     "truncated to " + std::to_string(retained.size()) +
                         " bytes at the last complete line (" +
                         std::to_string(content.size() - retained.size()) +
                         " bytes dropped)"});
  }

  // A trailing '\n' terminates the last line rather than opening an empty one.
  std::vector<std::string_view> physicals;
  std::size_t pos = 0;
  while (pos < retained.size()) {
    const auto nl = retained.find('\n', pos);
    if (nl == std::string_view::npos) {
      physicals.push_back(retained.substr(pos));
      break;
    }
    physicals.push_back(retained.substr(pos, nl - pos));
    pos = nl + 1;
  }

  std::vector<LogLine> lines;
  std::size_t physical_index = 0;
  for (std::string_view physical : physicals) {
    LineParse parsed = parse_log_line(physical);
    // A header whose message trims to nothing cannot form a valid LogLine;
    // treat the whole physical line as continuation text.
    if (const auto* p = std::get_if<ParsedLine>(&parsed)) {
      if (strings::trim(p->message).empty()) {
        parsed = ContinuationText{std::string(physical)};
      }
    }

    if (auto* p = std::get_if<ParsedLine>(&parsed)) {
      LogLine line;
      line.timestamp = p->timestamp;
      line.datacenter = std::move(p->datacenter);
      line.process = std::move(p->process);
      line.thread = std::move(p->thread);
      line.callsite = std::move(p->callsite);
      line.message = std::move(p->message);
      line.source_file_rank = rank;
      line.line_index = static_cast<int>(lines.size());
      lines.push_back(std::move(line));
    } else {
      const auto& cont = std::get<ContinuationText>(parsed);
      if (lines.empty()) {
        std::string preview = cont.text.substr(0, 80);
        notes.push_back({NoteKind::UnparseableLine, std::string(file_name),
                         "physical line " + std::to_string(physical_index + 1) +
                             " precedes any timestamped line and was dropped: "
                             "\"" +
                             preview + "\""});
      } else {
        lines.back().message += '\n';
        lines.back().message += cont.text;
      }
    }
    ++physical_index;
  }

  FileParseResult result{make_log_file(split_name->first, split_name->second,
                                       is_driver, std::move(lines)),
                         std::move(notes)};
  return result;
}

LogBundle load_bundle(const fs::path& root_dir, const IngestionConfig& config) {
  const ScanResult scan = scan_log_dir(root_dir, config);

  std::vector<IngestionNote> notes = scan.rejects;
  std::vector<LogFile> files;
  files.reserve(scan.files.size());

  int rank = 0;
  for (const DiscoveredFile& discovered : scan.files) {
    std::string content;
    if (!read_file(root_dir / discovered.file_name, content)) {
      notes.push_back({NoteKind::CorruptFile, discovered.file_name,
                       "file could not be read; skipped"});
      continue;
    }
    FileParseResult parsed =
        parse_log_file(discovered.file_name, content, rank,
                       discovered.is_driver, config.max_file_bytes);
    files.push_back(std::move(parsed.file));
    notes.insert(notes.end(), parsed.notes.begin(), parsed.notes.end());
    ++rank;
  }

  const bool has_driver =
      std::any_of(files.begin(), files.end(),
                  [](const LogFile& f) { return f.is_driver; });
  if (!has_driver) {
    std::string drivers;
    for (const auto& name : config.driver_component_names) {
      if (!drivers.empty()) drivers += ", ";
      drivers += name;
    }
    notes.push_back({NoteKind::MissingDriverLog, std::nullopt,
                     "no driver log file was discovered (expected driver "
                     "components: " +
                         drivers + ")"});
  }

  // Components the driver reports as failed but that contributed no file.
  std::set<std::string> referenced;
  for (const LogFile& file : files) {
    if (!file.is_driver) continue;
    for (const LogLine& line : file.lines) {
      auto begin = std::sregex_iterator(line.message.begin(),
                                        line.message.end(),
                                        kFailedComponentPattern);
      for (auto it = begin; it != std::sregex_iterator(); ++it) {
        referenced.insert((*it)[1].str());
      }
    }
  }
  for (const std::string& name : referenced) {
    const bool contributes =
        std::any_of(files.begin(), files.end(),
                    [&](const LogFile& f) { return f.component == name; });
    if (!contributes) {
      notes.push_back({NoteKind::MissingComponentLog, std::nullopt,
                       "driver log reports a failure of component \"" + name +
                           "\" but no log file from it was found"});
    }
  }

  return make_bundle(bundle_id_from_path(root_dir), std::move(files),
                     std::move(notes));
}

std::string bundle_id_from_path(const fs::path& root_dir) {
  fs::path normal = root_dir.lexically_normal();
  std::string name = normal.filename().string();
  if (name.empty() || name == ".") name = normal.parent_path().filename().string();
  if (name.empty()) name = "bundle";
  return name;
}

}  // namespace logdiag
