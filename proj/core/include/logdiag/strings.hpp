#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace logdiag::strings {

inline std::vector<std::string_view> split(std::string_view text,
                                           std::string_view delim) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(delim, pos);
    if (next == std::string_view::npos) {
      out.push_back(text.substr(pos));
      break;
    }
    out.push_back(text.substr(pos, next - pos));
    pos = next + delim.size();
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::string_view rstrip(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool contains_icase(std::string_view haystack, std::string_view needle) {
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

inline std::size_t count_occurrences(std::string_view text,
                                     std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string_view::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

inline std::string replace_all(std::string_view text, std::string_view from,
                               std::string_view to) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(from, pos);
    if (next == std::string_view::npos) {
      out.append(text.substr(pos));
      return out;
    }
    out.append(text.substr(pos, next - pos));
    out.append(to);
    pos = next + from.size();
  }
}

}  // namespace logdiag::strings
