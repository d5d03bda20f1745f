#include "spinmaser/keyvalue.hpp"

#include "spinmaser/error.hpp"

#include <algorithm>

namespace spinmaser {

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos)
      pos = s.size();
    auto item = trim_view(s.substr(start, pos - start));
    if (!item.empty())
      out.emplace_back(item);
    start = pos + 1;
  }
  return out;
}

KeyValueDocument KeyValueDocument::parse(std::string_view text) {
  KeyValueDocument doc;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos)
      end = text.size();
    auto raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    std::string_view note;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) {
      note = trim_view(raw.substr(hash + 1));
      raw = raw.substr(0, hash);
    }
    auto line = trim_view(raw);
    if (line.empty())
      continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      section = std::string(trim_view(line.substr(1, line.size() - 2)));
      if (section.empty())
        throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      if (std::find(doc.sections_.begin(), doc.sections_.end(), section) == doc.sections_.end())
        doc.sections_.push_back(section);
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                        std::string(line) + "'");
    auto key = trim_view(line.substr(0, eq));
    auto value = trim_view(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": missing key");

    KeyValueEntry entry;
    entry.key = section.empty() ? std::string(key) : section + "." + std::string(key);
    entry.value = std::string(value);
    entry.note = std::string(note);
    entry.line = line_no;
    doc.entries_.push_back(std::move(entry));
  }
  return doc;
}

std::vector<std::string> KeyValueDocument::sections() const { return sections_; }

KeyValueDocument KeyValueDocument::subsection(std::string_view prefix) const {
  KeyValueDocument out;
  std::string p = std::string(prefix) + ".";
  for (const auto& e : entries_) {
    if (e.key.starts_with(p)) {
      auto copy = e;
      copy.key = e.key.substr(p.size());
      out.entries_.push_back(std::move(copy));
    }
  }
  return out;
}

const KeyValueEntry* KeyValueDocument::find(std::string_view key) const {
  const KeyValueEntry* found = nullptr;
  for (const auto& e : entries_)
    if (e.key == key)
      found = &e;
  return found;
}

std::vector<const KeyValueEntry*> KeyValueDocument::find_all(std::string_view key) const {
  std::vector<const KeyValueEntry*> out;
  for (const auto& e : entries_)
    if (e.key == key)
      out.push_back(&e);
  return out;
}

} // namespace spinmaser
