#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spinmaser {

/// One `key = value` line of a key/value document.
struct KeyValueEntry {
  std::string key;   // section-qualified, e.g. "pump.power"
  std::string value; // trimmed, comment removed
  std::string note;  // trailing `# ...` comment, if any
  int line = 0;      // 1-based
};

/// Minimal INI-style document: `[section]` headers, `key = value` lines,
/// `#` comments. Keys inside a section are prefixed with "section.".
/// Repeated keys are kept in order.
class KeyValueDocument {
public:
  static KeyValueDocument parse(std::string_view text);

  const std::vector<KeyValueEntry>& entries() const { return entries_; }
  std::vector<std::string> sections() const;

  /// Entries whose key starts with "prefix.", with the prefix stripped.
  KeyValueDocument subsection(std::string_view prefix) const;

  /// Last entry with this key.
  const KeyValueEntry* find(std::string_view key) const;
  std::vector<const KeyValueEntry*> find_all(std::string_view key) const;

  void add(KeyValueEntry entry) { entries_.push_back(std::move(entry)); }

private:
  std::vector<KeyValueEntry> entries_;
  std::vector<std::string> sections_;
};

std::string_view trim_view(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep);

} // namespace spinmaser
