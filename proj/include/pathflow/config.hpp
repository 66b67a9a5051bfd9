#pragma once

#include <optional>
#include <string>
#include <vector>

namespace pathflow {

/// One `key = value` line.
struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

/// A `[name]` block. Keys keep their source order and line numbers so every error can
/// point back at the file.
struct ConfigSection {
  std::string name;
  int line = 0;
  std::vector<ConfigEntry> entries;

  const ConfigEntry* find(const std::string& key) const;
  bool has(const std::string& key) const { return find(key) != nullptr; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma- or whitespace-separated numbers.
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;

  /// ConfigError naming the first key that is not in `known` (or does not start with one of
  /// the `prefixes`).
  void reject_unknown(const std::vector<std::string>& known,
                      const std::vector<std::string>& prefixes = {}) const;
};

/// Parsed configuration text.
///
/// Grammar, one item per line:
///   # comment            (also after values: `key = 1  # note`)
///   [section]            section names may contain dots, e.g. [check.ibp]
///   key = value          value runs to end of line, surrounding blanks trimmed
/// Keys before the first section header belong to an unnamed section "".
struct ConfigDocument {
  std::vector<ConfigSection> sections;

  static ConfigDocument parse(const std::string& text);
  static ConfigDocument load(const std::string& path);

  const ConfigSection* find(const std::string& name) const;
  const ConfigSection& require(const std::string& name) const;
  /// All sections whose name starts with `prefix`.
  std::vector<const ConfigSection*> with_prefix(const std::string& prefix) const;
};

}  // namespace pathflow
