#include "pathflow/config.hpp"

#include "pathflow/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pathflow {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_number(const std::string& text, const std::string& key, int line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE)
    throw ConfigError("'" + key + "' expects a number, got '" + text + "'", line);
  return v;
}

}  // namespace

const ConfigEntry* ConfigSection::find(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e;
  return nullptr;
}

std::string ConfigSection::get_string(const std::string& key, const std::string& fallback) const {
  const ConfigEntry* e = find(key);
  return e ? e->value : fallback;
}

std::string ConfigSection::require_string(const std::string& key) const {
  const ConfigEntry* e = find(key);
  if (!e) throw ConfigError("section [" + name + "] is missing '" + key + "'", line);
  return e->value;
}

double ConfigSection::get_double(const std::string& key, double fallback) const {
  const ConfigEntry* e = find(key);
  return e ? parse_number(e->value, key, e->line) : fallback;
}

double ConfigSection::require_double(const std::string& key) const {
  const ConfigEntry* e = find(key);
  if (!e) throw ConfigError("section [" + name + "] is missing '" + key + "'", line);
  return parse_number(e->value, key, e->line);
}

long long ConfigSection::get_int(const std::string& key, long long fallback) const {
  const ConfigEntry* e = find(key);
  if (!e) return fallback;
  const double v = parse_number(e->value, key, e->line);
  if (v != static_cast<double>(static_cast<long long>(v)))
    throw ConfigError("'" + key + "' expects an integer, got '" + e->value + "'", e->line);
  return static_cast<long long>(v);
}

bool ConfigSection::get_bool(const std::string& key, bool fallback) const {
  const ConfigEntry* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + e->value + "'", e->line);
}

std::vector<double> ConfigSection::get_doubles(const std::string& key,
                                               std::vector<double> fallback) const {
  const ConfigEntry* e = find(key);
  if (!e) return fallback;
  std::string text = e->value;
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream in(text);
  std::vector<double> out;
  std::string token;
  while (in >> token) out.push_back(parse_number(token, key, e->line));
  if (out.empty()) throw ConfigError("'" + key + "' expects a list of numbers", e->line);
  return out;
}

void ConfigSection::reject_unknown(const std::vector<std::string>& known,
                                   const std::vector<std::string>& prefixes) const {
  for (const auto& e : entries) {
    if (std::find(known.begin(), known.end(), e.key) != known.end()) continue;
    bool ok = false;
    for (const auto& p : prefixes) ok = ok || e.key.rfind(p, 0) == 0;
    if (!ok) throw ConfigError("unknown key '" + e.key + "' in [" + name + "]", e.line);
  }
}

ConfigDocument ConfigDocument::parse(const std::string& text) {
  ConfigDocument doc;
  doc.sections.push_back({"", 0, {}});
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw ConfigError("empty section name", line_no);
      if (doc.find(name) != nullptr) throw ConfigError("duplicate section [" + name + "]", line_no);
      doc.sections.push_back({name, line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line_no);
    ConfigSection& section = doc.sections.back();
    if (section.find(key) != nullptr)
      throw ConfigError("duplicate key '" + key + "'", line_no);
    section.entries.push_back({key, value, line_no});
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const ConfigSection* ConfigDocument::find(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

const ConfigSection& ConfigDocument::require(const std::string& name) const {
  const ConfigSection* s = find(name);
  if (!s) throw ConfigError("missing section [" + name + "]");
  return *s;
}

std::vector<const ConfigSection*> ConfigDocument::with_prefix(const std::string& prefix) const {
  std::vector<const ConfigSection*> out;
  for (const auto& s : sections)
    if (s.name.rfind(prefix, 0) == 0) out.push_back(&s);
  return out;
}

}  // namespace pathflow
