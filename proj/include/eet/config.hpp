#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eet/errors.hpp"
#include "eet/linalg.hpp"
#include "eet/units.hpp"

namespace eet::config {

struct Location {
  std::string file;
  std::size_t line = 0;

  std::string str() const { return line ? file + ":" + std::to_string(line) : file; }
};

struct Entry {
  std::string value;
  Location where;
  std::string units;  // "" (rad/ps) or "cm-1"
};

inline std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(ws) - b + 1));
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

[[noreturn]] inline void fail(const Location& at, const std::string& message) {
  throw Error(ErrorKind::Configuration, at.str() + ": " + message);
}

/// INI document: `[section]` headers, `key = value` pairs, `#` comments (`;`
/// also at line start) and indented continuation lines, which are appended to
/// the previous value with a newline. Keys before the first section belong to
/// section "". A `units = cm-1 | rad/ps` line tags every entry under the same
/// header, so overlays never reinterpret inherited values.
class Document {
 public:
  using Section = std::map<std::string, Entry>;

  static Document parse(std::istream& in, const std::string& file_name) {
    Document doc;
    std::string line, section;
    std::string* last_value = nullptr;
    std::vector<Entry*> chunk;
    std::optional<std::pair<std::string, Location>> chunk_units;
    auto close_chunk = [&] {
      if (chunk_units)
        for (auto* e : chunk) e->units = chunk_units->first;
      chunk.clear();
      chunk_units.reset();
    };
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      const Location at{file_name, n};
      const auto body = trim(line);
      if (body.empty() || body[0] == '#' || body[0] == ';') continue;
      const bool indented = !line.empty() && (line[0] == ' ' || line[0] == '\t');
      if (indented && last_value) {
        *last_value += "\n" + strip_comment(body);
        continue;
      }
      last_value = nullptr;
      if (body.front() == '[') {
        if (body.back() != ']') fail(at, "unterminated section header");
        close_chunk();
        section = lower(trim(std::string_view(body).substr(1, body.size() - 2)));
        if (section.empty()) fail(at, "empty section name");
        doc.sections_[section];
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos) fail(at, "expected 'key = value'");
      const auto key = lower(trim(std::string_view(body).substr(0, eq)));
      if (key.empty()) fail(at, "missing key before '='");
      if (key == "units") {
        if (chunk_units) fail(at, "units already set at " + chunk_units->second.str());
        chunk_units.emplace(units_tag(trim(std::string_view(body).substr(eq + 1)), at), at);
        continue;
      }
      auto& sec = doc.sections_[section];
      if (sec.count(key)) fail(at, "duplicate key '" + key + "' (first set at " + sec[key].where.str() + ")");
      auto& e = sec[key];
      e = {strip_comment(trim(std::string_view(body).substr(eq + 1))), at, {}};
      last_value = &e.value;
      chunk.push_back(&e);
    }
    close_chunk();
    return doc;
  }

  static Document parse_string(const std::string& text, const std::string& name = "<string>") {
    std::istringstream in(text);
    return parse(in, name);
  }

  /// Load a file. A top-level `extends = other.ini` is loaded first and then
  /// overlaid key by key; relative paths resolve against the including file,
  /// then against `search_dir`.
  static Document load(const std::filesystem::path& path, const std::filesystem::path& search_dir = {}) {
    std::set<std::string> seen;
    return load_impl(path, search_dir, seen);
  }

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
  bool has(const std::string& s, const std::string& key) const {
    auto it = sections_.find(s);
    return it != sections_.end() && it->second.count(key);
  }
  const Entry* find(const std::string& s, const std::string& key) const {
    auto it = sections_.find(s);
    if (it == sections_.end()) return nullptr;
    auto e = it->second.find(key);
    return e == it->second.end() ? nullptr : &e->second;
  }

  void set(const std::string& s, const std::string& key, std::string value, Location where = {"<override>", 0}) {
    sections_[s][key] = {std::move(value), std::move(where), {}};
  }
  void erase(const std::string& s, const std::string& key) {
    auto it = sections_.find(s);
    if (it != sections_.end()) it->second.erase(key);
  }

  void overlay(const Document& other) {
    for (const auto& [s, sec] : other.sections_)
      for (const auto& [k, e] : sec) sections_[s][k] = e;
  }

  const std::map<std::string, Section>& sections() const { return sections_; }

  /// Sorted `section.key=value` lines with whitespace inside values
  /// collapsed and the units tag appended; the basis of the config digest.
  std::string canonical() const {
    std::ostringstream out;
    for (const auto& [s, sec] : sections_)
      for (const auto& [k, e] : sec) {
        out << (s.empty() ? "" : s + ".") << k << "=" << normalize(e.value);
        if (!e.units.empty()) out << " @" << e.units;
        out << "\n";
      }
    return out.str();
  }

  /// Re-serialize as an INI file in canonical order. Entries with a units
  /// tag go under a repeated header carrying that tag.
  std::string to_ini() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [s, sec] : sections_) {
      std::set<std::string> tags;
      for (const auto& [k, e] : sec) tags.insert(e.units);
      for (const auto& tag : tags) {
        if (!s.empty() || !tag.empty()) out << (first ? "" : "\n") << "[" << s << "]\n";
        first = false;
        if (!tag.empty()) out << "units = " << tag << "\n";
        for (const auto& [k, e] : sec) {
          if (e.units != tag) continue;
          std::string indented;
          for (char c : e.value) {
            indented += c;
            if (c == '\n') indented += "    ";
          }
          out << k << " = " << indented << "\n";
        }
      }
    }
    return out.str();
  }

 private:
  static std::string strip_comment(const std::string& v) {
    // Inline comments use '#' only; ';' separates matrix rows.
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] == '#' && (v[i - 1] == ' ' || v[i - 1] == '\t')) return trim(v.substr(0, i));
    return v;
  }

  static std::string normalize(const std::string& v) {
    std::string out;
    bool space = false;
    for (char c : v) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        space = !out.empty();
        continue;
      }
      if (space) out += ' ';
      space = false;
      out += c;
    }
    return out;
  }

  static Document load_impl(const std::filesystem::path& path, const std::filesystem::path& search_dir,
                            std::set<std::string>& seen) {
    std::error_code ec;
    const auto canon = std::filesystem::weakly_canonical(path, ec).string();
    if (!seen.insert(canon).second) throw Error(ErrorKind::Configuration, path.string() + ": circular 'extends'");
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config file " + path.string());
    auto doc = parse(in, path.string());
    const auto* ext = doc.find("", "extends");
    if (!ext) return doc;
    std::filesystem::path base = ext->value;
    if (base.is_relative()) {
      auto local = path.parent_path() / base;
      if (std::filesystem::exists(local) || search_dir.empty()) base = local;
      else base = search_dir / base;
    }
    if (!std::filesystem::exists(base)) fail(ext->where, "extended file '" + ext->value + "' not found");
    auto merged = load_impl(base, search_dir, seen);
    doc.erase("", "extends");
    merged.overlay(doc);
    return merged;
  }

  static std::string units_tag(const std::string& tag, const Location& at) {
    const auto t = lower(tag);
    if (t == "rad/ps" || t == "1/ps" || t == "ps-1" || t == "ps^-1") return "";
    if (t == "cm-1" || t == "cm^-1" || t == "1/cm" || t == "cm⁻¹") return "cm-1";
    fail(at, "unknown units '" + tag + "' (expected cm-1 or rad/ps)");
  }

  std::map<std::string, Section> sections_;
};

// ---------------------------------------------------------------------------
// Typed reading

inline double parse_number(const std::string& token, const Location& at) {
  double v = 0.0;
  const auto* b = token.data();
  const auto* e = b + token.size();
  if (!token.empty() && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) fail(at, "'" + token + "' is not a number");
  return v;
}

inline std::vector<std::string> split_tokens(const std::string& v, std::string_view separators = ", \t\n") {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (separators.find(c) != std::string_view::npos) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Multiplier taking an entry's value to rad/ps (energies) or 1/ps (rates).
inline double unit_scale(const Entry& e) { return e.units == "cm-1" ? units::kRadPerPsPerWavenumber : 1.0; }

/// Reads one section and remembers which keys were consumed, so leftovers can
/// be reported as unknown.
class SectionReader {
 public:
  SectionReader(const Document& doc, std::string section) : doc_(doc), section_(std::move(section)) {}

  const std::string& name() const { return section_; }
  bool present() const { return doc_.has_section(section_); }
  bool has(const std::string& key) const { return doc_.has(section_, key); }

  const Entry& entry(const std::string& key) const {
    const auto* e = doc_.find(section_, key);
    if (!e) {
      Location at{file_hint(), 0};
      fail(at, "missing required key '" + key + "' in [" + section_ + "]");
    }
    used_.insert(key);
    return *e;
  }

  Location where(const std::string& key) const {
    const auto* e = doc_.find(section_, key);
    return e ? e->where : Location{file_hint(), 0};
  }

  std::string text(const std::string& key) const { return trim(entry(key).value); }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  double number(const std::string& key) const {
    const auto& e = entry(key);
    return parse_number(trim(e.value), e.where);
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  /// A number in the section's units, returned in rad/ps.
  double scaled(const std::string& key) const { return number(key) * unit_scale(entry(key)); }
  double scaled(const std::string& key, double fallback_rad_per_ps) const {
    return has(key) ? scaled(key) : fallback_rad_per_ps;
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    const auto& e = entry(key);
    const double v = parse_number(trim(e.value), e.where);
    if (v < 0.0 || v != std::floor(v)) fail(e.where, "'" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& e = entry(key);
    const auto v = lower(trim(e.value));
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    fail(e.where, "'" + key + "' must be true or false");
  }

  std::vector<double> numbers(const std::string& key) const {
    const auto& e = entry(key);
    std::vector<double> out;
    for (const auto& t : split_tokens(e.value, ", \t\n;")) out.push_back(parse_number(t, e.where));
    return out;
  }

  /// A list of n numbers, or a single number broadcast to n, in rad/ps.
  std::vector<double> scaled_list(const std::string& key, std::size_t n) const {
    const auto& e = entry(key);
    auto v = numbers(key);
    if (v.size() == 1) v.assign(n, v.front());
    if (v.size() != n)
      fail(e.where, "'" + key + "' needs 1 or " + std::to_string(n) + " values, got " + std::to_string(v.size()));
    for (auto& x : v) x *= unit_scale(e);
    return v;
  }

  /// Rows separated by newlines or ';', entries by commas or blanks. Values
  /// are returned as written; multiply by scale_of(key) for rad/ps.
  double scale_of(const std::string& key) const { return unit_scale(entry(key)); }

  RealMatrix matrix(const std::string& key, std::optional<std::size_t> cols = std::nullopt) const {
    const auto& e = entry(key);
    std::vector<std::vector<double>> rows;
    for (const auto& r : split_tokens(e.value, "\n;")) {
      auto t = split_tokens(r, ", \t");
      if (t.empty()) continue;
      std::vector<double> row;
      for (const auto& x : t) row.push_back(parse_number(x, e.where));
      rows.push_back(std::move(row));
    }
    if (rows.empty()) fail(e.where, "'" + key + "' is empty");
    const auto c = cols.value_or(rows.size());
    RealMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != c)
        fail(e.where, "row " + std::to_string(i + 1) + " of '" + key + "' has " + std::to_string(rows[i].size()) +
                          " entries, expected " + std::to_string(c));
      for (std::size_t j = 0; j < c; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
  }

  std::string choice(const std::string& key, const std::vector<std::string>& allowed, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& e = entry(key);
    const auto v = lower(trim(e.value));
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(e.where, "'" + key + "' must be one of: " + list + " (got '" + e.value + "')");
    }
    return v;
  }

  std::vector<std::pair<std::string, Location>> unused() const {
    std::vector<std::pair<std::string, Location>> out;
    auto it = doc_.sections().find(section_);
    if (it == doc_.sections().end()) return out;
    for (const auto& [k, e] : it->second)
      if (!used_.count(k)) out.emplace_back(k, e.where);
    return out;
  }

 private:
  std::string file_hint() const {
    auto it = doc_.sections().find(section_);
    if (it != doc_.sections().end() && !it->second.empty()) return it->second.begin()->second.where.file;
    for (const auto& [s, sec] : doc_.sections())
      if (!sec.empty()) return sec.begin()->second.where.file;
    return "<config>";
  }

  const Document& doc_;
  std::string section_;
  mutable std::set<std::string> used_;
};

}  // namespace eet::config
