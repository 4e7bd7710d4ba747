#include "pns/keyed_config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pns/types.hpp"

namespace pns {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

[[noreturn]] void syntax_error(int line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

// Strips a trailing '#' comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '\\' && quoted) {
      ++i;
    } else if (c == '"') {
      quoted = !quoted;
    } else if (c == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

double parse_number(const std::string& token, int line) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && token.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    syntax_error(line, "expected a number, got '" + token + "'");
  }
  return v;
}

std::string parse_string(const std::string& token, int line) {
  if (token.size() < 2 || token.back() != '"') syntax_error(line, "unterminated string");
  std::string out;
  for (std::size_t i = 1; i + 1 < token.size(); ++i) {
    char c = token[i];
    if (c != '\\') {
      out.push_back(c);
      continue;
    }
    if (i + 2 >= token.size()) syntax_error(line, "dangling escape");
    char n = token[++i];
    switch (n) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      default: syntax_error(line, std::string("unknown escape \\") + n);
    }
  }
  return out;
}

KeyedConfig::Value parse_value(const std::string& token, int line) {
  if (token.empty()) syntax_error(line, "missing value");
  if (token.front() == '"') return parse_string(token, line);
  if (token == "true") return true;
  if (token == "false") return false;
  if (token.front() == '[') {
    if (token.back() != ']') syntax_error(line, "unterminated array");
    std::vector<double> items;
    std::string body = token.substr(1, token.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::string t = trim(item);
      if (t.empty()) {
        if (ss.eof()) break;  // trailing comma
        syntax_error(line, "empty array element");
      }
      items.push_back(parse_number(t, line));
    }
    return items;
  }
  return parse_number(token, line);
}

}  // namespace

KeyedConfig KeyedConfig::parse(const std::string& text) {
  KeyedConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[' && s.find('=') == std::string::npos) {
      if (s.back() != ']') syntax_error(line, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) syntax_error(line, "empty section name");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) syntax_error(line, "expected key = value");
    std::string key = trim(s.substr(0, eq));
    if (key.empty()) syntax_error(line, "empty key");
    std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values_.count(full)) syntax_error(line, "duplicate key '" + full + "'");
    cfg.values_[full] = parse_value(trim(s.substr(eq + 1)), line);
  }
  return cfg;
}

KeyedConfig KeyedConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const KeyedConfig::Value* KeyedConfig::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  consumed_.insert(key);
  return &it->second;
}

double KeyedConfig::get_number(const std::string& key, double fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (auto d = std::get_if<double>(v)) return *d;
  throw ConfigError("config key '" + key + "' must be a number");
}

long long KeyedConfig::get_integer(const std::string& key, long long fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  auto d = std::get_if<double>(v);
  if (!d || std::floor(*d) != *d) throw ConfigError("config key '" + key + "' must be an integer");
  return static_cast<long long>(*d);
}

bool KeyedConfig::get_bool(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (auto b = std::get_if<bool>(v)) return *b;
  throw ConfigError("config key '" + key + "' must be true or false");
}

std::string KeyedConfig::get_string(const std::string& key, const std::string& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (auto s = std::get_if<std::string>(v)) return *s;
  throw ConfigError("config key '" + key + "' must be a string");
}

std::vector<double> KeyedConfig::get_numbers(const std::string& key,
                                             const std::vector<double>& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (auto a = std::get_if<std::vector<double>>(v)) return *a;
  throw ConfigError("config key '" + key + "' must be an array of numbers");
}

void KeyedConfig::reject_unknown_keys() const {
  for (const auto& [key, _] : values_) {
    if (!consumed_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace pns
