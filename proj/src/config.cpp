#include "hetsim/config.h"

#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hetsim {

namespace {

std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) b++;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) e--;
  return s.substr(b, e - b);
}

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return k.front() != '.' && k.back() != '.';
}

[[noreturn]] void fail(const std::string& origin, size_t line, const std::string& msg) {
  throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

ConfigMap ConfigMap::parse_string(std::string_view text, const std::string& origin) {
  ConfigMap cfg;
  cfg.origin_ = origin;
  size_t lineno = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, (nl == std::string_view::npos ? text.size() : nl) - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    lineno++;

    std::string_view body = line.substr(0, line.find('#'));
    body = trim(body);
    if (body.empty()) continue;

    size_t eq = body.find('=');
    if (eq == std::string_view::npos) fail(origin, lineno, "expected 'key = value'");
    std::string_view key = trim(body.substr(0, eq));
    std::string_view val = trim(body.substr(eq + 1));
    if (!valid_key(key)) fail(origin, lineno, "bad key '" + std::string(key) + "'");
    if (val.empty()) fail(origin, lineno, "empty value for '" + std::string(key) + "'");
    cfg.kv_[std::string(key)] = std::string(val);
  }
  return cfg;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

std::string ConfigMap::serialize() const {
  std::string out;
  for (const auto& [k, v] : kv_) {  // std::map iterates in sorted key order
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void ConfigMap::write_file(const std::string& path, const std::string& header_comment) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  if (!header_comment.empty()) {
    std::istringstream lines(header_comment);
    std::string l;
    while (std::getline(lines, l)) out << "# " << l << "\n";
  }
  out << serialize();
  if (!out) throw std::runtime_error("write failed: " + path);
}

const std::string& ConfigMap::raw(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end())
    throw std::runtime_error(origin_ + ": missing required key '" + key + "'");
  return it->second;
}

int64_t ConfigMap::get_int(const std::string& key) const {
  const std::string& s = raw(key);
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error(origin_ + ": key '" + key + "' is not an integer: '" + s + "'");
  return v;
}

uint64_t ConfigMap::get_u64(const std::string& key) const {
  const std::string& s = raw(key);
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error(origin_ + ": key '" + key + "' is not a non-negative integer: '" + s + "'");
  return v;
}

double ConfigMap::get_real(const std::string& key) const {
  const std::string& s = raw(key);
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    throw std::runtime_error(origin_ + ": key '" + key + "' is not a finite number: '" + s + "'");
  return v;
}

bool ConfigMap::get_bool(const std::string& key) const {
  const std::string& s = raw(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::runtime_error(origin_ + ": key '" + key + "' is not a bool: '" + s + "'");
}

const std::string& ConfigMap::get_str(const std::string& key) const { return raw(key); }

int64_t ConfigMap::get_int(const std::string& key, int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}
uint64_t ConfigMap::get_u64(const std::string& key, uint64_t fallback) const {
  return has(key) ? get_u64(key) : fallback;
}
double ConfigMap::get_real(const std::string& key, double fallback) const {
  return has(key) ? get_real(key) : fallback;
}
bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}
std::string ConfigMap::get_str(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_str(key) : fallback;
}

void ConfigMap::set_int(const std::string& key, int64_t v) { kv_[key] = std::to_string(v); }
void ConfigMap::set_u64(const std::string& key, uint64_t v) { kv_[key] = std::to_string(v); }
void ConfigMap::set_real(const std::string& key, double v) { kv_[key] = format_real(v); }
void ConfigMap::set_bool(const std::string& key, bool v) { kv_[key] = v ? "true" : "false"; }
void ConfigMap::set_str(const std::string& key, const std::string& v) {
  std::string t(trim(v));
  if (t.empty() || t.find('\n') != std::string::npos || t.find('#') != std::string::npos)
    throw std::runtime_error("unserializable value for key '" + key + "'");
  kv_[key] = t;
}

std::vector<std::string> ConfigMap::keys() const {
  std::vector<std::string> out;
  out.reserve(kv_.size());
  for (const auto& [k, v] : kv_) out.push_back(k);
  return out;
}

std::vector<std::string> ConfigMap::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto it = kv_.lower_bound(prefix); it != kv_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    out.push_back(it->first);
  }
  return out;
}

std::string format_real(double v) {
  if (!std::isfinite(v)) throw std::runtime_error("cannot serialize non-finite number");
  // Shortest decimal form that survives the round trip.
  for (int prec = 1; prec <= 17; prec++) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace hetsim
