#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hetsim {

// Flat key/value store behind every on-disk configuration file.
//
// File grammar (line oriented):
//   key = value          keys are dotted lowercase paths, e.g. "arch.cc.cores"
//   # comment            blank lines and comments are skipped
//
// Values keep their textual form until a typed getter is called, so a file
// survives parse -> serialize -> parse without drift.  serialize() emits keys
// in sorted order with single "key = value\n" lines; that sorted form is the
// canonical encoding and round-trips bit-exactly.
class ConfigMap {
 public:
  static ConfigMap parse_string(std::string_view text, const std::string& origin = "<string>");
  static ConfigMap parse_file(const std::string& path);

  std::string serialize() const;
  void write_file(const std::string& path, const std::string& header_comment = "") const;

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  size_t size() const { return kv_.size(); }

  // Typed getters.  The non-defaulted forms throw std::runtime_error when the
  // key is missing or the value does not parse as the requested type.
  int64_t get_int(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_str(const std::string& key) const;

  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_real(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;

  void set_int(const std::string& key, int64_t v);
  void set_u64(const std::string& key, uint64_t v);
  void set_real(const std::string& key, double v);
  void set_bool(const std::string& key, bool v);
  void set_str(const std::string& key, const std::string& v);

  void erase(const std::string& key) { kv_.erase(key); }

  // Sorted list of all keys, optionally restricted to a dotted prefix
  // ("arch." matches "arch.cc.cores" but not "archive.x").
  std::vector<std::string> keys() const;
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  bool operator==(const ConfigMap& o) const { return kv_ == o.kv_; }

 private:
  const std::string& raw(const std::string& key) const;

  std::map<std::string, std::string> kv_;
  std::string origin_ = "<empty>";
};

// Formats a double so that it parses back to the identical bit pattern while
// staying readable for round numbers (17 significant digits only when needed).
std::string format_real(double v);

}  // namespace hetsim
