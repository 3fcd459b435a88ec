#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace eoslab {

// Key-value experiment configuration: one `key = value` per line, '#' starts
// a comment, values may be comma-separated lists. Typed getters consume keys
// and record the value actually used (defaults included); finish() then
// rejects whatever was never consumed, so unknown keys fail loudly, and
// resolved_text() echoes the effective configuration for manifests.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text);
  static Config parse_file(const std::string& path);

  bool has(const std::string& key) const;

  // Inserts or overwrites a value before consumption (command-line overrides).
  void set(const std::string& key, const std::string& value);

  std::string get_str(const std::string& key);
  std::string get_str(const std::string& key, const std::string& def);
  long get_int(const std::string& key);
  long get_int(const std::string& key, long def);
  std::uint64_t get_u64(const std::string& key, std::uint64_t def);
  double get_real(const std::string& key);
  double get_real(const std::string& key, double def);
  bool get_flag(const std::string& key, bool def);
  std::vector<long> get_int_list(const std::string& key);
  std::vector<long> get_int_list(const std::string& key, const std::vector<long>& def);

  void finish() const;  // throws naming every unconsumed key

  // Deterministic echo of every consumed key with its effective value,
  // sorted by key.
  std::string resolved_text() const;

 private:
  [[noreturn]] void fail(const std::string& detail) const;
  const std::string* lookup(const std::string& key);
  void note(const std::string& key, const std::string& value);

  std::map<std::string, std::string> kv_;
  std::set<std::string> consumed_;
  std::map<std::string, std::string> resolved_;
};

}  // namespace eoslab
