#include "eoslab/config.hpp"

#include <algorithm>
#include <stdexcept>

#include "eoslab/io.hpp"

namespace eoslab {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

void Config::fail(const std::string& detail) const {
  throw std::runtime_error("config: " + detail);
}

Config Config::parse(const std::string& text) {
  Config cfg;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      cfg.fail("line " + std::to_string(lineno) + ": expected 'key = value', got '" + line +
               "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) cfg.fail("line " + std::to_string(lineno) + ": empty key");
    if (cfg.kv_.count(key))
      cfg.fail("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.kv_[key] = value;
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) { return parse(read_file(path)); }

bool Config::has(const std::string& key) const { return kv_.count(key) != 0; }

void Config::set(const std::string& key, const std::string& value) { kv_[key] = value; }

const std::string* Config::lookup(const std::string& key) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return nullptr;
  consumed_.insert(key);
  return &it->second;
}

void Config::note(const std::string& key, const std::string& value) {
  resolved_[key] = value;
}

std::string Config::get_str(const std::string& key) {
  const std::string* v = lookup(key);
  if (v == nullptr) fail("missing required key '" + key + "'");
  note(key, *v);
  return *v;
}

std::string Config::get_str(const std::string& key, const std::string& def) {
  const std::string* v = lookup(key);
  const std::string out = v != nullptr ? *v : def;
  note(key, out);
  return out;
}

long Config::get_int(const std::string& key) {
  try {
    const long out = parse_long(get_str(key));
    note(key, std::to_string(out));
    return out;
  } catch (const std::runtime_error& e) {
    fail("key '" + key + "': " + e.what());
  }
}

long Config::get_int(const std::string& key, long def) {
  if (!has(key)) {
    consumed_.insert(key);
    note(key, std::to_string(def));
    return def;
  }
  return get_int(key);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t def) {
  if (!has(key)) {
    consumed_.insert(key);
    note(key, std::to_string(def));
    return def;
  }
  const std::string raw = get_str(key);
  try {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(raw, &used, 10);
    if (used != raw.size()) throw std::runtime_error("not an unsigned integer: '" + raw + "'");
    note(key, std::to_string(out));
    return out;
  } catch (const std::exception&) {
    fail("key '" + key + "': not an unsigned integer: '" + raw + "'");
  }
}

double Config::get_real(const std::string& key) {
  try {
    const double out = parse_double(get_str(key));
    note(key, fmt_g17(out));
    return out;
  } catch (const std::runtime_error& e) {
    fail("key '" + key + "': " + e.what());
  }
}

double Config::get_real(const std::string& key, double def) {
  if (!has(key)) {
    consumed_.insert(key);
    note(key, fmt_g17(def));
    return def;
  }
  return get_real(key);
}

bool Config::get_flag(const std::string& key, bool def) {
  if (!has(key)) {
    consumed_.insert(key);
    note(key, def ? "1" : "0");
    return def;
  }
  const std::string raw = get_str(key);
  if (raw == "1" || raw == "true" || raw == "yes") {
    note(key, "1");
    return true;
  }
  if (raw == "0" || raw == "false" || raw == "no") {
    note(key, "0");
    return false;
  }
  fail("key '" + key + "': expected a boolean, got '" + raw + "'");
}

std::vector<long> Config::get_int_list(const std::string& key) {
  const std::string raw = get_str(key);
  std::vector<long> out;
  for (const std::string& tok : split_list(raw)) {
    try {
      out.push_back(parse_long(tok));
    } catch (const std::runtime_error& e) {
      fail("key '" + key + "': " + e.what());
    }
  }
  std::string canon;
  for (std::size_t i = 0; i < out.size(); ++i)
    canon += (i ? "," : "") + std::to_string(out[i]);
  note(key, canon);
  return out;
}

std::vector<long> Config::get_int_list(const std::string& key, const std::vector<long>& def) {
  if (!has(key)) {
    consumed_.insert(key);
    std::string canon;
    for (std::size_t i = 0; i < def.size(); ++i)
      canon += (i ? "," : "") + std::to_string(def[i]);
    note(key, canon);
    return def;
  }
  return get_int_list(key);
}

void Config::finish() const {
  std::vector<std::string> unknown;
  for (const auto& [key, value] : kv_)
    if (!consumed_.count(key)) unknown.push_back(key);
  if (unknown.empty()) return;
  std::string msg = "unknown key";
  if (unknown.size() > 1) msg += "s";
  for (std::size_t i = 0; i < unknown.size(); ++i)
    msg += (i ? ", '" : " '") + unknown[i] + "'";
  fail(msg);
}

std::string Config::resolved_text() const {
  std::string out;
  for (const auto& [key, value] : resolved_) out += key + " = " + value + "\n";
  return out;
}

}  // namespace eoslab
