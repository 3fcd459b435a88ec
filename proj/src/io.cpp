#include "eoslab/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace eoslab {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) throw std::runtime_error("read failure: " + path);
  return buf.str();
}

void atomic_write_file(const std::string& path, std::string_view content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out.good()) throw std::runtime_error("write failure: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed: " + tmp + " -> " + path);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string fmt_hex(double value) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", value);
  return buf;
}

std::string fmt_g17(double value) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double parse_double(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0')
    throw std::runtime_error("not a number: '" + token + "'");
  return v;
}

long parse_long(const std::string& token) {
  char* end = nullptr;
  const long v = std::strtol(token.c_str(), &end, 10);
  if (end == token.c_str() || *end != '\0')
    throw std::runtime_error("not an integer: '" + token + "'");
  return v;
}

TokenCursor::TokenCursor(std::string_view text, std::string format)
    : toks_(tokenize(text)), format_(std::move(format)) {}

void TokenCursor::fail(const std::string& detail) const {
  throw std::runtime_error(format_ + ": " + detail);
}

const std::string& TokenCursor::next(const char* what) {
  if (at_ >= toks_.size()) fail(std::string("truncated while reading ") + what);
  return toks_[at_++];
}

void TokenCursor::expect(const char* literal) {
  const std::string& t = next(literal);
  if (t != literal) fail(std::string("expected '") + literal + "', got '" + t + "'");
}

long TokenCursor::integer(const char* what) {
  try {
    return parse_long(next(what));
  } catch (const std::runtime_error& e) {
    fail(std::string(what) + ": " + e.what());
  }
}

double TokenCursor::real(const char* what) {
  try {
    return parse_double(next(what));
  } catch (const std::runtime_error& e) {
    fail(std::string(what) + ": " + e.what());
  }
}

void TokenCursor::finish() {
  if (at_ != toks_.size()) fail("unexpected trailing token '" + toks_[at_] + "'");
}

}  // namespace eoslab
