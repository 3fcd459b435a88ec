#pragma once
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace eoslab {

std::string read_file(const std::string& path);  // throws std::runtime_error

// Writes via a sibling temp file then rename, so readers never observe a
// partially written artifact.
void atomic_write_file(const std::string& path, std::string_view content);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

// Exact-round-trip text encodings: hexfloat for payload numbers (parsed with
// strtod; iostreams cannot read the format back), %.17g for human-facing CSV.
std::string fmt_hex(double value);
std::string fmt_g17(double value);

// Whitespace tokenizer used by the text formats.
std::vector<std::string> tokenize(std::string_view text);

double parse_double(const std::string& token);  // accepts hexfloat and decimal
long parse_long(const std::string& token);

// Cursor over a whitespace token stream with format-error reporting; every
// failure throws std::runtime_error prefixed with the format name.
class TokenCursor {
 public:
  TokenCursor(std::string_view text, std::string format);
  const std::string& next(const char* what = "token");
  void expect(const char* literal);
  long integer(const char* what = "integer");
  double real(const char* what = "value");
  void finish();  // rejects trailing tokens
 private:
  [[noreturn]] void fail(const std::string& detail) const;
  std::vector<std::string> toks_;
  std::size_t at_ = 0;
  std::string format_;
};

}  // namespace eoslab
