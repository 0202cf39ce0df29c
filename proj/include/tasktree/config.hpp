#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace tasktree {

// "key = value" run configuration.  Blank lines and lines starting with '#'
// are skipped; whitespace around keys and values is trimmed.  Typed getters
// fall back to the supplied default when the key is absent and throw a
// ValidationError when a present value does not parse.
class Config {
 public:
  Config() = default;
  static Config load(const std::string& path);
  static Config parse_text(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_str(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace tasktree
