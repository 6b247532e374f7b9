#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dtn {

// key = value run configuration. '#' starts a comment, blank lines are
// skipped, whitespace around keys and values is trimmed. Later assignments
// to the same key win.
class ConfigFile {
public:
  static ConfigFile parse_string(const std::string& text);
  static ConfigFile parse_file(const std::string& path);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  std::vector<std::string> keys() const;

  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

private:
  std::map<std::string, std::string> kv_;
};

}  // namespace dtn
