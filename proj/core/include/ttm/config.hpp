#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ttm/engine.hpp"

namespace ttm {

/// Flat `key = value` file. `#` starts a comment; later assignments win.
/// `include = other.cfg` pulls in another file whose entries act as defaults.
/// Every read marks the key as used so leftovers can be reported.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& origin = "<config>");
  /// Throws Io when the file cannot be opened.
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  [[nodiscard]] bool contains(const std::string& key) const;

  [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& key, double fallback) const;
  [[nodiscard]] std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;
  /// Comma separated, entries trimmed, empty entries dropped.
  [[nodiscard]] std::vector<std::string> get_list(const std::string& key) const;
  /// Relative paths resolve against the directory of the file that set the
  /// key, and against the working directory for keys set in code.
  [[nodiscard]] std::filesystem::path get_path(const std::string& key) const;

  /// Throws ConfigInvalid naming every key that was never read.
  void require_all_used() const;

  [[nodiscard]] const std::filesystem::path& base_dir() const noexcept { return base_dir_; }
  [[nodiscard]] const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

 private:
  static KeyValueConfig load_nested(const std::filesystem::path& path, int depth);
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> entries_;
  std::map<std::string, std::filesystem::path> dirs_;
  mutable std::set<std::string> used_;
  std::filesystem::path base_dir_;
  std::string origin_;
};

/// Reads room.*, engine.*, sentiment.* and matrix.* keys.
RoomSettings room_settings_from_config(const KeyValueConfig& cfg);

}  // namespace ttm
