#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace suplab {

/// Flat key-value file in a TOML subset:
///
///   # comment
///   kind = "interference"
///   [world]
///   concept_dim = 128
///   feature_dims = [16, 32, 64]
///
/// Keys under a [section] are stored as "section.key". Values are kept as text
/// and converted on access; conversion failures raise ConfigError naming the key.
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse(std::string_view text, const std::string& source = "<config>");
  static ConfigFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }
  const std::string& source() const { return source_; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key, std::vector<std::size_t> fallback) const;

  /// Keys that were never read; useful for catching typos.
  std::vector<std::string> unused_keys() const;
  /// Marks every key read through `other` (a copy of this file) as read here.
  void merge_usage(const ConfigFile& other) const;
  void mark_used(const std::string& key) const { used_.insert(key); }

 private:
  const std::string& raw(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string source_;
};

}  // namespace suplab
