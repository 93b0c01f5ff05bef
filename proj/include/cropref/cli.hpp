#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cropref::cli {

// Flat `key = value` configuration with dotted section prefixes
// (`shift.road_width_y_m = 12`). `${out}` in a value expands to the output
// directory when the value is read as a path.
class Config {
 public:
  static Config parse(std::string_view text, std::string_view source = "config");
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;  // comma separated

  const std::map<std::string, std::string>& values() const { return values_; }
  // Sorted `key = value` lines; the hash covers exactly this text.
  std::string canonical() const;
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> values_;
};

const std::vector<std::string>& known_keys();

inline constexpr const char* kCommands[] = {
    "synth",        "grid",          "fetch",           "train-images",
    "classify-images", "qc",         "make-refs",       "validate-refs",
    "select-features", "train-mapper", "map",           "evaluate"};

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

// Runs one pipeline stage. The seed must already be present in `config`.
int run_command(std::string_view name, const Config& config, const std::filesystem::path& out_dir,
                std::ostream& out, std::ostream& err);

// argv-level entry point: `<command> [--config PATH] [--seed N] [--out DIR]`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cropref::cli
