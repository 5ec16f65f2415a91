#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsflab/clipio.hpp"
#include "vsflab/detector.hpp"

namespace vsflab {

// Flat key=value run configuration. Every tunable of the pipeline is
// registered with a default; unknown keys are a hard error so typos cannot
// silently fall back to defaults. Values are kept as canonical strings and
// parsed on access, which makes the resolved dump round-trip exactly.
class Config {
 public:
  Config();

  // File format: one key=value per line, '#' starts a comment, blank lines
  // ignored. Later assignments win.
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  // Parses a command-line override of the form key=value.
  void set_pair(const std::string& pair);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;

  // Every key in registration order, "key=value" lines.
  std::string resolved() const;

  GenConfig gen_config() const;
  ModelConfig model_config(Variant variant) const;
  TrainConfig train_config(std::uint64_t seed) const;

 private:
  struct Entry {
    std::string key;
    std::string value;
  };
  const Entry& find(const std::string& key) const;
  Entry& find(const std::string& key);

  std::vector<Entry> entries_;
};

}  // namespace vsflab
