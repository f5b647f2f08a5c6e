#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "p4g/model.hpp"

namespace p4g {

struct TrainConfig;

// Flat key=value configuration. '#' starts a comment line.
class KeyValueConfig {
 public:
  static KeyValueConfig load(const std::string& path);
  static KeyValueConfig parse(std::string_view text);

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  bool has(std::string_view key) const { return values_.find(key) != values_.end(); }
  std::optional<std::string> get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  long long get_int(std::string_view key, long long fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  // Entries of `other` replace entries here.
  void merge(const KeyValueConfig& other);

  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }
  // Sorted "key=value" lines; the basis of `hash`.
  std::string canonical() const;
  uint64_t hash() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

// Model keys use the "model." prefix, training keys "train.".
void write_model_config(const ModelConfig& c, KeyValueConfig& out);
ModelConfig read_model_config(const KeyValueConfig& in, ModelConfig base = {});
void write_train_config(const TrainConfig& c, KeyValueConfig& out);
TrainConfig read_train_config(const KeyValueConfig& in);

}  // namespace p4g
