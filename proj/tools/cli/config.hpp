// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spdr/biencoder.hpp"
#include "spdr/eval.hpp"
#include "spdr/retrieval.hpp"
#include "spdr/sae.hpp"
#include "spdr/synth.hpp"

namespace spdr::cli {

enum class ValueType { integer, count, real, text, boolean, choice };

struct KeySpec {
  std::string key;
  ValueType type;
  std::string fallback;  // default value, "" for unset paths
  std::vector<std::string> choices;
  std::string help;
};

/// Every recognized configuration key.
const std::vector<KeySpec>& config_schema();

/// Resolved settings: schema defaults, then the config file, then flags.
class RunConfig {
 public:
  RunConfig();

  /// Validates and stores one value; `origin` prefixes error messages.
  void set(std::string_view key, std::string_view value, std::string_view origin);

  const std::string& raw(std::string_view key) const;
  bool has(std::string_view key) const { return !raw(key).empty(); }
  std::int64_t integer(std::string_view key) const;
  std::size_t count(std::string_view key) const;
  double real(std::string_view key) const;
  bool boolean(std::string_view key) const;
  const std::string& text(std::string_view key) const { return raw(key); }

  /// "key=value" lines in key order; keys starting with `prefix` only.
  std::string dump(std::string_view prefix = "") const;
  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Parses a key=value config file ('#' starts a comment line) and
/// "--section.key=value" flags on top of the defaults.
RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       std::span<const std::string> flags);

SaeTrainConfig sae_config(const RunConfig& rc);
BiTrainConfig bi_config(const RunConfig& rc);
ExclusionParams exclusion_params(const RunConfig& rc);
SynthConfig synth_config(const RunConfig& rc);
std::vector<MetricSpec> metric_specs(std::string_view list);

}  // namespace spdr::cli
