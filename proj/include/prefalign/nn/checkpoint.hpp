#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace prefalign::nn {

class ParameterSet;

// Binary layout (all integers little-endian):
//   "PALN1" | u32 header length | header JSON | u64 parameter count | f64 values
// The header is canonical JSON (sorted keys, no whitespace) holding at least
// {"kind": ..., "config": {...}, "param_count": N}.

struct Checkpoint {
  std::string kind;
  nlohmann::json config;
  std::vector<double> values;
};

void save_checkpoint(const std::filesystem::path& path, const std::string& kind, const nlohmann::json& config,
                     const ParameterSet& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Serialized bytes, exposed for byte-level tests.
std::string encode_checkpoint(const std::string& kind, const nlohmann::json& config, const std::vector<double>& values);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace prefalign::nn
