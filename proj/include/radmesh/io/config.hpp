#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "radmesh/field/field.hpp"
#include "radmesh/optim/train.hpp"

namespace radmesh::io {

/// Everything a training run is configured by.
struct RunConfig {
  optim::TrainConfig train;
  field::FieldConfig field;
  /// Write a checkpoint every this many iterations; 0 writes only the final one.
  std::uint64_t checkpoint_every = 0;
};

/// Parses the TOML subset used by config files: [section] and [a.b] headers,
/// key = value with integers, floats, booleans, basic strings and flat
/// arrays, and # comments. The result is a nested JSON object.
nlohmann::json parse_toml(const std::string& text, const std::string& source = "<string>");

/// Reads a .toml or .json file into a JSON object.
nlohmann::json read_config_document(const std::string& path);

/// Applies the keys present in `doc` on top of `base`. Unknown sections or
/// keys and values of the wrong type throw Error(Format).
RunConfig config_from_json(const nlohmann::json& doc, const RunConfig& base = {});
nlohmann::json config_to_json(const RunConfig& config);

/// Defaults overridden by the file at `path` (TOML or JSON); validated.
RunConfig load_config(const std::string& path);

}  // namespace radmesh::io
