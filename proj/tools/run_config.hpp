#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecnn/config.hpp"
#include "ecnn/model.hpp"

namespace ecnn::cli {

/// `key = value` lines; `#` starts a comment, blank lines are ignored, and
/// values may be wrapped in double quotes. Keys map to their 1-based line.
struct KeyValues {
    std::map<std::string, std::string> values;
    std::map<std::string, std::size_t> lines;
};

/// Throws ConfigError listing every malformed or duplicated line.
KeyValues parse_key_values(const std::string& text);

enum class Command { train, gridsearch };

/// Settings shared by `train` and `gridsearch`.
struct RunConfig {
    ModelConfig model;
    std::filesystem::path manifest;   // from `simulate`
    std::vector<std::string> train_scans;  // empty: fold split by seed
    std::vector<std::string> val_scans;
    std::filesystem::path out_dir = "out";
    GridSpace grid;          // gridsearch only; empty lists default to model values
    double grid_fraction = 0.2;
};

/// Typed view of a config file. Relative paths resolve against base_dir.
/// Every unknown key, unparsable value and ModelConfig problem is reported
/// in one ConfigError.
RunConfig parse_run_config(const std::string& text, Command command, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path, Command command);

/// Key reference with defaults, for --help.
std::string config_reference(Command command);

/// Comma-separated list; throws ConfigError naming `what` on bad items.
std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what);

/// One-line form of every field that influences a training run, without
/// commas: "n=5 l=3 f=64;64;32;32;1 k=3 r=3 lr=0.001 seed=0 epochs=6 batch=16 patch=8".
std::string run_key(const ModelConfig& cfg);

}  // namespace ecnn::cli
