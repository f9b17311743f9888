#pragma once

#include "hazesplat/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace hazesplat {

/// Malformed configuration text or an unknown key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    TrainConfig train;
    std::uint64_t seed = 0;

    void validate() const { train.validate(); }
};

/// Every accepted key, in the order effective configs are written.
const std::vector<std::string>& config_keys();

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& cfg, const std::string& key);

/// `key = value` lines; `#` starts a comment. Later lines win.
void apply_config_text(PipelineConfig& cfg, const std::string& text);
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path);

std::string format_config(const PipelineConfig& cfg);

}  // namespace hazesplat
