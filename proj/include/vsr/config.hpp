#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace vsr {

// key=value files with [section] headers.
using ConfigSection = std::map<std::string, std::string>;
using ConfigFile = std::map<std::string, ConfigSection>;

ConfigFile read_config(const std::filesystem::path& path);
ConfigFile parse_config(const std::string& text);
void write_config(const std::filesystem::path& path, const ConfigFile& config);

// Throws ConfigError naming the first section not in `allowed`.
void require_sections(const ConfigFile& config, const std::set<std::string>& allowed);

}  // namespace vsr
