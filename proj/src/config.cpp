#include "vsr/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <sstream>

#include "vsr/error.hpp"

namespace vsr {

namespace {

ConfigFile from_ptree(const boost::property_tree::ptree& tree) {
  ConfigFile out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' must live inside a [section]");
    auto& dst = out[section];
    for (const auto& [key, value] : body) dst[key] = value.get_value<std::string>();
  }
  return out;
}

}  // namespace

ConfigFile parse_config(const std::string& text) {
  std::istringstream in(text);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return from_ptree(tree);
}

ConfigFile read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_config(const std::filesystem::path& path, const ConfigFile& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  bool first = true;
  for (const auto& [section, body] : config) {
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [key, value] : body) out << key << " = " << value << '\n';
  }
}

void require_sections(const ConfigFile& config, const std::set<std::string>& allowed) {
  for (const auto& [section, body] : config) {
    if (!allowed.count(section)) throw ConfigError("unknown config section '" + section + "'");
  }
}

}  // namespace vsr
