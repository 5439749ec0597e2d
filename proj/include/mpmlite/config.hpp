#pragma once

// INI-style scene files. Sections: [grid], [solver], [output],
// [material.N], [shape.N], [collider.N].

#include "mpmlite/scene.hpp"

#include <filesystem>
#include <string>
#include <variant>

namespace mpmlite {

enum class StatsMode { Csv, Off };

struct OutputConfig {
  std::filesystem::path dir = "out";
  StatsMode stats = StatsMode::Csv;
  bool velocities = true;
  bool volume_ratio = true;
  bool material_ids = true;
};

struct ParsedConfig {
  std::variant<SceneConfig<2>, SceneConfig<3>> scene;
  OutputConfig output;

  int dimension() const { return scene.index() == 0 ? 2 : 3; }
};

/// Throws ConfigError; messages carry the file and line when known.
ParsedConfig parse_config_file(const std::filesystem::path& path);
ParsedConfig parse_config_string(const std::string& text, const std::string& origin = "<string>");

}  // namespace mpmlite
