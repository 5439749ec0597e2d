#pragma once

// MLF1 particle frames, little-endian:
//   "MLF1" u32 version u32 dim u64 count
//   then blocks: char[4] field id, u8 components, float32[count*components]

#include "mpmlite/material.hpp"
#include "mpmlite/scene.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mpmlite {

inline constexpr std::uint32_t kFrameVersion = 1;

struct FrameField {
  std::array<char, 4> id{};
  std::uint8_t components = 0;
  std::vector<float> data;

  std::string name() const { return std::string(id.data(), 4); }
};

struct FrameData {
  std::uint32_t version = kFrameVersion;
  std::uint32_t dim = 3;
  std::uint64_t count = 0;
  std::vector<FrameField> fields;

  const FrameField* find(const std::string& id) const;
};

struct FrameOptions {
  bool velocities = true;
  bool volume_ratio = true;  // det F for solids, J for fluids
  bool material_ids = true;
};

template <int dim>
FrameData make_frame(const std::vector<Particle<dim>>& particles, const std::vector<MaterialModel>& materials,
                     const FrameOptions& opt);

void write_frame(const std::filesystem::path& path, const FrameData& frame);
/// Throws Error on truncated or malformed files.
FrameData read_frame(const std::filesystem::path& path);

std::filesystem::path frame_path(const std::filesystem::path& dir, int index);

}  // namespace mpmlite
