#include "mpmlite/frame_io.hpp"

#include "mpmlite/errors.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace mpmlite {

static_assert(std::endian::native == std::endian::little, "MLF1 writer assumes a little-endian host");

const FrameField* FrameData::find(const std::string& id) const {
  for (const FrameField& f : fields)
    if (f.name() == id) return &f;
  return nullptr;
}

namespace {

FrameField field(const char* id, std::uint8_t comps, std::size_t count) {
  FrameField f;
  std::memcpy(f.id.data(), id, 4);
  f.components = comps;
  f.data.resize(count * comps);
  return f;
}

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("truncated frame file " + path.string());
  return v;
}

}  // namespace

template <int dim>
FrameData make_frame(const std::vector<Particle<dim>>& particles, const std::vector<MaterialModel>& materials,
                     const FrameOptions& opt) {
  FrameData fr;
  fr.dim = dim;
  fr.count = particles.size();
  const std::size_t n = particles.size();
  FrameField pos = field("POS_", dim, n);
  FrameField vel = field("VEL_", dim, n);
  FrameField jac = field("DETF", 1, n);
  FrameField mat = field("MATL", 1, n);
  for (std::size_t p = 0; p < n; ++p) {
    const Particle<dim>& pt = particles[p];
    for (int a = 0; a < dim; ++a) {
      pos.data[p * dim + a] = static_cast<float>(pt.x[a]);
      vel.data[p * dim + a] = static_cast<float>(pt.v[a]);
    }
    const bool fluid = materials[static_cast<std::size_t>(pt.material)].is_fluid();
    jac.data[p] = static_cast<float>(fluid ? pt.J : pt.F.determinant());
    mat.data[p] = static_cast<float>(pt.material);
  }
  fr.fields.push_back(std::move(pos));
  if (opt.velocities) fr.fields.push_back(std::move(vel));
  if (opt.volume_ratio) fr.fields.push_back(std::move(jac));
  if (opt.material_ids) fr.fields.push_back(std::move(mat));
  return fr;
}

void write_frame(const std::filesystem::path& path, const FrameData& frame) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write frame file " + path.string());
  out.write("MLF1", 4);
  put(out, frame.version);
  put(out, frame.dim);
  put(out, frame.count);
  for (const FrameField& f : frame.fields) {
    if (f.data.size() != frame.count * f.components) throw ContractViolation("frame field size mismatch");
    out.write(f.id.data(), 4);
    put(out, f.components);
    out.write(reinterpret_cast<const char*>(f.data.data()), static_cast<std::streamsize>(f.data.size() * sizeof(float)));
  }
  if (!out) throw Error("failed writing frame file " + path.string());
}

FrameData read_frame(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open frame file " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MLF1", 4) != 0) throw Error("not an MLF1 file: " + path.string());
  FrameData fr;
  fr.version = get<std::uint32_t>(in, path);
  fr.dim = get<std::uint32_t>(in, path);
  fr.count = get<std::uint64_t>(in, path);
  if (fr.version != kFrameVersion) throw Error("unsupported MLF1 version " + std::to_string(fr.version));
  if (fr.dim != 2 && fr.dim != 3) throw Error("bad dimension in " + path.string());
  while (true) {
    FrameField f;
    if (!in.read(f.id.data(), 4)) {
      if (in.gcount() == 0) break;
      throw Error("truncated field id in " + path.string());
    }
    f.components = get<std::uint8_t>(in, path);
    f.data.resize(fr.count * f.components);
    const auto bytes = static_cast<std::streamsize>(f.data.size() * sizeof(float));
    if (!in.read(reinterpret_cast<char*>(f.data.data()), bytes)) throw Error("truncated field data in " + path.string());
    fr.fields.push_back(std::move(f));
  }
  return fr;
}

std::filesystem::path frame_path(const std::filesystem::path& dir, int index) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%05d.mlf", index);
  return dir / name;
}

template FrameData make_frame<2>(const std::vector<Particle<2>>&, const std::vector<MaterialModel>&,
                                 const FrameOptions&);
template FrameData make_frame<3>(const std::vector<Particle<3>>&, const std::vector<MaterialModel>&,
                                 const FrameOptions&);

}  // namespace mpmlite
