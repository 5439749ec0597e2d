#include "mpmlite/config.hpp"
#include "mpmlite/errors.hpp"
#include "mpmlite/frame_io.hpp"
#include "mpmlite/simulation.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

using namespace mpmlite;

namespace {

const char* kScene = R"(; small 2D scene
[grid]
dimension = 2
dx = 0.05
dims = 20 20
gravity = 0 -9.81
boundary = slip

[solver]
integrator = explicit
dt_step = 1e-3
dt_frame = 0.01
frames = 2
deterministic = true
seed = 9

[material.0]
model = stvk_hencky
youngs = 1e4
poisson = 0.3
density = 1000

[shape.0]
kind = box
lo = 0.3 0.3
hi = 0.5 0.5
ppc = 4
velocity = 0.5 0
)";

std::string error_of(const std::string& text) {
  try {
    parse_config_string(text, "scene.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mpmlite_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parses a complete scene") {
  const ParsedConfig pc = parse_config_string(kScene);
  REQUIRE(pc.dimension() == 2);
  const auto& cfg = std::get<SceneConfig<2>>(pc.scene);
  CHECK(cfg.grid.dx == 0.05);
  CHECK(cfg.grid.dims == IVec<2>(20, 20));
  CHECK(cfg.gravity.y() == -9.81);
  CHECK(cfg.frames == 2);
  CHECK(cfg.deterministic);
  CHECK(cfg.seed == 9);
  CHECK(cfg.boundary == BoundaryCondition::Slip);
  REQUIRE(cfg.materials.size() == 1);
  CHECK(cfg.materials[0].mu == doctest::Approx(1e4 / 2.6));
  REQUIRE(cfg.shapes.size() == 1);
  CHECK(cfg.shapes[0].ppc == 4);
  CHECK(cfg.steps_per_frame() == 10);
}

TEST_CASE("config errors carry file and line") {
  CHECK(error_of(replace(kScene, "dx = 0.05", "dx = abc")).find("scene.ini:4: [grid] dx") == 0);
  CHECK(error_of(replace(kScene, "frames = 2", "frames = 2.5")).find("scene.ini:13: [solver] frames") == 0);
  CHECK(error_of(replace(kScene, "integrator = explicit", "integrator = rk4")).find("scene.ini:10: [solver] integrator") == 0);
  CHECK(error_of(replace(kScene, "density = 1000", "densty = 1000")).find("scene.ini:21: [material.0] densty: unknown key") == 0);
  CHECK(error_of(replace(kScene, "[material.0]", "[materal.0]")).find("unknown section") != std::string::npos);
  CHECK_FALSE(error_of(replace(kScene, "dims = 20 20", "dims = 20 20 20")).empty());
  CHECK_FALSE(error_of(replace(kScene, "dt_step = 1e-3", "dt_step = 0.1")).empty());
  CHECK_FALSE(error_of("[grid]\ndx = 0.1\n").empty());
  CHECK_FALSE(error_of("[grid\n").empty());
}

TEST_CASE("flip blend must lie in the unit interval") {
  CHECK_FALSE(error_of(replace(kScene, "seed = 9", "seed = 9\nflip_blend = 1.5")).empty());
  const ParsedConfig pc = parse_config_string(replace(kScene, "seed = 9", "seed = 9\nflip_blend = 0.95"));
  CHECK(*std::get<SceneConfig<2>>(pc.scene).flip_blend == 0.95);
}

TEST_CASE("MLF1 round trip") {
  const auto dir = temp_dir("frames");
  const ParsedConfig pc = parse_config_string(kScene);
  const auto& cfg = std::get<SceneConfig<2>>(pc.scene);
  Simulation<2> sim(cfg);
  const FrameData fr = make_frame<2>(sim.particles(), cfg.materials, FrameOptions{});
  const auto path = frame_path(dir, 3);
  CHECK(path.filename() == "frame_00003.mlf");
  write_frame(path, fr);
  // header, then four blocks: id + components + float payload
  CHECK(std::filesystem::file_size(path) == 20 + 4 * 5 + fr.count * (2 + 2 + 1 + 1) * 4);
  const FrameData back = read_frame(path);
  CHECK(back.dim == 2);
  CHECK(back.count == sim.particles().size());
  REQUIRE(back.fields.size() == 4);
  for (std::size_t k = 0; k < fr.fields.size(); ++k) {
    CHECK(back.fields[k].id == fr.fields[k].id);
    CHECK(back.fields[k].components == fr.fields[k].components);
    CHECK(back.fields[k].data == fr.fields[k].data);
  }
  const FrameField* pos = back.find("POS_");
  REQUIRE(pos != nullptr);
  CHECK(pos->data[0] == static_cast<float>(sim.particles()[0].x[0]));
  CHECK(back.find("DETF")->data[5] == 1.0f);

  SUBCASE("truncated file") {
    const auto cut = dir / "cut.mlf";
    std::filesystem::copy_file(path, cut);
    std::filesystem::resize_file(cut, std::filesystem::file_size(path) - 7);
    CHECK_THROWS_AS(read_frame(cut), Error);
    std::filesystem::resize_file(cut, 10);
    CHECK_THROWS_AS(read_frame(cut), Error);
  }
  SUBCASE("bad magic") {
    const auto bad = dir / "bad.mlf";
    std::ofstream(bad, std::ios::binary) << "MLF2xxxxxxxxxxxxxxxxxxxx";
    CHECK_THROWS_AS(read_frame(bad), Error);
  }
}

TEST_CASE("simulation runs are bit-identical in deterministic mode") {
  const ParsedConfig pc = parse_config_string(kScene);
  const auto& cfg = std::get<SceneConfig<2>>(pc.scene);
  Simulation<2> a(cfg), b(cfg);
  for (int f = 0; f < 2; ++f) {
    a.advance_frame();
    b.advance_frame();
  }
  REQUIRE(a.particles().size() == b.particles().size());
  for (std::size_t p = 0; p < a.particles().size(); ++p) {
    CHECK(a.particles()[p].x == b.particles()[p].x);
    CHECK(a.particles()[p].v == b.particles()[p].v);
    CHECK(a.particles()[p].F == b.particles()[p].F);
  }
}

TEST_CASE("single particle in free fall") {
  SceneConfig<3> cfg;
  cfg.grid.dx = 0.1;
  cfg.grid.dims = IVec<3>::Constant(12);
  cfg.gravity = Vec<3>(0, -9.81, 0);
  cfg.materials = {MaterialModel::stvk_hencky(1e4, 0.3, 1000)};
  Particle<3> p;
  p.mass = 0.7;
  p.volume = 7e-4;
  p.x = Vec<3>(0.61, 0.93, 0.57);
  for (IntegratorKind kind : {IntegratorKind::Explicit, IntegratorKind::Implicit}) {
    cfg.integrator = kind;
    Simulation<3> sim(cfg, {p});
    const double dt = 1e-3;
    for (int s = 0; s < 20; ++s) {
      const double before = sim.particles()[0].v.y() * p.mass;
      const StepStats st = sim.step(dt);
      CHECK(st.momentum.y() - before == doctest::Approx(p.mass * -9.81 * dt).epsilon(1e-10));
      CHECK(std::abs(st.momentum.x()) <= 1e-15);
    }
  }
}

TEST_CASE("seeding") {
  SUBCASE("unit cube count and volume") {
    GridDesc<3> g;
    g.dx = 0.25;
    g.dims = IVec<3>::Constant(8);
    Shape<3> box;
    box.lo = Vec<3>::Constant(0.5);
    box.hi = Vec<3>::Constant(1.5);
    box.ppc = 8;
    std::mt19937_64 rng(1);
    const MaterialModel m = MaterialModel::stvk_hencky(1e4, 0.3, 1000);
    const auto ps = seed_particles<3>(box, m, g, rng);
    CHECK(ps.size() == 512);
    for (const auto& p : ps) {
      CHECK(p.volume == doctest::Approx(0.25 * 0.25 * 0.25 / 8).epsilon(1e-15));
      CHECK(p.mass == doctest::Approx(1000 * p.volume).epsilon(1e-15));
      CHECK(p.F == Mat<3>::Identity());
      CHECK(p.G == Mat<3>::Zero());
      CHECK(box.contains(p.x));
    }
  }
  SUBCASE("one particle per cell") {
    GridDesc<2> g;
    g.dx = 0.1;
    g.dims = IVec<2>::Constant(10);
    Shape<2> box;
    box.lo = Vec<2>::Constant(0.3);
    box.hi = Vec<2>::Constant(0.6);
    box.ppc = 1;
    std::mt19937_64 rng(2);
    const auto ps = seed_particles<2>(box, MaterialModel::water(1e4, 1000), g, rng);
    CHECK(ps.size() == 9);
    for (const auto& p : ps) {
      CHECK(p.volume == doctest::Approx(0.01).epsilon(1e-15));
      CHECK(p.J == 1.0);
    }
  }
  SUBCASE("sphere mass tracks the analytic volume") {
    GridDesc<3> g;
    g.dx = 0.02;
    g.dims = IVec<3>::Constant(30);
    Shape<3> ball;
    ball.kind = ShapeKind::Sphere;
    ball.center = Vec<3>::Constant(0.3);
    ball.radius = 0.15;
    ball.ppc = 8;
    std::mt19937_64 rng(3);
    const auto ps = seed_particles<3>(ball, MaterialModel::stvk_hencky(1e4, 0.3, 1000), g, rng);
    double mass = 0;
    for (const auto& p : ps) mass += p.mass;
    const double exact = 1000 * ball.analytic_volume();
    CHECK(std::abs(mass - exact) <= exact / ball.ppc);
  }
  SUBCASE("shape too close to the boundary") {
    GridDesc<2> g;
    g.dx = 0.1;
    g.dims = IVec<2>::Constant(10);
    Shape<2> box;
    box.lo = Vec<2>::Constant(0.1);
    box.hi = Vec<2>::Constant(0.5);
    std::mt19937_64 rng(4);
    CHECK_THROWS_AS(seed_particles<2>(box, MaterialModel::water(1e4, 1000), g, rng), ConfigError);
  }
  SUBCASE("same seed, same particles") {
    GridDesc<2> g;
    g.dx = 0.1;
    g.dims = IVec<2>::Constant(10);
    Shape<2> box;
    box.lo = Vec<2>::Constant(0.3);
    box.hi = Vec<2>::Constant(0.6);
    std::mt19937_64 r1(5), r2(5);
    const auto a = seed_particles<2>(box, MaterialModel::water(1e4, 1000), g, r1);
    const auto b = seed_particles<2>(box, MaterialModel::water(1e4, 1000), g, r2);
    for (std::size_t p = 0; p < a.size(); ++p) CHECK(a[p].x == b[p].x);
  }
}
