// mpmlite: run scenes, run validation studies, inspect frame files.

#include "mpmlite/config.hpp"
#include "mpmlite/errors.hpp"
#include "mpmlite/frame_io.hpp"
#include "mpmlite/simulation.hpp"
#include "mpmlite/validation.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>
#include <tbb/global_control.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace mpmlite;

namespace {

enum Exit { kOk = 0, kConfig = 1, kNumerical = 2, kStudyFail = 3 };

struct RunFlags {
  fs::path config;
  std::optional<int> frames;
  std::optional<std::string> integrator;
  bool deterministic = false;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<std::string> stats;
};

void write_stats_header(std::ofstream& out) {
  out << "step,time,momentum_norm,angular_momentum_norm,unload_ms,integrate_ms,load_ms,newton_iters,pcg_iters,"
         "fallback_count,newton_residual,fixed_point_residual,clamp_count,inverted_count\n";
}

void write_stats_row(std::ofstream& out, const StepStats& s) {
  out << s.step << ',' << s.time << ',' << s.momentum.norm() << ',' << s.angular_momentum.norm() << ','
      << s.unload_ms << ',' << s.integrate_ms << ',' << s.load_ms << ',' << s.newton_iters << ',' << s.pcg_iters
      << ',' << s.fallback_count << ',' << s.newton_residual << ',' << s.fixed_point_residual << ','
      << s.clamp_count << ',' << s.inverted_count << '\n';
}

template <int dim>
int run_scene(SceneConfig<dim> cfg, const OutputConfig& output) {
  Simulation<dim> sim(std::move(cfg));
  const SceneConfig<dim>& c = sim.config();
  fs::create_directories(output.dir);
  FrameOptions fo;
  fo.velocities = output.velocities;
  fo.volume_ratio = output.volume_ratio;
  fo.material_ids = output.material_ids;

  std::ofstream stats;
  if (output.stats == StatsMode::Csv) {
    stats.open(output.dir / "stats.csv");
    if (!stats) throw Error("cannot write " + (output.dir / "stats.csv").string());
    stats.precision(17);
    write_stats_header(stats);
  }

  spdlog::info("{}D scene: {} particles, {} frames, {} steps per frame", dim, sim.particles().size(), c.frames,
               c.steps_per_frame());
  write_frame(frame_path(output.dir, 0), make_frame<dim>(sim.particles(), c.materials, fo));
  for (int f = 1; f <= c.frames; ++f) {
    std::vector<StepStats> steps;
    try {
      steps = sim.advance_frame();
    } catch (const Error& e) {
      if (stats.is_open()) stats.flush();
      spdlog::error("aborting in frame {}: {} (frame {} is the last good frame)", f, e.what(), f - 1);
      return kNumerical;
    }
    if (stats.is_open())
      for (const StepStats& s : steps) write_stats_row(stats, s);
    write_frame(frame_path(output.dir, f), make_frame<dim>(sim.particles(), c.materials, fo));
    const StepStats& last = steps.back();
    spdlog::info("frame {}/{}: t={:.4f} steps={} |p|={:.3e} newton={} pcg={}", f, c.frames, last.time, steps.size(),
                 last.momentum.norm(), last.newton_iters, last.pcg_iters);
  }
  return kOk;
}

int cmd_run(const RunFlags& flags) {
  ParsedConfig parsed;
  try {
    parsed = parse_config_file(flags.config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  }
  if (flags.out) parsed.output.dir = *flags.out;
  if (flags.stats) parsed.output.stats = *flags.stats == "off" ? StatsMode::Off : StatsMode::Csv;

  return std::visit(
      [&](auto& cfg) -> int {
        if (flags.frames) cfg.frames = *flags.frames;
        if (flags.integrator) cfg.integrator = *flags.integrator == "implicit" ? IntegratorKind::Implicit
                                                                               : IntegratorKind::Explicit;
        if (flags.deterministic) cfg.deterministic = true;
        if (flags.seed) cfg.seed = *flags.seed;
        constexpr int dim = std::remove_reference_t<decltype(cfg)>::dimension();
        try {
          return run_scene<dim>(cfg, parsed.output);
        } catch (const ConfigError& e) {
          std::cerr << "config error: " << e.what() << '\n';
          return kConfig;
        } catch (const Error& e) {
          std::cerr << "error: " << e.what() << '\n';
          return kNumerical;
        }
      },
      parsed.scene);
}

// --- studies ----------------------------------------------------------------

void print_report(const ConvergenceReport& r) {
  std::printf("  %-18s", r.id.c_str());
  for (std::size_t k = 0; k < r.h.size(); ++k) std::printf(" %s=%.3g:%.4e", r.variable.c_str(), r.h[k], r.error[k]);
  std::printf("\n  %-18s fitted slope %.4f, pair ratios", "", r.slope);
  for (double q : r.pair_ratios) std::printf(" %.3f", q);
  std::printf("\n");
}

bool band(double x, double lo, double hi) { return x >= lo && x <= hi; }

int study_transfer_order(int levels, const fs::path& out) {
  TransferOrderOptions opt;
  opt.levels = levels;
  const TransferOrderResult r = transfer_order_study<3>(trig_field<3>(2.0), opt);
  bool ok = r.weight_violations == 0;
  for (const ConvergenceReport* c : {&r.p2g_v, &r.g2p_v, &r.g2p_G}) {
    write_study_table(out / (c->id + ".csv"), *c);
    print_report(*c);
    const bool pass = c->all_positive() && band(c->slope, 1.8, 2.2);
    std::printf("%s %s slope %.4f in [1.8, 2.2]\n", pass ? "PASS" : "FAIL", c->id.c_str(), c->slope);
    ok = ok && pass;
  }
  std::printf("%s weight bound: %zu violations in %zu checks\n", r.weight_violations == 0 ? "PASS" : "FAIL",
              r.weight_violations, r.weight_checks);
  return ok ? kOk : kStudyFail;
}

int study_rotation_gap(double angle, const fs::path& out) {
  RotationGapOptions opt;
  opt.angle_deg = angle;
  const RotationGapResult r = rotation_gap_study(opt);
  write_study_table(out / (r.keep.id + ".csv"), r.keep);
  write_study_table(out / (r.keep_right.id + ".csv"), r.keep_right);
  print_report(r.keep);
  print_report(r.keep_right);
  if (!r.converged) {
    std::printf("FAIL rotation_gap: Newton did not converge at some dt\n");
    return kStudyFail;
  }
  if (r.keep.all_zero()) {
    std::printf("PASS rotation_gap: all gaps are exactly zero (degenerate case)\n");
    return kOk;
  }
  const bool pass = r.keep.all_positive() && r.keep.slope >= 1.9 && r.keep.error.front() > r.keep.error.back();
  std::printf("%s rotation_gap slope %.4f >= 1.9, gap(dt_max) %.3e > gap(dt_min) %.3e\n", pass ? "PASS" : "FAIL",
              r.keep.slope, r.keep.error.front(), r.keep.error.back());
  return pass ? kOk : kStudyFail;
}

int study_momentum(long cube_steps, long rod_steps, const fs::path& out) {
  fs::create_directories(out);
  auto dump = [&](const std::string& name, const MomentumStudyResult& r) {
    std::ofstream f(out / name);
    f.precision(17);
    f << "step,time,px,py,pz,Lx,Ly,Lz\n";
    for (const StepStats& s : r.stats)
      f << s.step << ',' << s.time << ',' << s.momentum.x() << ',' << s.momentum.y() << ',' << s.momentum.z() << ','
        << s.angular_momentum.x() << ',' << s.angular_momentum.y() << ',' << s.angular_momentum.z() << '\n';
  };
  bool ok = true;
  if (cube_steps > 0) {
    const double v0 = 0.5;
    const MomentumStudyResult r = momentum_study(two_cube_scene(0.01, 8, v0, 5e-4), cube_steps, v0);
    dump("momentum_cubes.csv", r);
    const double tol = 1e-12 * r.linear_scale;
    const bool pass = r.max_linear <= tol;
    std::printf("%s two cubes: max |sum m v| = %.3e (limit %.3e) over %ld steps\n", pass ? "PASS" : "FAIL",
                r.max_linear, tol, r.steps);
    ok = ok && pass;
  }
  if (rod_steps > 0) {
    const MomentumStudyResult r = momentum_study(rotating_rod_scene(0.01, 8, 4.0, 1e-3), rod_steps, 0.0, true);
    dump("momentum_rod.csv", r);
    const bool pass = r.max_Lz_drift <= 1e-3 && r.max_transverse <= 1e-3 * std::abs(r.initial_Lz);
    std::printf("%s rotating rod: L_z drift %.3e (limit 1e-3), transverse %.3e (limit %.3e) over %ld steps\n",
                pass ? "PASS" : "FAIL", r.max_Lz_drift, r.max_transverse, 1e-3 * std::abs(r.initial_Lz), r.steps);
    ok = ok && pass;
  }
  return ok ? kOk : kStudyFail;
}

// --- inspect ----------------------------------------------------------------

int cmd_inspect(const fs::path& file) {
  FrameData fr;
  try {
    fr = read_frame(file);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  std::printf("%s: MLF1 v%u, dim %u, %llu particles\n", file.string().c_str(), fr.version, fr.dim,
              static_cast<unsigned long long>(fr.count));
  bool finite = true;
  for (const FrameField& f : fr.fields) {
    std::printf("  %s x%u:", f.name().c_str(), static_cast<unsigned>(f.components));
    for (unsigned a = 0; a < f.components; ++a) {
      float lo = std::numeric_limits<float>::infinity(), hi = -lo;
      for (std::size_t p = 0; p < fr.count; ++p) {
        const float v = f.data[p * f.components + a];
        finite = finite && std::isfinite(v);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      std::printf(" [%g, %g]", fr.count ? lo : 0.0f, fr.count ? hi : 0.0f);
    }
    std::printf("\n");
  }
  if (!finite) {
    std::printf("non-finite values present\n");
    return kNumerical;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mpmlite: hybrid particle/grid continuum simulator"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker thread bound (0 = all cores)")->check(CLI::NonNegativeNumber);

  RunFlags rf;
  CLI::App* run = app.add_subcommand("run", "Simulate a scene file");
  run->add_option("--config", rf.config, "Scene file")->required()->check(CLI::ExistingFile);
  run->add_option("--frames", rf.frames, "Override frame count")->check(CLI::NonNegativeNumber);
  run->add_option("--integrator", rf.integrator, "Override integrator")
      ->check(CLI::IsMember({"explicit", "implicit"}));
  run->add_flag("--deterministic", rf.deterministic, "Fixed-order reductions");
  run->add_option("--seed", rf.seed, "Override the seeding RNG seed");
  run->add_option("--out", rf.out, "Output directory");
  run->add_option("--stats", rf.stats, "Stats stream")->check(CLI::IsMember({"csv", "off"}));
  run->add_option("--threads", threads, "Worker thread bound (0 = all cores)")->check(CLI::NonNegativeNumber);

  std::string study_id;
  fs::path study_out = "study_out";
  int levels = 4;
  double angle = 30.0;
  long cube_steps = 500, rod_steps = 1000;
  CLI::App* study = app.add_subcommand("study", "Run a validation study");
  study->add_option("id", study_id, "transfer-order | rotation-gap | momentum")
      ->required()
      ->check(CLI::IsMember({"transfer-order", "rotation-gap", "momentum"}));
  study->add_option("--out", study_out, "Directory for study tables");
  study->add_option("--levels", levels, "Refinement levels (transfer-order)")->check(CLI::Range(2, 6));
  study->add_option("--angle", angle, "Prior rotation in degrees (rotation-gap)");
  study->add_option("--cube-steps", cube_steps, "Steps of the two-cube scene (momentum)");
  study->add_option("--rod-steps", rod_steps, "Steps of the rotating-rod scene (momentum)");
  study->add_option("--threads", threads, "Worker thread bound (0 = all cores)")->check(CLI::NonNegativeNumber);

  fs::path inspect_file;
  CLI::App* inspect = app.add_subcommand("inspect", "Summarize an MLF1 frame file");
  inspect->add_option("file", inspect_file, "Frame file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  std::unique_ptr<tbb::global_control> limit;
  if (threads > 0)
    limit = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism,
                                                  static_cast<std::size_t>(threads));

  try {
    if (*run) return cmd_run(rf);
    if (*inspect) return cmd_inspect(inspect_file);
    if (study_id == "transfer-order") return study_transfer_order(levels, study_out);
    if (study_id == "rotation-gap") return study_rotation_gap(angle, study_out);
    return study_momentum(cube_steps, rod_steps, study_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
}
