// enmloc: simulate worlds, train neural maps, run localization, evaluate and render.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "enmloc/error.hpp"
#include "enmloc/evalio/checkpoint.hpp"
#include "enmloc/evalio/dataset.hpp"
#include "enmloc/evalio/render.hpp"
#include "enmloc/evalio/trajectory.hpp"
#include "enmloc/mcl/mcl.hpp"
#include "enmloc/sim/simulator.hpp"
#include "enmloc/trainer.hpp"

namespace fs = std::filesystem;
using namespace enmloc;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kIo = 3, kData = 4, kNumeric = 5 };

void require_file(const std::string& path, const std::string& flag) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw IoError(flag + ": no such file '" + path + "'");
  }
  std::ifstream probe(path);
  if (!probe) {
    throw IoError(flag + ": cannot read '" + path + "'");
  }
}

void require_parent_dir(const std::string& path, const std::string& flag) {
  const fs::path parent = fs::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty() && !fs::is_directory(parent, ec)) {
    throw IoError(flag + ": directory '" + parent.string() + "' does not exist");
  }
}

struct SimulateOpts {
  std::string world = "tworoom";
  std::string out;
  std::size_t frames = 0;  // 0 keeps the whole route
  std::uint64_t seed = 0;
  std::size_t map_scans = 200;
  std::size_t beams = 1081;
  double range_noise = 0.01;
  double dt = 0.2;
  double speed = 0.5;
  double yaw_rate = 0.8;
  std::vector<double> odom_noise{0.02, 0.02, 0.01, 0.01};
};

struct TrainOpts {
  std::string data;
  std::string out;
  std::string loss_log;  // default: <out>.loss.csv
  std::size_t iters = 5000;
  std::size_t batch = 2048;
  double lr = 1e-3;
  double grid_res = 0.10;
  double beta = 0.1;
  std::uint64_t seed = 0;
};

struct LocalizeOpts {
  std::string data;
  std::string map;
  std::string out;
  std::size_t n_init = 80000;
  std::size_t n_track = 1000;
  double lambda = 10.0;
  std::size_t beams = 60;
  std::uint64_t seed = 0;
  bool known_start = false;
  double start_pos_sigma = 0.1;
  double start_yaw_sigma = 0.05;
};

struct EvalOpts {
  std::string est;
  std::string gt;
  bool from_convergence = false;
  double gate = 0.3;
  std::string out;
};

struct RenderOpts {
  std::string map;
  std::string out;
  std::string overlay;
  double ppm = 20.0;
};

int run_simulate(const SimulateOpts& o) {
  if (o.odom_noise.size() != 4) {
    throw InvalidArgument("--odom-noise takes exactly four coefficients");
  }
  const sim::World world = sim::make_world(o.world);
  sim::SensorSpec spec;
  spec.n_beams = o.beams;
  spec.range_noise_std = o.range_noise;
  spec.validate();
  fs::create_directories(o.out);

  Rng rng(o.seed);
  const std::vector<LidarScan> map_scans =
      sim::simulate_mapping_scans(world.plan, o.map_scans, spec, 0.3, rng);
  std::vector<sim::TimedPose> traj =
      sim::generate_trajectory(world.plan, world.route, o.speed, o.yaw_rate, o.dt);
  if (o.frames > 0 && o.frames < traj.size()) {
    traj.resize(o.frames);
  }
  const MotionNoise noise{o.odom_noise[0], o.odom_noise[1], o.odom_noise[2], o.odom_noise[3]};
  const std::vector<LidarScan> seq = sim::simulate_dataset(world.plan, traj, spec, noise, rng);

  const fs::path dir(o.out);
  {
    std::ofstream os(dir / "plan.txt");
    if (!os) {
      throw IoError("cannot write '" + (dir / "plan.txt").string() + "'");
    }
    sim::write_floorplan(os, world.plan);
  }
  evalio::write_dataset_file((dir / "map.jsonl").string(), map_scans);
  evalio::write_dataset_file((dir / "seq.jsonl").string(), seq);
  std::printf("wrote %zu mapping scans and %zu sequence scans to %s\n", map_scans.size(),
              seq.size(), o.out.c_str());
  return kOk;
}

int run_train(const TrainOpts& o) {
  require_file(o.data, "--data");
  require_parent_dir(o.out, "--out");
  const std::string loss_path = o.loss_log.empty() ? o.out + ".loss.csv" : o.loss_log;
  require_parent_dir(loss_path, "--loss-log");

  train::TrainConfig cfg;
  cfg.iterations = o.iters;
  cfg.batch_rays = o.batch;
  cfg.lr = o.lr;
  cfg.model.resolution = o.grid_res;
  cfg.beta = o.beta;
  cfg.seed = o.seed;
  cfg.validate();

  const std::vector<LidarScan> scans = evalio::read_dataset_file(o.data);
  const train::TrainResult result = train::train_map(scans, cfg, [](const train::Telemetry& t) {
    std::printf("iter %zu sdf %.6f psdf %.6f eikonal %.6f total %.6f\n", t.iteration, t.loss.sdf,
                t.loss.psdf, t.loss.eikonal, t.loss.total);
    std::fflush(stdout);
  });
  evalio::save_checkpoint_file(o.out, result.model);
  std::ofstream log(loss_path);
  if (!log) {
    throw IoError("cannot write '" + loss_path + "'");
  }
  train::write_loss_log(log, result.log);
  const FeatureGrid& g = result.model.grid();
  std::printf("map %zux%zu cells at %.3f m, checkpoint %s (%zu bytes)\n", g.nx(), g.ny(),
              g.resolution(), o.out.c_str(), evalio::checkpoint_size(result.model));
  return kOk;
}

int run_localize(const LocalizeOpts& o) {
  require_file(o.data, "--data");
  require_file(o.map, "--map");
  require_parent_dir(o.out, "--out");

  mcl::MclConfig cfg;
  cfg.n_init = o.n_init;
  cfg.n_track = o.n_track;
  cfg.lambda = o.lambda;
  cfg.beams = o.beams;
  cfg.seed = o.seed;
  cfg.validate();

  const std::vector<LidarScan> scans = evalio::read_dataset_file(o.data);
  if (scans.empty()) {
    throw SchemaError("--data: dataset has no scans");
  }
  const EnmModel model = evalio::load_checkpoint_file(o.map);
  mcl::MclState state;
  if (o.known_start) {
    if (!scans.front().gt) {
      throw SchemaError("--known-start needs a ground-truth pose on the first scan");
    }
    state = mcl::start_tracking(*scans.front().gt, o.start_pos_sigma, o.start_yaw_sigma, cfg);
  } else {
    state = mcl::start_global(model, cfg);
  }
  mcl::run_sequence(state, scans, model, cfg);
  evalio::write_trajectory_log_file(o.out, state.log);
  const evalio::Trajectory est = evalio::trajectory_from_log(state.log);
  if (est.convergence_time) {
    std::printf("%zu updates, converged at t=%.3f s\n", state.log.size(), *est.convergence_time);
  } else {
    std::printf("%zu updates, not converged\n", state.log.size());
  }
  return kOk;
}

int run_eval(const EvalOpts& o) {
  require_file(o.est, "--est");
  require_file(o.gt, "--gt");
  if (!o.out.empty()) {
    require_parent_dir(o.out, "--out");
  }
  const evalio::Trajectory est =
      evalio::trajectory_from_log(evalio::read_trajectory_log_file(o.est));
  const evalio::Trajectory gt = evalio::trajectory_from_scans(evalio::read_dataset_file(o.gt));
  const evalio::SuccessResult sc = evalio::success_and_convergence(est, gt, {o.gate});

  std::vector<std::pair<std::string, double>> metrics;
  metrics.emplace_back("success", sc.success ? 1.0 : 0.0);
  metrics.emplace_back("convergence_time", sc.convergence_time ? *sc.convergence_time : -1.0);
  double from = est.samples.empty() ? 0.0 : est.samples.front().time;
  if (o.from_convergence) {
    if (!sc.convergence_time) {
      throw EmptyOverlap("--from-convergence: the estimate never converged");
    }
    from = *sc.convergence_time;
  }
  const evalio::AteReport ate = evalio::ate_rmse(est, gt, from);
  metrics.emplace_back("from_time", from);
  metrics.emplace_back("loc_rmse_cm", ate.loc_rmse);
  metrics.emplace_back("yaw_rmse_deg", ate.yaw_rmse);
  metrics.emplace_back("n_matched", static_cast<double>(ate.n_matched));

  evalio::write_metrics(std::cout, metrics);
  if (!o.out.empty()) {
    std::ofstream os(o.out);
    if (!os) {
      throw IoError("cannot write '" + o.out + "'");
    }
    evalio::write_metrics(os, metrics);
  }
  return kOk;
}

int run_render(const RenderOpts& o) {
  require_file(o.map, "--map");
  require_parent_dir(o.out, "--out");
  const std::string overlay = o.overlay.empty() ? o.out + ".contour.pgm" : o.overlay;
  require_parent_dir(overlay, "--overlay");
  const EnmModel model = evalio::load_checkpoint_file(o.map);
  const evalio::SdfRender r = evalio::render_sdf_image(model, model.grid().bounds(), o.ppm);
  evalio::write_pgm_file(o.out, r.image);
  evalio::write_pgm_file(overlay, r.overlay);
  std::printf("rendered %zux%zu pixels to %s and %s\n", r.image.width, r.image.height,
              o.out.c_str(), overlay.c_str());
  return kOk;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kInvalidArgument:
      return kUsage;
    case ErrorKind::kIo:
      return kIo;
    case ErrorKind::kData:
      return kData;
    case ErrorKind::kNumeric:
    case ErrorKind::kState:
      return kNumeric;
  }
  return kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-map Monte Carlo localization toolkit"};
  app.set_config("--config", "", "INI/TOML file with option defaults (flags take precedence)");
  app.allow_config_extras(false);
  app.require_subcommand(1);

  SimulateOpts sim_o;
  CLI::App* sim = app.add_subcommand("simulate", "Simulate a built-in world");
  sim->add_option("--world", sim_o.world, "World name")
      ->check(CLI::IsMember(sim::world_names()))
      ->capture_default_str();
  sim->add_option("--out", sim_o.out, "Output directory")->required();
  sim->add_option("--frames", sim_o.frames, "Keep the first N sequence frames (0 = all)")
      ->capture_default_str();
  sim->add_option("--seed", sim_o.seed, "Random seed")->capture_default_str();
  sim->add_option("--map-scans", sim_o.map_scans, "Mapping scans at random poses")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim->add_option("--beams", sim_o.beams, "Beams per scan")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim->add_option("--range-noise", sim_o.range_noise, "Range noise std (m)")
      ->capture_default_str();
  sim->add_option("--dt", sim_o.dt, "Scan period (s)")->capture_default_str();
  sim->add_option("--speed", sim_o.speed, "Driving speed (m/s)")->capture_default_str();
  sim->add_option("--yaw-rate", sim_o.yaw_rate, "Turning rate (rad/s)")->capture_default_str();
  sim->add_option("--odom-noise", sim_o.odom_noise, "Odometry noise a1 a2 a3 a4")
      ->expected(4)
      ->capture_default_str();

  TrainOpts tr_o;
  CLI::App* tr = app.add_subcommand("train", "Fit a neural map to posed scans");
  tr->add_option("--data", tr_o.data, "Dataset (JSON Lines) with ground-truth poses")->required();
  tr->add_option("--out", tr_o.out, "Checkpoint path")->required();
  tr->add_option("--loss-log", tr_o.loss_log, "Loss CSV (default <out>.loss.csv)");
  tr->add_option("--iters", tr_o.iters, "Iterations")->capture_default_str();
  tr->add_option("--batch", tr_o.batch, "Rays per iteration")->capture_default_str();
  tr->add_option("--lr", tr_o.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--grid-res", tr_o.grid_res, "Feature grid resolution (m)")
      ->capture_default_str();
  tr->add_option("--beta", tr_o.beta, "Eikonal weight")->capture_default_str();
  tr->add_option("--seed", tr_o.seed, "Random seed")->capture_default_str();

  LocalizeOpts lo_o;
  CLI::App* lo = app.add_subcommand("localize", "Run Monte Carlo localization on a dataset");
  lo->add_option("--data", lo_o.data, "Dataset (JSON Lines)")->required();
  lo->add_option("--map", lo_o.map, "Checkpoint")->required();
  lo->add_option("--out", lo_o.out, "Trajectory log")->required();
  lo->add_option("--n-init", lo_o.n_init, "Particles before convergence")->capture_default_str();
  lo->add_option("--n-track", lo_o.n_track, "Particles after convergence")->capture_default_str();
  lo->add_option("--lambda", lo_o.lambda, "Observation sharpness (1/m)")->capture_default_str();
  lo->add_option("--beams", lo_o.beams, "Beams per update")->capture_default_str();
  lo->add_option("--seed", lo_o.seed, "Random seed")->capture_default_str();
  lo->add_flag("--known-start", lo_o.known_start,
               "Start from the first scan's ground truth with n-track particles");
  lo->add_option("--start-pos-sigma", lo_o.start_pos_sigma, "Known-start position spread (m)")
      ->capture_default_str();
  lo->add_option("--start-yaw-sigma", lo_o.start_yaw_sigma, "Known-start yaw spread (rad)")
      ->capture_default_str();

  EvalOpts ev_o;
  CLI::App* ev = app.add_subcommand("eval", "Compare a trajectory log with ground truth");
  ev->add_option("--est", ev_o.est, "Trajectory log")->required();
  ev->add_option("--gt", ev_o.gt, "Dataset with ground-truth poses")->required();
  ev->add_flag("--from-convergence", ev_o.from_convergence,
               "Score only estimates from the convergence time on");
  ev->add_option("--gate", ev_o.gate, "Success error gate (m)")->capture_default_str();
  ev->add_option("--out", ev_o.out, "Also write the metrics here");

  RenderOpts re_o;
  CLI::App* re = app.add_subcommand("render", "Render the SDF of a map as a P5 image");
  re->add_option("--map", re_o.map, "Checkpoint")->required();
  re->add_option("--out", re_o.out, "Image path")->required();
  re->add_option("--overlay", re_o.overlay, "Contour overlay path (default <out>.contour.pgm)");
  re->add_option("--ppm", re_o.ppm, "Pixels per meter")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  std::cout << "# resolved configuration\n" << app.config_to_str(true, false) << std::flush;

  try {
    if (*sim) {
      return run_simulate(sim_o);
    }
    if (*tr) {
      return run_train(tr_o);
    }
    if (*lo) {
      return run_localize(lo_o);
    }
    if (*ev) {
      return run_eval(ev_o);
    }
    return run_render(re_o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
