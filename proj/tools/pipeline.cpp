#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "demo_pose.hpp"
#include "itx/agent/presets.hpp"
#include "itx/corr/correspond.hpp"
#include "itx/eval/metrics.hpp"
#include "itx/field/checkpoint.hpp"
#include "itx/field/network.hpp"
#include "itx/geom/sampling.hpp"
#include "itx/interaction/graph.hpp"
#include "itx/util/error.hpp"

#ifndef ITX_VERSION
#define ITX_VERSION "0.0.0"
#endif

namespace itx::tools {

namespace fs = std::filesystem;
using geom::Vec3;

namespace {

std::string idx3(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", i);
  return buf;
}

void require_file(const std::string& path, const std::string& what) {
  require(!path.empty(), "missing " + what + " path");
  require(fs::exists(path), "missing file: " + what + " '" + path + "' does not exist");
}

geom::AnalyticShape resolve_shape(const std::string& path, const std::string& category,
                                  std::uint64_t seed, const std::string& which) {
  if (!path.empty()) {
    require_file(path, which + " shape record");
    return geom::load_shape(path);
  }
  return geom::generate_shape(category, seed);
}

agent::AgentDef resolve_agent(const std::string& file, const std::string& preset) {
  if (!file.empty()) {
    require_file(file, "agent definition");
    return agent::load_agent(file);
  }
  return agent::make_agent(preset);
}

geom::PointCloud agent_cloud(const agent::AgentPoints& pts) {
  geom::PointCloud c;
  c.points = pts.positions;
  c.normals = pts.normals;
  return c;
}

void write_window_traces(const std::vector<transfer::WindowTrace>& traces,
                         const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << std::setprecision(17);
  for (const transfer::WindowTrace& w : traces) {
    out << "window " << w.start << " " << w.length << " initial " << w.initial_loss
        << " final " << w.final_loss << "\n";
    for (const transfer::IterationRecord& r : w.trace)
      out << "iter " << r.iteration << " lr " << r.learning_rate << " accepted "
          << (r.accepted ? 1 : 0) << " spatial " << r.loss.spatial << " surface "
          << r.loss.surface << " penetration " << r.loss.penetration << " smooth "
          << r.loss.smooth << " total " << r.loss.total << "\n";
  }
  require(out.good(), "write failed for '" + path + "'");
}

void dump_correspondence(const corr::Correspondence& c, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << std::setprecision(17);
  out << "spatial " << c.spatial.size() << "\n";
  for (std::size_t i = 0; i < c.spatial.size(); ++i)
    out << i << " " << c.spatial[i].x() << " " << c.spatial[i].y() << " " << c.spatial[i].z()
        << " residual " << c.spatial_residual[i] << "\n";
  out << "surface " << c.surface.size() << "\n";
  for (std::size_t i = 0; i < c.surface.size(); ++i)
    out << i << " " << c.surface[i] << " residual " << c.surface_residual[i] << "\n";
  require(out.good(), "write failed for '" + path + "'");
}

}  // namespace

std::string resolve_out_dir(const std::string& explicit_out, const std::string& subcommand) {
  std::string dir = explicit_out;
  if (dir.empty()) {
    const char* root = std::getenv("ITX_OUT_ROOT");
    dir = (root != nullptr && root[0] != '\0' ? std::string(root) : std::string("itx-out")) +
          "/" + subcommand;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, "cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const std::string& effective_config) {
  const std::string path = out_dir + "/manifest.txt";
  std::ofstream out(path);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << "tool itx\n";
  out << "version " << ITX_VERSION << "\n";
  out << "eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "."
      << EIGEN_MINOR_VERSION << "\n";
  out << "subcommand " << subcommand << "\n";
  out << "\n" << effective_config;
  require(out.good(), "write failed for '" + path + "'");
}

void run_gen_data(const GenDataOpts& opts) {
  require(opts.count > 0, "gen-data: --count must be positive");
  const std::string out = resolve_out_dir(opts.out, "gen-data");
  for (int i = 0; i < opts.count; ++i) {
    const std::uint64_t seed = opts.seed + static_cast<std::uint64_t>(i);
    const geom::AnalyticShape shape = geom::generate_shape(opts.category, seed);
    geom::save_shape(shape, out + "/shape_" + idx3(i) + ".txt");
    const geom::PointCloud cloud = geom::sample_surface(shape, opts.surface_samples, seed);
    geom::save_ply(cloud, out + "/surface_" + idx3(i) + ".ply");
    const geom::FreeSamples free = geom::sample_free_space(shape, opts.free_samples, seed);
    const std::string fpath = out + "/free_" + idx3(i) + ".txt";
    std::ofstream fout(fpath);
    require(fout.good(), "cannot open '" + fpath + "' for writing");
    fout << std::setprecision(17) << "free " << free.points.size() << "\n";
    for (std::size_t k = 0; k < free.points.size(); ++k)
      fout << free.points[k].x() << " " << free.points[k].y() << " " << free.points[k].z()
           << " " << free.sdf[k] << "\n";
    require(fout.good(), "write failed for '" + fpath + "'");
  }
  write_manifest(out, "gen-data", opts.effective_config);
  std::cout << "wrote " << opts.count << " " << opts.category << " shapes to " << out << "\n";
}

void run_train(const TrainOpts& opts) {
  std::vector<geom::AnalyticShape> shapes;
  if (!opts.shape_dir.empty()) {
    require(fs::is_directory(opts.shape_dir),
            "missing file: shape directory '" + opts.shape_dir + "' does not exist");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(opts.shape_dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("shape_", 0) == 0 && e.path().extension() == ".txt")
        files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const std::string& f : files) shapes.push_back(geom::load_shape(f));
    require(!shapes.empty(),
            "no shape_*.txt records found in '" + opts.shape_dir + "'");
  } else {
    require(opts.shapes > 0, "train: --shapes must be positive");
    for (int i = 0; i < opts.shapes; ++i)
      shapes.push_back(
          geom::generate_shape(opts.category, opts.cfg.seed + static_cast<std::uint64_t>(i)));
  }

  const std::string out = resolve_out_dir(opts.out, "train");
  field::TrainLog log;
  const field::RdifParams params = field::train_field(shapes, opts.cfg, &log);
  field::save_checkpoint(params, out + "/model.ckpt");

  const std::string lpath = out + "/train_log.txt";
  std::ofstream lout(lpath);
  require(lout.good(), "cannot open '" + lpath + "' for writing");
  lout << std::setprecision(17);
  lout << "epoch total value grad_normal eikonal off_surface normal smooth correction code lr\n";
  for (std::size_t e = 0; e < log.epochs.size(); ++e) {
    const field::EpochStats& s = log.epochs[e];
    lout << e << " " << s.total << " " << s.value << " " << s.grad_normal << " " << s.eikonal
         << " " << s.off_surface << " " << s.normal << " " << s.smooth << " " << s.correction
         << " " << s.code << " " << field::learning_rate_at(opts.cfg, static_cast<int>(e))
         << "\n";
  }
  require(lout.good(), "write failed for '" + lpath + "'");
  write_manifest(out, "train", opts.effective_config);

  std::cout << "trained on " << shapes.size() << " shapes for " << log.completed_epochs
            << " epochs; final loss " << log.final_loss() << "; checkpoint " << out
            << "/model.ckpt\n";
  require(!log.diverged, "training diverged (non-finite loss); kept the last completed epoch");
}

void run_transfer(const TransferOpts& opts) {
  require_file(opts.checkpoint, "checkpoint");
  const field::FieldEvaluator evaluator(field::load_checkpoint(opts.checkpoint));

  const geom::AnalyticShape source_shape =
      resolve_shape(opts.source_shape, opts.category, opts.source_seed, "source");
  const geom::AnalyticShape target_shape =
      resolve_shape(opts.target_shape, opts.category, opts.target_seed, "target");
  const geom::PointCloud source_cloud =
      geom::sample_surface(source_shape, opts.surface_samples, opts.sample_seed);
  const geom::PointCloud target_cloud =
      geom::sample_surface(target_shape, opts.surface_samples, opts.sample_seed + 1);

  std::string preset = opts.agent_preset;
  if (preset.empty())
    preset = is_demo_interaction(opts.source) ? demo_agent_preset(opts.source) : "gripper";
  const agent::AgentDef def = resolve_agent(opts.agent_file, preset);

  std::vector<agent::AgentState> source_states;
  if (is_demo_interaction(opts.source)) {
    source_states.push_back(author_demo_pose(opts.source, def, source_cloud));
  } else {
    require_file(opts.source, "source poses");
    source_states = agent::load_poses(opts.source);
    require(!source_states.empty(), "source pose file holds no frames");
    for (const agent::AgentState& s : source_states)
      require(s.theta.size() == def.joint_count(),
              "source poses do not match the agent definition (joint counts differ)");
  }

  const field::ShapeCode code_s = evaluator.encode(source_cloud);
  const field::ShapeCode code_t = evaluator.encode(target_cloud);
  const corr::SpatialCandidates candidates =
      corr::spatial_candidates(target_cloud.bounds(), opts.grid_res, code_t, evaluator);
  std::vector<double> surface_residuals;
  const std::vector<int> surface_map = corr::correspond_surface(
      source_cloud, code_s, target_cloud, code_t, evaluator, &surface_residuals);

  transfer::TransferConfig cfg = opts.cfg;
  cfg.gamma = opts.gamma_deg * M_PI / 180.0;

  const std::string out = resolve_out_dir(opts.out, "transfer");
  std::vector<transfer::TransferProblem> problems;
  problems.reserve(source_states.size());
  for (std::size_t k = 0; k < source_states.size(); ++k) {
    const agent::AgentPoints pts = agent::forward_kinematics(def, source_states[k]);
    transfer::TransferProblem p;
    p.def = &def;
    p.source_state = source_states[k];
    p.source_object = source_cloud;
    p.graph = interaction::build_interaction_graph(source_cloud, pts);
    p.corr.surface = surface_map;
    p.corr.surface_residual = surface_residuals;
    p.corr.spatial = corr::correspond_spatial(pts.positions, code_s, candidates, evaluator,
                                              &p.corr.spatial_residual);
    p.target_object = target_cloud;
    if (opts.dump_debug)
      dump_correspondence(p.corr, out + "/corr_" + idx3(static_cast<int>(k)) + ".txt");
    problems.push_back(std::move(p));
  }

  std::vector<agent::AgentState> result;
  std::vector<transfer::WindowTrace> traces;
  if (problems.size() == 1) {
    const transfer::TransferResult r = transfer::transfer_single(problems[0], cfg);
    result.push_back(r.state);
    transfer::WindowTrace wt;
    wt.start = 0;
    wt.length = 1;
    wt.trace = r.trace;
    wt.initial_loss = r.initial_loss;
    wt.final_loss = r.final_loss;
    traces.push_back(std::move(wt));
  } else {
    result = transfer::transfer_sequence(problems, cfg, &traces);
  }

  agent::save_poses(source_states, out + "/source_poses.txt");
  agent::save_poses(result, out + "/poses_out.txt");
  write_window_traces(traces, out + "/trace.txt");
  for (std::size_t k = 0; k < result.size(); ++k)
    geom::save_ply(agent_cloud(agent::forward_kinematics(def, result[k])),
                   out + "/agent_" + idx3(static_cast<int>(k)) + ".ply");
  write_manifest(out, "transfer", opts.effective_config);

  double final_total = 0.0;
  for (const transfer::WindowTrace& w : traces) final_total += w.final_loss;
  std::cout << "transferred " << result.size() << " frame(s); " << traces.size()
            << " window(s); summed final loss " << final_total << "; outputs in " << out
            << "\n";
}

void run_eval(const EvalOpts& opts) {
  const agent::AgentDef source_def = resolve_agent(opts.agent_file, opts.agent_preset);
  const agent::AgentDef target_def = opts.target_agent_file.empty()
                                         ? source_def
                                         : resolve_agent(opts.target_agent_file, "");

  require_file(opts.source_poses, "source poses");
  require_file(opts.target_poses, "target poses");
  const std::vector<agent::AgentState> source_states = agent::load_poses(opts.source_poses);
  const std::vector<agent::AgentState> target_states = agent::load_poses(opts.target_poses);
  require(source_states.size() == target_states.size(),
          "frame counts differ between the source and target pose files (" +
              std::to_string(source_states.size()) + " vs " +
              std::to_string(target_states.size()) + ")");
  require(!source_states.empty(), "pose files hold no frames");

  const geom::AnalyticShape source_shape =
      resolve_shape(opts.source_shape, opts.category, opts.source_seed, "source");
  const geom::AnalyticShape target_shape =
      resolve_shape(opts.target_shape, opts.category, opts.target_seed, "target");
  const eval::EvalBody source_body =
      eval::eval_body(source_shape, opts.surface_samples, opts.sample_seed);
  const eval::EvalBody target_body =
      eval::eval_body(target_shape, opts.surface_samples, opts.sample_seed + 1);

  std::vector<eval::EvalReport> reports;
  for (std::size_t k = 0; k < source_states.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const agent::AgentPoints source_pts = agent::forward_kinematics(source_def, source_states[k]);
    const agent::AgentPoints target_pts = agent::forward_kinematics(target_def, target_states[k]);
    const eval::PenetrationMetrics pen =
        eval::penetration_metrics(target_def, target_states[k], target_body, opts.voxel_res);
    eval::EvalReport r;
    r.name = "frame_" + idx3(static_cast<int>(k));
    r.depth = pen.depth;
    r.volume = pen.volume;
    r.iou = eval::contact_iou(source_pts, source_body, target_pts, target_body, opts.threshold);
    r.threshold = opts.threshold;
    r.voxel_res = opts.voxel_res;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    reports.push_back(std::move(r));
  }

  const std::string out = resolve_out_dir(opts.out, "eval");
  const std::string rpath = out + "/report.txt";
  eval::write_report(reports, rpath);
  write_manifest(out, "eval", opts.effective_config);

  std::ifstream echo(rpath);
  std::cout << echo.rdbuf();
  std::cout << "report written to " << rpath << "\n";
}

void run_export(const ExportOpts& opts) {
  if (opts.out_ply.empty() && opts.out_obj.empty())
    throw UsageError("export needs --out-ply and/or --out-obj");

  geom::PointCloud cloud;
  if (!opts.shape_file.empty()) {
    require_file(opts.shape_file, "shape record");
    require(opts.samples > 0, "export: --samples must be positive");
    cloud = geom::sample_surface(geom::load_shape(opts.shape_file), opts.samples, opts.seed);
  } else if (!opts.poses_file.empty()) {
    if (opts.agent_file.empty() && opts.agent_preset.empty())
      throw UsageError("export from poses needs --agent or --agent-preset");
    const agent::AgentDef def = resolve_agent(opts.agent_file, opts.agent_preset);
    require_file(opts.poses_file, "poses");
    const std::vector<agent::AgentState> states = agent::load_poses(opts.poses_file);
    require(opts.frame >= 0 && opts.frame < static_cast<int>(states.size()),
            "export: --frame " + std::to_string(opts.frame) + " out of range (file holds " +
                std::to_string(states.size()) + " frames)");
    cloud = agent_cloud(
        agent::forward_kinematics(def, states[static_cast<std::size_t>(opts.frame)]));
  } else {
    throw UsageError("export needs --shape or --poses as its input");
  }

  std::string manifest_dir;
  if (!opts.out_ply.empty()) {
    geom::save_ply(cloud, opts.out_ply);
    manifest_dir = fs::path(opts.out_ply).parent_path().string();
    std::cout << "wrote " << opts.out_ply << "\n";
  }
  if (!opts.out_obj.empty()) {
    geom::save_obj(cloud, opts.out_obj);
    if (manifest_dir.empty()) manifest_dir = fs::path(opts.out_obj).parent_path().string();
    std::cout << "wrote " << opts.out_obj << "\n";
  }
  if (manifest_dir.empty()) manifest_dir = ".";
  write_manifest(manifest_dir, "export", opts.effective_config);
}

}  // namespace itx::tools
