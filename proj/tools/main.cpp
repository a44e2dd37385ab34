#include <exception>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "itx/field/checkpoint.hpp"
#include "itx/util/error.hpp"
#include "pipeline.hpp"

#ifndef ITX_VERSION
#define ITX_VERSION "0.0.0"
#endif

namespace {

using itx::tools::EvalOpts;
using itx::tools::ExportOpts;
using itx::tools::GenDataOpts;
using itx::tools::TrainOpts;
using itx::tools::TransferOpts;

void add_common(CLI::App* sub) {
  sub->option_defaults()->always_capture_default(true);
  sub->set_config("--config", "",
                  "flat key=value configuration file; command-line flags win");
  sub->allow_config_extras(false);
}

// CLI11 only processes a config option that lives on the root command, so
// subcommand config files are applied here: an empty-stream reparse makes the
// subcommand run its own config pass (command-line values keep precedence,
// unknown keys are rejected).
void apply_subcommand_config(CLI::App* sub) {
  const CLI::Option* copt = sub->get_config_ptr();
  if (copt == nullptr || copt->count() == 0) {
    return;
  }
  std::istringstream empty;
  sub->parse_from_stream(empty);
}

void add_gen_data(CLI::App& app, GenDataOpts& o) {
  CLI::App* sub = app.add_subcommand("gen-data", "emit procedural shapes plus sample sets");
  add_common(sub);
  sub->add_option("--category", o.category, "shape family: mug or chair")
      ->check(CLI::IsMember({"mug", "chair"}));
  sub->add_option("--count", o.count, "number of shapes");
  sub->add_option("--seed", o.seed, "base seed; shape i uses seed+i");
  sub->add_option("--surface-samples", o.surface_samples, "surface samples per shape");
  sub->add_option("--free-samples", o.free_samples, "free-space samples per shape");
  sub->add_option("--out", o.out, "output directory");
}

void add_train(CLI::App& app, TrainOpts& o) {
  CLI::App* sub = app.add_subcommand("train", "train a field over a shape family");
  add_common(sub);
  sub->add_option("--category", o.category, "shape family: mug or chair")
      ->check(CLI::IsMember({"mug", "chair"}));
  sub->add_option("--shapes", o.shapes, "number of generated training shapes");
  sub->add_option("--shape-dir", o.shape_dir,
                  "load shape_*.txt records from this directory instead of generating");
  sub->add_option("--epochs", o.cfg.epochs, "training epochs");
  sub->add_option("--seed", o.cfg.seed, "master seed (shape i uses seed+i)");
  sub->add_option("--surface-samples", o.cfg.surface_samples, "surface budget per shape");
  sub->add_option("--free-samples", o.cfg.free_samples, "free-space budget per shape");
  sub->add_option("--batch-surface", o.cfg.batch_surface, "surface points per step");
  sub->add_option("--batch-free", o.cfg.batch_free, "free points per step");
  sub->add_option("--lr", o.cfg.learning_rate, "initial learning rate");
  sub->add_option("--lr-halving", o.cfg.lr_halving_epochs, "epochs between halvings");
  sub->add_option("--scale-min", o.cfg.scale_min, "augmentation rescale lower bound");
  sub->add_option("--scale-max", o.cfg.scale_max, "augmentation rescale upper bound");
  sub->add_flag("--rotation-augment,!--no-rotation-augment", o.cfg.augment_rotation,
                "toggle random rotation augmentation");
  sub->add_option("--code-rows", o.cfg.arch.code_rows, "vector channels in the shape code");
  sub->add_option("--knn", o.cfg.arch.knn, "encoder neighborhood size");
  sub->add_option("--hyper-hidden", o.cfg.arch.hyper_hidden, "hypernetwork hidden width");
  sub->add_option("--mlp-width", o.cfg.arch.mlp_width, "decoder hidden width");
  sub->add_option("--mlp-layers", o.cfg.arch.mlp_layers, "decoder weight layers");
  sub->add_option("--out", o.out, "output directory");
}

void add_transfer(CLI::App& app, TransferOpts& o) {
  CLI::App* sub =
      app.add_subcommand("transfer", "transfer a source interaction onto a target shape");
  add_common(sub);
  sub->add_option("--checkpoint", o.checkpoint, "trained field checkpoint")->required();
  sub->add_option("--source", o.source,
                  "demo_grasp, demo_sit, or a pose file recorded against the source shape");
  sub->add_option("--agent", o.agent_file, "agent definition file");
  sub->add_option("--agent-preset", o.agent_preset, "agent preset (gripper or sitter)");
  sub->add_option("--source-shape", o.source_shape, "source shape record");
  sub->add_option("--target-shape", o.target_shape, "target shape record");
  sub->add_option("--category", o.category, "family for generated shapes")
      ->check(CLI::IsMember({"mug", "chair"}));
  sub->add_option("--source-seed", o.source_seed, "seed for the generated source shape");
  sub->add_option("--target-seed", o.target_seed, "seed for the generated target shape");
  sub->add_option("--sample-seed", o.sample_seed, "seed for surface sampling");
  sub->add_option("--surface-samples", o.surface_samples, "surface samples per shape");
  sub->add_option("--grid-res", o.grid_res, "spatial candidate lattice resolution");
  sub->add_option("--lambda-spatial", o.cfg.lambda_spatial, "spatial term weight");
  sub->add_option("--lambda-surface", o.cfg.lambda_surface, "surface term weight");
  sub->add_option("--lambda-penetration", o.cfg.lambda_penetration, "penetration term weight");
  sub->add_option("--lambda-smooth", o.cfg.lambda_smooth, "adjacent-frame smoothness weight");
  sub->add_option("--gamma-deg", o.gamma_deg, "joint box half-width in degrees");
  sub->add_option("--lr", o.cfg.learning_rate, "initial learning rate");
  sub->add_option("--lr-halving", o.cfg.lr_halving_iters, "iterations between halvings");
  sub->add_option("--clip", o.cfg.clip_norm, "per-frame gradient norm clip");
  sub->add_option("--iters", o.cfg.max_iters, "maximum iterations");
  sub->add_option("--tol", o.cfg.tolerance, "per-frame loss-change stop threshold");
  sub->add_option("--window", o.cfg.window, "sequence window length");
  sub->add_option("--stride", o.cfg.stride, "sequence window stride");
  sub->add_flag("--dump-debug", o.dump_debug, "write per-frame correspondence dumps");
  sub->add_option("--out", o.out, "output directory");
}

void add_eval(CLI::App& app, EvalOpts& o) {
  CLI::App* sub = app.add_subcommand("eval", "score interactions: depth, volume, contact IoU");
  add_common(sub);
  sub->add_option("--agent", o.agent_file, "agent definition file");
  sub->add_option("--agent-preset", o.agent_preset, "agent preset (gripper or sitter)");
  sub->add_option("--target-agent", o.target_agent_file,
                  "agent definition for the target poses (defaults to --agent)");
  sub->add_option("--source-poses", o.source_poses, "source pose file")->required();
  sub->add_option("--target-poses", o.target_poses, "target pose file")->required();
  sub->add_option("--source-shape", o.source_shape, "source shape record");
  sub->add_option("--target-shape", o.target_shape, "target shape record");
  sub->add_option("--category", o.category, "family for generated shapes")
      ->check(CLI::IsMember({"mug", "chair"}));
  sub->add_option("--source-seed", o.source_seed, "seed for the generated source shape");
  sub->add_option("--target-seed", o.target_seed, "seed for the generated target shape");
  sub->add_option("--sample-seed", o.sample_seed, "seed for surface sampling");
  sub->add_option("--surface-samples", o.surface_samples, "surface samples per shape");
  sub->add_option("--voxel-res", o.voxel_res, "volume lattice resolution");
  sub->add_option("--threshold", o.threshold, "contact distance threshold");
  sub->add_option("--out", o.out, "output directory");
}

void add_export(CLI::App& app, ExportOpts& o) {
  CLI::App* sub = app.add_subcommand("export", "convert shapes or posed agents to PLY/OBJ");
  add_common(sub);
  sub->add_option("--shape", o.shape_file, "shape record to sample and export");
  sub->add_option("--agent", o.agent_file, "agent definition file");
  sub->add_option("--agent-preset", o.agent_preset, "agent preset (gripper or sitter)");
  sub->add_option("--poses", o.poses_file, "pose file to pose the agent with");
  sub->add_option("--frame", o.frame, "frame index within the pose file");
  sub->add_option("--samples", o.samples, "surface samples for shape export");
  sub->add_option("--seed", o.seed, "sampling seed");
  sub->add_option("--out-ply", o.out_ply, "PLY output path");
  sub->add_option("--out-obj", o.out_obj, "OBJ output path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("interaction transfer toolkit: procedural shapes, field training, "
               "correspondence-driven pose transfer, and evaluation");
  app.set_version_flag("--version", ITX_VERSION);
  app.require_subcommand(1);

  GenDataOpts gen_opts;
  TrainOpts train_opts;
  TransferOpts transfer_opts;
  EvalOpts eval_opts;
  ExportOpts export_opts;
  add_gen_data(app, gen_opts);
  add_train(app, train_opts);
  add_transfer(app, transfer_opts);
  add_eval(app, eval_opts);
  add_export(app, export_opts);

  try {
    app.parse(argc, argv);
    for (CLI::App* sub : app.get_subcommands()) {
      apply_subcommand_config(sub);
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e), 0;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e), 0;
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e), 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    for (CLI::App* sub : app.get_subcommands()) {
      const std::string name = sub->get_name();
      const std::string effective = sub->config_to_str(true, false);
      if (name == "gen-data") {
        gen_opts.effective_config = effective;
        itx::tools::run_gen_data(gen_opts);
      } else if (name == "train") {
        train_opts.effective_config = effective;
        itx::tools::run_train(train_opts);
      } else if (name == "transfer") {
        transfer_opts.effective_config = effective;
        itx::tools::run_transfer(transfer_opts);
      } else if (name == "eval") {
        eval_opts.effective_config = effective;
        itx::tools::run_eval(eval_opts);
      } else if (name == "export") {
        export_opts.effective_config = effective;
        itx::tools::run_export(export_opts);
      }
    }
  } catch (const itx::tools::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const itx::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 2;
  } catch (const itx::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
