#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "itx/field/train.hpp"
#include "itx/transfer/transfer.hpp"

namespace itx::tools {

// Raised for flag combinations CLI parsing alone cannot reject (maps to the
// usage-error exit code rather than the runtime one).
struct UsageError : Error {
  using Error::Error;
};

// Explicit --out wins; otherwise $ITX_OUT_ROOT (default "itx-out") plus the
// subcommand name.  The directory is created.
std::string resolve_out_dir(const std::string& explicit_out, const std::string& subcommand);

// manifest.txt beside outputs: tool id, version, subcommand, and the full
// effective configuration.  No timestamps, so reruns are byte-identical.
void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const std::string& effective_config);

struct GenDataOpts {
  std::string category = "mug";
  int count = 4;
  std::uint64_t seed = 1;
  int surface_samples = 2048;
  int free_samples = 2048;
  std::string out;
  std::string effective_config;
};

struct TrainOpts {
  std::string category = "mug";
  int shapes = 20;
  std::string shape_dir;  // when set, load shape records instead of generating
  field::TrainConfig cfg;
  std::string out;
  std::string effective_config;
};

struct TransferOpts {
  std::string checkpoint;
  std::string source = "demo_grasp";  // demo name or a pose-file path
  std::string agent_file;             // overrides the preset when set
  std::string agent_preset;           // defaults to the demo's preset
  std::string source_shape;           // record path; otherwise generated
  std::string target_shape;
  std::string category = "mug";
  std::uint64_t source_seed = 1;
  std::uint64_t target_seed = 2;
  std::uint64_t sample_seed = 0;
  int surface_samples = 2048;
  int grid_res = 48;
  transfer::TransferConfig cfg;
  double gamma_deg = 10.0;
  bool dump_debug = false;
  std::string out;
  std::string effective_config;
};

struct EvalOpts {
  std::string agent_file;
  std::string agent_preset = "gripper";
  std::string target_agent_file;  // defaults to the source agent
  std::string source_poses;
  std::string target_poses;
  std::string source_shape;
  std::string target_shape;
  std::string category = "mug";
  std::uint64_t source_seed = 1;
  std::uint64_t target_seed = 2;
  std::uint64_t sample_seed = 0;
  int surface_samples = 2048;
  int voxel_res = 64;
  double threshold = 0.02;
  std::string out;
  std::string effective_config;
};

struct ExportOpts {
  std::string shape_file;
  std::string agent_file;
  std::string agent_preset;
  std::string poses_file;
  int frame = 0;
  int samples = 2048;
  std::uint64_t seed = 0;
  std::string out_ply;
  std::string out_obj;
  std::string effective_config;
};

void run_gen_data(const GenDataOpts& opts);
void run_train(const TrainOpts& opts);
void run_transfer(const TransferOpts& opts);
void run_eval(const EvalOpts& opts);
void run_export(const ExportOpts& opts);

}  // namespace itx::tools
