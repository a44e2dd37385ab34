#pragma once

#include <cstdint>
#include <vector>

#include "itx/field/losses.hpp"
#include "itx/geom/sampling.hpp"
#include "itx/geom/shape.hpp"
#include "itx/util/rng.hpp"

namespace itx::field {

struct TrainConfig {
  FieldArch arch;
  int epochs = 500;
  int surface_samples = 2048;  // per-shape dataset budget
  int free_samples = 2048;
  int batch_surface = 256;     // per-step subsets drawn from the budget
  int batch_free = 256;
  double learning_rate = 1e-4;
  int lr_halving_epochs = 100;  // rate is halved after every such span
  double scale_min = 0.75;      // augmentation: uniform rescale range
  double scale_max = 1.25;
  bool augment_rotation = true;  // augmentation: uniform random rotations
  LossWeights weights;
  std::uint64_t seed = 0;
};

// learning_rate * 0.5^floor(epoch / lr_halving_epochs)
double learning_rate_at(const TrainConfig& cfg, int epoch);

struct EpochStats {
  double total = 0.0;
  double value = 0.0, grad_normal = 0.0, eikonal = 0.0, off_surface = 0.0;
  double normal = 0.0, smooth = 0.0, correction = 0.0, code = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;   // per-epoch means over shapes (raw terms)
  int completed_epochs = 0;
  bool diverged = false;            // a step produced a non-finite value
  double final_loss() const { return epochs.empty() ? 0.0 : epochs.back().total; }
};

// Fixed per-shape dataset: canonical surface and free-space samples plus the
// neighbor indices of the surface cloud (valid under any rotation and uniform
// rescale, so they are computed once).
struct ShapeDataset {
  geom::PointCloud surface;
  geom::FreeSamples free_space;
  std::vector<int> knn;
};

ShapeDataset prepare_shape_dataset(const geom::AnalyticShape& shape, const TrainConfig& cfg,
                                   std::uint64_t seed);

// The augmented batch for one training step (also the hook tests use to probe
// gradient correctness on a frozen batch).
ShapeBatch make_step_batch(const ShapeDataset& data, const TrainConfig& cfg, Rng& rng);

// Trains one field over a family of shapes.  Deterministic for a fixed
// config: the sample datasets, augmentation draws, batch picks, and update
// order are all derived from cfg.seed.  A non-finite loss or gradient aborts
// training and returns the parameters saved at the end of the last completed
// epoch (flagged in the log).
RdifParams train_field(const std::vector<geom::AnalyticShape>& shapes, const TrainConfig& cfg,
                       TrainLog* log = nullptr);

// Same, over pre-sampled datasets (shapes already turned into point sets).
RdifParams train_field(const std::vector<ShapeDataset>& datasets, const TrainConfig& cfg,
                       TrainLog* log = nullptr);

}  // namespace itx::field
