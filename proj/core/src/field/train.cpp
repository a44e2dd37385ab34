#include "itx/field/train.hpp"

#include <cmath>

#include "itx/diff/optim.hpp"
#include "itx/geom/rotation.hpp"
#include "itx/util/error.hpp"

namespace itx::field {

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  if (cfg.lr_halving_epochs <= 0) return cfg.learning_rate;
  const int halvings = epoch / cfg.lr_halving_epochs;
  return cfg.learning_rate * std::pow(0.5, halvings);
}

ShapeDataset prepare_shape_dataset(const geom::AnalyticShape& shape, const TrainConfig& cfg,
                                   std::uint64_t seed) {
  Rng r(seed);
  const std::uint64_t surf_seed = r.raw();
  const std::uint64_t free_seed = r.raw();
  ShapeDataset out;
  out.surface = geom::sample_surface(shape, cfg.surface_samples, surf_seed);
  out.free_space = geom::sample_free_space(shape, cfg.free_samples, free_seed);
  out.knn = compute_knn(geom::to_matrix(out.surface.points), cfg.arch.knn);
  return out;
}

ShapeBatch make_step_batch(const ShapeDataset& data, const TrainConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(data.surface.size());
  const int nf = static_cast<int>(data.free_space.points.size());
  require(n > cfg.arch.knn, "make_step_batch: surface cloud smaller than the neighborhood");
  require(nf > 0, "make_step_batch: no free-space samples");

  const double u = rng.uniform(cfg.scale_min, cfg.scale_max);
  const geom::Mat3 Q =
      cfg.augment_rotation ? geom::random_rotation(rng) : geom::Mat3::Identity();
  const geom::Mat3 A = u * Q;

  ShapeBatch batch;
  batch.knn = data.knn;
  batch.cloud.resize(3, n);
  for (int i = 0; i < n; ++i)
    batch.cloud.col(i) = A * data.surface.points[static_cast<std::size_t>(i)];

  batch.surf_p.resize(3, cfg.batch_surface);
  batch.surf_n.resize(3, cfg.batch_surface);
  for (int c = 0; c < cfg.batch_surface; ++c) {
    const auto i = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)));
    batch.surf_p.col(c) = batch.cloud.col(static_cast<Eigen::Index>(i));
    batch.surf_n.col(c) = Q * data.surface.normals[i];
  }

  batch.free_p.resize(3, cfg.batch_free);
  batch.free_s.resize(cfg.batch_free);
  for (int c = 0; c < cfg.batch_free; ++c) {
    const auto i = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(nf)));
    batch.free_p.col(c) = A * data.free_space.points[i];
    batch.free_s[c] = u * data.free_space.sdf[i];  // distances scale with the shape
  }
  return batch;
}

RdifParams train_field(const std::vector<ShapeDataset>& datasets, const TrainConfig& cfg,
                       TrainLog* log) {
  require(!datasets.empty(), "train_field: no shapes");
  TrainLog local_log;
  TrainLog& lg = log ? *log : local_log;
  lg = TrainLog{};

  Rng master(cfg.seed);
  RdifParams params = init_field_params(cfg.arch, master.raw());
  diff::OptimState opt = diff::OptimState::for_params(params.params);
  diff::ParamSet grads = params.params.zeros_like();
  diff::ParamSet last_good = params.params;

  const auto S = datasets.size();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    EpochStats stats;
    bool ok = true;
    for (std::size_t s = 0; s < S && ok; ++s) {
      const ShapeBatch batch = make_step_batch(datasets[s], cfg, master);
      try {
        Graph g(&params.params);
        const LossNodes ln = build_training_losses(g, cfg.arch, batch, cfg.weights);
        for (auto& [name, m] : grads) m.setZero();
        g.backward(ln.total, grads);
        require(grads.all_finite(), "train_field: non-finite gradient");
        diff::adam_step(params.params, grads, opt, lr);
        stats.total += g.scalar(ln.total);
        stats.value += g.scalar(ln.value_term);
        stats.grad_normal += g.scalar(ln.grad_normal_term);
        stats.eikonal += g.scalar(ln.eikonal_term);
        stats.off_surface += g.scalar(ln.off_surface_term);
        stats.normal += g.scalar(ln.normal_term);
        stats.smooth += g.scalar(ln.smooth_term);
        stats.correction += g.scalar(ln.correction_term);
        stats.code += g.scalar(ln.code_term);
      } catch (const Error&) {
        ok = false;
      }
    }
    if (!ok) {
      // Divergence: roll back to the parameters captured after the last
      // completed epoch and stop.
      params.params = last_good;
      lg.diverged = true;
      return params;
    }
    const double inv = 1.0 / static_cast<double>(S);
    stats.total *= inv;
    stats.value *= inv;
    stats.grad_normal *= inv;
    stats.eikonal *= inv;
    stats.off_surface *= inv;
    stats.normal *= inv;
    stats.smooth *= inv;
    stats.correction *= inv;
    stats.code *= inv;
    lg.epochs.push_back(stats);
    lg.completed_epochs = epoch + 1;
    last_good = params.params;
  }
  return params;
}

RdifParams train_field(const std::vector<geom::AnalyticShape>& shapes, const TrainConfig& cfg,
                       TrainLog* log) {
  require(!shapes.empty(), "train_field: no shapes");
  Rng ds_rng(cfg.seed ^ 0x64617461736574ull);  // dataset stream, distinct from init/augment
  std::vector<ShapeDataset> datasets;
  datasets.reserve(shapes.size());
  for (const auto& shape : shapes)
    datasets.push_back(prepare_shape_dataset(shape, cfg, ds_rng.raw()));
  return train_field(datasets, cfg, log);
}

}  // namespace itx::field
