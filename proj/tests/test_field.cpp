#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "itx/diff/graph.hpp"
#include "itx/field/checkpoint.hpp"
#include "itx/field/losses.hpp"
#include "itx/field/model.hpp"
#include "itx/field/network.hpp"
#include "itx/field/train.hpp"
#include "itx/geom/rotation.hpp"
#include "itx/util/error.hpp"
#include "itx/util/rng.hpp"

using namespace itx;
using namespace itx::field;
using diff::Graph;
using geom::Mat3;
using geom::Vec3;

namespace {

std::string tmp_path(const std::string& name) { return "/tmp/itx_test_" + name; }

FieldArch mini_arch() {
  FieldArch a;
  a.code_rows = 4;
  a.encoder_widths = {4, 6, 6, 4};
  a.knn = 3;
  a.hyper_hidden = 8;
  a.mlp_width = 8;
  a.mlp_layers = 3;
  a.softplus_beta = 100.0;
  return a;
}

Mat random_points(Rng& rng, int n, double half_extent) {
  Mat m(3, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < 3; ++r) m(r, c) = rng.uniform(-half_extent, half_extent);
  return m;
}

ShapeBatch synthetic_batch(const FieldArch& arch, std::uint64_t seed) {
  Rng rng(seed);
  ShapeBatch b;
  const int n = 12, bs = 5, bf = 4;
  b.cloud.resize(3, n);
  for (int c = 0; c < n; ++c) {
    Vec3 dir(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    b.cloud.col(c) = 0.5 * dir;
  }
  b.knn = compute_knn(b.cloud, arch.knn);
  b.surf_p.resize(3, bs);
  b.surf_n.resize(3, bs);
  for (int c = 0; c < bs; ++c) {
    const int i = static_cast<int>(rng.below(n));
    b.surf_p.col(c) = b.cloud.col(i);
    b.surf_n.col(c) = b.cloud.col(i).normalized();
  }
  b.free_p = random_points(rng, bf, 0.6);
  b.free_s.resize(bf);
  for (int c = 0; c < bf; ++c) b.free_s[c] = b.free_p.col(c).norm() - 0.5;
  return b;
}

}  // namespace

TEST_CASE("field arch: layer shape tables") {
  FieldArch a = mini_arch();
  const auto d = a.deform_layer_shapes();
  REQUIRE(d.size() == 3);
  CHECK(d[0] == std::make_pair(8, 3));
  CHECK(d[1] == std::make_pair(8, 8));
  CHECK(d[2] == std::make_pair(4, 8));
  const auto t = a.template_layer_shapes();
  CHECK(t[0] == std::make_pair(8, 3));
  CHECK(t[2] == std::make_pair(1, 8));
  CHECK(a.code_length() == 12);

  FieldArch desk;  // defaults
  CHECK(desk.code_rows == 64);
  CHECK(desk.code_length() == 192);
  CHECK(desk.encoder_widths.back() == desk.code_rows);
  const auto dd = desk.deform_layer_shapes();
  REQUIRE(dd.size() == 5);
  CHECK(dd[0] == std::make_pair(128, 3));
  CHECK(dd[4] == std::make_pair(4, 128));
}

TEST_CASE("field init: parameter inventory matches the declared shapes") {
  const FieldArch a = mini_arch();
  RdifParams rp = init_field_params(a, 3);
  CHECK(rp.params.congruent(field_param_shapes(a)));
  // Final-layer correction rows start exactly zero in both hypernetwork
  // stages, so the generated correction head is zero no matter the code.
  const Mat& wo = rp.params.at("hyper.l2.wo");
  const Mat& bo = rp.params.at("hyper.l2.bo");
  const auto [out, in] = a.deform_layer_shapes().back();
  for (int c = 0; c < in; ++c) {
    CHECK(bo(c * out + 3, 0) == 0.0);
    CHECK(wo.row(c * out + 3).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(bo(out * in + 3, 0) == 0.0);
  CHECK(wo.row(out * in + 3).cwiseAbs().maxCoeff() == 0.0);
  // Deterministic and seed-sensitive.
  CHECK(rp.params.equals(init_field_params(a, 3).params));
  CHECK_FALSE(rp.params.equals(init_field_params(a, 4).params));
  // Mismatched final encoder width is rejected.
  FieldArch bad = a;
  bad.code_rows = 5;
  CHECK_THROWS_AS(init_field_params(bad, 1), Error);
}

TEST_CASE("extract_rotation: orthonormalization examples and degeneracy") {
  bool deg = true;
  Mat F(2, 3);
  F << 1, 0, 0, 0, 1, 0;
  Mat3 R = extract_rotation(F, deg);
  CHECK_FALSE(deg);
  CHECK((R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);

  F << 2, 0, 0, 1, 1, 0;  // second row needs projection
  R = extract_rotation(F, deg);
  CHECK_FALSE(deg);
  CHECK((R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);

  Rng rng(9);
  Mat G(4, 3);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) G(r, c) = rng.normal();
  R = extract_rotation(G, deg);
  CHECK_FALSE(deg);
  CHECK(geom::is_rotation(R));
  // Rotating the rows rotates the frame the same way, so G R^T is invariant.
  const Mat3 Q = geom::random_rotation(rng);
  bool deg2 = false;
  const Mat3 R2 = extract_rotation(G * Q.transpose(), deg2);
  CHECK((R2 - R * Q.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((G * Q.transpose() * R2.transpose() - G * R.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  // Degenerate pivots fall back to the identity.
  F << 1e-12, 0, 0, 0, 1, 0;
  R = extract_rotation(F, deg);
  CHECK(deg);
  CHECK(R == Mat3::Identity());
  F << 1, 0, 0, 2, 0, 0;  // parallel rows
  R = extract_rotation(F, deg);
  CHECK(deg);
  CHECK(R == Mat3::Identity());
}

TEST_CASE("compute_knn: hand-checked neighborhoods and tie-breaking") {
  Mat pts(3, 4);
  pts.setZero();
  pts(0, 0) = 0.0;
  pts(0, 1) = 1.0;
  pts(0, 2) = 2.0;
  pts(0, 3) = 10.0;
  const auto knn = compute_knn(pts, 2);
  REQUIRE(knn.size() == 8);
  CHECK(knn[0] == 1);  // point 0: nearest 1, then 2
  CHECK(knn[1] == 2);
  CHECK(knn[2] == 0);  // point 1: 0 and 2 tie at distance 1 -> lowest index first
  CHECK(knn[3] == 2);
  CHECK(knn[4] == 1);
  CHECK(knn[5] == 0);  // point 2: distances 1 (pt 1) then 2 (pt 0)
  CHECK(knn[6] == 2);
  CHECK(knn[7] == 1);
  CHECK_THROWS_AS(compute_knn(pts, 4), Error);

  // Edge featurization layout: block (i, m) holds relative, absolute, cross.
  const Mat feats = encoder_edge_features(pts, knn, 2);
  REQUIRE(feats.cols() == 3 * 4 * 2);
  CHECK(feats(0, 0) == 1.0);                       // point 0, neighbor 1: rel x
  CHECK(feats(1, 0) == 0.0);                       // abs position of point 0
  CHECK(feats.block<1, 3>(2, 0).norm() == 0.0);    // collinear rel x abs
  CHECK(feats(1, 3 * 2) == 1.0);                   // point 1 block: abs x
}

TEST_CASE("encoder: rotation equivariance, code invariance, permutation invariance") {
  const FieldArch a = mini_arch();
  RdifParams rp = init_field_params(a, 11);
  FieldEvaluator ev(rp);
  Rng rng(21);
  const Mat cloud = random_points(rng, 40, 0.5);
  const ShapeCode code = ev.encode(cloud);
  CHECK_FALSE(code.degenerate_rotation);
  CHECK(geom::is_rotation(code.R, 1e-9));

  for (int trial = 0; trial < 5; ++trial) {
    const Mat3 Q = geom::random_rotation(rng);
    const ShapeCode rot = ev.encode(Q * cloud);
    CHECK((rot.alpha - code.alpha).cwiseAbs().maxCoeff() < 1e-4);
    CHECK((rot.R - code.R * Q.transpose()).cwiseAbs().maxCoeff() < 1e-4);

    // Query consistency: the rotated encoding evaluated at rotated points
    // reproduces the original field values.
    std::vector<Vec3> pts;
    std::vector<Vec3> rot_pts;
    for (int i = 0; i < 6; ++i) {
      const Vec3 p(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
      pts.push_back(p);
      rot_pts.push_back(Q * p);
    }
    const Eigen::VectorXd s1 = ev.sdf(code, pts);
    const Eigen::VectorXd s2 = ev.sdf(rot, rot_pts);
    CHECK((s1 - s2).cwiseAbs().maxCoeff() < 1e-9);
    const auto t1 = ev.to_template(code, pts);
    const auto t2 = ev.to_template(rot, rot_pts);
    for (std::size_t i = 0; i < t1.size(); ++i)
      CHECK((t1[i] - t2[i]).norm() < 1e-9);
  }

  // Permuting the input points leaves the pooled code unchanged.
  std::vector<int> perm(40);
  for (int i = 0; i < 40; ++i) perm[i] = i;
  Rng prng(5);
  prng.shuffle(perm);
  Mat shuffled(3, 40);
  for (int i = 0; i < 40; ++i) shuffled.col(i) = cloud.col(perm[i]);
  const ShapeCode pcode = ev.encode(shuffled);
  CHECK((pcode.alpha - code.alpha).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((pcode.R - code.R).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("encoder: zeroed final layer trips the degeneracy fallback") {
  const FieldArch a = mini_arch();
  RdifParams rp = init_field_params(a, 13);
  rp.params.at("enc.l3.wq").setZero();
  FieldEvaluator ev(rp);
  Rng rng(2);
  const ShapeCode code = ev.encode(random_points(rng, 20, 0.5));
  CHECK(code.degenerate_rotation);
  CHECK(code.R == Mat3::Identity());
  CHECK(code.alpha.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("field: correction starts exactly zero and assembly is exact") {
  const FieldArch a = mini_arch();
  RdifParams rp = init_field_params(a, 17);
  FieldEvaluator ev(rp);
  Rng rng(31);
  const ShapeCode code = ev.encode(random_points(rng, 30, 0.5));

  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i)
    pts.emplace_back(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
  const auto evals = ev.evaluate(code, pts);
  for (const auto& e : evals) CHECK(e.ds == 0.0);

  // s == T(p_bar + v) + ds, recomputed through an independent recording.
  Graph g(&rp.params);
  Mat ptil(3, static_cast<int>(evals.size()));
  for (std::size_t i = 0; i < evals.size(); ++i)
    ptil.col(static_cast<int>(i)) = evals[i].p_bar + evals[i].v;
  const auto tl = template_layer_nodes(g, a);
  const TemplateNodes tn = build_template(g, a, tl, g.constant(ptil), nullptr, false);
  const Mat& tval = g.value(tn.value);
  for (std::size_t i = 0; i < evals.size(); ++i)
    CHECK(evals[i].s == doctest::Approx(tval(0, static_cast<int>(i)) + evals[i].ds).epsilon(1e-12));

  // p_bar is the rotated query.
  for (std::size_t i = 0; i < evals.size(); ++i)
    CHECK((evals[i].p_bar - code.R * pts[i]).norm() < 1e-15);
}

TEST_CASE("field: forward-mode jets match finite differences in the input space") {
  const FieldArch a = mini_arch();
  RdifParams rp = init_field_params(a, 23);
  Rng rng(41);
  Mat alpha(a.code_rows, 3);
  for (int r = 0; r < a.code_rows; ++r)
    for (int c = 0; c < 3; ++c) alpha(r, c) = 0.05 * rng.normal();
  const Mat3 R = geom::random_rotation(rng);
  const Mat q = random_points(rng, 5, 0.5);

  const auto eval_phi_v = [&](const Mat& pts) {
    Graph g(&rp.params);
    const Node Rn = g.constant(Mat(R));
    const Node af = g.reshape(g.constant(alpha), a.code_length(), 1);
    const auto dl = build_hypernet(g, a, af);
    const auto tl = template_layer_nodes(g, a);
    const FieldNodes f = build_field(g, a, dl, tl, Rn, g.constant(pts), false);
    return std::make_pair(Mat(g.value(f.phi)), Mat(g.value(f.deform.v.val)));
  };

  Graph g(&rp.params);
  const Node Rn = g.constant(Mat(R));
  const Node af = g.reshape(g.constant(alpha), a.code_length(), 1);
  const auto dl = build_hypernet(g, a, af);
  const auto tl = template_layer_nodes(g, a);
  const FieldNodes f = build_field(g, a, dl, tl, Rn, g.constant(q), true);
  const Mat grad_phi = g.value(f.grad_phi);  // against template coordinates
  const Mat vdx = g.value(f.deform.v.dx);
  const Mat vdy = g.value(f.deform.v.dy);
  const Mat vdz = g.value(f.deform.v.dz);

  const double h = 1e-5;
  for (int c = 0; c < q.cols(); ++c) {
    for (int axis = 0; axis < 3; ++axis) {
      Mat qp = q, qm = q;
      qp(axis, c) += h;
      qm(axis, c) -= h;
      const auto [pp, vp] = eval_phi_v(qp);
      const auto [pm, vm] = eval_phi_v(qm);
      // d phi / d p = R^T (d phi / d p_bar)
      const double fd_phi = (pp(0, c) - pm(0, c)) / (2 * h);
      const double an_phi = (R.transpose() * grad_phi.col(c))(axis);
      CHECK(std::abs(fd_phi - an_phi) < 1e-5);
      // d v / d p axis = sum_m (d v / d p_bar_m) R(m, axis)
      const Vec3 fd_v = (vp.col(c) - vm.col(c)) / (2 * h);
      const Vec3 an_v =
          R(0, axis) * Vec3(vdx.col(c)) + R(1, axis) * Vec3(vdy.col(c)) + R(2, axis) * Vec3(vdz.col(c));
      CHECK((fd_v - an_v).cwiseAbs().maxCoeff() < 1e-5);
    }
  }

  // Local template jets are the decoder's own spatial gradient.
  Graph g2(&rp.params);
  const auto tl2 = template_layer_nodes(g2, a);
  const TemplateNodes tn = build_template(g2, a, tl2, g2.constant(q), nullptr, true);
  const Mat gx = g2.value(tn.local.dx), gy = g2.value(tn.local.dy), gz = g2.value(tn.local.dz);
  const auto eval_t = [&](const Mat& pts) {
    Graph h2(&rp.params);
    const auto tl3 = template_layer_nodes(h2, a);
    return Mat(h2.value(build_template(h2, a, tl3, h2.constant(pts), nullptr, false).value));
  };
  for (int c = 0; c < q.cols(); ++c) {
    for (int axis = 0; axis < 3; ++axis) {
      Mat qp = q, qm = q;
      qp(axis, c) += h;
      qm(axis, c) -= h;
      const double fd = (eval_t(qp)(0, c) - eval_t(qm)(0, c)) / (2 * h);
      const double an = axis == 0 ? gx(0, c) : (axis == 1 ? gy(0, c) : gz(0, c));
      CHECK(std::abs(fd - an) < 1e-5);
    }
  }
}

TEST_CASE("training losses: every term matches central finite differences") {
  const FieldArch a = mini_arch();
  RdifParams rp = init_field_params(a, 29);
  const ShapeBatch batch = synthetic_batch(a, 57);
  const LossWeights w;

  const auto term_prog = [&](int which) {
    return [&, which](Graph& g) {
      const LossNodes ln = build_training_losses(g, a, batch, w);
      switch (which) {
        case 0: return ln.value_term;
        case 1: return ln.grad_normal_term;
        case 2: return ln.eikonal_term;
        case 3: return ln.off_surface_term;
        case 4: return ln.normal_term;
        case 5: return ln.smooth_term;
        case 6: return ln.correction_term;
        case 7: return ln.code_term;
        default: return ln.total;
      }
    };
  };
  for (int which = 0; which <= 8; ++which) {
    const double err =
        diff::finite_diff_check_sampled(term_prog(which), rp.params, 1e-6, 50,
                                        1000 + static_cast<std::uint64_t>(which));
    INFO("term " << which);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("training losses: term structure at a controlled configuration") {
  const FieldArch a = mini_arch();
  RdifParams rp = init_field_params(a, 31);
  const ShapeBatch batch = synthetic_batch(a, 77);
  LossWeights w;

  Graph g(&rp.params);
  const LossNodes ln = build_training_losses(g, a, batch, w);
  // The correction head is zero-initialized, so its magnitude term is zero
  // and the value/off-surface terms are pure template+deformation effects.
  CHECK(g.scalar(ln.correction_term) == 0.0);
  CHECK(g.scalar(ln.code_term) > 0.0);
  CHECK(g.scalar(ln.off_surface_term) > 0.0);
  CHECK(g.scalar(ln.off_surface_term) <= 1.0);  // exp(-sharpness |s|) <= 1
  // Weighted assembly.
  const double total = g.scalar(ln.sdf_composite) +
                       w.normal_consistency * g.scalar(ln.normal_term) +
                       w.deform_smooth * g.scalar(ln.smooth_term) +
                       w.correction_magnitude * g.scalar(ln.correction_term) +
                       w.code_norm * g.scalar(ln.code_term);
  CHECK(g.scalar(ln.total) == doctest::Approx(total).epsilon(1e-12));
  const double sdf = w.sdf_value * g.scalar(ln.value_term) +
                     w.sdf_normal * g.scalar(ln.grad_normal_term) +
                     w.sdf_eikonal * g.scalar(ln.eikonal_term) +
                     w.sdf_off_surface * g.scalar(ln.off_surface_term);
  CHECK(g.scalar(ln.sdf_composite) == doctest::Approx(sdf).epsilon(1e-12));
}

TEST_CASE("learning rate schedule: halves after every span") {
  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  cfg.lr_halving_epochs = 100;
  CHECK(learning_rate_at(cfg, 0) == 1e-4);
  CHECK(learning_rate_at(cfg, 99) == 1e-4);
  CHECK(learning_rate_at(cfg, 100) == 5e-5);
  CHECK(learning_rate_at(cfg, 199) == 5e-5);
  CHECK(learning_rate_at(cfg, 250) == doctest::Approx(2.5e-5).epsilon(1e-15));
  cfg.lr_halving_epochs = 0;
  CHECK(learning_rate_at(cfg, 400) == 1e-4);
}

TEST_CASE("make_step_batch: shapes, plumbing, and scaled supervision") {
  FieldArch a = mini_arch();
  TrainConfig cfg;
  cfg.arch = a;
  cfg.surface_samples = 64;
  cfg.free_samples = 48;
  cfg.batch_surface = 10;
  cfg.batch_free = 8;
  const auto shape = geom::generate_shape("mug", 3);
  const ShapeDataset data = prepare_shape_dataset(shape, cfg, 99);
  CHECK(data.surface.size() == 64);
  CHECK(data.free_space.points.size() == 48);
  CHECK(data.knn.size() == 64 * static_cast<std::size_t>(a.knn));

  SUBCASE("identity augmentation reproduces the canonical dataset") {
    cfg.scale_min = cfg.scale_max = 1.0;
    cfg.augment_rotation = false;
    Rng rng(1);
    const ShapeBatch b = make_step_batch(data, cfg, rng);
    CHECK(b.cloud.cols() == 64);
    CHECK(b.surf_p.cols() == 10);
    CHECK(b.free_p.cols() == 8);
    for (int i = 0; i < 64; ++i)
      CHECK((b.cloud.col(i) - data.surface.points[static_cast<std::size_t>(i)]).norm() == 0.0);
    for (int c = 0; c < 8; ++c) {
      // Unscaled: supervision must match the stored analytic distances.
      bool found = false;
      for (std::size_t i = 0; i < data.free_space.points.size() && !found; ++i)
        if ((b.free_p.col(c) - data.free_space.points[i]).norm() == 0.0) {
          CHECK(b.free_s[c] == data.free_space.sdf[i]);
          found = true;
        }
      CHECK(found);
    }
  }

  SUBCASE("rotation and rescale transform points, normals, and distances together") {
    cfg.scale_min = cfg.scale_max = 1.25;
    cfg.augment_rotation = true;
    Rng rng(7);
    const ShapeBatch b = make_step_batch(data, cfg, rng);
    // Pairwise distances in the cloud scale exactly by 1.25.
    const Vec3 d0 = b.cloud.col(1) - b.cloud.col(0);
    const Vec3 c0 = data.surface.points[1] - data.surface.points[0];
    CHECK(d0.norm() == doctest::Approx(1.25 * c0.norm()).epsilon(1e-12));
    // Normals stay unit length.
    for (int c = 0; c < b.surf_n.cols(); ++c)
      CHECK(b.surf_n.col(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
    // Distances scale with the shape: each batch distance must be exactly
    // 1.25 times one of the canonical dataset distances.
    for (int c = 0; c < b.free_p.cols(); ++c) {
      bool matched = false;
      for (const double s : data.free_space.sdf)
        if (std::abs(b.free_s[c] - 1.25 * s) < 1e-12) {
          matched = true;
          break;
        }
      CHECK(matched);
    }
  }
}

TEST_CASE("train_field: deterministic across runs, seed-sensitive, and loggable") {
  FieldArch a = mini_arch();
  TrainConfig cfg;
  cfg.arch = a;
  cfg.epochs = 3;
  cfg.surface_samples = 48;
  cfg.free_samples = 48;
  cfg.batch_surface = 12;
  cfg.batch_free = 12;
  cfg.seed = 5;
  std::vector<geom::AnalyticShape> shapes = {geom::generate_shape("mug", 1),
                                             geom::generate_shape("mug", 2)};

  TrainLog log1, log2, log3;
  RdifParams p1 = train_field(shapes, cfg, &log1);
  RdifParams p2 = train_field(shapes, cfg, &log2);
  CHECK(log1.completed_epochs == 3);
  CHECK_FALSE(log1.diverged);
  REQUIRE(log1.epochs.size() == 3);
  REQUIRE(log2.epochs.size() == 3);
  CHECK(std::abs(log1.final_loss() - log2.final_loss()) <= 1e-12 * std::abs(log1.final_loss()));
  CHECK(p1.params.equals(p2.params));

  cfg.seed = 6;
  RdifParams p3 = train_field(shapes, cfg, &log3);
  CHECK_FALSE(p1.params.equals(p3.params));
  CHECK(log3.final_loss() != log1.final_loss());

  for (const auto& e : log1.epochs) {
    CHECK(std::isfinite(e.total));
    CHECK(e.value >= 0.0);
    CHECK(e.eikonal >= 0.0);
    CHECK(e.off_surface >= 0.0);
    CHECK(e.correction >= 0.0);
    CHECK(e.code >= 0.0);
  }
}

TEST_CASE("train_field: an exploding step aborts with the last good parameters") {
  FieldArch a = mini_arch();
  TrainConfig cfg;
  cfg.arch = a;
  cfg.epochs = 4;
  cfg.surface_samples = 32;
  cfg.free_samples = 32;
  cfg.batch_surface = 8;
  cfg.batch_free = 8;
  cfg.seed = 12;
  cfg.learning_rate = 1e100;  // guarantees a non-finite value within the first epoch
  std::vector<geom::AnalyticShape> shapes = {geom::generate_shape("mug", 4),
                                             geom::generate_shape("mug", 5)};
  TrainLog log;
  RdifParams p = train_field(shapes, cfg, &log);
  CHECK(log.diverged);
  CHECK(log.completed_epochs == 0);
  // Rolled back to the initial parameters (nothing completed an epoch).
  Rng master(cfg.seed);
  RdifParams init = init_field_params(a, master.raw());
  CHECK(p.params.equals(init.params));
}

TEST_CASE("checkpoints: bit-exact round trip and byte-identical saves") {
  const FieldArch a = mini_arch();
  RdifParams rp = init_field_params(a, 37);
  const std::string p1 = tmp_path("field1.ckpt");
  const std::string p2 = tmp_path("field2.ckpt");
  save_checkpoint(rp, p1);
  save_checkpoint(rp, p2);

  const RdifParams back = load_checkpoint(p1);
  CHECK(back.arch == a);
  CHECK(back.params.equals(rp.params));

  const auto slurp = [](const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  const std::string b1 = slurp(p1);
  const std::string b2 = slurp(p2);
  CHECK(b1.size() == b2.size());
  CHECK(b1 == b2);

  SUBCASE("wrong magic") {
    std::ofstream os(p2, std::ios::binary);
    os << "NOTACKPTNOTACKPT";
    os.close();
    CHECK_THROWS_AS(load_checkpoint(p2), CheckpointError);
  }
  SUBCASE("unsupported version") {
    std::string buf = b1;
    buf[8] = 2;  // bump the version field
    std::ofstream os(p2, std::ios::binary);
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    os.close();
    CHECK_THROWS_AS(load_checkpoint(p2), CheckpointError);
  }
  SUBCASE("truncation") {
    std::ofstream os(p2, std::ios::binary);
    os.write(b1.data(), static_cast<std::streamsize>(b1.size() / 2));
    os.close();
    CHECK_THROWS_AS(load_checkpoint(p2), CheckpointError);
  }
  SUBCASE("trailing bytes") {
    std::ofstream os(p2, std::ios::binary);
    os.write(b1.data(), static_cast<std::streamsize>(b1.size()));
    os << "tail";
    os.close();
    CHECK_THROWS_AS(load_checkpoint(p2), CheckpointError);
  }
  SUBCASE("architecture mismatch") {
    // Declare a different hypernetwork width without touching the stored
    // parameters: shapes no longer match the descriptor.
    std::string buf = b1;
    const std::size_t off = 8 + 4 + 6 * 4;  // magic, version, code_rows + widths + knn
    std::int32_t hh = 0;
    std::memcpy(&hh, buf.data() + off, 4);
    CHECK(hh == a.hyper_hidden);
    hh += 1;
    std::memcpy(buf.data() + off, &hh, 4);
    std::ofstream os(p2, std::ios::binary);
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    os.close();
    CHECK_THROWS_AS(load_checkpoint(p2), CheckpointError);
  }
  SUBCASE("nonexistent file") {
    CHECK_THROWS_AS(load_checkpoint(tmp_path("no_such.ckpt")), CheckpointError);
  }
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("checkpoints: saved after training, reload reproduces queries exactly") {
  FieldArch a = mini_arch();
  TrainConfig cfg;
  cfg.arch = a;
  cfg.epochs = 2;
  cfg.surface_samples = 32;
  cfg.free_samples = 32;
  cfg.batch_surface = 8;
  cfg.batch_free = 8;
  cfg.seed = 77;
  std::vector<geom::AnalyticShape> shapes = {geom::generate_shape("mug", 8)};
  RdifParams trained = train_field(shapes, cfg, nullptr);

  const std::string path = tmp_path("field_trained.ckpt");
  save_checkpoint(trained, path);
  const RdifParams back = load_checkpoint(path);
  std::remove(path.c_str());

  FieldEvaluator ev1(trained), ev2(back);
  Rng rng(3);
  const Mat cloud = random_points(rng, 32, 0.5);
  const ShapeCode c1 = ev1.encode(cloud);
  const ShapeCode c2 = ev2.encode(cloud);
  CHECK(c1.alpha == c2.alpha);
  CHECK(c1.R == c2.R);
  std::vector<Vec3> pts;
  for (int i = 0; i < 20; ++i)
    pts.emplace_back(rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7));
  const Eigen::VectorXd s1 = ev1.sdf(c1, pts);
  const Eigen::VectorXd s2 = ev2.sdf(c2, pts);
  CHECK(s1 == s2);
}
