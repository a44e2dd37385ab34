#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "itx/corr/correspond.hpp"
#include "itx/field/model.hpp"
#include "itx/field/network.hpp"
#include "itx/geom/nearest.hpp"
#include "itx/geom/point_cloud.hpp"
#include "itx/geom/sampling.hpp"
#include "itx/util/error.hpp"
#include "itx/util/rng.hpp"

using namespace itx;
using corr::correspond;
using corr::correspond_spatial;
using corr::correspond_surface;
using corr::SpatialCandidates;
using corr::spatial_candidates;
using field::FieldArch;
using field::FieldEvaluator;
using field::RdifParams;
using field::ShapeCode;
using geom::Vec3;

namespace {

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

std::vector<Vec3> random_points(int n, Rng& rng, double scale = 1.0) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.emplace_back(scale * (2.0 * rng.uniform() - 1.0), scale * (2.0 * rng.uniform() - 1.0),
                     scale * (2.0 * rng.uniform() - 1.0));
  return out;
}

geom::PointCloud cloud_from(const std::vector<Vec3>& pos) {
  geom::PointCloud c;
  c.points = pos;
  c.normals.assign(pos.size(), Vec3::UnitZ());
  return c;
}

FieldEvaluator make_evaluator(std::uint64_t seed = 99) {
  return FieldEvaluator(field::init_field_params(mini_arch(), seed));
}

ShapeCode encode_cloud(const FieldEvaluator& eval, const std::vector<Vec3>& pts) {
  field::Mat m(3, static_cast<int>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) m.col(static_cast<int>(i)) = pts[i];
  return eval.encode(m);
}

}  // namespace

TEST_CASE("template map is the identity when the rotation is identity and the "
          "generated decoder is silenced") {
  RdifParams rp = field::init_field_params(mini_arch(), 5);
  // Zeroing the generator's output stage makes every generated decoder weight
  // and bias zero, so the deformation and correction vanish identically.
  for (const std::string& name : rp.params.names())
    if (name.rfind("hyper.", 0) == 0 &&
        (name.find(".wo") != std::string::npos || name.find(".bo") != std::string::npos))
      rp.params.at(name).setZero();
  FieldEvaluator eval(rp);

  ShapeCode code;
  code.alpha = field::Mat::Zero(mini_arch().code_rows, 3);
  code.R = geom::Mat3::Identity();

  Rng rng(3);
  for (const Vec3& p : random_points(9, rng)) {
    Vec3 image = corr::to_template(p, code, eval);
    CHECK(image.x() == p.x());
    CHECK(image.y() == p.y());
    CHECK(image.z() == p.z());
  }
}

TEST_CASE("batched template images preserve order and match single-point calls") {
  FieldEvaluator eval = make_evaluator();
  Rng rng(17);
  auto cloud = random_points(12, rng);
  ShapeCode code = encode_cloud(eval, cloud);

  auto pts = random_points(7, rng);
  auto batch = eval.to_template(code, pts);
  REQUIRE(batch.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Vec3 single = corr::to_template(pts[i], code, eval);
    CHECK((batch[i] - single).norm() < 1e-12);
  }
}

TEST_CASE("surface correspondence matches the exhaustive template-space argmin") {
  FieldEvaluator eval = make_evaluator();
  Rng rng(23);
  auto src_pts = random_points(24, rng);
  auto tgt_pts = random_points(17, rng, 0.8);
  geom::PointCloud src = cloud_from(src_pts), tgt = cloud_from(tgt_pts);
  ShapeCode code_s = encode_cloud(eval, src_pts);
  ShapeCode code_t = encode_cloud(eval, tgt_pts);

  std::vector<double> res;
  auto map = correspond_surface(src, code_s, tgt, code_t, eval, &res);
  REQUIRE(map.size() == src_pts.size());
  REQUIRE(res.size() == src_pts.size());

  auto src_images = eval.to_template(code_s, src_pts);
  auto tgt_images = eval.to_template(code_t, tgt_pts);
  for (std::size_t i = 0; i < src_pts.size(); ++i) {
    int expect = geom::NearestIndex::brute_force(tgt_images, src_images[i]);
    CHECK(map[i] == expect);
    double dist = (src_images[i] - tgt_images[static_cast<std::size_t>(expect)]).norm();
    CHECK(res[i] == doctest::Approx(dist).epsilon(1e-14));
    // The residual is the minimum over all candidates.
    for (std::size_t j = 0; j < tgt_images.size(); ++j)
      CHECK(res[i] <= (src_images[i] - tgt_images[j]).norm() + 1e-15);
  }

  SUBCASE("permuting the target relabels matches consistently") {
    std::vector<int> perm(tgt_pts.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    Rng prng(4);
    prng.shuffle(perm);
    std::vector<Vec3> tgt_perm(tgt_pts.size());
    for (std::size_t i = 0; i < perm.size(); ++i)
      tgt_perm[static_cast<std::size_t>(perm[i])] = tgt_pts[i];
    auto map2 = correspond_surface(src, code_s, cloud_from(tgt_perm), code_t, eval);
    for (std::size_t i = 0; i < map.size(); ++i)
      CHECK(perm[static_cast<std::size_t>(map[i])] == map2[i]);
  }
}

TEST_CASE("single-point target absorbs every source point") {
  FieldEvaluator eval = make_evaluator();
  Rng rng(31);
  auto src_pts = random_points(10, rng);
  ShapeCode code_s = encode_cloud(eval, src_pts);
  geom::PointCloud tgt = cloud_from({Vec3(0.2, -0.1, 0.4)});

  std::vector<double> res;
  auto map = correspond_surface(cloud_from(src_pts), code_s, tgt, code_s, eval, &res);
  for (int idx : map) CHECK(idx == 0);
  auto tgt_image = eval.to_template(code_s, tgt.points)[0];
  auto src_images = eval.to_template(code_s, src_pts);
  for (std::size_t i = 0; i < src_pts.size(); ++i)
    CHECK(res[i] == doctest::Approx((src_images[i] - tgt_image).norm()).epsilon(1e-14));
}

TEST_CASE("self-correspondence on one cloud is the identity and idempotent") {
  FieldEvaluator eval = make_evaluator();
  Rng rng(41);
  auto pts = random_points(30, rng);
  geom::PointCloud cloud = cloud_from(pts);
  ShapeCode code = encode_cloud(eval, pts);

  auto map = correspond_surface(cloud, code, cloud, code, eval);
  for (std::size_t i = 0; i < map.size(); ++i) CHECK(map[i] == static_cast<int>(i));
  for (std::size_t i = 0; i < map.size(); ++i)
    CHECK(map[static_cast<std::size_t>(map[i])] == map[i]);
}

TEST_CASE("empty inputs are rejected") {
  FieldEvaluator eval = make_evaluator();
  Rng rng(3);
  auto pts = random_points(8, rng);
  ShapeCode code = encode_cloud(eval, pts);
  CHECK_THROWS_AS(correspond_surface(cloud_from({}), code, cloud_from(pts), code, eval),
                  Error);
  CHECK_THROWS_AS(correspond_surface(cloud_from(pts), code, cloud_from({}), code, eval),
                  Error);
  CHECK_THROWS_AS(correspond_spatial({}, code, geom::Aabb{Vec3::Zero(), Vec3::Ones()}, code, 4,
                                     eval),
                  Error);
}

TEST_CASE("spatial candidate lattice: extent, spacing, and cache shape") {
  FieldEvaluator eval = make_evaluator();
  Rng rng(7);
  auto pts = random_points(8, rng);
  ShapeCode code = encode_cloud(eval, pts);
  geom::Aabb bounds{Vec3(0, 0, 0), Vec3(1, 1, 1)};

  SpatialCandidates c = spatial_candidates(bounds, 4, code, eval);
  CHECK(c.grid.size() == 64);
  CHECK(c.template_images.size() == 64);
  CHECK(c.spacing == doctest::Approx(0.4).epsilon(1e-14));
  // The lattice covers the 1.2x-scaled box: corners at -0.1 and 1.1.
  geom::Aabb covered{c.grid.front(), c.grid.front()};
  for (const Vec3& g : c.grid) {
    covered.lo = covered.lo.cwiseMin(g);
    covered.hi = covered.hi.cwiseMax(g);
  }
  CHECK((covered.lo - Vec3(-0.1, -0.1, -0.1)).norm() < 1e-12);
  CHECK((covered.hi - Vec3(1.1, 1.1, 1.1)).norm() < 1e-12);

  SUBCASE("resolution below 2 and degenerate bounds are rejected") {
    CHECK_THROWS_AS(spatial_candidates(bounds, 1, code, eval), Error);
    geom::Aabb flat{Vec3(0, 0, 0), Vec3(1, 0, 1)};
    CHECK_THROWS_AS(spatial_candidates(flat, 4, code, eval), Error);
  }
}

TEST_CASE("spatial correspondence returns exact grid points matching the "
          "exhaustive argmin") {
  FieldEvaluator eval = make_evaluator();
  Rng rng(55);
  auto obj_pts = random_points(14, rng, 0.6);
  ShapeCode code_t = encode_cloud(eval, obj_pts);
  auto agent_src = random_points(9, rng, 0.9);
  auto agent_cloudish = random_points(12, rng);
  ShapeCode code_s = encode_cloud(eval, agent_cloudish);

  geom::Aabb bounds = cloud_from(obj_pts).bounds();
  SpatialCandidates c = spatial_candidates(bounds, 5, code_t, eval);

  std::vector<double> res;
  auto matched = correspond_spatial(agent_src, code_s, c, eval, &res);
  REQUIRE(matched.size() == agent_src.size());

  auto agent_images = eval.to_template(code_s, agent_src);
  for (std::size_t i = 0; i < agent_src.size(); ++i) {
    int expect = geom::NearestIndex::brute_force(c.template_images, agent_images[i]);
    const Vec3& g = c.grid[static_cast<std::size_t>(expect)];
    CHECK(matched[i].x() == g.x());
    CHECK(matched[i].y() == g.y());
    CHECK(matched[i].z() == g.z());
    CHECK(res[i] ==
          doctest::Approx(
              (agent_images[i] - c.template_images[static_cast<std::size_t>(expect)]).norm())
              .epsilon(1e-14));
  }

  SUBCASE("the convenience overload agrees with the cached path") {
    auto direct = correspond_spatial(agent_src, code_s, bounds, code_t, 5, eval);
    for (std::size_t i = 0; i < matched.size(); ++i)
      CHECK((direct[i] - matched[i]).norm() == 0.0);
  }
}

TEST_CASE("agent points on lattice nodes map to themselves under a shared code") {
  FieldEvaluator eval = make_evaluator();
  Rng rng(61);
  auto obj_pts = random_points(10, rng, 0.5);
  ShapeCode code = encode_cloud(eval, obj_pts);

  geom::Aabb bounds{Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5)};
  SpatialCandidates c = spatial_candidates(bounds, 4, code, eval);

  std::vector<Vec3> on_grid = {c.grid[5], c.grid[21], c.grid[40], c.grid[63]};
  auto matched = correspond_spatial(on_grid, code, c, eval);
  for (std::size_t i = 0; i < on_grid.size(); ++i)
    CHECK((matched[i] - on_grid[i]).norm() < 1e-12);
}

TEST_CASE("full correspondence bundle is congruent and deterministic") {
  FieldEvaluator eval = make_evaluator();
  Rng rng(71);
  auto src_pts = random_points(20, rng, 0.7);
  auto tgt_pts = random_points(16, rng, 0.65);
  auto agent_pts = random_points(11, rng);
  ShapeCode code_s = encode_cloud(eval, src_pts);
  ShapeCode code_t = encode_cloud(eval, tgt_pts);

  corr::Correspondence a = correspond(cloud_from(src_pts), code_s, agent_pts,
                                      cloud_from(tgt_pts), code_t, 6, eval);
  CHECK(a.surface.size() == src_pts.size());
  CHECK(a.surface_residual.size() == src_pts.size());
  CHECK(a.spatial.size() == agent_pts.size());
  CHECK(a.spatial_residual.size() == agent_pts.size());
  for (int idx : a.surface) {
    CHECK(idx >= 0);
    CHECK(idx < static_cast<int>(tgt_pts.size()));
  }
  // Spatial matches stay inside the 1.2x-scaled target bounds.
  geom::Aabb box = cloud_from(tgt_pts).bounds().scaled(1.2);
  for (const Vec3& p : a.spatial) {
    CHECK(p.x() >= box.lo.x() - 1e-12);
    CHECK(p.y() >= box.lo.y() - 1e-12);
    CHECK(p.z() >= box.lo.z() - 1e-12);
    CHECK(p.x() <= box.hi.x() + 1e-12);
    CHECK(p.y() <= box.hi.y() + 1e-12);
    CHECK(p.z() <= box.hi.z() + 1e-12);
  }

  corr::Correspondence b = correspond(cloud_from(src_pts), code_s, agent_pts,
                                      cloud_from(tgt_pts), code_t, 6, eval);
  CHECK(a.surface == b.surface);
  for (std::size_t i = 0; i < a.spatial.size(); ++i)
    CHECK((a.spatial[i] - b.spatial[i]).norm() == 0.0);
  CHECK(a.surface_residual == b.surface_residual);
  CHECK(a.spatial_residual == b.spatial_residual);
}
