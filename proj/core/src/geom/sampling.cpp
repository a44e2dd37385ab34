#include "itx/geom/sampling.hpp"

#include <cmath>

#include "itx/util/error.hpp"
#include "itx/util/rng.hpp"

namespace itx::geom {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 sample_primitive_local(const Primitive& prim, Rng& rng) {
  const double r = prim.size.x();
  switch (prim.kind) {
    case PrimitiveKind::Sphere: {
      const double u = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 2.0 * kPi);
      const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
      return r * Vec3(s * std::cos(phi), s * std::sin(phi), u);
    }
    case PrimitiveKind::Box: {
      const Vec3 he = prim.size;
      const double ax = he.y() * he.z(), ay = he.x() * he.z(), az = he.x() * he.y();
      const double total = 2.0 * (ax + ay + az);
      double pick = rng.uniform(0.0, total);
      const double u = rng.uniform(-1.0, 1.0);
      const double v = rng.uniform(-1.0, 1.0);
      for (int axis = 0; axis < 3; ++axis) {
        const double a = axis == 0 ? ax : (axis == 1 ? ay : az);
        for (double sign : {-1.0, 1.0}) {
          if (pick < a || (axis == 2 && sign > 0.0)) {
            Vec3 p;
            p[axis] = sign * he[axis];
            p[(axis + 1) % 3] = u * he[(axis + 1) % 3];
            p[(axis + 2) % 3] = v * he[(axis + 2) % 3];
            return p;
          }
          pick -= a;
        }
      }
      return Vec3::Zero();
    }
    case PrimitiveKind::Cylinder: {
      const double h = prim.size.y();
      const double side = 2.0 * kPi * r * (2.0 * h);
      const double caps = 2.0 * kPi * r * r;
      const double phi = rng.uniform(0.0, 2.0 * kPi);
      if (rng.uniform(0.0, side + caps) < side) {
        const double z = rng.uniform(-h, h);
        return Vec3(r * std::cos(phi), r * std::sin(phi), z);
      }
      const double rho = r * std::sqrt(rng.uniform());
      const double z = rng.uniform() < 0.5 ? -h : h;
      return Vec3(rho * std::cos(phi), rho * std::sin(phi), z);
    }
    case PrimitiveKind::Capsule: {
      const double h = prim.size.y();
      const double side = 2.0 * kPi * r * (2.0 * h);
      const double caps = 4.0 * kPi * r * r;
      const double phi = rng.uniform(0.0, 2.0 * kPi);
      if (rng.uniform(0.0, side + caps) < side) {
        const double z = rng.uniform(-h, h);
        return Vec3(r * std::cos(phi), r * std::sin(phi), z);
      }
      const double u = rng.uniform(-1.0, 1.0);
      const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
      Vec3 p = r * Vec3(s * std::cos(phi), s * std::sin(phi), u);
      p.z() += u >= 0.0 ? h : -h;
      return p;
    }
    case PrimitiveKind::Torus: {
      const double ring = prim.size.x(), tube = prim.size.y();
      const double theta = rng.uniform(0.0, 2.0 * kPi);
      double phi = 0.0;
      // Rejection against the circumference weight (ring + tube cos phi).
      for (;;) {
        phi = rng.uniform(0.0, 2.0 * kPi);
        const double w = (ring + tube * std::cos(phi)) / (ring + tube);
        if (rng.uniform() <= w) break;
      }
      const double rad = ring + tube * std::cos(phi);
      return Vec3(rad * std::cos(theta), rad * std::sin(theta), tube * std::sin(phi));
    }
  }
  return Vec3::Zero();
}

// Newton projection onto the zero level set.
Vec3 project_to_surface(const AnalyticShape& shape, Vec3 p) {
  for (int it = 0; it < 8; ++it) {
    const double d = shape.sdf(p);
    if (std::abs(d) < 1e-9) break;
    Vec3 g = shape.sdf_gradient(p);
    const double gn = g.squaredNorm();
    if (gn < 1e-12) break;
    p -= d * g / gn;
  }
  return p;
}

}  // namespace

namespace detail {

std::vector<Vec3> raw_surface_samples(const AnalyticShape& shape, int n, std::uint64_t seed,
                                      std::vector<int>* labels) {
  require(n > 0, "raw_surface_samples: n must be positive");
  require(!shape.prims.empty(), "raw_surface_samples: shape has no primitives");
  Rng rng(seed);

  std::vector<double> cumulative;
  double total = 0.0;
  for (const Primitive& prim : shape.prims) {
    total += prim.surface_area();
    cumulative.push_back(total);
  }
  require(total > 0.0, "raw_surface_samples: zero total surface area");

  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  if (labels) labels->clear();
  long attempts = 0;
  const long max_attempts = 1000L * n + 100000L;
  while (static_cast<int>(out.size()) < n) {
    require(++attempts <= max_attempts,
            "raw_surface_samples: rejection sampling failed to converge");
    const double pick = rng.uniform(0.0, total);
    std::size_t pi = 0;
    while (pi + 1 < cumulative.size() && pick >= cumulative[pi]) ++pi;
    const Primitive& prim = shape.prims[pi];
    const Vec3 local = sample_primitive_local(prim, rng);
    const Vec3 world = prim.R * local + prim.t;
    // Keep boundary points of the union only (not interior to another part).
    if (shape.sdf(world) > -1e-9) {
      out.push_back(world);
      if (labels) labels->push_back(static_cast<int>(pi));
    }
  }
  return out;
}

}  // namespace detail

namespace {

PointCloud finish_surface_cloud(const AnalyticShape& shape, std::vector<Vec3> pts,
                                std::vector<int>* labels) {
  const double n_inv = 1.0 / static_cast<double>(pts.size());
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : pts) centroid += p;
  centroid *= n_inv;

  // Centering: shift out the residual centroid, re-project onto the surface,
  // repeat.  The projection pulls part of the shift back, so this is a fixed
  // point iteration with contraction factor |mean(n n^T)| < 1.
  if (centroid.norm() < 0.2) {
    for (int round = 0; round < 80 && centroid.norm() >= 1e-7; ++round) {
      for (Vec3& p : pts) p = project_to_surface(shape, p - centroid);
      centroid = Vec3::Zero();
      for (const Vec3& p : pts) centroid += p;
      centroid *= n_inv;
    }
  }

  PointCloud cloud;
  cloud.points = std::move(pts);
  cloud.normals.resize(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    Vec3 g = shape.sdf_gradient(cloud.points[i]);
    const double gn = g.norm();
    cloud.normals[i] = gn > 1e-12 ? Vec3(g / gn) : Vec3::UnitZ();
  }
  if (labels) {
    labels->resize(cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
      (*labels)[i] = shape.nearest_primitive(cloud.points[i]);
  }
  return cloud;
}

}  // namespace

PointCloud sample_surface(const AnalyticShape& shape, int n, std::uint64_t seed) {
  auto pts = detail::raw_surface_samples(shape, n, seed, nullptr);
  return finish_surface_cloud(shape, std::move(pts), nullptr);
}

PointCloud sample_surface_labeled(const AnalyticShape& shape, int n, std::uint64_t seed,
                                  std::vector<int>& labels) {
  auto pts = detail::raw_surface_samples(shape, n, seed, nullptr);
  return finish_surface_cloud(shape, std::move(pts), &labels);
}

std::vector<Vec3> sample_grid(const Aabb& box, int res) {
  require(res >= 2, "sample_grid: resolution must be at least 2");
  require(box.valid(), "sample_grid: invalid box");
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(res) * res * res);
  const Vec3 lo = box.lo, ext = box.extent();
  const double denom = static_cast<double>(res - 1);
  for (int iz = 0; iz < res; ++iz) {
    for (int iy = 0; iy < res; ++iy) {
      for (int ix = 0; ix < res; ++ix) {
        out.emplace_back(lo.x() + ext.x() * ix / denom, lo.y() + ext.y() * iy / denom,
                         lo.z() + ext.z() * iz / denom);
      }
    }
  }
  return out;
}

FreeSamples sample_free_space(const AnalyticShape& shape, int n, std::uint64_t seed,
                              double box_scale) {
  require(n > 0, "sample_free_space: n must be positive");
  const Aabb box = shape.bounds().scaled(box_scale);
  Rng rng(seed);
  FreeSamples out;
  out.points.reserve(static_cast<std::size_t>(n));
  out.sdf.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Vec3 p(rng.uniform(box.lo.x(), box.hi.x()), rng.uniform(box.lo.y(), box.hi.y()),
                 rng.uniform(box.lo.z(), box.hi.z()));
    out.points.push_back(p);
    out.sdf.push_back(shape.sdf(p));
  }
  return out;
}

}  // namespace itx::geom
