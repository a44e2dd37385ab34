#include "itx/geom/shape.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "itx/geom/sampling.hpp"
#include "itx/util/error.hpp"
#include "itx/util/rng.hpp"

namespace itx::geom {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sdf_local(PrimitiveKind kind, const Vec3& size, const Vec3& p) {
  switch (kind) {
    case PrimitiveKind::Sphere:
      return p.norm() - size.x();
    case PrimitiveKind::Box: {
      const Vec3 q = p.cwiseAbs() - size;
      const double outside = q.cwiseMax(0.0).norm();
      const double inside = std::min(q.maxCoeff(), 0.0);
      return outside + inside;
    }
    case PrimitiveKind::Cylinder: {
      const double dr = std::hypot(p.x(), p.y()) - size.x();
      const double dz = std::abs(p.z()) - size.y();
      const double outside = std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
      const double inside = std::min(std::max(dr, dz), 0.0);
      return outside + inside;
    }
    case PrimitiveKind::Capsule: {
      const double z = std::clamp(p.z(), -size.y(), size.y());
      return (p - Vec3(0.0, 0.0, z)).norm() - size.x();
    }
    case PrimitiveKind::Torus: {
      const double qx = std::hypot(p.x(), p.y()) - size.x();
      return std::hypot(qx, p.z()) - size.y();
    }
  }
  return 0.0;
}

}  // namespace

double Primitive::sdf(const Vec3& world_p) const {
  const Vec3 local = R.transpose() * (world_p - t);
  return sdf_local(kind, size, local);
}

double Primitive::surface_area() const {
  const double r = size.x();
  switch (kind) {
    case PrimitiveKind::Sphere:
      return 4.0 * kPi * r * r;
    case PrimitiveKind::Box: {
      const double a = size.x(), b = size.y(), c = size.z();
      return 8.0 * (a * b + b * c + a * c);
    }
    case PrimitiveKind::Cylinder:
      return 2.0 * kPi * r * (2.0 * size.y()) + 2.0 * kPi * r * r;
    case PrimitiveKind::Capsule:
      return 2.0 * kPi * r * (2.0 * size.y()) + 4.0 * kPi * r * r;
    case PrimitiveKind::Torus:
      return 4.0 * kPi * kPi * size.x() * size.y();
  }
  return 0.0;
}

Aabb Primitive::bounds() const {
  Aabb box;
  Vec3 ext = Vec3::Zero();
  switch (kind) {
    case PrimitiveKind::Sphere:
      ext = Vec3::Constant(size.x());
      break;
    case PrimitiveKind::Box:
      // Support of a rotated box: |R| * half extents.
      ext = R.cwiseAbs() * size;
      break;
    case PrimitiveKind::Cylinder:
    case PrimitiveKind::Capsule: {
      const Vec3 axis = R.col(2);
      const double r = size.x(), h = size.y();
      for (int i = 0; i < 3; ++i) {
        const double a = std::abs(axis[i]);
        const double disc = std::sqrt(std::max(0.0, 1.0 - a * a));
        ext[i] = kind == PrimitiveKind::Capsule ? h * a + r : h * a + r * disc;
      }
      break;
    }
    case PrimitiveKind::Torus: {
      const Vec3 axis = R.col(2);
      const double ring = size.x(), tube = size.y();
      for (int i = 0; i < 3; ++i) {
        const double a = std::abs(axis[i]);
        ext[i] = ring * std::sqrt(std::max(0.0, 1.0 - a * a)) + tube;
      }
      break;
    }
  }
  box.expand(t - ext);
  box.expand(t + ext);
  return box;
}

double AnalyticShape::sdf(const Vec3& p) const {
  require(!prims.empty(), "AnalyticShape::sdf: shape has no primitives");
  double best = std::numeric_limits<double>::max();
  for (const Primitive& prim : prims) best = std::min(best, prim.sdf(p));
  return best;
}

int AnalyticShape::nearest_primitive(const Vec3& p) const {
  require(!prims.empty(), "AnalyticShape::nearest_primitive: shape has no primitives");
  int best = 0;
  double best_d = prims[0].sdf(p);
  for (int i = 1; i < static_cast<int>(prims.size()); ++i) {
    const double d = prims[static_cast<std::size_t>(i)].sdf(p);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Vec3 AnalyticShape::sdf_gradient(const Vec3& p, double h) const {
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 dp = Vec3::Zero();
    dp[i] = h;
    g[i] = (sdf(p + dp) - sdf(p - dp)) / (2.0 * h);
  }
  return g;
}

Aabb AnalyticShape::bounds() const {
  Aabb box;
  for (const Primitive& prim : prims) box.expand(prim.bounds());
  return box;
}

namespace {

std::vector<Primitive> build_mug(const std::map<std::string, double>& p) {
  auto get = [&](const std::string& k) {
    auto it = p.find(k);
    require(it != p.end(), "mug parameters missing key '" + k + "'");
    return it->second;
  };
  const double rb = get("body_radius");
  const double height = get("body_height");
  const bool handle = get("handle") != 0.0;

  std::vector<Primitive> prims;
  Primitive body;
  body.kind = PrimitiveKind::Cylinder;
  body.size = Vec3(rb, height / 2.0, 0.0);
  body.label = "body";
  prims.push_back(body);

  if (handle) {
    double ring = get("handle_major");
    const double tube = get("handle_minor");
    // Keep the handle within the body height.
    ring = std::min(ring, 0.85 * height / 2.0 - tube);
    ring = std::max(ring, 2.5 * tube);
    Primitive h;
    h.kind = PrimitiveKind::Torus;
    h.size = Vec3(ring, tube, 0.0);
    // Ring plane vertical, attached to the +x side of the body wall.
    h.R = Eigen::AngleAxisd(-kPi / 2.0, Vec3::UnitX()).toRotationMatrix();
    h.t = Vec3(rb, 0.0, 0.0);
    h.label = "handle";
    prims.push_back(h);
  }
  return prims;
}

std::vector<Primitive> build_chair(const std::map<std::string, double>& p) {
  auto get = [&](const std::string& k) {
    auto it = p.find(k);
    require(it != p.end(), "chair parameters missing key '" + k + "'");
    return it->second;
  };
  const double sw = get("seat_w"), sd = get("seat_d"), st = get("seat_t");
  const double leg_h = get("leg_h"), leg_t = get("leg_t");
  const double back_h = get("back_h"), back_t = get("back_t");
  const bool arms = get("arms") != 0.0;

  std::vector<Primitive> prims;
  Primitive seat;
  seat.kind = PrimitiveKind::Box;
  seat.size = Vec3(sw, sd, st / 2.0);
  seat.t = Vec3(0.0, 0.0, leg_h + st / 2.0);
  seat.label = "seat";
  prims.push_back(seat);

  int leg_id = 0;
  for (const double sx : {-1.0, 1.0}) {
    for (const double sy : {-1.0, 1.0}) {
      Primitive leg;
      leg.kind = PrimitiveKind::Box;
      leg.size = Vec3(leg_t / 2.0, leg_t / 2.0, leg_h / 2.0);
      leg.t = Vec3(sx * (sw - leg_t), sy * (sd - leg_t), leg_h / 2.0);
      leg.label = "leg" + std::to_string(leg_id++);
      prims.push_back(leg);
    }
  }

  const double seat_top = leg_h + st;
  Primitive back;
  back.kind = PrimitiveKind::Box;
  back.size = Vec3(sw, back_t / 2.0, back_h / 2.0);
  back.t = Vec3(0.0, -(sd - back_t / 2.0), seat_top + back_h / 2.0);
  back.label = "back";
  prims.push_back(back);

  if (arms) {
    const double at = get("arm_t"), ah = get("arm_h");
    for (int side = 0; side < 2; ++side) {
      const double sx = side == 0 ? -1.0 : 1.0;
      Primitive pad;
      pad.kind = PrimitiveKind::Box;
      pad.size = Vec3(at / 2.0, 0.75 * sd, at / 2.0);
      pad.t = Vec3(sx * (sw + at / 2.0), -0.1 * sd, seat_top + ah + at / 2.0);
      pad.label = "arm" + std::to_string(side);
      prims.push_back(pad);

      Primitive post;
      post.kind = PrimitiveKind::Box;
      post.size = Vec3(at / 2.0, at / 2.0, ah / 2.0);
      post.t = Vec3(sx * (sw + at / 2.0), 0.5 * sd, seat_top + ah / 2.0);
      post.label = "armpost" + std::to_string(side);
      prims.push_back(post);
    }
  }
  return prims;
}

}  // namespace

AnalyticShape build_family_shape(const std::string& family,
                                 const std::map<std::string, double>& params,
                                 std::uint64_t seed) {
  AnalyticShape shape;
  shape.family = family;
  shape.params = params;
  shape.seed = seed;
  if (family == "mug") {
    shape.prims = build_mug(params);
  } else if (family == "chair") {
    shape.prims = build_chair(params);
  } else {
    throw Error("build_family_shape: unknown family '" + family + "'");
  }

  // Normalize: max extent 1, bounding box centered.
  Aabb box = shape.bounds();
  const double extent = box.extent().maxCoeff();
  require(extent > 0.0, "build_family_shape: degenerate shape extent");
  const double s = 1.0 / extent;
  const Vec3 c0 = box.center();
  for (Primitive& prim : shape.prims) {
    prim.t = s * (prim.t - c0);
    prim.size *= s;
  }

  // Recenter so the canonical surface-sample centroid is the origin.  The
  // samples live in primitive-local frames, so translating every primitive
  // moves the canonical sample set rigidly: one correction is exact.
  const auto canonical = detail::raw_surface_samples(shape, 4096, 0xC0FFEEull, nullptr);
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& q : canonical) centroid += q;
  centroid /= static_cast<double>(canonical.size());
  for (Primitive& prim : shape.prims) prim.t -= centroid;
  return shape;
}

AnalyticShape generate_shape(const std::string& family, std::uint64_t seed) {
  Rng rng(seed ^ 0x51A9E5ull);
  std::map<std::string, double> p;
  if (family == "mug") {
    p["body_radius"] = rng.uniform(0.25, 0.45);
    p["body_height"] = rng.uniform(0.5, 1.0);
    const double u = rng.uniform();
    p["handle"] = u < 0.8 ? 1.0 : 0.0;
    p["handle_major"] = rng.uniform(0.16, 0.26);
    p["handle_minor"] = rng.uniform(0.035, 0.06);
  } else if (family == "chair") {
    p["seat_w"] = rng.uniform(0.25, 0.40);
    p["seat_d"] = rng.uniform(0.25, 0.40);
    p["seat_t"] = rng.uniform(0.03, 0.06);
    p["leg_h"] = rng.uniform(0.30, 0.50);
    p["leg_t"] = rng.uniform(0.03, 0.05);
    p["back_h"] = rng.uniform(0.40, 0.70);
    p["back_t"] = rng.uniform(0.03, 0.06);
    const double u = rng.uniform();
    p["arms"] = u < 0.5 ? 1.0 : 0.0;
    p["arm_t"] = rng.uniform(0.025, 0.04);
    p["arm_h"] = rng.uniform(0.15, 0.25);
  } else {
    throw Error("generate_shape: unknown family '" + family + "'");
  }
  return build_family_shape(family, p, seed);
}

void save_shape(const AnalyticShape& shape, const std::string& path) {
  require(shape.family == "mug" || shape.family == "chair",
          "save_shape: only family shapes are serializable");
  std::ofstream out(path);
  if (!out) throw IoError("save_shape: cannot open '" + path + "'");
  out << "family = " << shape.family << "\n";
  out << "seed = " << shape.seed << "\n";
  char buf[64];
  for (const auto& [k, v] : shape.params) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << k << " = " << buf << "\n";
  }
  if (!out) throw IoError("save_shape: write failed for '" + path + "'");
}

AnalyticShape load_shape(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_shape: cannot open '" + path + "'");
  std::string family;
  std::uint64_t seed = 0;
  std::map<std::string, double> params;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // Trim.
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!line.empty() && is_space(line.back())) line.pop_back();
    std::size_t b = 0;
    while (b < line.size() && is_space(line[b])) ++b;
    line = line.substr(b);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("load_shape: malformed line " + std::to_string(lineno) + " in '" + path + "'");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    while (!key.empty() && is_space(key.back())) key.pop_back();
    std::size_t vb = 0;
    while (vb < val.size() && is_space(val[vb])) ++vb;
    val = val.substr(vb);
    if (key == "family") {
      family = val;
    } else if (key == "seed") {
      seed = std::stoull(val);
    } else {
      try {
        params[key] = std::stod(val);
      } catch (const std::exception&) {
        throw IoError("load_shape: bad numeric value for '" + key + "' in '" + path + "'");
      }
    }
  }
  require(!family.empty(), "load_shape: missing 'family' in '" + path + "'");
  return build_family_shape(family, params, seed);
}

}  // namespace itx::geom
