#include "itx/geom/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "itx/util/error.hpp"
#include "itx/util/rng.hpp"

namespace itx::geom {

namespace {

// Thrown internally when a predicate lands inside its tolerance band; the
// driver catches it and retries the whole build on jittered points.
struct DegenerateConfig {};

// orient(a,b,c,d) = det[b-a; c-a; d-a].  Positive when the tetrahedron
// (a,b,c,d) is positively oriented (d on the side of plane (a,b,c) given by
// the right-hand rule on (b-a) x (c-a)).
double orient_det(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 u = b - a;
  const Vec3 v = c - a;
  const Vec3 w = d - a;
  return u.dot(v.cross(w));
}

// Row-wise magnitude bound on |det[b-a; c-a; d-a]|: the determinant is a sum
// of products taking one entry per row, so the product of per-row maxima
// bounds each term.  Per-row scales keep the tolerance meaningful when rows
// mix the unit-cube points with the far-away super-tetrahedron vertices.
double row_scale(const Vec3& r) { return std::max(r.cwiseAbs().maxCoeff(), 1e-15); }

double orient_tol(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return 1e-11 * row_scale(b - a) * row_scale(c - a) * row_scale(d - a);
}

// 4x4 determinant with rows (x-p, |x-p|^2) for x in {a,b,c,d}.  For a
// positively oriented tetrahedron (a,b,c,d) the determinant is NEGATIVE when
// p lies strictly inside the circumsphere and positive outside (checked
// against the canonical tetrahedron and its centroid).
double insphere_det(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& p) {
  const Vec3 ra = a - p;
  const Vec3 rb = b - p;
  const Vec3 rc = c - p;
  const Vec3 rd = d - p;
  Eigen::Matrix4d m;
  m << ra.x(), ra.y(), ra.z(), ra.squaredNorm(),  //
      rb.x(), rb.y(), rb.z(), rb.squaredNorm(),   //
      rc.x(), rc.y(), rc.z(), rc.squaredNorm(),   //
      rd.x(), rd.y(), rd.z(), rd.squaredNorm();
  return m.determinant();
}

struct Tetra {
  std::array<int, 4> v;    // vertex indices, positively oriented
  std::array<int, 4> nbr;  // nbr[i] = tet across the face opposite v[i], -1 if hull
  bool alive = true;
};

// Face opposite v[i], ordered so that orient(f0, f1, f2, v[i]) > 0.
constexpr int kFace[4][3] = {{1, 3, 2}, {0, 2, 3}, {0, 3, 1}, {0, 1, 2}};

class Builder {
 public:
  explicit Builder(const std::vector<Vec3>& pts) : pts_(pts) {
    const int n = static_cast<int>(pts_.size()) - 4;  // super vertices appended by caller
    tets_.reserve(static_cast<std::size_t>(8 * std::max(n, 1)));
    Tetra t0;
    t0.v = {n, n + 1, n + 2, n + 3};
    t0.nbr = {-1, -1, -1, -1};
    if (orient_det(pts_[t0.v[0]], pts_[t0.v[1]], pts_[t0.v[2]], pts_[t0.v[3]]) <= 0.0) {
      std::swap(t0.v[2], t0.v[3]);
    }
    tets_.push_back(t0);
    last_ = 0;
  }

  void insert(int pi) {
    const int start = locate(pi);
    const std::vector<int> cavity = grow_cavity(start, pi);
    retriangulate(cavity, pi);
  }

  const std::vector<Tetra>& tets() const { return tets_; }

 private:
  // Signed test with degeneracy detection: +1 positive side, -1 negative.
  int orient_sign(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) const {
    const double det = orient_det(a, b, c, d);
    if (std::abs(det) <= orient_tol(a, b, c, d)) throw DegenerateConfig{};
    return det > 0.0 ? 1 : -1;
  }

  bool in_circumsphere(const Tetra& t, const Vec3& p) const {
    const Vec3& a = pts_[t.v[0]];
    const Vec3& b = pts_[t.v[1]];
    const Vec3& c = pts_[t.v[2]];
    const Vec3& d = pts_[t.v[3]];
    const double det = insphere_det(a, b, c, d, p);
    // Rows are (x - p, |x - p|^2); the squared-norm column contributes one
    // extra factor of the largest row scale to the term bound.
    const double ma = row_scale(a - p);
    const double mb = row_scale(b - p);
    const double mc = row_scale(c - p);
    const double md = row_scale(d - p);
    const double tol = 1e-11 * ma * mb * mc * md * std::max({ma, mb, mc, md});
    if (std::abs(det) <= tol) throw DegenerateConfig{};
    return det < 0.0;
  }

  // Walk from the most recent tet toward the point; falls back to a linear
  // scan if the walk does not terminate (possible with perturbed predicates).
  int locate(int pi) const {
    const Vec3& p = pts_[static_cast<std::size_t>(pi)];
    int cur = last_;
    if (cur < 0 || !tets_[static_cast<std::size_t>(cur)].alive) cur = any_alive();
    const int max_steps = 4 * static_cast<int>(tets_.size()) + 16;
    for (int step = 0; step < max_steps; ++step) {
      const Tetra& t = tets_[static_cast<std::size_t>(cur)];
      double worst = -1.0;
      int worst_face = -1;
      bool inside = true;
      for (int f = 0; f < 4; ++f) {
        const Vec3& fa = pts_[t.v[kFace[f][0]]];
        const Vec3& fb = pts_[t.v[kFace[f][1]]];
        const Vec3& fc = pts_[t.v[kFace[f][2]]];
        const double det = orient_det(fa, fb, fc, p);
        const double tol = orient_tol(fa, fb, fc, p);
        if (det < -tol) {
          inside = false;
          // Steepest-descent choice keeps the walk from ping-ponging.
          const double badness = -det / std::max(tol, 1e-300);
          if (badness > worst) {
            worst = badness;
            worst_face = f;
          }
        }
      }
      if (inside) return cur;
      const int next = t.nbr[static_cast<std::size_t>(worst_face)];
      if (next < 0) throw DegenerateConfig{};  // outside the super-tet: numeric trouble
      cur = next;
    }
    // Linear fallback: first live tet containing the point within tolerance.
    for (std::size_t i = 0; i < tets_.size(); ++i) {
      if (!tets_[i].alive) continue;
      const Tetra& t = tets_[i];
      bool inside = true;
      for (int f = 0; f < 4 && inside; ++f) {
        const Vec3& fa = pts_[t.v[kFace[f][0]]];
        const Vec3& fb = pts_[t.v[kFace[f][1]]];
        const Vec3& fc = pts_[t.v[kFace[f][2]]];
        const double det = orient_det(fa, fb, fc, p);
        inside = det >= -orient_tol(fa, fb, fc, p);
      }
      if (inside) return static_cast<int>(i);
    }
    throw DegenerateConfig{};
  }

  int any_alive() const {
    for (std::size_t i = tets_.size(); i-- > 0;) {
      if (tets_[i].alive) return static_cast<int>(i);
    }
    throw Error("delaunay: no live tetrahedra during location");
  }

  // BFS over tets whose circumsphere contains the new point.
  std::vector<int> grow_cavity(int start, int pi) {
    const Vec3& p = pts_[static_cast<std::size_t>(pi)];
    std::vector<int> bad;
    std::vector<int> stack{start};
    in_cavity_.assign(tets_.size(), 0);
    in_cavity_[static_cast<std::size_t>(start)] = 1;
    while (!stack.empty()) {
      const int ti = stack.back();
      stack.pop_back();
      bad.push_back(ti);
      const Tetra t = tets_[static_cast<std::size_t>(ti)];
      for (int f = 0; f < 4; ++f) {
        const int nb = t.nbr[static_cast<std::size_t>(f)];
        if (nb < 0 || in_cavity_[static_cast<std::size_t>(nb)]) continue;
        if (in_circumsphere(tets_[static_cast<std::size_t>(nb)], p)) {
          in_cavity_[static_cast<std::size_t>(nb)] = 1;
          stack.push_back(nb);
        }
      }
    }
    return bad;
  }

  static std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  }

  void retriangulate(const std::vector<int>& cavity, int pi) {
    const Vec3& p = pts_[static_cast<std::size_t>(pi)];
    struct BoundaryFace {
      int a, b, c;   // ordered triple facing the cavity interior
      int outside;   // tet beyond the face (-1 on the super-tet hull)
      int out_face;  // that tet's face slot pointing back at the cavity
    };
    std::vector<BoundaryFace> boundary;
    for (const int ti : cavity) {
      const Tetra& t = tets_[static_cast<std::size_t>(ti)];
      for (int f = 0; f < 4; ++f) {
        const int nb = t.nbr[static_cast<std::size_t>(f)];
        if (nb >= 0 && in_cavity_[static_cast<std::size_t>(nb)]) continue;
        BoundaryFace bf;
        bf.a = t.v[kFace[f][0]];
        bf.b = t.v[kFace[f][1]];
        bf.c = t.v[kFace[f][2]];
        bf.outside = nb;
        bf.out_face = -1;
        if (nb >= 0) {
          const Tetra& o = tets_[static_cast<std::size_t>(nb)];
          for (int g = 0; g < 4; ++g) {
            if (o.nbr[static_cast<std::size_t>(g)] == ti) {
              bf.out_face = g;
              break;
            }
          }
          require(bf.out_face >= 0, "delaunay: inconsistent adjacency");
        }
        // The cavity is star-shaped around p, so p must see every boundary
        // face from its interior side; anything else is numeric failure.
        if (orient_sign(pts_[bf.a], pts_[bf.b], pts_[bf.c], p) <= 0) throw DegenerateConfig{};
        boundary.push_back(bf);
      }
    }

    for (const int ti : cavity) tets_[static_cast<std::size_t>(ti)].alive = false;

    // One new tet per boundary face, apex at the inserted point (vertex 3).
    std::unordered_map<std::uint64_t, std::pair<int, int>> half_face;
    half_face.reserve(boundary.size() * 3);
    const int first_new = static_cast<int>(tets_.size());
    for (const BoundaryFace& bf : boundary) {
      Tetra nt;
      nt.v = {bf.a, bf.b, bf.c, pi};
      nt.nbr = {-1, -1, -1, bf.outside};
      const int nti = static_cast<int>(tets_.size());
      if (bf.outside >= 0) {
        tets_[static_cast<std::size_t>(bf.outside)].nbr[static_cast<std::size_t>(bf.out_face)] =
            nti;
      }
      tets_.push_back(nt);
    }
    // Stitch the internal faces (each contains the apex plus one boundary
    // edge) by matching sorted boundary-edge keys.
    for (int i = first_new; i < static_cast<int>(tets_.size()); ++i) {
      Tetra& t = tets_[static_cast<std::size_t>(i)];
      for (int f = 0; f < 3; ++f) {  // faces opposite v0,v1,v2 contain the apex
        // The two non-apex vertices of face f form a boundary edge.
        int ev[2];
        int ne = 0;
        for (int s = 0; s < 3; ++s) {
          if (kFace[f][s] != 3) ev[ne++] = t.v[kFace[f][s]];
        }
        const std::uint64_t key = edge_key(ev[0], ev[1]);
        auto it = half_face.find(key);
        if (it == half_face.end()) {
          half_face.emplace(key, std::make_pair(i, f));
        } else {
          Tetra& o = tets_[static_cast<std::size_t>(it->second.first)];
          t.nbr[static_cast<std::size_t>(f)] = it->second.first;
          o.nbr[static_cast<std::size_t>(it->second.second)] = i;
          half_face.erase(it);
        }
      }
    }
    require(half_face.empty(), "delaunay: cavity boundary did not close");
    last_ = first_new;
  }

  const std::vector<Vec3>& pts_;
  std::vector<Tetra> tets_;
  std::vector<char> in_cavity_;
  int last_ = -1;
};

// Rejects inputs whose affine span has dimension < 3 (coincident, collinear
// or coplanar point sets), which no amount of jitter should rescue.
void check_full_dimension(const std::vector<Vec3>& pts) {
  const std::size_t n = pts.size();
  std::size_t i1 = 0;
  double best = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = (pts[i] - pts[0]).squaredNorm();
    if (d > best) {
      best = d;
      i1 = i;
    }
  }
  require(best > 1e-24, "delaunay: all points coincide");
  const Vec3 u = pts[i1] - pts[0];
  std::size_t i2 = 0;
  best = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = u.cross(pts[i] - pts[0]).squaredNorm();
    if (d > best) {
      best = d;
      i2 = i;
    }
  }
  require(best > 1e-24, "delaunay: input points are collinear");
  const Vec3 v = pts[i2] - pts[0];
  best = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = std::abs(u.cross(v).dot(pts[i] - pts[0]));
    if (d > best) best = d;
  }
  require(best > 1e-18, "delaunay: input points are coplanar");
}

}  // namespace

DelaunayResult delaunay_tetrahedralize(const std::vector<Vec3>& pts, std::uint64_t seed) {
  const int n = static_cast<int>(pts.size());
  require(n >= 4, "delaunay: need at least 4 points, got " + std::to_string(n));

  // Normalize into the unit cube; the Delaunay structure is scale-invariant
  // and this keeps the predicate tolerances meaningful.
  Aabb box;
  for (const Vec3& p : pts) box.expand(p);
  const double extent = box.extent().maxCoeff();
  require(extent > 0.0, "delaunay: all points coincide");
  const Vec3 lo = box.lo;
  std::vector<Vec3> base(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) base[i] = (pts[i] - lo) / extent;
  check_full_dimension(base);

  constexpr int kMaxJitter = 3;
  for (int attempt = 0; attempt <= kMaxJitter; ++attempt) {
    std::vector<Vec3> work = base;
    if (attempt > 0) {
      Rng rng(seed + static_cast<std::uint64_t>(attempt) * 0x9E3779B97F4A7C15ull + 1u);
      for (Vec3& p : work) {
        p.x() += rng.uniform(-1e-6, 1e-6);
        p.y() += rng.uniform(-1e-6, 1e-6);
        p.z() += rng.uniform(-1e-6, 1e-6);
      }
    }
    // Super-tetrahedron comfortably enclosing the unit cube.
    constexpr double c = 100.0;
    work.push_back(Vec3(-c, -c, -c));
    work.push_back(Vec3(3 * c, -c, -c));
    work.push_back(Vec3(-c, 3 * c, -c));
    work.push_back(Vec3(-c, -c, 3 * c));

    try {
      Builder builder(work);
      for (int i = 0; i < n; ++i) builder.insert(i);

      DelaunayResult out;
      out.jittered = attempt > 0;
      out.jitter_attempts = attempt;
      std::vector<std::uint64_t> ekeys;
      for (const Tetra& t : builder.tets()) {
        if (!t.alive) continue;
        if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n || t.v[3] >= n) continue;
        out.tets.push_back(t.v);
        for (int a = 0; a < 4; ++a) {
          for (int b = a + 1; b < 4; ++b) {
            const int lo_v = std::min(t.v[a], t.v[b]);
            const int hi_v = std::max(t.v[a], t.v[b]);
            ekeys.push_back((static_cast<std::uint64_t>(static_cast<std::uint32_t>(lo_v)) << 32) |
                            static_cast<std::uint32_t>(hi_v));
          }
        }
      }
      std::sort(ekeys.begin(), ekeys.end());
      ekeys.erase(std::unique(ekeys.begin(), ekeys.end()), ekeys.end());
      out.edges.reserve(ekeys.size());
      for (const std::uint64_t k : ekeys) {
        out.edges.emplace_back(static_cast<int>(k >> 32),
                               static_cast<int>(k & 0xFFFFFFFFull));
      }
      require(!out.tets.empty(), "delaunay: triangulation produced no tetrahedra");
      return out;
    } catch (const DegenerateConfig&) {
      continue;  // jitter and retry
    }
  }
  throw Error("delaunay: degenerate configuration persisted after " +
              std::to_string(kMaxJitter) + " jittered retries");
}

}  // namespace itx::geom
