#include "itx/geom/point_cloud.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "itx/util/error.hpp"

namespace itx::geom {

Vec3 PointCloud::centroid() const {
  Vec3 c = Vec3::Zero();
  if (points.empty()) return c;
  for (const Vec3& p : points) c += p;
  return c / static_cast<double>(points.size());
}

Aabb PointCloud::bounds() const {
  Aabb box;
  for (const Vec3& p : points) box.expand(p);
  return box;
}

void PointCloud::validate(bool require_normals, bool check_centered, double normal_tol,
                          double center_tol) const {
  if (has_normals() && normals.size() != points.size())
    throw Error("PointCloud: " + std::to_string(points.size()) + " points but " +
                std::to_string(normals.size()) + " normals");
  if (require_normals && !has_normals())
    throw Error("PointCloud: normals required but absent");
  if (has_normals()) {
    for (std::size_t i = 0; i < normals.size(); ++i) {
      const double len = normals[i].norm();
      if (std::abs(len - 1.0) > normal_tol)
        throw Error("PointCloud: normal " + std::to_string(i) + " has length " +
                    std::to_string(len));
    }
  }
  if (check_centered) {
    const double c = centroid().norm();
    if (c > center_tol)
      throw Error("PointCloud: centroid magnitude " + std::to_string(c) +
                  " exceeds tolerance");
  }
}

namespace {

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void save_ply(const PointCloud& cloud, const std::string& path, const std::vector<int>* labels) {
  if (labels) require(labels->size() == cloud.points.size(), "save_ply: label count mismatch");
  require(!cloud.has_normals() || cloud.normals.size() == cloud.points.size(),
          "save_ply: normal count mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("save_ply: cannot open '" + path + "'");
  out << "ply\nformat ascii 1.0\ncomment itx point cloud\n";
  out << "element vertex " << cloud.points.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals())
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (labels) out << "property int label\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << fmt9(p.x()) << ' ' << fmt9(p.y()) << ' ' << fmt9(p.z());
    if (cloud.has_normals()) {
      const Vec3& n = cloud.normals[i];
      out << ' ' << fmt9(n.x()) << ' ' << fmt9(n.y()) << ' ' << fmt9(n.z());
    }
    if (labels) out << ' ' << (*labels)[i];
    out << '\n';
  }
  if (!out) throw IoError("save_ply: write failed for '" + path + "'");
}

PointCloud load_ply(const std::string& path, std::vector<int>* labels) {
  std::ifstream in(path);
  if (!in) throw IoError("load_ply: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "ply")
    throw IoError("load_ply: '" + path + "' is not a PLY file");

  long n_vertices = -1;
  bool ascii = false;
  std::vector<std::string> props;
  bool in_vertex_element = false;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string kind;
      ls >> kind;
      ascii = kind == "ascii";
    } else if (tok == "comment") {
      continue;
    } else if (tok == "element") {
      std::string name;
      long count = 0;
      ls >> name >> count;
      in_vertex_element = name == "vertex";
      if (in_vertex_element) n_vertices = count;
      else if (count != 0)
        throw IoError("load_ply: unsupported element '" + name + "' in '" + path + "'");
    } else if (tok == "property") {
      if (!in_vertex_element) continue;
      std::string type, name;
      ls >> type >> name;
      if (type == "list") throw IoError("load_ply: list properties unsupported in '" + path + "'");
      props.push_back(name);
    } else if (!tok.empty()) {
      throw IoError("load_ply: malformed header line '" + line + "' in '" + path + "'");
    }
  }
  if (!ascii) throw IoError("load_ply: only ascii PLY is supported ('" + path + "')");
  if (n_vertices < 0) throw IoError("load_ply: missing vertex element in '" + path + "'");

  auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  if (ix < 0 || iy < 0 || iz < 0)
    throw IoError("load_ply: x/y/z properties missing in '" + path + "'");
  const int inx = index_of("nx"), iny = index_of("ny"), inz = index_of("nz");
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;
  const int il = index_of("label");

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(n_vertices));
  if (has_normals) cloud.normals.reserve(static_cast<std::size_t>(n_vertices));
  if (labels) labels->clear();
  std::vector<double> row(props.size());
  for (long v = 0; v < n_vertices; ++v) {
    if (!std::getline(in, line))
      throw IoError("load_ply: unexpected end of data in '" + path + "'");
    std::istringstream ls(line);
    for (std::size_t c = 0; c < props.size(); ++c) {
      if (!(ls >> row[c]))
        throw IoError("load_ply: malformed vertex row " + std::to_string(v) + " in '" + path +
                      "'");
    }
    cloud.points.emplace_back(row[ix], row[iy], row[iz]);
    if (has_normals) {
      Vec3 n(row[inx], row[iny], row[inz]);
      const double len = n.norm();
      if (len < 1e-12)
        throw IoError("load_ply: zero normal at vertex " + std::to_string(v) + " in '" + path +
                      "'");
      cloud.normals.push_back(n / len);
    }
    if (labels && il >= 0) labels->push_back(static_cast<int>(row[static_cast<std::size_t>(il)]));
  }
  return cloud;
}

void save_obj(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_obj: cannot open '" + path + "'");
  out << "# itx point cloud (vertices only)\n";
  for (const Vec3& p : cloud.points)
    out << "v " << fmt9(p.x()) << ' ' << fmt9(p.y()) << ' ' << fmt9(p.z()) << '\n';
  if (!out) throw IoError("save_obj: write failed for '" + path + "'");
}

PointCloud load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_obj: cannot open '" + path + "'");
  PointCloud cloud;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "v") {
      double x = 0, y = 0, z = 0;
      if (!(ls >> x >> y >> z))
        throw IoError("load_obj: malformed vertex at line " + std::to_string(lineno) + " in '" +
                      path + "'");
      cloud.points.emplace_back(x, y, z);
    }
    // Other record types (vn, f, ...) are ignored.
  }
  return cloud;
}

}  // namespace itx::geom
