#include "itx/field/model.hpp"

#include <algorithm>
#include <cmath>

#include "itx/util/error.hpp"
#include "itx/util/rng.hpp"

namespace itx::field {

std::vector<std::pair<int, int>> FieldArch::deform_layer_shapes() const {
  std::vector<std::pair<int, int>> shapes;
  for (int j = 0; j < mlp_layers; ++j) {
    const int in = (j == 0) ? 3 : mlp_width;
    const int out = (j == mlp_layers - 1) ? 4 : mlp_width;
    shapes.emplace_back(out, in);
  }
  return shapes;
}

std::vector<std::pair<int, int>> FieldArch::template_layer_shapes() const {
  std::vector<std::pair<int, int>> shapes;
  for (int j = 0; j < mlp_layers; ++j) {
    const int in = (j == 0) ? 3 : mlp_width;
    const int out = (j == mlp_layers - 1) ? 1 : mlp_width;
    shapes.emplace_back(out, in);
  }
  return shapes;
}

bool FieldArch::operator==(const FieldArch& o) const {
  return code_rows == o.code_rows && encoder_widths == o.encoder_widths && knn == o.knn &&
         hyper_hidden == o.hyper_hidden && mlp_width == o.mlp_width &&
         mlp_layers == o.mlp_layers && softplus_beta == o.softplus_beta;
}

namespace {

Mat gaussian(Rng& rng, int rows, int cols, double scale) {
  Mat m(rows, cols);
  // Column-major fill order, matching Eigen storage and the checkpoint layout.
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = scale * rng.normal();
  return m;
}

}  // namespace

RdifParams init_field_params(const FieldArch& arch, std::uint64_t seed) {
  require(arch.code_rows >= 2, "field: code_rows must be at least 2");
  require(arch.encoder_widths.back() == arch.code_rows,
          "field: the final encoder width must equal code_rows");
  require(arch.mlp_layers >= 2, "field: mlp_layers must be at least 2");
  require(arch.knn >= 1, "field: knn must be positive");
  RdifParams rp;
  rp.arch = arch;
  Rng rng(seed);

  // Equivariant encoder.  Gate directions (wd) exist on all but the final
  // layer, which stays linear ahead of the global mean pooling.  The final
  // layer starts near zero so the code (and with it the strongly weighted
  // code-regularization loss) starts near zero.
  int enc_in = 3;
  const int n_enc = static_cast<int>(arch.encoder_widths.size());
  for (int i = 0; i < n_enc; ++i) {
    const int out = arch.encoder_widths[i];
    const bool last = (i == n_enc - 1);
    const double s = (last ? 1e-3 : 1.0) / std::sqrt(static_cast<double>(enc_in));
    rp.params.add("enc.l" + std::to_string(i) + ".wq", gaussian(rng, out, enc_in, s));
    if (!last)
      rp.params.add("enc.l" + std::to_string(i) + ".wd",
                    gaussian(rng, out, enc_in, 1.0 / std::sqrt(static_cast<double>(enc_in))));
    enc_in = out;
  }

  // Hypernetwork: per deformation-decoder layer, a two-stage perceptron
  // code -> hidden (tanh) -> flattened (weights, bias).  Output biases carry
  // the decoder's native initialization so the generated decoder starts as a
  // standard perceptron; with hidden biases at zero and the code near zero,
  // the generated weights initially equal those biases.  The final decoder
  // layer's deformation rows start small (near-identity deformation) and its
  // correction row starts exactly zero, as do the hypernetwork output rows
  // that produce it, so the correction is exactly zero at initialization.
  const auto dshapes = arch.deform_layer_shapes();
  const int code_len = arch.code_length();
  for (int j = 0; j < arch.mlp_layers; ++j) {
    const auto [out, in] = dshapes[static_cast<std::size_t>(j)];
    const int flat = out * in + out;
    const std::string base = "hyper.l" + std::to_string(j) + ".";
    rp.params.add(base + "wh", gaussian(rng, arch.hyper_hidden, code_len,
                                        1.0 / std::sqrt(static_cast<double>(code_len))));
    rp.params.add(base + "bh", Mat::Zero(arch.hyper_hidden, 1));
    Mat wo = gaussian(rng, flat, arch.hyper_hidden,
                      1e-2 / std::sqrt(static_cast<double>(arch.hyper_hidden)));
    Mat bo(flat, 1);
    const bool final_layer = (j == arch.mlp_layers - 1);
    const double gain = final_layer ? 1e-3 : std::sqrt(2.0);
    const double wscale = gain / std::sqrt(static_cast<double>(in));
    for (int c = 0; c < in; ++c)
      for (int r = 0; r < out; ++r) bo(c * out + r, 0) = wscale * rng.normal();
    for (int r = 0; r < out; ++r) bo(out * in + r, 0) = 0.0;
    if (final_layer) {
      for (int c = 0; c < in; ++c) {
        bo(c * out + 3, 0) = 0.0;
        wo.row(c * out + 3).setZero();
      }
      wo.row(out * in + 3).setZero();
    }
    rp.params.add(base + "wo", std::move(wo));
    rp.params.add(base + "bo", std::move(bo));
  }

  // Template decoder: geometric initialization approximating the signed
  // distance to a sphere of radius 0.5 (hidden weights at ReLU-style scale,
  // final weights centered at sqrt(pi/in) with a small spread, final bias at
  // minus the radius).
  const auto tshapes = arch.template_layer_shapes();
  for (int j = 0; j < arch.mlp_layers; ++j) {
    const auto [out, in] = tshapes[static_cast<std::size_t>(j)];
    const std::string base = "tmpl.l" + std::to_string(j) + ".";
    const bool final_layer = (j == arch.mlp_layers - 1);
    if (!final_layer) {
      rp.params.add(base + "w",
                    gaussian(rng, out, in, std::sqrt(2.0 / static_cast<double>(in))));
      rp.params.add(base + "b", Mat::Zero(out, 1));
    } else {
      const double mu = std::sqrt(M_PI / static_cast<double>(in));
      Mat w = gaussian(rng, out, in, 1e-5);
      w.array() += mu;
      rp.params.add(base + "w", std::move(w));
      rp.params.add(base + "b", Mat::Constant(out, 1, -0.5));
    }
  }

  return rp;
}

geom::Mat3 extract_rotation(const Mat& feature_rows, bool& degenerate) {
  require(feature_rows.rows() >= 2 && feature_rows.cols() == 3,
          "extract_rotation: need at least two 3-vector rows");
  degenerate = false;
  const geom::Vec3 f0 = feature_rows.row(0).transpose();
  const geom::Vec3 f1 = feature_rows.row(1).transpose();
  const double n0 = f0.norm();
  if (n0 < 1e-8) {
    degenerate = true;
    return geom::Mat3::Identity();
  }
  const geom::Vec3 r0 = f0 / n0;
  const geom::Vec3 u = f1 - f1.dot(r0) * r0;
  const double n1 = u.norm();
  if (n1 < 1e-8) {
    degenerate = true;
    return geom::Mat3::Identity();
  }
  const geom::Vec3 r1 = u / n1;
  const geom::Vec3 r2 = r0.cross(r1);
  geom::Mat3 R;
  R.row(0) = r0.transpose();
  R.row(1) = r1.transpose();
  R.row(2) = r2.transpose();
  return R;
}

std::vector<int> compute_knn(const Mat& points, int k) {
  const int n = static_cast<int>(points.cols());
  require(points.rows() == 3, "compute_knn: points must be 3 x n");
  require(k >= 1 && k < n, "compute_knn: need 1 <= k < point count");
  std::vector<int> out(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
  std::vector<std::pair<double, int>> cand;
  cand.reserve(static_cast<std::size_t>(n) - 1);
  for (int i = 0; i < n; ++i) {
    cand.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      cand.emplace_back((points.col(j) - points.col(i)).squaredNorm(), j);
    }
    std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
    std::sort(cand.begin(), cand.begin() + k);
    for (int m = 0; m < k; ++m) out[static_cast<std::size_t>(i) * k + m] = cand[m].second;
  }
  return out;
}

Mat encoder_edge_features(const Mat& points, const std::vector<int>& knn, int k) {
  const int n = static_cast<int>(points.cols());
  require(points.rows() == 3, "encoder_edge_features: points must be 3 x n");
  require(static_cast<int>(knn.size()) == n * k, "encoder_edge_features: knn size mismatch");
  Mat feats(3, 3 * static_cast<Eigen::Index>(n) * k);
  for (int i = 0; i < n; ++i) {
    const geom::Vec3 xi = points.col(i);
    for (int m = 0; m < k; ++m) {
      const int j = knn[static_cast<std::size_t>(i) * k + m];
      const geom::Vec3 rel = geom::Vec3(points.col(j)) - xi;
      const Eigen::Index c0 = 3 * (static_cast<Eigen::Index>(i) * k + m);
      feats.block<1, 3>(0, c0) = rel.transpose();
      feats.block<1, 3>(1, c0) = xi.transpose();
      feats.block<1, 3>(2, c0) = rel.cross(xi).transpose();
    }
  }
  return feats;
}

}  // namespace itx::field
