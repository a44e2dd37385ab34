#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "itx/diff/param_set.hpp"
#include "itx/geom/types.hpp"

namespace itx::field {

using diff::Mat;
using diff::ParamSet;

// Architecture descriptor.  Fixed at parameter creation and serialized with
// checkpoints; all network builders take their dimensions from here.
//
// The encoder is a stack of rotation-equivariant layers over 3-vector feature
// channels: a linear layer mixes channels (left matrix multiply), and the
// nonlinearity gates each feature vector against a learned direction, so
// every intermediate transforms as F -> F Q^T when the input cloud rotates by
// Q.  Its input is a k-nearest-neighbor edge featurization (relative
// position, absolute position, their cross product) pooled edge->point->
// cloud, giving `code_rows` vector channels for the whole cloud.
//
// The deformation decoder is a perceptron whose weights are produced by a
// hypernetwork from the flattened invariant code; the template decoder is a
// plain perceptron shared across the category.  Both use softplus units
// (twice differentiable, as the gradient-based losses require).
struct FieldArch {
  int code_rows = 64;                              // K: vector channels in the code
  std::array<int, 4> encoder_widths = {32, 64, 64, 64};
  int knn = 16;                                    // encoder edge neighborhood size
  int hyper_hidden = 64;                           // hypernetwork hidden width
  int mlp_width = 128;                             // deform/template hidden width
  int mlp_layers = 5;                              // weight layers in deform/template
  double softplus_beta = 100.0;                    // activation sharpness

  int code_length() const { return 3 * code_rows; }
  // Per-layer (rows, cols) of the deformation decoder (input 3, output 4:
  // three deformation components plus the scalar correction).
  std::vector<std::pair<int, int>> deform_layer_shapes() const;
  // Per-layer (rows, cols) of the template decoder (input 3, output 1).
  std::vector<std::pair<int, int>> template_layer_shapes() const;

  bool operator==(const FieldArch& o) const;
};

// Named parameter collection plus its architecture.  Parameter names:
//   enc.l{i}.wq  / enc.l{i}.wd   equivariant layer weights (wd = gate
//                                 directions; absent on the final layer)
//   hyper.l{j}.wh / .bh / .wo / .bo   hypernetwork stages for deform layer j
//   tmpl.l{j}.w / .b              template decoder layers
struct RdifParams {
  FieldArch arch;
  ParamSet params;
};

// Invariant code and alignment rotation for one shape.
struct ShapeCode {
  Mat alpha;                       // [code_rows x 3], invariant to input rotation
  geom::Mat3 R;                    // alignment rotation (world -> template)
  bool degenerate_rotation = false;  // orthonormalization fell back to identity
};

// One field query, assembled as s = T(p_bar + v) + ds with p_bar = R p.
struct FieldEval {
  geom::Vec3 p_bar;
  geom::Vec3 v;
  double ds = 0.0;
  double s = 0.0;
};

// Deterministic parameter initialization:
//  - encoder layers scaled by fan-in, with the final layer near zero so the
//    heavily weighted code-regularization term starts tiny;
//  - hypernetwork output biases carry the decoder's native initialization
//    (so generated weights start at a standard perceptron init), with the
//    correction head's rows exactly zero so ds == 0 at initialization;
//  - template decoder uses a geometric initialization approximating the
//    signed distance of a sphere, a good basin for distance-field fitting.
RdifParams init_field_params(const FieldArch& arch, std::uint64_t seed);

// Gram-Schmidt rotation extraction from the first two code rows: normalize
// row 0, orthogonalize-and-normalize row 1, complete with the cross product.
// Rows shorter than 1e-8 (or parallel within it) set `degenerate` and return
// the identity.
geom::Mat3 extract_rotation(const Mat& feature_rows, bool& degenerate);

// k nearest neighbors (self excluded) per column of a [3 x n] point matrix,
// flattened row-major: entry i*k+m is the m-th neighbor of point i.  Ties on
// distance resolve to the lowest index.
std::vector<int> compute_knn(const Mat& points, int k);

// Encoder input featurization: for each point i and neighbor j, the three
// equivariant edge vectors (x_j - x_i, x_i, (x_j - x_i) x x_i) as one
// 3-column block; blocks ordered neighbor-fastest.  Shape [3 x 3*n*k].
Mat encoder_edge_features(const Mat& points, const std::vector<int>& knn, int k);

}  // namespace itx::field
