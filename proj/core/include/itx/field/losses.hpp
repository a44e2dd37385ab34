#pragma once

#include <vector>

#include "itx/field/network.hpp"

namespace itx::field {

// Loss weighting.  The distance-fitting composite combines four terms (value
// regression, gradient/normal agreement on the surface, unit-gradient
// residual, and an off-surface repulsion exp(-sharpness*|s|)); the total adds
// the template-normal consistency, deformation-smoothness, correction-
// magnitude, and code-norm terms on top.  All raw terms are means over their
// sample sets except the code norm, which is the squared Frobenius norm.
struct LossWeights {
  double sdf_value = 3e3;
  double sdf_normal = 1e2;
  double sdf_eikonal = 5e1;
  double sdf_off_surface = 5e2;
  double off_surface_sharpness = 1e2;

  double normal_consistency = 1e2;
  double deform_smooth = 5.0;
  double correction_magnitude = 1e2;
  double code_norm = 1e6;
};

// One shape's training inputs for a single step, already augmented.
struct ShapeBatch {
  Mat cloud;               // [3 x n] encoder input point cloud
  std::vector<int> knn;    // n * arch.knn neighbor indices for `cloud`
  Mat surf_p;              // [3 x Bs] surface points
  Mat surf_n;              // [3 x Bs] unit surface normals
  Mat free_p;              // [3 x Bf] free-space points
  Eigen::RowVectorXd free_s;  // [Bf] signed distances at free_p
};

// Raw (unweighted) term nodes plus the weighted total.
struct LossNodes {
  EncoderNodes enc;
  Node value_term = -1;        // mean |s - target| over surface + free points
  Node grad_normal_term = -1;  // mean (1 - <grad s, R n>) over surface points
  Node eikonal_term = -1;      // mean | ||grad s|| - 1 | over all points
  Node off_surface_term = -1;  // mean exp(-sharpness |s|) over free points
  Node sdf_composite = -1;     // weighted sum of the four terms above
  Node normal_term = -1;       // mean (1 - <grad T at p_til, R n>) over surface points
  Node smooth_term = -1;       // mean over points of summed per-axis ||dv/d axis||
  Node correction_term = -1;   // mean |ds| over all points
  Node code_term = -1;         // squared Frobenius norm of the code
  Node total = -1;
};

// Records the full per-shape training loss.  Spatial gradients propagate as
// forward-mode jets against the template coordinates; surface normals are
// rotated by the alignment rotation so every dot product lives in template
// space, and the deformation Jacobian is rotated back so its smoothness
// penalty is taken against the input-space axes.
LossNodes build_training_losses(Graph& g, const FieldArch& arch, const ShapeBatch& batch,
                                const LossWeights& w);

}  // namespace itx::field
