#include "itx/field/losses.hpp"

#include "itx/util/error.hpp"

namespace itx::field {

LossNodes build_training_losses(Graph& g, const FieldArch& arch, const ShapeBatch& batch,
                                const LossWeights& w) {
  const int bs = static_cast<int>(batch.surf_p.cols());
  const int bf = static_cast<int>(batch.free_p.cols());
  require(bs > 0 && bf > 0, "build_training_losses: empty batch");
  require(batch.surf_n.cols() == bs, "build_training_losses: normals/points mismatch");
  require(batch.free_s.size() == bf, "build_training_losses: free sdf/points mismatch");
  const int n = bs + bf;

  LossNodes out;
  out.enc = build_encoder(g, arch, batch.cloud, batch.knn);
  const auto dlayers = build_hypernet(g, arch, out.enc.alpha_flat);
  const auto tlayers = template_layer_nodes(g, arch);

  Mat all(3, n);
  all.leftCols(bs) = batch.surf_p;
  all.rightCols(bf) = batch.free_p;
  const FieldNodes f =
      build_field(g, arch, dlayers, tlayers, out.enc.R, g.constant(std::move(all)), true);

  // Value regression: zero target on the surface, analytic distance off it.
  Eigen::RowVectorXd targets(n);
  targets.setZero();
  targets.tail(bf) = batch.free_s;
  out.value_term =
      g.mean(g.elem(diff::ElemOp::Abs, g.sub(f.phi, g.constant(Mat(targets)))));

  // Surface terms use normals rotated into template space.
  const Node rot_n = g.matmul(out.enc.R, g.constant(batch.surf_n));
  const Node grad_surf = g.block(f.grad_phi, 0, 0, 3, bs);
  out.grad_normal_term =
      g.mean(g.shift(g.scale(g.coldot(grad_surf, rot_n), -1.0), 1.0));

  out.eikonal_term =
      g.mean(g.elem(diff::ElemOp::Abs, g.shift(g.colnorm(f.grad_phi), -1.0)));

  const Node phi_free = g.block(f.phi, 0, bs, 1, bf);
  out.off_surface_term = g.mean(g.elem(
      diff::ElemOp::Exp, g.scale(g.elem(diff::ElemOp::Abs, phi_free), -w.off_surface_sharpness)));

  out.sdf_composite = g.add(
      g.add(g.scale(out.value_term, w.sdf_value), g.scale(out.grad_normal_term, w.sdf_normal)),
      g.add(g.scale(out.eikonal_term, w.sdf_eikonal),
            g.scale(out.off_surface_term, w.sdf_off_surface)));

  // Template-normal consistency: the template decoder's own gradient at the
  // deformed surface points against the rotated normals.
  const Node ptil_surf = g.block(f.deform.p_til, 0, 0, 3, bs);
  const TemplateNodes tn = build_template(g, arch, tlayers, ptil_surf, nullptr, true);
  const Node grad_t = g.vcat(g.vcat(tn.local.dx, tn.local.dy), tn.local.dz);
  out.normal_term = g.mean(g.shift(g.scale(g.coldot(grad_t, rot_n), -1.0), 1.0));

  // Deformation smoothness against the input-space axes: the jet columns are
  // derivatives against template coordinates, so the input-space Jacobian
  // columns are their combinations through the alignment rotation.
  Node smooth_sum = -1;
  for (int axis = 0; axis < 3; ++axis) {
    Node col = -1;
    const std::array<Node, 3> jets = {f.deform.v.dx, f.deform.v.dy, f.deform.v.dz};
    for (int m = 0; m < 3; ++m) {
      const Node r_ma = g.block(out.enc.R, m, axis, 1, 1);
      const Node contrib = g.scalemul(r_ma, jets[static_cast<std::size_t>(m)]);
      col = (col < 0) ? contrib : g.add(col, contrib);
    }
    const Node norms = g.colnorm(col);
    smooth_sum = (smooth_sum < 0) ? norms : g.add(smooth_sum, norms);
  }
  out.smooth_term = g.mean(smooth_sum);

  out.correction_term = g.mean(g.elem(diff::ElemOp::Abs, f.deform.ds.val));
  out.code_term = g.sum_squares(out.enc.alpha);

  out.total = g.add(
      g.add(out.sdf_composite, g.scale(out.normal_term, w.normal_consistency)),
      g.add(g.add(g.scale(out.smooth_term, w.deform_smooth),
                  g.scale(out.correction_term, w.correction_magnitude)),
            g.scale(out.code_term, w.code_norm)));
  return out;
}

}  // namespace itx::field
