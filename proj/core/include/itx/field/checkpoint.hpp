#pragma once

#include <string>

#include "itx/field/model.hpp"

namespace itx::field {

// Binary checkpoint layout (little-endian throughout):
//   bytes 0-7   magic "ITXFIELD"
//   u32         format version (currently 1)
//   i32 x 9     architecture: code_rows, the four encoder widths, knn,
//               hyper_hidden, mlp_width, mlp_layers
//   f64         softplus_beta
//   u64         parameter entry count
//   per entry, in lexicographic name order:
//     u32 name length, name bytes, u32 rows, u32 cols,
//     rows*cols f64 values (column-major)
// Values are raw IEEE-754 doubles, so save -> load is bit-exact and two saves
// of equal parameters produce byte-identical files.
//
// load_checkpoint throws CheckpointError for a wrong magic, an unsupported
// version, a truncated or oversized file, or parameter names/shapes that do
// not match the declared architecture.
void save_checkpoint(const RdifParams& params, const std::string& path);
RdifParams load_checkpoint(const std::string& path);

// The parameter names and shapes the architecture prescribes (all zeros);
// used to validate checkpoints and to size optimizer state.
ParamSet field_param_shapes(const FieldArch& arch);

}  // namespace itx::field
