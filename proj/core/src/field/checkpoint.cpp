#include "itx/field/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "itx/util/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");
static_assert(sizeof(double) == 8, "checkpoint serialization assumes 8-byte doubles");

namespace itx::field {

namespace {

constexpr char kMagic[8] = {'I', 'T', 'X', 'F', 'I', 'E', 'L', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CheckpointError("checkpoint: truncated file");
  return v;
}

}  // namespace

ParamSet field_param_shapes(const FieldArch& arch) {
  ParamSet ps;
  int enc_in = 3;
  const int n_enc = static_cast<int>(arch.encoder_widths.size());
  for (int i = 0; i < n_enc; ++i) {
    const int out = arch.encoder_widths[static_cast<std::size_t>(i)];
    ps.add("enc.l" + std::to_string(i) + ".wq", Mat::Zero(out, enc_in));
    if (i < n_enc - 1) ps.add("enc.l" + std::to_string(i) + ".wd", Mat::Zero(out, enc_in));
    enc_in = out;
  }
  const auto dshapes = arch.deform_layer_shapes();
  for (int j = 0; j < arch.mlp_layers; ++j) {
    const auto [out, in] = dshapes[static_cast<std::size_t>(j)];
    const int flat = out * in + out;
    const std::string base = "hyper.l" + std::to_string(j) + ".";
    ps.add(base + "wh", Mat::Zero(arch.hyper_hidden, arch.code_length()));
    ps.add(base + "bh", Mat::Zero(arch.hyper_hidden, 1));
    ps.add(base + "wo", Mat::Zero(flat, arch.hyper_hidden));
    ps.add(base + "bo", Mat::Zero(flat, 1));
  }
  const auto tshapes = arch.template_layer_shapes();
  for (int j = 0; j < arch.mlp_layers; ++j) {
    const auto [out, in] = tshapes[static_cast<std::size_t>(j)];
    const std::string base = "tmpl.l" + std::to_string(j) + ".";
    ps.add(base + "w", Mat::Zero(out, in));
    ps.add(base + "b", Mat::Zero(out, 1));
  }
  return ps;
}

void save_checkpoint(const RdifParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), "checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kVersion);
  const FieldArch& a = params.arch;
  write_pod(os, static_cast<std::int32_t>(a.code_rows));
  for (const int w : a.encoder_widths) write_pod(os, static_cast<std::int32_t>(w));
  write_pod(os, static_cast<std::int32_t>(a.knn));
  write_pod(os, static_cast<std::int32_t>(a.hyper_hidden));
  write_pod(os, static_cast<std::int32_t>(a.mlp_width));
  write_pod(os, static_cast<std::int32_t>(a.mlp_layers));
  write_pod(os, a.softplus_beta);
  write_pod(os, static_cast<std::uint64_t>(params.params.size()));
  for (const auto& [name, m] : params.params) {
    write_pod(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(os, static_cast<std::uint32_t>(m.rows()));
    write_pod(os, static_cast<std::uint32_t>(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  }
  os.flush();
  require(os.good(), "checkpoint: write to '" + path + "' failed");
}

RdifParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is.good()) throw CheckpointError("checkpoint: cannot open '" + path + "'");

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("checkpoint: '" + path + "' is not a field checkpoint");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion)
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));

  RdifParams rp;
  FieldArch& a = rp.arch;
  a.code_rows = read_pod<std::int32_t>(is);
  for (int& w : a.encoder_widths) w = read_pod<std::int32_t>(is);
  a.knn = read_pod<std::int32_t>(is);
  a.hyper_hidden = read_pod<std::int32_t>(is);
  a.mlp_width = read_pod<std::int32_t>(is);
  a.mlp_layers = read_pod<std::int32_t>(is);
  a.softplus_beta = read_pod<double>(is);
  if (a.code_rows < 2 || a.knn < 1 || a.hyper_hidden < 1 || a.mlp_width < 1 ||
      a.mlp_layers < 2 || a.encoder_widths.back() != a.code_rows)
    throw CheckpointError("checkpoint: invalid architecture descriptor");

  const auto count = read_pod<std::uint64_t>(is);
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto name_len = read_pod<std::uint32_t>(is);
    if (name_len > 4096) throw CheckpointError("checkpoint: implausible name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw CheckpointError("checkpoint: truncated file");
    const auto rows = read_pod<std::uint32_t>(is);
    const auto cols = read_pod<std::uint32_t>(is);
    Mat m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!is) throw CheckpointError("checkpoint: truncated file");
    rp.params.add(name, std::move(m));
  }
  is.peek();
  if (!is.eof()) throw CheckpointError("checkpoint: trailing bytes after parameters");

  if (!rp.params.congruent(field_param_shapes(a)))
    throw CheckpointError("checkpoint: parameters do not match the declared architecture");
  return rp;
}

}  // namespace itx::field
