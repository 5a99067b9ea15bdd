#include "ambc/crld.hpp"

namespace ambc {

const char* to_string(ReconKind kind) { return kind == ReconKind::per_pixel ? "per_pixel" : "dense"; }

ReconKind recon_kind_from_string(const std::string& name) {
  if (name == "per_pixel" || name == "conv") return ReconKind::per_pixel;
  if (name == "dense") return ReconKind::dense;
  throw ParameterError("unknown reconstruction kind '" + name + "' (expected per_pixel or dense)");
}

void validate(const CrldHyper& h) {
  if (h.blocks < 1) throw ParameterError("CRLD needs at least one denoising block");
  if (h.layers < 2) throw ParameterError("each denoising block needs at least two layers");
  if (h.filters < 1) throw ParameterError("filter count must be positive");
  if (h.ma < 1 || h.mb < 1 || h.p < 1) throw ParameterError("input geometry must be positive");
  if (h.kernel < 1 || h.kernel % 2 == 0) throw ParameterError("kernel size must be odd and positive");
}

Index crld_parameter_count(const CrldHyper& h) {
  validate(h);
  const Index k2 = h.kernel * h.kernel;
  const Index first = h.filters * k2 * h.p + h.filters + 2 * h.filters;
  const Index middle = h.filters * k2 * h.filters + h.filters + 2 * h.filters;
  const Index last = h.p * k2 * h.filters + h.p;
  const Index block = first + (h.layers - 2) * middle + last;
  const Index m = h.ma * h.mb;
  const Index recon = h.recon == ReconKind::per_pixel ? h.p + 1 : m * m * h.p + m;
  return h.blocks * block + recon;
}

}  // namespace ambc
