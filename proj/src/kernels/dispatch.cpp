#include <cstdlib>
#include <stdexcept>
#include <string>

#include "h2r/kernels/kernels.hpp"

namespace h2r::kernels {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(H2R_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(H2R_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
    if (isa_available(isa)) out.push_back(isa);
  }
  return out;
}

namespace {

Isa select_isa() {
  if (const char* env = std::getenv("H2R_SIMD")) {
    const std::string want(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
      if (want == to_string(isa) && isa_available(isa)) return isa;
    }
  }
  if (isa_available(Isa::Avx2)) return Isa::Avx2;
  if (isa_available(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

const KernelTable kScalar{Isa::Scalar, &scalar::map_positions, &scalar::squared_l2_batch};
#if defined(H2R_HAVE_AVX2)
const KernelTable kAvx2{Isa::Avx2, &avx2::map_positions, &avx2::squared_l2_batch};
#endif
#if defined(H2R_HAVE_NEON)
const KernelTable kNeon{Isa::Neon, &neon::map_positions, &neon::squared_l2_batch};
#endif

}  // namespace

Isa active_isa() {
  static const Isa isa = select_isa();
  return isa;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("kernel ISA not available: " + std::string(to_string(isa)));
  }
  switch (isa) {
#if defined(H2R_HAVE_AVX2)
    case Isa::Avx2: return kAvx2;
#endif
#if defined(H2R_HAVE_NEON)
    case Isa::Neon: return kNeon;
#endif
    default: return kScalar;
  }
}

const KernelTable& active() {
  static const KernelTable& t = table(active_isa());
  return t;
}

}  // namespace h2r::kernels
