#pragma once

// Data-parallel inner loops. Every ISA variant evaluates the same operation
// sequence in the same order (no FMA contraction, fixed 4-lane accumulation),
// so all variants return bit-identical results and dispatch is invisible to
// callers.

#include <cstddef>
#include <string_view>
#include <vector>

namespace h2r::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

// Compiled in and supported by the running CPU.
bool isa_available(Isa isa);

// Best available ISA; H2R_SIMD=scalar|avx2|neon in the environment overrides
// it when the requested variant is available.
Isa active_isa();

std::vector<Isa> available_isas();

// Parameters of p_r = o_r + mu_x e_r^x + mu_y e_r^y + (eta mu_z) e_r^z with
// mu_i = (e_h^i . (p_h - o_h)) / |e_h^i|^2.
struct AffineMapParams {
  double human_origin[3];
  double human_axes[3][3];  // rows: e_h^x, e_h^y, e_h^z
  double human_len2[3];     // |e_h^i|^2
  double robot_origin[3];
  double robot_axes[3][3];  // rows: e_r^x, e_r^y, e_r^z
  double eta;
};

// xyz triples, interleaved; `in` and `out` may not alias.
using MapPositionsFn = void (*)(const double* in, double* out, std::size_t count,
                                const AffineMapParams& params);

// Squared L2 distance from `query` to each of `count` rows of length `dim`.
using SquaredL2BatchFn = void (*)(const double* rows, std::size_t count, std::size_t dim,
                                  const double* query, double* out);

struct KernelTable {
  Isa isa;
  MapPositionsFn map_positions;
  SquaredL2BatchFn squared_l2_batch;
};

// Throws std::invalid_argument if `isa` is not available.
const KernelTable& table(Isa isa);
const KernelTable& active();

namespace scalar {
void map_positions(const double* in, double* out, std::size_t count, const AffineMapParams& params);
void squared_l2_batch(const double* rows, std::size_t count, std::size_t dim, const double* query,
                      double* out);
double squared_l2(const double* a, const double* b, std::size_t dim);
}  // namespace scalar

#if defined(H2R_HAVE_AVX2)
namespace avx2 {
void map_positions(const double* in, double* out, std::size_t count, const AffineMapParams& params);
void squared_l2_batch(const double* rows, std::size_t count, std::size_t dim, const double* query,
                      double* out);
}  // namespace avx2
#endif

#if defined(H2R_HAVE_NEON)
namespace neon {
void map_positions(const double* in, double* out, std::size_t count, const AffineMapParams& params);
void squared_l2_batch(const double* rows, std::size_t count, std::size_t dim, const double* query,
                      double* out);
}  // namespace neon
#endif

}  // namespace h2r::kernels
