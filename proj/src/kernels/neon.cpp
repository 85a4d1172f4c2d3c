#include <arm_neon.h>

#include "h2r/kernels/kernels.hpp"

namespace h2r::kernels::neon {

void map_positions(const double* in, double* out, std::size_t count, const AffineMapParams& k) {
  std::size_t i = 0;
  for (; i + 2 <= count; i += 2) {
    // ld3 deinterleaves two xyz triples into x, y, z lanes.
    const float64x2x3_t p = vld3q_f64(in + 3 * i);
    float64x2_t d[3];
    for (int c = 0; c < 3; ++c) d[c] = vsubq_f64(p.val[c], vdupq_n_f64(k.human_origin[c]));
    float64x2_t mu[3];
    for (int a = 0; a < 3; ++a) {
      const double* e = k.human_axes[a];
      float64x2_t s = vmulq_f64(vdupq_n_f64(e[0]), d[0]);
      s = vaddq_f64(s, vmulq_f64(vdupq_n_f64(e[1]), d[1]));
      s = vaddq_f64(s, vmulq_f64(vdupq_n_f64(e[2]), d[2]));
      mu[a] = vdivq_f64(s, vdupq_n_f64(k.human_len2[a]));
    }
    const float64x2_t mz = vmulq_f64(vdupq_n_f64(k.eta), mu[2]);
    float64x2x3_t r;
    for (int c = 0; c < 3; ++c) {
      float64x2_t v = vaddq_f64(vdupq_n_f64(k.robot_origin[c]),
                                vmulq_f64(mu[0], vdupq_n_f64(k.robot_axes[0][c])));
      v = vaddq_f64(v, vmulq_f64(mu[1], vdupq_n_f64(k.robot_axes[1][c])));
      r.val[c] = vaddq_f64(v, vmulq_f64(mz, vdupq_n_f64(k.robot_axes[2][c])));
    }
    vst3q_f64(out + 3 * i, r);
  }
  if (i < count) scalar::map_positions(in + 3 * i, out + 3 * i, count - i, k);
}

namespace {

inline double squared_l2(const double* a, const double* b, std::size_t dim) {
  // Two 2-lane accumulators reproduce the 4-lane order of the scalar kernel.
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= dim; i += 4) {
    const float64x2_t d0 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    const float64x2_t d1 = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    lo = vaddq_f64(lo, vmulq_f64(d0, d0));
    hi = vaddq_f64(hi, vmulq_f64(d1, d1));
  }
  double total = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
                 (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (; i < dim; ++i) {
    const double diff = a[i] - b[i];
    total = total + diff * diff;
  }
  return total;
}

}  // namespace

void squared_l2_batch(const double* rows, std::size_t count, std::size_t dim, const double* query,
                      double* out) {
  for (std::size_t r = 0; r < count; ++r) out[r] = squared_l2(rows + r * dim, query, dim);
}

}  // namespace h2r::kernels::neon
