#include <immintrin.h>

#include "h2r/kernels/kernels.hpp"

namespace h2r::kernels::avx2 {

void map_positions(const double* in, double* out, std::size_t count, const AffineMapParams& k) {
  const __m256i stride = _mm256_setr_epi64x(0, 3, 6, 9);
  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    const double* base = in + 3 * i;
    __m256d d[3];
    for (int c = 0; c < 3; ++c) {
      const __m256d p = _mm256_i64gather_pd(base + c, stride, 8);
      d[c] = _mm256_sub_pd(p, _mm256_set1_pd(k.human_origin[c]));
    }
    __m256d mu[3];
    for (int a = 0; a < 3; ++a) {
      const double* e = k.human_axes[a];
      __m256d s = _mm256_mul_pd(_mm256_set1_pd(e[0]), d[0]);
      s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_set1_pd(e[1]), d[1]));
      s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_set1_pd(e[2]), d[2]));
      mu[a] = _mm256_div_pd(s, _mm256_set1_pd(k.human_len2[a]));
    }
    const __m256d mz = _mm256_mul_pd(_mm256_set1_pd(k.eta), mu[2]);
    alignas(32) double res[3][4];
    for (int c = 0; c < 3; ++c) {
      __m256d r = _mm256_add_pd(_mm256_set1_pd(k.robot_origin[c]),
                                _mm256_mul_pd(mu[0], _mm256_set1_pd(k.robot_axes[0][c])));
      r = _mm256_add_pd(r, _mm256_mul_pd(mu[1], _mm256_set1_pd(k.robot_axes[1][c])));
      r = _mm256_add_pd(r, _mm256_mul_pd(mz, _mm256_set1_pd(k.robot_axes[2][c])));
      _mm256_store_pd(res[c], r);
    }
    double* dst = out + 3 * i;
    for (int lane = 0; lane < 4; ++lane) {
      for (int c = 0; c < 3; ++c) dst[3 * lane + c] = res[c][lane];
    }
  }
  if (i < count) scalar::map_positions(in + 3 * i, out + 3 * i, count - i, k);
}

namespace {

inline double squared_l2(const double* a, const double* b, std::size_t dim) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= dim; i += 4) {
    const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
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

}  // namespace h2r::kernels::avx2
