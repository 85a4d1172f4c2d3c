#include "h2r/kernels/kernels.hpp"

namespace h2r::kernels::scalar {

namespace {

inline void map_one(const double* p, double* out, const AffineMapParams& k) {
  const double d0 = p[0] - k.human_origin[0];
  const double d1 = p[1] - k.human_origin[1];
  const double d2 = p[2] - k.human_origin[2];
  double mu[3];
  for (int i = 0; i < 3; ++i) {
    const double* e = k.human_axes[i];
    mu[i] = (e[0] * d0 + e[1] * d1 + e[2] * d2) / k.human_len2[i];
  }
  const double mz = k.eta * mu[2];
  for (int c = 0; c < 3; ++c) {
    out[c] = ((k.robot_origin[c] + mu[0] * k.robot_axes[0][c]) + mu[1] * k.robot_axes[1][c]) +
             mz * k.robot_axes[2][c];
  }
}

}  // namespace

void map_positions(const double* in, double* out, std::size_t count, const AffineMapParams& params) {
  for (std::size_t i = 0; i < count; ++i) map_one(in + 3 * i, out + 3 * i, params);
}

double squared_l2(const double* a, const double* b, std::size_t dim) {
  // Four interleaved partial sums mirror the vector lanes.
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= dim; i += 4) {
    for (std::size_t j = 0; j < 4; ++j) {
      const double diff = a[i + j] - b[i + j];
      acc[j] = acc[j] + diff * diff;
    }
  }
  double total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (; i < dim; ++i) {
    const double diff = a[i] - b[i];
    total = total + diff * diff;
  }
  return total;
}

void squared_l2_batch(const double* rows, std::size_t count, std::size_t dim, const double* query,
                      double* out) {
  for (std::size_t r = 0; r < count; ++r) out[r] = squared_l2(rows + r * dim, query, dim);
}

}  // namespace h2r::kernels::scalar
