#include "hops/matrix.hpp"

#include <cmath>
#include <string>

#include "hops/error.hpp"

namespace hops {

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = norm2(m.row(i));
    if (!(n >= 1e-12)) raise(Errc::ZeroRow, "row " + std::to_string(i) + " has norm below 1e-12");
    for (double& v : out.row(i)) v /= n;
  }
  return out;
}

Matrix to_double(const MatrixF& m) {
  Matrix out(m.rows(), m.cols());
  auto src = m.flat();
  auto dst = out.flat();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]);
  return out;
}

MatrixF to_float(const Matrix& m) {
  MatrixF out(m.rows(), m.cols());
  auto src = m.flat();
  auto dst = out.flat();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]);
  return out;
}

}  // namespace hops
