#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace aquid {

using cplx = std::complex<double>;
using Field = std::vector<cplx>;

/// Square periodic grid symmetric about the origin. `points` counts the nodes on an axis
/// including both box edges; the edge x = +L is identified with x = -L, so `n = points - 1`
/// distinct nodes are stored per axis and the origin is node n/2. Node (ix, iy) is stored at
/// iy * n + ix.
struct Grid2D {
  int points = 0;
  int n = 0;
  double L = 0;   // half-length, um
  double dx = 0;  // um

  Grid2D() = default;
  Grid2D(int points_per_axis, double half_length)
      : points(points_per_axis), n(points_per_axis - 1), L(half_length), dx(2.0 * half_length / (points_per_axis - 1)) {
    if (points_per_axis < 5 || points_per_axis % 2 == 0)
      throw std::invalid_argument("Grid2D: points per axis must be odd and >= 5");
    if (!(half_length > 0.0)) throw std::invalid_argument("Grid2D: half-length must be positive");
  }

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(n) * n; }
  [[nodiscard]] double coord(int i) const { return -L + i * dx; }
  [[nodiscard]] std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * n + ix; }
  [[nodiscard]] int center() const { return n / 2; }
  [[nodiscard]] double cell_area() const { return dx * dx; }

  /// Signed FFT bin of index j; the Nyquist bin is reported as -n/2.
  [[nodiscard]] int bin(int j) const { return j < n / 2 ? j : j - n; }

  /// Angular wave number of FFT bin j, for second-derivative use.
  [[nodiscard]] double wavenumber(int j) const { return 2.0 * std::numbers::pi * bin(j) / (n * dx); }

  /// Wave number for odd (first-derivative) operators: the Nyquist bin is dropped so the
  /// operator stays antisymmetric under x -> -x.
  [[nodiscard]] double wavenumber_odd(int j) const { return 2 * j == n ? 0.0 : wavenumber(j); }

  /// Index of the node mirrored through the origin (periodic images included).
  [[nodiscard]] std::size_t mirror(std::size_t idx) const {
    const int ix = static_cast<int>(idx % n), iy = static_cast<int>(idx / n);
    return index((n - ix) % n, (n - iy) % n);
  }

  bool operator==(const Grid2D&) const = default;
};

/// <a, b> = sum conj(a) b dx^2
inline cplx inner(const Grid2D& g, std::span<const cplx> a, std::span<const cplx> b) {
  cplx s{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s * g.cell_area();
}

inline double norm2(const Grid2D& g, std::span<const cplx> a) {
  double s = 0.0;
  for (const auto& v : a) s += std::norm(v);
  return s * g.cell_area();
}

inline void normalize(const Grid2D& g, std::span<cplx> a) {
  const double s = 1.0 / std::sqrt(norm2(g, a));
  for (auto& v : a) v *= s;
}

enum class Parity { any, even, odd };

/// Projects onto the even/odd sector of the rotation by pi, (x, y) -> (-x, -y).
inline void project_parity(const Grid2D& g, std::span<cplx> a, Parity p) {
  if (p == Parity::any) return;
  const double sgn = p == Parity::even ? 1.0 : -1.0;
  const int n = g.n;
  for (int iy = 0; iy < n; ++iy) {
    const int my = (n - iy) % n;
    for (int ix = 0; ix < n; ++ix) {
      const std::size_t i = g.index(ix, iy), j = g.index((n - ix) % n, my);
      if (j < i) continue;
      if (j == i) {
        if (p == Parity::odd) a[i] = 0.0;
        continue;
      }
      const cplx s = 0.5 * (a[i] + sgn * a[j]);
      a[i] = s;
      a[j] = sgn * s;
    }
  }
}

}  // namespace aquid
