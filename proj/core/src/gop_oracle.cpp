#include "hops/gop_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hops/error.hpp"

namespace hops::gop {

namespace {

/// Parametrizes the first row; the second row is c - first row.
struct Polytope {
  std::size_t cols = 0;
  std::vector<double> fixed;           // first-row value for non-free columns
  std::vector<std::size_t> free_cols;  // columns open in both rows
  double free_mass = 0.0;              // mass the free columns must carry in row 0
};

Matrix materialize(const Polytope& poly, const Marginals& m, std::span<const double> free_values) {
  Matrix p(m.r.size(), poly.cols, 0.0);
  std::vector<double> first = poly.fixed;
  for (std::size_t k = 0; k < poly.free_cols.size(); ++k) first[poly.free_cols[k]] = free_values[k];
  for (std::size_t l = 0; l < poly.cols; ++l) {
    p(0, l) = first[l];
    if (m.r.size() == 2) p(1, l) = m.c[l] - first[l];
  }
  return p;
}

}  // namespace

TransportPlan brute_force_entropic(const TinyInstance& inst, double step) {
  const Marginals& m = inst.marginals;
  const CostMatrix& cost = inst.cost;
  const std::size_t rows = m.r.size(), cols = m.c.size();
  if (rows < 1 || rows > 2) raise(Errc::TooLarge, "oracle handles one or two rows only");
  if (cost.rows() != rows || cost.cols() != cols) raise(Errc::DimensionMismatch, "cost shape differs from marginals");
  if (!(step > 0.0)) raise(Errc::InvalidParam, "grid step must be positive");

  Polytope poly;
  poly.cols = cols;
  poly.fixed.assign(cols, 0.0);
  double fixed_mass = 0.0;
  for (std::size_t l = 0; l < cols; ++l) {
    const bool top = cost.is_allowed(0, l);
    const bool bottom = rows == 2 && cost.is_allowed(1, l);
    if (m.c[l] == 0.0) continue;
    if (rows == 1) {
      if (!top) raise(Errc::InfeasibleColumn, "column " + std::to_string(l) + " is masked");
      poly.fixed[l] = m.c[l];
    } else if (top && bottom) {
      poly.free_cols.push_back(l);
    } else if (top) {
      poly.fixed[l] = m.c[l];
    } else if (!bottom) {
      raise(Errc::InfeasibleColumn, "column " + std::to_string(l) + " is masked in both rows");
    }
    fixed_mass += poly.fixed[l];
  }
  poly.free_mass = m.r[0] - fixed_mass;

  const auto objective = [&](std::span<const double> free_values) {
    return entropic_objective(materialize(poly, m, free_values), cost, inst.epsilon);
  };
  auto finish = [&](std::vector<double> free_values) {
    TransportPlan out;
    out.plan = materialize(poly, m, free_values);
    const Residuals res = marginal_residuals(out.plan, m);
    out.residual_r = res.row;
    out.residual_c = res.col;
    return out;
  };

  const std::size_t nfree = poly.free_cols.size();
  if (rows == 1 || nfree == 0) return finish({});
  if (nfree > 3) raise(Errc::TooLarge, "feasible polytope has more than two free parameters");

  // The last free column absorbs the remaining mass; the others are scanned.
  const std::size_t last = poly.free_cols.back();
  auto completes = [&](std::span<const double> scanned, std::vector<double>& full) {
    double used = 0.0;
    for (double v : scanned) used += v;
    const double rest = poly.free_mass - used;
    if (rest < -1e-15 || rest > m.c[last] + 1e-15) return false;
    full.assign(scanned.begin(), scanned.end());
    full.push_back(std::clamp(rest, 0.0, m.c[last]));
    return true;
  };

  std::vector<double> best_full;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> full;

  if (nfree == 1) {
    std::vector<double> none;
    if (!completes(none, full)) raise(Errc::InfeasibleRow, "fixed entries already violate the row marginal");
    return finish(full);
  }

  if (nfree == 2) {
    const double hi = m.c[poly.free_cols[0]];
    double lo = 0.0, up = hi;
    // Exhaustive at the target step when that is affordable, otherwise the
    // same coarse-to-fine refinement as the two-parameter case.
    double h = hi / step <= 1e6 ? step : hi / 1000.0;
    while (true) {
      const double h_now = std::max(h, step);
      const auto steps = static_cast<std::size_t>(std::floor((up - lo) / h_now));
      double best_x = lo;
      for (std::size_t s = 0; s <= steps + 1; ++s) {
        const double x = std::min(lo + static_cast<double>(s) * h_now, up);
        const double scanned[1] = {x};
        if (!completes(scanned, full)) continue;
        const double v = objective(full);
        if (v < best) {
          best = v;
          best_full = full;
          best_x = x;
        }
      }
      if (h_now <= step) break;
      lo = std::max(0.0, best_x - 2.0 * h_now);
      up = std::min(hi, best_x + 2.0 * h_now);
      h = h_now / 10.0;
    }
  } else {
    const double hi0 = m.c[poly.free_cols[0]], hi1 = m.c[poly.free_cols[1]];
    double lo0 = 0.0, lo1 = 0.0, up0 = hi0, up1 = hi1;
    double h = std::max(hi0, hi1) / 100.0;
    while (true) {
      const double h_now = std::max(h, step);
      const auto n0 = static_cast<std::size_t>(std::ceil((up0 - lo0) / h_now));
      const auto n1 = static_cast<std::size_t>(std::ceil((up1 - lo1) / h_now));
      double best_x = lo0, best_y = lo1;
      for (std::size_t a = 0; a <= n0; ++a) {
        const double x = std::min(lo0 + static_cast<double>(a) * h_now, up0);
        for (std::size_t b = 0; b <= n1; ++b) {
          const double y = std::min(lo1 + static_cast<double>(b) * h_now, up1);
          const double scanned[2] = {x, y};
          if (!completes(scanned, full)) continue;
          const double v = objective(full);
          if (v < best) {
            best = v;
            best_full = full;
            best_x = x;
            best_y = y;
          }
        }
      }
      if (h_now <= step) break;
      lo0 = std::max(0.0, best_x - 2.0 * h_now);
      up0 = std::min(hi0, best_x + 2.0 * h_now);
      lo1 = std::max(0.0, best_y - 2.0 * h_now);
      up1 = std::min(hi1, best_y + 2.0 * h_now);
      h = h_now / 10.0;
    }
  }
  if (best_full.empty()) raise(Errc::InfeasibleRow, "no feasible grid point");
  return finish(best_full);
}

}  // namespace hops::gop
