#pragma once

#include "hops/gop.hpp"

namespace hops::gop {

/// A transport problem small enough for exhaustive search: B <= 2 rows and
/// at most two free parameters once both marginals are imposed.
struct TinyInstance {
  Marginals marginals;
  CostMatrix cost;
  double epsilon = 0.05;
};

/// Minimizes the entropic objective by grid search over the free
/// parameters of the feasible polytope, ending at resolution `step`. One
/// free parameter is scanned exhaustively when that takes at most 1e6
/// points; otherwise, and always for two, a coarse grid is refined tenfold
/// around the incumbent until `step` is reached (valid because the objective
/// is strictly convex). Throws TooLarge otherwise.
///
/// Near-boundary optima put the objective's log-singular slope next to the
/// grid, so a step of 1e-5 can leave objective error of a few 1e-6; use a
/// finer step when comparing objectives.
/// This never calls the Sinkhorn solver; it exists to check it.
TransportPlan brute_force_entropic(const TinyInstance& instance, double step = 1e-5);

}  // namespace hops::gop
