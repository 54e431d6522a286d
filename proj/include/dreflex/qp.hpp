#pragma once

// Dense convex QP:  min 1/2 x'Hx + g'x
//                   s.t. A_eq x = b_eq,  A_in x <= b_in
//
// Primal-dual active-set iteration on the KKT system, solved by Schur
// complement through an LLT of H (H must be positive definite; callers add a
// small ridge to PSD costs). Deterministic: constraint selection is by
// largest violation with lowest-index tie-break, so identical problems give
// bitwise-identical solutions.

#include "dreflex/types.hpp"

#include <vector>

namespace dreflex {

struct QPProblem {
  MatX H;
  VecX g;
  MatX A_eq;   // may have 0 rows
  VecX b_eq;
  MatX A_in;   // may have 0 rows
  VecX b_in;

  int n() const { return static_cast<int>(g.size()); }
};

enum class QPStatus { Optimal, MaxIterations, Infeasible };

struct QPSolution {
  VecX x;
  VecX lambda_eq;        // multipliers of equality rows
  VecX lambda_in;        // multipliers of inequality rows (0 when inactive)
  QPStatus status = QPStatus::Optimal;
  int iterations = 0;
  double stationarity = 0;   // ||Hx + g + A_eq' nu + A_in' lambda||_inf
  double primal_eq = 0;      // ||A_eq x - b_eq||_inf
  double primal_in = 0;      // max(0, max_i (A_in x - b_in)_i)
  std::vector<int> active;   // final active inequality set (warm-start input)
};

QPSolution solve_qp(const QPProblem& qp, double tol = 1e-8, int max_iterations = 100,
                    const std::vector<int>* warm_active = nullptr);

}  // namespace dreflex
