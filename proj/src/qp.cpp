#include "dreflex/qp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <set>
#include <stdexcept>

namespace dreflex {

namespace {

struct KKTResult {
  VecX x;
  VecX nu;  // stacked [eq; active ineq] multipliers
  bool ok = false;
};

// Solve the equality-constrained QP with constraint matrix A (eq rows plus
// the active inequality rows) via the Schur complement of the KKT system.
KKTResult solve_kkt(const Eigen::LLT<MatX>& Hllt, const VecX& g, const MatX& A, const VecX& b) {
  KKTResult r;
  const int m = static_cast<int>(A.rows());
  if (m == 0) {
    r.x = Hllt.solve(-g);
    r.nu = VecX();
    r.ok = true;
    return r;
  }
  const MatX HiAt = Hllt.solve(A.transpose());
  const MatX S = A * HiAt;
  const VecX Hig = Hllt.solve(g);
  // rank-revealing solve: redundant constraint rows (e.g. several points on
  // one rigid body) make S singular but consistent
  Eigen::CompleteOrthogonalDecomposition<MatX> Scod(S);
  r.nu = Scod.solve(-(A * Hig) - b);
  // stationarity: H x + g + A' nu = 0
  r.x = -Hig - HiAt * r.nu;
  // two rounds of iterative refinement recover the precision the Schur
  // complement loses on badly scaled problems
  for (int pass = 0; pass < 2; ++pass) {
    const VecX r1 = -(g + A.transpose() * r.nu) - Hllt.matrixL() * (Hllt.matrixU() * r.x);
    const VecX r2 = b - A * r.x;
    const VecX dnu = Scod.solve(A * Hllt.solve(r1) - r2);
    r.x += Hllt.solve(r1 - A.transpose() * dnu);
    r.nu += dnu;
  }
  r.ok = true;
  return r;
}

}  // namespace

QPSolution solve_qp(const QPProblem& qp, double tol, int max_iterations,
                    const std::vector<int>* warm_active) {
  const int n = qp.n();
  const int m_eq = static_cast<int>(qp.A_eq.rows());
  const int m_in = static_cast<int>(qp.A_in.rows());
  if (qp.H.rows() != n || qp.H.cols() != n) throw std::invalid_argument("solve_qp: H shape");
  if (qp.A_eq.rows() > 0 && qp.A_eq.cols() != n) throw std::invalid_argument("solve_qp: A_eq shape");
  if (qp.A_in.rows() > 0 && qp.A_in.cols() != n) throw std::invalid_argument("solve_qp: A_in shape");

  Eigen::LLT<MatX> Hllt(qp.H);
  if (Hllt.info() != Eigen::Success) {
    MatX Hr = qp.H;
    Hr.diagonal().array() += 1e-10 * (1.0 + qp.H.diagonal().maxCoeff());
    Hllt.compute(Hr);
    if (Hllt.info() != Eigen::Success) throw std::invalid_argument("solve_qp: H not PD");
  }

  std::vector<int> active;
  if (warm_active) {
    for (int i : *warm_active)
      if (i >= 0 && i < m_in) active.push_back(i);
    std::sort(active.begin(), active.end());
    active.erase(std::unique(active.begin(), active.end()), active.end());
  }

  QPSolution sol;
  std::set<std::vector<int>> visited;  // cycle guard
  visited.insert(active);

  auto finalize = [&](const KKTResult& kkt, QPStatus status) {
    sol.x = kkt.x;
    sol.lambda_eq = m_eq > 0 ? VecX(kkt.nu.head(m_eq)) : VecX::Zero(0);
    sol.lambda_in = VecX::Zero(m_in);
    for (int k = 0; k < static_cast<int>(active.size()); ++k)
      sol.lambda_in[active[k]] = kkt.nu[m_eq + k];
    sol.active = active;
    VecX grad = qp.H * sol.x + qp.g;
    if (m_eq > 0) grad += qp.A_eq.transpose() * sol.lambda_eq;
    if (m_in > 0) grad += qp.A_in.transpose() * sol.lambda_in;
    sol.stationarity = n > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
    sol.primal_eq = m_eq > 0 ? (qp.A_eq * sol.x - qp.b_eq).cwiseAbs().maxCoeff() : 0.0;
    sol.primal_in = m_in > 0 ? std::max(0.0, (qp.A_in * sol.x - qp.b_in).maxCoeff()) : 0.0;
    // contradictory constraints show up as a large primal residual (the ridged
    // Schur solve returns a least-squares compromise instead of failing)
    double bscale = 1.0;
    if (m_eq > 0) bscale = std::max(bscale, qp.b_eq.cwiseAbs().maxCoeff());
    if (m_in > 0) bscale = std::max(bscale, qp.b_in.cwiseAbs().maxCoeff());
    if (std::max(sol.primal_eq, sol.primal_in) > 1e-6 * bscale && status != QPStatus::Optimal)
      status = QPStatus::Infeasible;
    if (sol.primal_eq > 1e-6 * bscale) status = QPStatus::Infeasible;
    sol.status = status;
  };

  MatX A;
  VecX b;
  for (int iter = 1; iter <= max_iterations; ++iter) {
    sol.iterations = iter;
    const int ma = static_cast<int>(active.size());
    A.resize(m_eq + ma, n);
    b.resize(m_eq + ma);
    if (m_eq > 0) {
      A.topRows(m_eq) = qp.A_eq;
      b.head(m_eq) = qp.b_eq;
    }
    for (int k = 0; k < ma; ++k) {
      A.row(m_eq + k) = qp.A_in.row(active[k]);
      b[m_eq + k] = qp.b_in[active[k]];
    }
    const KKTResult kkt = solve_kkt(Hllt, qp.g, A, b);
    if (!kkt.ok) {
      sol.status = QPStatus::Infeasible;
      return sol;
    }

    // drop the active constraint with the most negative multiplier
    int drop = -1;
    double worst = -tol;
    for (int k = 0; k < ma; ++k) {
      const double lam = kkt.nu[m_eq + k];
      if (lam < worst) {
        worst = lam;
        drop = k;
      }
    }
    if (drop >= 0) {
      std::vector<int> next = active;
      next.erase(next.begin() + drop);
      if (visited.insert(next).second && iter < max_iterations) {
        active = std::move(next);
        continue;
      }
      finalize(kkt, QPStatus::MaxIterations);
      return sol;
    }

    // add the most violated inactive inequality (lowest index on ties)
    int add = -1;
    double violation = tol;
    for (int i = 0; i < m_in; ++i) {
      if (std::binary_search(active.begin(), active.end(), i)) continue;
      const double v = qp.A_in.row(i).dot(kkt.x) - qp.b_in[i];
      if (v > violation) {
        violation = v;
        add = i;
      }
    }
    if (add < 0) {
      finalize(kkt, QPStatus::Optimal);
      return sol;
    }
    std::vector<int> next = active;
    next.insert(std::lower_bound(next.begin(), next.end(), add), add);
    if (visited.insert(next).second && iter < max_iterations) {
      active = std::move(next);
      continue;
    }
    finalize(kkt, QPStatus::MaxIterations);
    return sol;
  }
  sol.status = QPStatus::MaxIterations;
  return sol;
}

}  // namespace dreflex
