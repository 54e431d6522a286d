#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dreflex/qp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

using namespace dreflex;

namespace {

// Exhaustive reference solver: try every subset of inequalities as the active
// set, solve the resulting equality-constrained KKT system with a full-pivot
// LU, and keep the best objective among KKT-feasible candidates (primal
// feasible on all inequalities, multipliers nonnegative on the active ones).
// Exponential in the inequality count, so only usable for small problems.
bool brute_force_qp(const QPProblem& qp, VecX& best_x) {
  const int n = qp.n();
  const int m_eq = static_cast<int>(qp.A_eq.rows());
  const int m_in = static_cast<int>(qp.A_in.rows());
  REQUIRE(m_in <= 16);
  bool found = false;
  double best_obj = 0;
  for (unsigned mask = 0; mask < (1u << m_in); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < m_in; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const int ma = static_cast<int>(act.size());
    const int m = m_eq + ma;
    MatX K = MatX::Zero(n + m, n + m);
    VecX rhs(n + m);
    K.topLeftCorner(n, n) = qp.H;
    rhs.head(n) = -qp.g;
    if (m_eq > 0) {
      K.block(n, 0, m_eq, n) = qp.A_eq;
      K.block(0, n, n, m_eq) = qp.A_eq.transpose();
      rhs.segment(n, m_eq) = qp.b_eq;
    }
    for (int k = 0; k < ma; ++k) {
      K.row(n + m_eq + k).head(n) = qp.A_in.row(act[k]);
      K.col(n + m_eq + k).head(n) = qp.A_in.row(act[k]).transpose();
      rhs[n + m_eq + k] = qp.b_in[act[k]];
    }
    Eigen::FullPivLU<MatX> lu(K);
    if (!lu.isInvertible()) continue;
    const VecX sol = lu.solve(rhs);
    const VecX x = sol.head(n);
    bool ok = true;
    for (int k = 0; k < ma && ok; ++k)
      if (sol[n + m_eq + k] < -1e-9) ok = false;
    for (int i = 0; i < m_in && ok; ++i)
      if (qp.A_in.row(i).dot(x) - qp.b_in[i] > 1e-9) ok = false;
    if (m_eq > 0 && ok)
      if ((qp.A_eq * x - qp.b_eq).cwiseAbs().maxCoeff() > 1e-9) ok = false;
    if (!ok) continue;
    const double obj = 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
    if (!found || obj < best_obj - 1e-12) {
      found = true;
      best_obj = obj;
      best_x = x;
    }
  }
  return found;
}

QPProblem random_feasible_qp(SplitMix64& rng, int n, int m_eq, int m_in) {
  QPProblem qp;
  MatX B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = rng.next_gaussian();
  qp.H = B * B.transpose() + 0.1 * MatX::Identity(n, n);
  qp.g.resize(n);
  for (int i = 0; i < n; ++i) qp.g[i] = rng.next_gaussian();
  VecX x0(n);
  for (int i = 0; i < n; ++i) x0[i] = rng.next_gaussian();
  qp.A_eq.resize(m_eq, n);
  qp.b_eq.resize(m_eq);
  for (int r = 0; r < m_eq; ++r) {
    for (int j = 0; j < n; ++j) qp.A_eq(r, j) = rng.next_gaussian();
    qp.b_eq[r] = qp.A_eq.row(r).dot(x0);
  }
  qp.A_in.resize(m_in, n);
  qp.b_in.resize(m_in);
  for (int r = 0; r < m_in; ++r) {
    for (int j = 0; j < n; ++j) qp.A_in(r, j) = rng.next_gaussian();
    // keep x0 strictly feasible so the problem is guaranteed solvable
    qp.b_in[r] = qp.A_in.row(r).dot(x0) + 0.05 + rng.next_double();
  }
  return qp;
}

}  // namespace

TEST_CASE("minimum norm with a pinned coordinate") {
  const int n = 5;
  QPProblem qp;
  qp.H = MatX::Identity(n, n);
  qp.g = VecX::Zero(n);
  qp.A_eq = MatX::Zero(1, n);
  qp.A_eq(0, 0) = 1.0;
  qp.b_eq = VecX::Constant(1, 1.0);
  qp.A_in = MatX(0, n);
  qp.b_in = VecX(0);
  const QPSolution sol = solve_qp(qp);
  CHECK(sol.status == QPStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-10));
  for (int i = 1; i < n; ++i) CHECK(std::abs(sol.x[i]) < 1e-10);
  CHECK(sol.lambda_eq[0] == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("projection onto the nonnegative orthant clamps coordinate-wise") {
  SplitMix64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(9));
    VecX a(n);
    for (int i = 0; i < n; ++i) a[i] = rng.uniform(-2.0, 2.0);
    QPProblem qp;
    qp.H = MatX::Identity(n, n);
    qp.g = -a;
    qp.A_eq = MatX(0, n);
    qp.b_eq = VecX(0);
    qp.A_in = -MatX::Identity(n, n);  // -x <= 0
    qp.b_in = VecX::Zero(n);
    const QPSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QPStatus::Optimal);
    for (int i = 0; i < n; ++i)
      CHECK(sol.x[i] == doctest::Approx(std::max(0.0, a[i])).epsilon(1e-9));
  }
}

TEST_CASE("random problems match the exhaustive active-set oracle") {
  SplitMix64 rng(7);
  int solved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(29));      // up to 30
    const int m_eq = static_cast<int>(rng.next_below(4));        // 0..3
    const int m_in = 1 + static_cast<int>(rng.next_below(10));   // 1..10
    const QPProblem qp = random_feasible_qp(rng, n, std::min(m_eq, n - 1), m_in);
    VecX ref;
    REQUIRE(brute_force_qp(qp, ref));
    const QPSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QPStatus::Optimal);
    CHECK((sol.x - ref).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(sol.primal_in <= 1e-8);
    CHECK(sol.stationarity < 1e-6);
    ++solved;
  }
  CHECK(solved == 200);
}

TEST_CASE("identical problems give bitwise-identical solutions") {
  SplitMix64 rng(99);
  const QPProblem qp = random_feasible_qp(rng, 12, 2, 8);
  const QPSolution a = solve_qp(qp);
  const QPSolution b = solve_qp(qp);
  REQUIRE(a.x.size() == b.x.size());
  for (int i = 0; i < a.x.size(); ++i) CHECK(a.x[i] == b.x[i]);
  CHECK(a.active == b.active);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("warm starting with the optimal active set converges in one solve") {
  SplitMix64 rng(123);
  const QPProblem qp = random_feasible_qp(rng, 15, 2, 9);
  const QPSolution cold = solve_qp(qp);
  REQUIRE(cold.status == QPStatus::Optimal);
  const QPSolution warm = solve_qp(qp, 1e-8, 100, &cold.active);
  REQUIRE(warm.status == QPStatus::Optimal);
  CHECK(warm.iterations <= 2);
  CHECK((warm.x - cold.x).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("contradictory equalities are reported infeasible") {
  QPProblem qp;
  qp.H = MatX::Identity(2, 2);
  qp.g = VecX::Zero(2);
  qp.A_eq = MatX(2, 2);
  qp.A_eq << 1, 0, 1, 0;
  qp.b_eq = VecX(2);
  qp.b_eq << 0.0, 1.0;
  qp.A_in = MatX(0, 2);
  qp.b_in = VecX(0);
  const QPSolution sol = solve_qp(qp);
  CHECK(sol.status == QPStatus::Infeasible);
}
