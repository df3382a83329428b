#include <gtest/gtest.h>

#include <random>

#include "bgwtilt/casebook.hpp"
#include "bgwtilt/chi.hpp"
#include "bgwtilt/errors.hpp"
#include "bgwtilt/spectral.hpp"
#include "corpus.hpp"

using namespace bgwtilt;

namespace {

Vec random_theta(std::mt19937_64& gen, int k, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  Vec t(k);
  for (auto& x : t) x = u(gen);
  return t;
}

Mat fd_jacobian(const ProjectedFamily& mu, const Vec& theta, double h = 1e-6) {
  const int k = static_cast<int>(theta.size());
  Mat j(k, k);
  for (int c = 0; c < k; ++c) {
    Vec a = theta, b = theta;
    a[c] += h;
    b[c] -= h;
    j.col(c) = (chi(mu, a) - chi(mu, b)) / (2 * h);
  }
  return j;
}

// Maximizer of -X.chi on {chi1 = chi2} for fig1, by nested 1-D searches.
Vec fig1_equal_chi_oracle(const Vec& X) {
  const FiniteFamily mu = corpus::fig1();
  auto theta2_for = [&](double t1) {
    // chi1 - chi2 is increasing in theta2 along this family; bisect.
    auto h = [&](double t2) {
      const Vec c = corpus::oracle_chi(mu, (Vec(2) << t1, t2).finished());
      return c[0] - c[1];
    };
    double lo = -40, hi = 40;
    if ((h(lo) > 0) == (h(hi) > 0)) return std::nan("");
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((h(mid) > 0) == (h(lo) > 0)) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  auto value = [&](double t1) {
    const double t2 = theta2_for(t1);
    return -X.dot(corpus::oracle_chi(mu, (Vec(2) << t1, t2).finished()));
  };
  double a = -5, b = 5;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 200; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (value(c) > value(d)) b = d; else a = c;
  }
  const double t1 = 0.5 * (a + b);
  return (Vec(2) << t1, theta2_for(t1)).finished();
}

}  // namespace

TEST(Chi, VanishesAtOrigin) {
  for (const auto& [name, mu] : corpus::finite_families())
    EXPECT_LT(chi(mu, Vec::Zero(mu.types())).cwiseAbs().maxCoeff(), 1e-14) << name;
}

TEST(Chi, MatchesDirectSum) {
  std::mt19937_64 gen(31);
  for (const auto& [name, mu] : corpus::finite_families()) {
    const Vec t = random_theta(gen, mu.types(), 2.0);
    EXPECT_LT((chi(mu, t) - corpus::oracle_chi(mu, t)).cwiseAbs().maxCoeff(), 1e-12) << name;
  }
}

TEST(Chi, JacobianIsMeanMinusIdentity) {
  std::mt19937_64 gen(32);
  for (int trial = 0; trial < 100; ++trial) {
    const FiniteFamily mu = corpus::random_family(gen, 1 + trial % 3);
    const Vec t = random_theta(gen, mu.types(), 1.0);
    const Mat expected = corpus::oracle_mean(mu, t) - Mat::Identity(mu.types(), mu.types());
    EXPECT_LT((chi_jacobian(mu, t) - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((fd_jacobian(mu, t) - expected).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Chi, TiltCommutesWithChi) {
  // chi of mu_a at b equals chi(a + b) - chi(a).
  std::mt19937_64 gen(33);
  for (int trial = 0; trial < 100; ++trial) {
    const FiniteFamily mu = corpus::random_family(gen, 1 + trial % 3);
    const Vec a = random_theta(gen, mu.types(), 1.0), b = random_theta(gen, mu.types(), 1.0);
    const Vec lhs = chi(tilt(mu, a), b);
    const Vec rhs = chi(mu, a + b) - chi(mu, a);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Objective, GradientAndHessian) {
  std::mt19937_64 gen(34);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const FiniteFamily mu = corpus::random_family(gen, 2 + trial % 2);
    const int k = mu.types();
    Vec X(k);
    for (auto& x : X) x = u(gen);
    X /= X.sum();
    const Vec t = random_theta(gen, k, 1.0);
    const ObjectiveValue f = f_and_grad(mu, X, t, true);
    EXPECT_NEAR(f.value, -X.dot(corpus::oracle_chi(mu, t)), 1e-12);
    const double h = 1e-6;
    for (int c = 0; c < k; ++c) {
      Vec a = t, b = t;
      a[c] += h;
      b[c] -= h;
      EXPECT_NEAR(f.gradient[c], (f_and_grad(mu, X, a).value - f_and_grad(mu, X, b).value) / (2 * h), 1e-6);
      const Vec dg = (f_and_grad(mu, X, a).gradient - f_and_grad(mu, X, b).gradient) / (2 * h);
      EXPECT_LT((f.hessian->col(c) - dg).cwiseAbs().maxCoeff(), 1e-5);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(*f.hessian);
    EXPECT_LE(es.eigenvalues().maxCoeff(), 1e-12);  // concave
  }
}

TEST(Gamma, ParseAndKernel) {
  const GammaConstraint g = GammaConstraint::parse("2 -1; 0 1 ");
  EXPECT_EQ(g.rows(), 2);
  EXPECT_EQ(g.types(), 2);
  EXPECT_EQ(g.kernel_basis().cols(), 0);
  const GammaConstraint h = GammaConstraint::parse("1,1,0");
  ASSERT_EQ(h.kernel_basis().cols(), 2);
  const Mat B = h.kernel_basis();
  EXPECT_LT((B.transpose() * B - Mat::Identity(2, 2)).norm(), 1e-14);
  EXPECT_LT((h.as_matrix() * B).norm(), 1e-14);
  EXPECT_EQ(h.apply(Counts{2, 3, 7}), (IntRow{5}));
  EXPECT_THROW(GammaConstraint::parse("1 1; 2 2"), InputError);
  EXPECT_THROW(GammaConstraint::parse("1 1; 2"), InputError);
  EXPECT_THROW(GammaConstraint::parse(""), InputError);
  EXPECT_THROW(GammaConstraint::parse("1 x"), InputError);
  EXPECT_THROW(GammaConstraint({{1, 1}}, IntRow{1, 2}), InputError);
}

TEST(Gamma, CompanionIsEquivalentToOrigin) {
  const ProjectedFamily mu(corpus::fig1());
  const TiltVector q = subcritical_companion(mu);
  for (const char* g : {"1 1", "1 0", "2 -1", "1 0; 0 1"}) {
    const GammaConstraint gamma = GammaConstraint::parse(g);
    EXPECT_LT(equivalence_residual(mu, q, Vec::Zero(2), gamma), 1e-12) << g;
    EXPECT_TRUE(gamma_equivalent(mu, q, Vec::Zero(2), gamma)) << g;
  }
  EXPECT_FALSE(gamma_equivalent(mu, (Vec(2) << 1, 0).finished(), Vec::Zero(2), GammaConstraint::parse("1 1")));
}

TEST(Cone, ZeroConeReturnsThetaBar) {
  const ProjectedFamily mu(corpus::critical2());
  const GammaConstraint gamma = GammaConstraint::parse("1 -1");
  EXPECT_EQ(cone_membership(mu, gamma, Vec::Zero(2)), ConeCase::ZeroCone);
  const CriticalSolveResult r = find_critical_equivalent(mu, gamma, Vec::Zero(2), (Vec(2) << 0.3, 0.7).finished());
  EXPECT_EQ(r.cone_case, ConeCase::ZeroCone);
  EXPECT_EQ(r.theta_star, Vec::Zero(2));
  EXPECT_EQ(r.lambda, 0.0);
  EXPECT_EQ(to_string(ConeCase::ZeroCone), "ZeroCone");
  EXPECT_EQ(cone_membership(mu, GammaConstraint::parse("1 1"), Vec::Zero(2)), ConeCase::OpenCone);
}

TEST(Solver, Fig1MatchesConstrainedOracle) {
  const ProjectedFamily mu(corpus::fig1());
  const Vec X = (Vec(2) << 0.5, 0.5).finished();
  const CriticalSolveResult r = find_critical_equivalent(mu, GammaConstraint::parse("1 1"), Vec::Zero(2), X);
  EXPECT_LE(r.residuals.rho_gap, 1e-8);
  EXPECT_LE(r.residuals.equivalence_residual, 1e-8);
  EXPECT_NEAR(corpus::rho2(corpus::oracle_mean(corpus::fig1(), r.theta_star)), 1.0, 1e-8);
  const Vec oracle = fig1_equal_chi_oracle(X);
  EXPECT_LT((r.theta_star - oracle).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_GT(r.lambda, 0.0);
  EXPECT_NEAR(r.X_star.sum(), 1.0, 1e-12);
  // Gamma = (1 1) gives Gamma X* = lambda Gamma X with both sums one.
  EXPECT_NEAR(r.lambda, 1.0, 1e-9);
}

TEST(Solver, DirectionModeHitsDirection) {
  const ProjectedFamily mu(corpus::fig1());
  for (double t : {0.1, 0.3, 0.45}) {
    const Vec X = (Vec(2) << t, 1 - t).finished();
    const CriticalSolveResult r = critical_for_direction(mu, X);
    EXPECT_LE(r.residuals.rho_gap, 1e-8);
    EXPECT_LT((r.X_star - X).lpNorm<1>(), 1e-6);
  }
}

TEST(Solver, FullRankGammaIsUnconstrained) {
  // Im(Gamma^T) = R^2, so every tilt is equivalent and the answer is the
  // critical tilt with direction X.
  const ProjectedFamily mu(corpus::fig1());
  const Vec X = (Vec(2) << 0.35, 0.65).finished();
  const CriticalSolveResult r = find_critical_equivalent(mu, GammaConstraint::parse("1 0; 0 1"), Vec::Zero(2), X);
  const CriticalSolveResult d = critical_for_direction(mu, X);
  EXPECT_LT((r.theta_star - d.theta_star).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_LT((r.X_star - X).lpNorm<1>(), 1e-6);
}

TEST(Solver, RejectsBadInput) {
  const ProjectedFamily mu(corpus::fig1());
  EXPECT_THROW(find_critical_equivalent(mu, GammaConstraint::parse("1 1 1"), Vec::Zero(2), Vec::Constant(2, 0.5)),
               InputError);
  EXPECT_THROW(find_critical_equivalent(mu, GammaConstraint::parse("1 1"), Vec::Zero(2), (Vec(2) << 1.0, 0.0).finished()),
               InputError);
}

TEST(Solver, AnalyticCounterexampleDiverges) {
  const ProjectedFamily mu = appendix_a_family(10, 0.01);
  try {
    find_critical_equivalent(mu, GammaConstraint::parse("6 1"), (Vec(2) << -10, 10).finished(), Vec::Constant(2, 0.5));
    FAIL() << "expected divergence";
  } catch (const SolverDivergence& e) {
    EXPECT_FALSE(e.trajectory().empty());
  }
}

TEST(Boundary, SinglePointAndShape) {
  const ProjectedFamily mu(corpus::fig1());
  const BoundaryTrace one = trace_boundary(mu, 1);
  EXPECT_EQ(one.points.size(), 1u);
  const BoundaryTrace tr = trace_boundary(mu, 12);
  ASSERT_EQ(tr.points.size(), 12u);
  for (std::size_t i = 1; i < tr.points.size(); ++i) EXPECT_LT(tr.points[i - 1].t, tr.points[i].t);
  for (const auto& p : tr.points) {
    EXPECT_NEAR(rho_at(mu, p.theta), 1.0, 1e-8);
    const Vec X = (Vec(2) << p.t, 1 - p.t).finished();
    for (const auto& q : tr.points) EXPECT_GE(X.dot(q.chi), X.dot(p.chi) - 1e-10);
  }
  EXPECT_THROW(trace_boundary(ProjectedFamily(corpus::cyclic3()), 5), InputError);
  EXPECT_THROW(trace_boundary(mu, 0), InputError);
}

TEST(Accessible, OneTypeCounts) {
  const auto dirs = accessible_directions(corpus::binary_critical(), 4);
  EXPECT_EQ(dirs, (std::set<Counts>{{1}, {2}, {3}}));
  EXPECT_THROW(accessible_directions(corpus::binary_critical(), 40), BudgetError);
}

TEST(Accessible, RequiresChildlessRoot) {
  // One-child family: the root type is never childless.
  EXPECT_TRUE(accessible_directions(corpus::one_child(), 5).empty());
}

TEST(Accessible, Fig1SmallTrees) {
  const auto dirs = accessible_directions(fig1_family().ordered, 4);
  ASSERT_FALSE(dirs.empty());
  for (const auto& d : dirs) {
    EXPECT_EQ(d.size(), 2u);
    EXPECT_GE(d[0] + d[1], 1);
    EXPECT_LE(d[0] + d[1], 3);
  }
}
