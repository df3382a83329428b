#include <gtest/gtest.h>

#include <cmath>

#include "bgwtilt/casebook.hpp"
#include "bgwtilt/errors.hpp"
#include "bgwtilt/spectral.hpp"
#include "corpus.hpp"

using namespace bgwtilt;

namespace {

// Plain partial sums of 2 e^{n theta} / (n (n-1) (n-2)).
double g_series_oracle(double theta) {
  double s = 0;
  for (int n = 3; n < 2'000'000; ++n) {
    const double term = 2 * std::exp(n * theta) / (double(n) * (n - 1) * (n - 2));
    s += term;
    if (term < 1e-20) break;
  }
  return s;
}

}  // namespace

TEST(Fig1, FamilyAndRadius) {
  const Fig1 f = fig1_family();
  for (int i = 0; i < 2; ++i)
    for (const auto& [w, p] : f.exact.law(i)) EXPECT_EQ(p, Rational(1, 3));
  EXPECT_NEAR(classify(f.projected).rho, 4.0 / 3, 1e-12);
}

TEST(Fig1, CaptionCurveIsOnTheImageBoundary) {
  // Each curve point is chi of a critical tilt whose direction is normal to the curve.
  const ProjectedFamily mu = fig1_family().projected;
  for (double s : {-4.0, -2.0, -1.0, -0.8}) {
    const auto [c1, c2] = fig1_boundary_point(s);
    const auto [d1, d2] = fig1_boundary_derivative(s);
    // Normal (t, 1 - t) with t d1 + (1 - t) d2 = 0.
    const double t = d2 / (d2 - d1);
    ASSERT_GT(t, 0);
    ASSERT_LT(t, 1);
    const CriticalSolveResult r = critical_for_direction(mu, (Vec(2) << t, 1 - t).finished());
    const Vec c = chi(mu, r.theta_star);
    EXPECT_NEAR(c[0], c1, 1e-8) << s;
    EXPECT_NEAR(c[1], c2, 1e-8) << s;
  }
  EXPECT_THROW(fig1_boundary_point(0.0), DomainError);
}

TEST(Fig1, DerivativeMatchesDifferences) {
  for (double s : {-3.0, -1.5, -1.0, -0.75}) {
    const double h = 1e-6;
    const auto a = fig1_boundary_point(s + h), b = fig1_boundary_point(s - h);
    const auto d = fig1_boundary_derivative(s);
    EXPECT_NEAR(d.first, (a.first - b.first) / (2 * h), 1e-6);
    EXPECT_NEAR(d.second, (a.second - b.second) / (2 * h), 1e-6);
  }
}

TEST(Fig1, NearestPointMatching) {
  const auto [c1, c2] = fig1_boundary_point(-1.0);
  const CaptionMatch m = match_caption(c1, c2);
  EXPECT_LT(m.gap, 1e-10);
  EXPECT_NEAR(m.s, -1.0, 1e-6);
  // Off-curve points report their distance.
  const CaptionMatch off = match_caption(c1 + 0.01, c2 + 0.01);
  EXPECT_GT(off.gap, 1e-3);
}

TEST(GFunction, ClosedFormMatchesSeries) {
  for (double theta : {-10.0, -3.0, -1.0, -0.3, -0.05, -0.01}) {
    const GValue v = g_eval(theta);
    const double ref = g_series_oracle(theta);
    EXPECT_NEAR(v.closed, ref, 1e-12) << theta;
    EXPECT_NEAR(v.series, ref, 1e-12) << theta;
    EXPECT_GE(v.closed, 0);
    EXPECT_LE(v.derivative, 2);
    const double h = 1e-6;
    EXPECT_NEAR(g_prime(theta), (g_closed(theta + h) - g_closed(theta - h)) / (2 * h), 1e-6);
  }
  EXPECT_THROW(g_closed(0.0), DomainError);
}

TEST(AppendixA, GeneratingFunctionsAreConsistent) {
  for (double eps : {0.0, 0.01}) {
    const AppendixAFamily f(10, eps);
    f.check_normalized();
    const Vec x = (Vec(2) << 0.7, 1.3).finished();
    ASSERT_TRUE(f.in_domain(x));
    const double h = 1e-6;
    for (int type = 0; type < 2; ++type) {
      const Vec g = f.gradient(type, x);
      const Mat H = f.hessian(type, x);
      for (int c = 0; c < 2; ++c) {
        Vec a = x, b = x;
        a[c] += h;
        b[c] -= h;
        EXPECT_NEAR(g[c], (f.value(type, a) - f.value(type, b)) / (2 * h), 1e-6 * std::max(1.0, std::abs(g[c])));
        const Vec dg = (f.gradient(type, a) - f.gradient(type, b)) / (2 * h);
        EXPECT_LT((H.col(c) - dg).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, dg.cwiseAbs().maxCoeff()));
      }
    }
  }
  EXPECT_FALSE(AppendixAFamily(10, 0.01).in_domain((Vec(2) << 2.8, 1.0).finished()));
  EXPECT_TRUE(AppendixAFamily(10, 0.0).in_domain((Vec(2) << 2.8, 1.0).finished()));
  EXPECT_THROW(AppendixAFamily(10, -1), InputError);
}

TEST(AppendixA, ScanShowsDivergenceEvidence) {
  AppendixAScanOptions opts;
  opts.s_values = {10, 20};
  const AppendixAReport r = appendix_a_scan(10, 0.01, opts);
  EXPECT_TRUE(r.divergence_evidence);
  EXPECT_TRUE(r.theta1_below_one);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_LT(r.rows[0].min_residual, r.rows[1].min_residual);
  EXPECT_FALSE(r.rows[0].solver_converged);
}

TEST(AppendixA, ControlFamilyConverges) {
  const CriticalSolveResult r = find_critical_equivalent(appendix_a_family(10, 0), GammaConstraint::parse("6 1"),
                                                         (Vec(2) << -10, 10).finished(), Vec::Constant(2, 0.5));
  EXPECT_LE(r.residuals.rho_gap, 1e-8);
  EXPECT_LE(r.residuals.equivalence_residual, 1e-8);
}

TEST(AppendixB, Delta) {
  EXPECT_NEAR(appendix_b_delta(3), std::sqrt(5.0) - 2, 1e-14);
  for (int N : {4, 6, 9}) {
    const double d = appendix_b_delta(N);
    EXPECT_NEAR(d, std::pow((1 + d) / 2, N), 1e-14);
    EXPECT_GT(d, 0);
    EXPECT_LT(d, 1);
  }
  EXPECT_THROW(appendix_b_delta(2), InputError);
}

TEST(AppendixB, Preimages) {
  const AppendixBResult r = appendix_b_preimages(3);
  ASSERT_EQ(r.preimages.size(), 20u);
  const OrderedFamily z = to_double(appendix_b_family(3));
  for (std::size_t i = 0; i < r.preimages.size(); ++i) {
    EXPECT_LT(corpus::oracle_chi(z, r.preimages[i]).cwiseAbs().maxCoeff(), 1e-10);
    for (std::size_t j = 0; j < i; ++j) EXPECT_GT((r.preimages[i] - r.preimages[j]).cwiseAbs().maxCoeff(), 1e-3);
  }
  EXPECT_EQ(appendix_b_preimages(4).preimages.size(), 70u);
  EXPECT_THROW(appendix_b_preimages(12), BudgetError);
}
