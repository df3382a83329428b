#pragma once

// Worked examples: the Fig. 1 family and its boundary curve, the non-entire
// family built from g, and the 2N-type family whose zero tilt has many
// preimages under chi.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bgwtilt/chi.hpp"
#include "bgwtilt/family.hpp"

namespace bgwtilt {

// phi1 = (x1 x2^2 + x1 x2 + x2)/3, phi2 = (x1 x2 + x2 + 1)/3.
struct Fig1 {
  ExactOrderedFamily exact;
  OrderedFamily ordered;
  ProjectedFamily projected;
};
Fig1 fig1_family();

// Closed-form boundary curve of chi(R^2) for the Fig. 1 family, s < -ln 2.
std::pair<double, double> fig1_boundary_point(double s);
std::pair<double, double> fig1_boundary_derivative(double s);

struct CaptionMatch {
  double s = 0;
  double chi1_paper = 0;
  double chi2_paper = 0;
  double chi1_traced = 0;
  double chi2_traced = 0;
  double gap = 0;  // Euclidean distance to the nearest curve point
};

// Nearest point of the closed-form curve to c.
CaptionMatch match_caption(double chi1, double chi2);
std::vector<CaptionMatch> compare_with_caption(const BoundaryTrace& trace);

struct GValue {
  double closed = 0;
  double series = 0;
  double derivative = 0;  // g'(theta), closed form
  int terms = 0;          // series terms used
};

// g(theta) = sum_{n>=3} 2 e^{n theta} / (n (n-1) (n-2)) for theta < 0.
GValue g_eval(double theta);
double g_closed(double theta);
double g_prime(double theta);

// Two-type family with an analytic, non-entire perturbation of size eps.
// For eps > 0 its domain is x1 < e.
class AppendixAFamily : public AnalyticGenerating {
 public:
  AppendixAFamily(double A, double eps);

  int types() const override { return 2; }
  std::string name() const override { return "appendix_a"; }
  std::vector<std::pair<std::string, double>> parameters() const override;
  DeclaredFlags declared_flags() const override;

  bool in_domain(const Vec& x) const override;
  double value(int type, const Vec& x) const override;
  Vec gradient(int type, const Vec& x) const override;
  Mat hessian(int type, const Vec& x) const override;

  double A() const { return A_; }
  double eps() const { return eps_; }

 private:
  double A_;
  double eps_;
  double z1_;
  double z2_;
};

ProjectedFamily appendix_a_family(double A, double eps);

struct AppendixAScanOptions {
  std::vector<double> s_values{10, 20, 40};
  int curve_points = 4000;
  Vec direction = Vec::Constant(2, 0.5);  // X for the solver attempts
  SolverOptions solver;
};

struct AppendixARow {
  double s = 0;
  double min_residual = 0;        // min over the critical curve of the (6 1)-equivalence residual
  double theta1 = 0;              // curve point attaining it
  double theta2 = 0;
  double gap = 0;                 // |s/2 - theta1/6|
  double C = 0;                   // estimate of the constant in the asymptotic bounds
  bool exceeds_bound = false;     // gap > C/3
  bool solver_converged = false;
  std::string solver_summary;
};

struct AppendixAReport {
  double A = 0;
  double eps = 0;
  int critical_points = 0;        // curve points kept (rho = 1 within 1e-8)
  double max_theta1 = 0;
  bool theta1_below_one = true;
  std::vector<AppendixARow> rows;
  bool divergence_evidence = false;
  std::string statement;
};

// Scans the critical set of the family through its reduced quadratic and
// tests Gamma = (6 1)-equivalence with (-s, s) along a ladder of s.
AppendixAReport appendix_a_scan(double A, double eps, const AppendixAScanOptions& options = {});

// K = 2N; a type-i vertex has no child (1/4), two type-i children (1/2) or
// one child of each type in order (1/4).
ExactOrderedFamily appendix_b_family(int N);

// Root in (0, 1) of delta = ((1 + delta)/2)^N by bisection.
double appendix_b_delta(int N);

struct AppendixBResult {
  double delta = 0;
  std::vector<TiltVector> preimages;  // N-subsets of [2N] in colex order
  std::vector<double> chi_norms;      // |chi(theta)|_inf under the family, evaluated directly
};

AppendixBResult appendix_b_preimages(int N);

}  // namespace bgwtilt
