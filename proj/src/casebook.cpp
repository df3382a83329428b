#include "bgwtilt/casebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bgwtilt/errors.hpp"
#include "bgwtilt/spectral.hpp"

namespace bgwtilt {

namespace {

const double kLn2 = std::log(2.0);
const double kLn3 = std::log(3.0);

// G(u) = g(log u) and its derivatives in u, for u < 1.
double big_g(double u) { return -(u - 1) * (u - 1) * std::log1p(-u) + u * (1.5 * u - 1); }
double big_g1(double u) { return -2 * (u - 1) * std::log1p(-u) + 2 * u; }
double big_g2(double u) { return -2 * std::log1p(-u); }

}  // namespace

Fig1 fig1_family() {
  const Rational third(1, 3);
  ExactOrderedFamily exact(2, {{{{0, 1, 1}, third}, {{0, 1}, third}, {{1}, third}},
                               {{{0, 1}, third}, {{1}, third}, {{}, third}}});
  OrderedFamily ordered = to_double(exact);
  ProjectedFamily projected(project(ordered));
  return Fig1{std::move(exact), std::move(ordered), std::move(projected)};
}

std::pair<double, double> fig1_boundary_point(double s) {
  if (!(s < -kLn2)) throw DomainError("boundary parameter must satisfy s < -ln 2");
  const double e = std::exp(s);
  const double a = 1 - 2 * e;
  const double b = 1 - 2 * e * e * (1 + e);
  if (!(a > 0) || !(b > 0)) throw DomainError("boundary parameter outside the curve's domain");
  const double c1 = 2 * s - 2 * std::log(a) + std::log1p(-e) - kLn3 - std::log1p(e);
  const double c2 = std::log(b) - kLn3 - 2 * s;
  return {c1, c2};
}

std::pair<double, double> fig1_boundary_derivative(double s) {
  if (!(s < -kLn2)) throw DomainError("boundary parameter must satisfy s < -ln 2");
  const double e = std::exp(s);
  const double d1 = 2 + 4 * e / (1 - 2 * e) - e / (1 - e) - e / (1 + e);
  const double d2 = (-4 * e * e - 6 * e * e * e) / (1 - 2 * e * e - 2 * e * e * e) - 2;
  return {d1, d2};
}

CaptionMatch match_caption(double chi1, double chi2) {
  auto dist2 = [&](double s) {
    auto [p1, p2] = fig1_boundary_point(s);
    return (p1 - chi1) * (p1 - chi1) + (p2 - chi2) * (p2 - chi2);
  };
  // s = -ln 2 - e^v puts grid points densely near both ends of the curve.
  double best_s = 0;
  double best = std::numeric_limits<double>::infinity();
  constexpr int kGrid = 4000;
  for (int i = 0; i <= kGrid; ++i) {
    const double v = -30.0 + 36.0 * i / kGrid;
    const double s = -kLn2 - std::exp(v);
    try {
      const double d = dist2(s);
      if (d < best) {
        best = d;
        best_s = s;
      }
    } catch (const DomainError&) {
    }
  }
  if (!std::isfinite(best)) throw DomainError("no curve point found");
  // Gauss-Newton on the orthogonality condition (P(s) - c) . P'(s) = 0.
  double s = best_s;
  for (int it = 0; it < 60; ++it) {
    auto [p1, p2] = fig1_boundary_point(s);
    auto [d1, d2] = fig1_boundary_derivative(s);
    const double step = ((p1 - chi1) * d1 + (p2 - chi2) * d2) / (d1 * d1 + d2 * d2);
    double next = s - step;
    while (!(next < -kLn2)) next = 0.5 * (next + s);
    try {
      if (dist2(next) > dist2(s)) break;
    } catch (const DomainError&) {
      break;
    }
    if (std::abs(next - s) <= 1e-16 * std::max(1.0, std::abs(s))) {
      s = next;
      break;
    }
    s = next;
  }
  auto [p1, p2] = fig1_boundary_point(s);
  CaptionMatch m;
  m.s = s;
  m.chi1_paper = p1;
  m.chi2_paper = p2;
  m.chi1_traced = chi1;
  m.chi2_traced = chi2;
  m.gap = std::hypot(p1 - chi1, p2 - chi2);
  return m;
}

std::vector<CaptionMatch> compare_with_caption(const BoundaryTrace& trace) {
  std::vector<CaptionMatch> out;
  out.reserve(trace.points.size());
  for (const auto& p : trace.points) out.push_back(match_caption(p.chi[0], p.chi[1]));
  return out;
}

double g_closed(double theta) {
  if (!(theta < 0)) throw DomainError("g is defined for theta < 0");
  return big_g(std::exp(theta));
}

double g_prime(double theta) {
  if (!(theta < 0)) throw DomainError("g is defined for theta < 0");
  const double u = std::exp(theta);
  return u * big_g1(u);
}

GValue g_eval(double theta) {
  GValue out;
  out.closed = g_closed(theta);
  out.derivative = g_prime(theta);
  const double u = std::exp(theta);
  double power = u * u * u;
  double sum = 0;
  long n = 3;
  for (; n < 100'000'000; ++n) {
    const double dn = static_cast<double>(n);
    sum += 2 * power / (dn * (dn - 1) * (dn - 2));
    power *= u;
    // The remaining terms are at most u^{n+1} times the current coefficient, summed geometrically.
    const double tail = 2 * power / ((dn + 1) * dn * (dn - 1) * (1 - u));
    if (tail < 1e-13) break;
  }
  out.series = sum;
  out.terms = static_cast<int>(n - 2);
  return out;
}

AppendixAFamily::AppendixAFamily(double A, double eps) : A_(A), eps_(eps) {
  if (!(A > 0) || !std::isfinite(A)) throw InputError("A must be > 0");
  if (!(eps >= 0) || !std::isfinite(eps)) throw InputError("eps must be >= 0");
  z1_ = 2 + 2 * std::exp(-2 * A) + eps * g_closed(-1.0);
  z2_ = 2 + std::exp(-2 * A);
}

std::vector<std::pair<std::string, double>> AppendixAFamily::parameters() const {
  return {{"A", A_}, {"eps", eps_}};
}

DeclaredFlags AppendixAFamily::declared_flags() const {
  DeclaredFlags f;
  f.entire = eps_ == 0;
  f.finite = true;
  f.nondegenerate = true;
  f.nonlocalized = true;
  f.irreducible = true;
  f.aperiodic = false;  // type-2 child counts are always even
  return f;
}

bool AppendixAFamily::in_domain(const Vec& x) const {
  if (x.size() != 2 || !x.allFinite()) return false;
  return eps_ == 0 || x[0] < std::exp(1.0);
}

double AppendixAFamily::value(int type, const Vec& x) const {
  const double w = std::exp(-2 * A_);
  if (type == 0) {
    double v = 1 + 2 * w * x[0] * x[0] + x[1] * x[1];
    if (eps_ > 0) v += eps_ * big_g(x[0] / std::exp(1.0));
    return v / z1_;
  }
  if (type == 1) return (1 + w * x[0] * x[0] + x[1] * x[1]) / z2_;
  throw InputError("type out of range");
}

Vec AppendixAFamily::gradient(int type, const Vec& x) const {
  const double w = std::exp(-2 * A_);
  Vec g(2);
  if (type == 0) {
    const double e = std::exp(1.0);
    g << 4 * w * x[0] + (eps_ > 0 ? eps_ * big_g1(x[0] / e) / e : 0.0), 2 * x[1];
    return g / z1_;
  }
  if (type == 1) {
    g << 2 * w * x[0], 2 * x[1];
    return g / z2_;
  }
  throw InputError("type out of range");
}

Mat AppendixAFamily::hessian(int type, const Vec& x) const {
  const double w = std::exp(-2 * A_);
  Mat h = Mat::Zero(2, 2);
  if (type == 0) {
    const double e = std::exp(1.0);
    h(0, 0) = 4 * w + (eps_ > 0 ? eps_ * big_g2(x[0] / e) / (e * e) : 0.0);
    h(1, 1) = 2;
    return h / z1_;
  }
  if (type == 1) {
    h(0, 0) = 2 * w;
    h(1, 1) = 2;
    return h / z2_;
  }
  throw InputError("type out of range");
}

ProjectedFamily appendix_a_family(double A, double eps) {
  return ProjectedFamily(std::make_shared<const AppendixAFamily>(A, eps));
}

AppendixAReport appendix_a_scan(double A, double eps, const AppendixAScanOptions& options) {
  if (options.s_values.empty()) throw InputError("scan needs at least one s value");
  if (options.curve_points < 2) throw InputError("curve_points must be >= 2");
  const ProjectedFamily mu = appendix_a_family(A, eps);
  AppendixAReport report;
  report.A = A;
  report.eps = eps;

  // Critical set: for each theta1 the positive roots Y = e^{2 theta2} of
  //   Y^2 + (X + eps d) Y - (1 + X)(1 - 2X + eps d) = 0,
  // X = e^{2(theta1 - A)}, d = g(theta1 - 1) - g'(theta1 - 1); then keep
  // the points where 1 is the Perron root rather than a smaller eigenvalue.
  const double s_max = *std::max_element(options.s_values.begin(), options.s_values.end());
  const double lo = -(3 * s_max + 60);
  const double hi = eps > 0 ? 1.0 - 1e-6 : A + 20;
  std::vector<double> t1;
  for (int i = 0; i < options.curve_points; ++i) t1.push_back(lo + (hi - lo) * i / (options.curve_points - 1));
  if (eps > 0)
    for (int k = 7; k <= 12; ++k) t1.push_back(1.0 - std::pow(10.0, -k));
  else  // theta2 -> -infinity as X -> 1/2
    for (int k = 1; k <= 14; ++k) t1.push_back(A - 0.5 * std::log(2.0) - std::pow(10.0, -k));
  std::vector<Vec> curve;
  for (double th1 : t1) {
    const double X = std::exp(2 * (th1 - A));
    const double d = eps > 0 ? g_closed(th1 - 1) - g_prime(th1 - 1) : 0.0;
    const double b = X + eps * d;
    const double c = -(1 + X) * (1 - 2 * X + eps * d);
    const double disc = b * b - 4 * c;
    if (disc < 0) continue;
    for (double Y : {(-b + std::sqrt(disc)) / 2, (-b - std::sqrt(disc)) / 2}) {
      if (!(Y > 0)) continue;
      Vec th(2);
      th << th1, 0.5 * std::log(Y);
      try {
        if (std::abs(rho_at(mu, th) - 1.0) <= 1e-8) curve.push_back(th);
      } catch (const Error&) {
      }
    }
  }
  report.critical_points = static_cast<int>(curve.size());
  report.max_theta1 = -std::numeric_limits<double>::infinity();
  double c_curve = 0;
  for (const Vec& th : curve) {
    report.max_theta1 = std::max(report.max_theta1, th[0]);
    Vec shifted = chi(mu, th);
    shifted[0] += th[0];
    c_curve = std::max(c_curve, shifted.lpNorm<1>());
  }
  report.theta1_below_one = report.max_theta1 < 1.0;

  const GammaConstraint gamma({{6, 1}});
  const Mat& B = gamma.kernel_basis();
  bool evidence = !curve.empty();
  double previous = -1;
  for (double s : options.s_values) {
    AppendixARow row;
    row.s = s;
    Vec bar(2);
    bar << -s, s;
    const Vec chi_bar = chi(mu, bar);
    row.min_residual = std::numeric_limits<double>::infinity();
    for (const Vec& th : curve) {
      const double r = (B.transpose() * (chi(mu, th) - chi_bar)).norm();
      if (r < row.min_residual) {
        row.min_residual = r;
        row.theta1 = th[0];
        row.theta2 = th[1];
      }
    }
    row.gap = std::abs(s / 2 - row.theta1 / 6);
    Vec asym(2);
    asym << 3 * s, s;
    row.C = std::max((chi_bar - asym).lpNorm<1>(), c_curve);
    row.exceeds_bound = row.gap > row.C / 3;

    std::ostringstream summary;
    summary.precision(10);
    try {
      CriticalSolveResult r = find_critical_equivalent(mu, gamma, bar, options.direction, options.solver);
      row.solver_converged = true;
      summary << "converged: theta*=(" << r.theta_star[0] << ", " << r.theta_star[1]
              << ") rho_gap=" << r.residuals.rho_gap
              << " equivalence_residual=" << r.residuals.equivalence_residual;
    } catch (const SolverDivergence& e) {
      summary << "diverged: " << e.what();
      if (!e.trajectory().empty()) summary << "; last: " << e.trajectory().back();
    } catch (const Error& e) {
      summary << "failed: " << e.what();
    }
    row.solver_summary = summary.str();
    evidence = evidence && !row.solver_converged && row.exceeds_bound && row.min_residual > previous;
    previous = row.min_residual;
    report.rows.push_back(std::move(row));
  }
  report.divergence_evidence = evidence;
  std::ostringstream st;
  const double B_box = options.solver.divergence_bound;
  if (evidence)
    st << "no critical equivalent found in box [-" << B_box << ", " << B_box
       << "]^2 with divergence evidence; numerics cannot certify nonexistence";
  else
    st << "no divergence evidence: a critical equivalent was found or the residual ladder did not grow";
  report.statement = st.str();
  return report;
}

ExactOrderedFamily appendix_b_family(int N) {
  if (N < 1) throw InputError("N must be >= 1");
  const int k = 2 * N;
  Word all(k);
  for (int i = 0; i < k; ++i) all[i] = i;
  std::vector<ExactOrderedFamily::Law> laws;
  for (int i = 0; i < k; ++i)
    laws.push_back({{Word{}, Rational(1, 4)}, {Word{i, i}, Rational(1, 2)}, {all, Rational(1, 4)}});
  return ExactOrderedFamily(k, std::move(laws));
}

double appendix_b_delta(int N) {
  if (N < 3) throw InputError("N must be >= 3");
  auto h = [N](double d) { return std::pow((1 + d) / 2, N) - d; };
  // h(0) = 2^-N > 0 and h(1/2) = (3/4)^N - 1/2 < 0 for N >= 3.
  double lo = 0;
  double hi = 0.5;
  while (hi - lo > 1e-15) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

AppendixBResult appendix_b_preimages(int N) {
  if (N < 3) throw InputError("N must be >= 3");
  if (N > 11) throw BudgetError("binom(2N, N) exceeds 1e6 for N > 11");
  const int k = 2 * N;
  AppendixBResult out;
  out.delta = appendix_b_delta(N);
  const double r = std::sqrt((1 - out.delta) / 2);
  const double up = std::log1p(r);
  const double down = std::log1p(-r);
  const ProjectedFamily mu(project(to_double(appendix_b_family(N))));
  // Bit masks with N set bits in increasing numeric order are the N-subsets in colex order.
  std::uint64_t mask = (std::uint64_t{1} << N) - 1;
  const std::uint64_t limit = std::uint64_t{1} << k;
  while (mask < limit) {
    TiltVector theta(k);
    for (int i = 0; i < k; ++i) theta[i] = (mask >> i) & 1 ? up : down;
    out.chi_norms.push_back(chi(mu, theta).cwiseAbs().maxCoeff());
    out.preimages.push_back(std::move(theta));
    const std::uint64_t low = mask & (~mask + 1);
    const std::uint64_t ripple = mask + low;
    mask = (((ripple ^ mask) >> 2) / low) | ripple;
  }
  return out;
}

}  // namespace bgwtilt
