#include "bgwtilt/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "bgwtilt/errors.hpp"

namespace bgwtilt {

namespace {

void check_nonnegative_square(const Mat& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw InputError("mean matrix must be square");
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double v = m.data()[i];
    if (!std::isfinite(v) || v < 0) throw InputError("mean matrix entries must be finite and >= 0");
  }
}

// Positive start vector from a dense eigensolve; ones if that fails.
Vec perron_start(const Mat& m) {
  const Eigen::Index k = m.rows();
  Vec ones = Vec::Ones(k);
  if (k == 1) return ones;
  Eigen::EigenSolver<Mat> es(m, true);
  if (es.info() != Eigen::Success) return ones;
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < k; ++i)
    if (es.eigenvalues()[i].real() > es.eigenvalues()[best].real()) best = i;
  Vec v = es.eigenvectors().col(best).real().cwiseAbs();
  double s = v.sum();
  if (!(s > 0) || !v.allFinite()) return ones;
  v /= s;
  for (Eigen::Index i = 0; i < k; ++i)
    if (!(v[i] > 1e-300)) return ones;
  return v;
}

struct PowerResult {
  RadiusBounds bounds;
  Vec vector;
};

// Power iteration on (M + I) for irreducible nonnegative M. The shift makes
// the iteration primitive so that periodic matrices converge as well.
PowerResult power_perron(const Mat& m, int max_iterations) {
  Vec v = perron_start(m);
  RadiusBounds b;
  b.certified = true;
  for (int it = 0; it < max_iterations; ++it) {
    Vec w = m * v;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      double r = w[i] / v[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    b.lower = lo;
    b.upper = hi;
    b.iterations = it + 1;
    if (hi - lo <= 1e-13 * std::max(1.0, hi)) return {b, v};
    v = w + v;
    v /= v.sum();
    if (!v.allFinite() || v.minCoeff() <= 0) break;
  }
  std::ostringstream msg;
  msg.precision(17);
  msg << "power iteration did not certify the spectral radius: bounds [" << b.lower << ", "
      << b.upper << "]";
  throw ConvergenceError(msg.str(), {b.lower, b.upper});
}

}  // namespace

std::string to_string(CriticalityLabel label) {
  switch (label) {
    case CriticalityLabel::Subcritical: return "subcritical";
    case CriticalityLabel::Critical: return "critical";
    case CriticalityLabel::Supercritical: return "supercritical";
  }
  return "?";
}

bool is_irreducible(const Mat& m) {
  const Eigen::Index k = m.rows();
  // reach(i, j): path of length >= 1 from i to j.
  std::vector<std::vector<bool>> reach(k, std::vector<bool>(k, false));
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) reach[i][j] = m(i, j) > 0;
  for (Eigen::Index via = 0; via < k; ++via)
    for (Eigen::Index i = 0; i < k; ++i)
      if (reach[i][via])
        for (Eigen::Index j = 0; j < k; ++j)
          if (reach[via][j]) reach[i][j] = true;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      if (!reach[i][j]) return false;
  return true;
}

RadiusBounds spectral_radius_bounds(const MeanMatrix& m, int max_iterations) {
  check_nonnegative_square(m);
  if (!is_irreducible(m)) {
    Eigen::EigenSolver<Mat> es(m, false);
    if (es.info() != Eigen::Success) throw ConvergenceError("eigensolve failed", {});
    double r = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) r = std::max(r, std::abs(es.eigenvalues()[i]));
    RadiusBounds b;
    b.lower = b.upper = r;
    b.certified = false;
    return b;
  }
  return power_perron(m, max_iterations).bounds;
}

double spectral_radius(const MeanMatrix& m) { return spectral_radius_bounds(m).estimate(); }

PerronData perron_vectors(const MeanMatrix& m, double critical_tol) {
  check_nonnegative_square(m);
  if (!is_irreducible(m)) throw InputError("Perron vectors require an irreducible matrix");
  constexpr int kCap = 1'000'000;
  PowerResult right = power_perron(m, kCap);
  PowerResult left = power_perron(m.transpose(), kCap);
  PerronData out;
  out.rho = right.bounds.estimate();
  out.a = left.vector / left.vector.sum();
  out.b = right.vector / out.a.dot(right.vector);
  if (std::abs(out.rho - 1.0) <= critical_tol) out.direction = out.a;
  return out;
}

Criticality classify_matrix(const MeanMatrix& m, double tol) {
  Criticality c;
  c.rho = spectral_radius(m);
  c.tol = tol;
  if (std::abs(c.rho - 1.0) <= tol)
    c.label = CriticalityLabel::Critical;
  else
    c.label = c.rho < 1.0 ? CriticalityLabel::Subcritical : CriticalityLabel::Supercritical;
  return c;
}

Criticality classify(const ProjectedFamily& mu, double tol) {
  return classify_matrix(mean_matrix(mu), tol);
}

double rho_at(const ProjectedFamily& mu, const TiltVector& theta) {
  return spectral_radius(tilted_moments(mu, theta).mean);
}

Vec asymptotic_direction(const ProjectedFamily& mu, double tol) {
  Mat m = mean_matrix(mu);
  if (!is_irreducible(m)) throw InputError("asymptotic direction requires an irreducible family");
  PerronData pd = perron_vectors(m, tol);
  if (!pd.direction) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "family is not critical (rho = " << pd.rho << ")";
    throw InputError(msg.str());
  }
  return *pd.direction;
}

Vec extinction_probabilities(const ProjectedFamily& mu, int max_iterations) {
  const int k = mu.types();
  Mat m = mean_matrix(mu);
  // Singular families (every vertex has exactly one child) never die out, so
  // the shortcut p = 1 only applies to nonsingular ones.
  bool singular = mu.has_finite_support();
  if (singular)
    for (int i = 0; i < k && singular; ++i)
      for (const auto& [counts, prob] : mu.finite().law(i))
        if (std::accumulate(counts.begin(), counts.end(), 0) != 1) singular = false;
  if (!singular && is_irreducible(m) &&
      classify_matrix(m).label != CriticalityLabel::Supercritical)
    return Vec::Ones(k);

  auto phi = [&](const Vec& p) {
    Vec out(k);
    for (int i = 0; i < k; ++i) out[i] = gf_eval(mu, i, p);
    return out;
  };
  auto residual = [&](const Vec& p) { return (phi(p) - p).cwiseAbs().maxCoeff(); };

  Vec p = Vec::Zero(k);
  bool settled = false;
  for (int it = 0; it < max_iterations; ++it) {
    Vec next = phi(p);
    double progress = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (progress <= 1e-15 || (progress <= 1e-12 && residual(p) < 1e-14)) {
      settled = true;
      break;
    }
  }
  if (!settled) {
    std::vector<double> last(p.data(), p.data() + k);
    throw ConvergenceError("extinction iteration cap exceeded", last);
  }
  // Newton polish on phi(p) - p = 0.
  for (int step = 0; step < 3 && residual(p) > 1e-15; ++step) {
    Mat jac(k, k);
    for (int i = 0; i < k; ++i) jac.row(i) = gf_gradient(mu, i, p).transpose();
    jac -= Mat::Identity(k, k);
    Vec delta = jac.fullPivLu().solve(-(phi(p) - p));
    Vec trial = (p + delta).cwiseMax(0.0).cwiseMin(1.0);
    if (!trial.allFinite() || residual(trial) >= residual(p)) break;
    p = trial;
  }
  double r = residual(p);
  if (!(r < 1e-13)) {
    std::vector<double> last(p.data(), p.data() + k);
    throw ConvergenceError("extinction fixed point residual " + std::to_string(r), last);
  }
  return p;
}

TiltVector subcritical_companion(const ProjectedFamily& mu) {
  Vec p = extinction_probabilities(mu);
  TiltVector q(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0)) throw DomainError("family not finite: extinction probability of type " +
                                       std::to_string(i + 1) + " is 0");
    q[i] = p[i] >= 1.0 ? 0.0 : std::log(p[i]);
  }
  return q;
}

double critical_on_segment(const ProjectedFamily& mu, const TiltVector& theta_end, double tol) {
  auto gap = [&](double lambda) { return rho_at(mu, lambda * theta_end) - 1.0; };
  double g0 = gap(0.0);
  if (std::abs(g0) <= tol) return 0.0;
  double g1 = gap(1.0);
  if (std::abs(g1) <= tol) return 1.0;
  if ((g0 < 0) == (g1 < 0)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "no criticality bracket on the segment: rho(0) = " << g0 + 1 << ", rho(1) = " << g1 + 1;
    throw InputError(msg.str());
  }
  double lo = 0, hi = 1;
  bool lo_negative = g0 < 0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double g = gap(mid);
    if (std::abs(g) <= tol) return mid;
    if ((g < 0) == lo_negative)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-17) break;
  }
  throw ConvergenceError("bisection did not reach the criticality tolerance", {lo, hi});
}

double supercritical_scale(const ProjectedFamily& mu, double max_scale) {
  const int k = mu.types();
  for (double s = 0; s <= max_scale; s = (s == 0 ? 1 : 2 * s))
    if (rho_at(mu, Vec::Constant(k, s)) > 1.0) return s;
  throw InputError("no supercritical tilt s*1 found up to s = " + std::to_string(max_scale));
}

}  // namespace bgwtilt
