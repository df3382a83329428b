#include "bgwtilt/chi.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "bgwtilt/errors.hpp"
#include "bgwtilt/spectral.hpp"

namespace bgwtilt {

namespace {

std::string format_vec(const Vec& v) {
  std::ostringstream out;
  out.precision(10);
  out << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
  out << ")";
  return out.str();
}

void check_direction(const Vec& X, int types) {
  if (X.size() != types) throw InputError("direction X has the wrong length");
  for (Eigen::Index i = 0; i < X.size(); ++i)
    if (!std::isfinite(X[i]) || !(X[i] > 0)) throw InputError("direction X must be componentwise > 0");
}

// chi, M - I and (on request) the offspring covariances at theta.
struct WeightedEval {
  Vec chi;
  Mat jac;  // M - I
  std::vector<Mat> cov;
};

WeightedEval weighted_eval(const ProjectedFamily& mu, const Vec& theta, bool with_cov) {
  TiltedMoments tm = tilted_moments(mu, theta, with_cov);
  WeightedEval e;
  e.chi = tm.log_normalizer - theta;
  if (!e.chi.allFinite()) throw DomainError("chi not finite at " + format_vec(theta));
  e.jac = tm.mean - Mat::Identity(theta.size(), theta.size());
  e.cov = std::move(tm.covariance);
  return e;
}

Mat weighted_cov(const std::vector<Mat>& cov, const Vec& w) {
  Mat s = Mat::Zero(cov.front().rows(), cov.front().cols());
  for (std::size_t k = 0; k < cov.size(); ++k) s += w[static_cast<Eigen::Index>(k)] * cov[k];
  return s;
}

// Augmented Lagrangian
//   L(theta) = -X.chi - y.c - pen/2 |c|^2,  c = B^T (chi(theta) - chi_bar),
// with gradient -(M - I)^T w and Hessian -sum w_k Cov_k - pen J^T J, where
// w = X + B (y + pen c) and J = B^T (M - I).
struct AugmentedLagrangian {
  const ProjectedFamily& mu;
  const Mat& B;
  const Vec& chi_bar;
  const Vec& X;
  Vec y;
  double pen = 1;

  struct Value {
    double value = 0;
    Vec grad;
    Mat hess;
    Vec c;
  };

  Value operator()(const Vec& theta, bool with_hessian) const {
    WeightedEval e = weighted_eval(mu, theta, with_hessian);
    Value v;
    v.c = B.transpose() * (e.chi - chi_bar);
    Vec w = X + B * (y + pen * v.c);
    v.value = -X.dot(e.chi) - y.dot(v.c) - 0.5 * pen * v.c.squaredNorm();
    v.grad = -e.jac.transpose() * w;
    if (with_hessian) {
      Mat J = B.transpose() * e.jac;
      v.hess = -weighted_cov(e.cov, w) - pen * J.transpose() * J;
    }
    if (!std::isfinite(v.value) || !v.grad.allFinite()) throw DomainError("objective not finite");
    return v;
  }
};

enum class AscentStatus { Converged, Stalled, Diverged, IterationCap };

struct AscentOutcome {
  AscentStatus status = AscentStatus::IterationCap;
  int iterations = 0;
  double grad_norm = 0;
};

// Damped Newton ascent with Armijo backtracking. The Hessian is made
// negative definite by flooring its spectrum; steps are capped in max-norm.
AscentOutcome newton_ascent(const AugmentedLagrangian& L, Vec& x, const SolverOptions& o) {
  constexpr double kMaxStep = 5.0;
  AscentOutcome out;
  auto v = L(x, true);
  for (int it = 0; it < o.max_newton_iterations; ++it) {
    out.iterations = it + 1;
    out.grad_norm = v.grad.norm();
    if (out.grad_norm <= o.gradient_tol) {
      out.status = AscentStatus::Converged;
      return out;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(-v.hess);
    Vec lam = es.eigenvalues();
    double top = std::max(lam.maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < lam.size(); ++i) lam[i] = std::max(lam[i], std::max(1e-12 * top, 1e-14));
    Vec d = es.eigenvectors() * (es.eigenvectors().transpose() * v.grad).cwiseQuotient(lam);
    double dn = d.cwiseAbs().maxCoeff();
    if (dn > kMaxStep) d *= kMaxStep / dn;
    double slope = v.grad.dot(d);

    bool accepted = false;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      Vec trial = x + t * d;
      try {
        auto tv = L(trial, true);
        bool armijo = tv.value >= v.value + 1e-4 * t * slope;
        // Near the optimum the value is flat to rounding; accept a full step
        // that clearly shrinks the gradient instead.
        bool flat = t == 1.0 && tv.grad.norm() < 0.5 * out.grad_norm &&
                    tv.value >= v.value - 1e-12 * (1 + std::abs(v.value));
        if (armijo || flat) {
          x = trial;
          v = std::move(tv);
          accepted = true;
          break;
        }
      } catch (const DomainError&) {
      }
    }
    if (!accepted) {
      out.status = AscentStatus::Stalled;
      return out;
    }
    if (x.cwiseAbs().maxCoeff() > o.divergence_bound) {
      out.status = AscentStatus::Diverged;
      return out;
    }
  }
  out.grad_norm = v.grad.norm();
  out.status = out.grad_norm <= o.gradient_tol ? AscentStatus::Converged : AscentStatus::IterationCap;
  return out;
}

struct CoreSolution {
  Vec theta;
  Vec nu;
  int iterations = 0;
  double penalty = 0;
};

// Newton on the KKT system
//   (M - I)^T (X + B nu) = 0,  B^T (chi(theta) - chi_bar) = 0.
void kkt_polish(const ProjectedFamily& mu, const Mat& B, const Vec& chi_bar, const Vec& X,
                CoreSolution& sol) {
  const Eigen::Index k = X.size();
  const Eigen::Index m = B.cols();
  auto residual = [&](const Vec& th, const Vec& nu, WeightedEval* keep) {
    WeightedEval e = weighted_eval(mu, th, keep != nullptr);
    Vec f(k + m);
    f.head(k) = e.jac.transpose() * (X + B * nu);
    f.tail(m) = B.transpose() * (e.chi - chi_bar);
    if (keep) *keep = std::move(e);
    return f;
  };
  WeightedEval e;
  Vec f = residual(sol.theta, sol.nu, &e);
  for (int step = 0; step < 30; ++step) {
    double fn = f.norm();
    if (fn <= 1e-15 * (1 + X.norm())) return;
    Mat kkt = Mat::Zero(k + m, k + m);
    Mat J = B.transpose() * e.jac;
    kkt.topLeftCorner(k, k) = weighted_cov(e.cov, X + B * sol.nu);
    kkt.topRightCorner(k, m) = J.transpose();
    kkt.bottomLeftCorner(m, k) = J;
    Vec delta = kkt.fullPivLu().solve(-f);
    if (!delta.allFinite()) return;
    bool improved = false;
    for (double t = 1.0; t > 1e-4; t *= 0.5) {
      Vec th = sol.theta + t * delta.head(k);
      Vec nu = sol.nu + t * delta.tail(m);
      try {
        WeightedEval ne;
        Vec nf = residual(th, nu, &ne);
        if (nf.norm() < fn) {
          sol.theta = th;
          sol.nu = nu;
          f = nf;
          e = std::move(ne);
          improved = true;
          break;
        }
      } catch (const DomainError&) {
      }
    }
    ++sol.iterations;
    if (!improved) return;
  }
}

// Maximizes f_X on {theta : B^T (chi(theta) - chi_bar) = 0} from `start`.
// Returns nothing when the ascent diverges or stalls away from feasibility.
std::optional<CoreSolution> solve_core(const ProjectedFamily& mu, const Mat& B, const Vec& chi_bar,
                                       const Vec& X, const Vec& start, const SolverOptions& o,
                                       const std::string& label,
                                       std::vector<std::string>& trajectory) {
  AugmentedLagrangian L{mu, B, chi_bar, X, Vec::Zero(B.cols()), o.initial_penalty};
  Vec theta = start;
  CoreSolution sol;
  double prev_c = std::numeric_limits<double>::infinity();
  for (int round = 0; round < o.max_outer_rounds; ++round) {
    AscentOutcome a = newton_ascent(L, theta, o);
    sol.iterations += a.iterations;
    auto v = L(theta, false);
    double cn = v.c.norm();
    std::ostringstream line;
    line.precision(10);
    line << label << " round " << round << ": theta=" << format_vec(theta) << " f=" << -X.dot(chi(mu, theta))
         << " |c|=" << cn << " |grad L|=" << a.grad_norm << " penalty=" << L.pen;
    switch (a.status) {
      case AscentStatus::Converged: break;
      case AscentStatus::Stalled: line << " [line search stalled]"; break;
      case AscentStatus::Diverged: line << " [|theta| beyond " << o.divergence_bound << "]"; break;
      case AscentStatus::IterationCap: line << " [inner iteration cap]"; break;
    }
    trajectory.push_back(line.str());
    if (a.status == AscentStatus::Diverged) return std::nullopt;
    bool inner_ok = a.status == AscentStatus::Converged ||
                    (a.status == AscentStatus::Stalled && a.grad_norm <= 1e3 * o.gradient_tol);
    if (cn <= o.constraint_tol && inner_ok) break;
    if (B.cols() == 0) {
      if (!inner_ok) return std::nullopt;
      break;
    }
    L.y += L.pen * v.c;
    if (cn > 0.25 * prev_c) {
      if (L.pen * o.penalty_ramp > o.max_penalty) {
        trajectory.push_back(label + ": penalty limit reached");
        return std::nullopt;
      }
      L.pen *= o.penalty_ramp;
    }
    prev_c = cn;
    if (round + 1 == o.max_outer_rounds) return std::nullopt;
  }
  sol.theta = theta;
  sol.nu = L.y + L.pen * L(theta, false).c;
  sol.penalty = L.pen;
  try {
    kkt_polish(mu, B, chi_bar, X, sol);
  } catch (const DomainError&) {
  }
  if (sol.theta.cwiseAbs().maxCoeff() > o.divergence_bound) return std::nullopt;
  return sol;
}

Vec tangent_projected_gradient(const Mat& jac, const Mat& B, const Vec& grad) {
  if (B.cols() == 0) return grad;
  Mat J = B.transpose() * jac;
  Mat pinv = (J * J.transpose()).completeOrthogonalDecomposition().pseudoInverse();
  return grad - J.transpose() * (pinv * (J * grad));
}

// Fills the certification fields; returns false if a tolerance is missed.
bool certify(const ProjectedFamily& mu, const Mat& B, const Vec& theta_bar, const Vec& X,
             const SolverOptions& o, CriticalSolveResult& r, std::string& why) {
  TiltedMoments tm = tilted_moments(mu, r.theta_star);
  Mat jac = tm.mean - Mat::Identity(X.size(), X.size());
  PerronData pd = perron_vectors(tm.mean, 1.0);
  r.X_star = pd.a;
  r.residuals.rho_gap = std::abs(pd.rho - 1.0);
  Vec d = chi(mu, r.theta_star) - chi(mu, theta_bar);
  r.residuals.equivalence_residual = B.cols() == 0 ? 0.0 : (B.transpose() * d).norm();
  Vec grad = -jac.transpose() * X;
  r.residuals.gradient_norm = tangent_projected_gradient(jac, B, grad).norm();
  r.objective = -X.dot(chi(mu, r.theta_star));
  std::ostringstream msg;
  msg.precision(6);
  if (r.residuals.rho_gap > o.critical_tol) {
    msg << "rho gap " << r.residuals.rho_gap << " above " << o.critical_tol;
    why = msg.str();
    return false;
  }
  if (r.residuals.equivalence_residual > o.equivalence_tol) {
    msg << "equivalence residual " << r.residuals.equivalence_residual << " above " << o.equivalence_tol;
    why = msg.str();
    return false;
  }
  return true;
}

}  // namespace

GammaConstraint::GammaConstraint(std::vector<IntRow> rows, std::optional<IntRow> target)
    : rows_(std::move(rows)), target_(std::move(target)) {
  if (rows_.empty() || rows_.front().empty()) throw InputError("Gamma must have at least one row and column");
  const std::size_t k = rows_.front().size();
  for (const auto& row : rows_)
    if (row.size() != k) throw InputError("Gamma rows have different lengths");
  if (integer_rank(rows_) != static_cast<int>(rows_.size()))
    throw InputError("Gamma must have full row rank " + std::to_string(rows_.size()));
  if (target_ && target_->size() != rows_.size())
    throw InputError("target g must have one entry per row of Gamma");

  Mat g = as_matrix();
  const Eigen::Index l = g.rows();
  const Eigen::Index kk = g.cols();
  if (l == kk) {
    kernel_ = Mat(kk, 0);
  } else {
    Eigen::JacobiSVD<Mat> svd(g, Eigen::ComputeFullV);
    kernel_ = svd.matrixV().rightCols(kk - l);
  }
}

GammaConstraint GammaConstraint::parse(const std::string& text) {
  std::vector<IntRow> rows;
  std::stringstream all(text);
  std::string row_text;
  while (std::getline(all, row_text, ';')) {
    std::replace(row_text.begin(), row_text.end(), ',', ' ');
    std::istringstream in(row_text);
    IntRow row;
    std::string tok;
    while (in >> tok) {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(tok, &used);
      } catch (const std::exception&) {
        throw InputError("Gamma entry '" + tok + "' is not an integer");
      }
      if (used != tok.size()) throw InputError("Gamma entry '" + tok + "' is not an integer");
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("empty Gamma");
  return GammaConstraint(std::move(rows));
}

GammaConstraint GammaConstraint::with_target(IntRow target) const {
  return GammaConstraint(rows_, std::move(target));
}

Mat GammaConstraint::as_matrix() const {
  Mat g(rows(), types());
  for (int r = 0; r < rows(); ++r)
    for (int c = 0; c < types(); ++c) g(r, c) = static_cast<double>(rows_[r][c]);
  return g;
}

IntRow GammaConstraint::apply(const Counts& n) const {
  if (static_cast<int>(n.size()) != types()) throw InputError("count vector has the wrong length");
  IntRow out(rows(), 0);
  for (int r = 0; r < rows(); ++r)
    for (int c = 0; c < types(); ++c) out[r] += rows_[r][c] * n[c];
  return out;
}

Vec GammaConstraint::apply(const Vec& x) const {
  if (x.size() != types()) throw InputError("vector has the wrong length");
  return as_matrix() * x;
}

Vec chi(const ProjectedFamily& mu, const TiltVector& theta) {
  return weighted_eval(mu, theta, false).chi;
}

Mat chi_jacobian(const ProjectedFamily& mu, const TiltVector& theta) {
  return weighted_eval(mu, theta, false).jac;
}

ObjectiveValue f_and_grad(const ProjectedFamily& mu, const Vec& X, const TiltVector& theta,
                          bool with_hessian) {
  check_direction(X, mu.types());
  WeightedEval e = weighted_eval(mu, theta, with_hessian);
  ObjectiveValue out;
  out.value = -X.dot(e.chi);
  out.gradient = -e.jac.transpose() * X;
  if (with_hessian) out.hessian = -weighted_cov(e.cov, X);
  return out;
}

double equivalence_residual(const ProjectedFamily& mu, const TiltVector& theta,
                            const TiltVector& theta_prime, const GammaConstraint& gamma) {
  if (gamma.types() != mu.types()) throw InputError("Gamma has the wrong number of columns");
  const Mat& B = gamma.kernel_basis();
  if (B.cols() == 0) return 0.0;
  return (B.transpose() * (chi(mu, theta) - chi(mu, theta_prime))).norm();
}

bool gamma_equivalent(const ProjectedFamily& mu, const TiltVector& theta,
                      const TiltVector& theta_prime, const GammaConstraint& gamma, double tol) {
  return equivalence_residual(mu, theta, theta_prime, gamma) <= tol;
}

std::string to_string(ConeCase c) { return c == ConeCase::ZeroCone ? "ZeroCone" : "OpenCone"; }

ConeCase cone_membership(const ProjectedFamily& mu, const GammaConstraint& gamma,
                         const TiltVector& theta_bar, double critical_tol) {
  if (gamma.types() != mu.types()) throw InputError("Gamma has the wrong number of columns");
  Mat m = tilted_moments(mu, theta_bar).mean;
  if (!is_irreducible(m)) return ConeCase::OpenCone;
  PerronData pd = perron_vectors(m, critical_tol);
  if (!pd.direction) return ConeCase::OpenCone;
  return gamma.apply(*pd.direction).norm() <= 1e-9 ? ConeCase::ZeroCone : ConeCase::OpenCone;
}

CriticalSolveResult find_critical_equivalent(const ProjectedFamily& mu,
                                             const GammaConstraint& gamma,
                                             const TiltVector& theta_bar, const Vec& X,
                                             const SolverOptions& options) {
  const int k = mu.types();
  if (gamma.types() != k) throw InputError("Gamma has the wrong number of columns");
  check_direction(X, k);
  check_tilt(theta_bar, k);
  if (cone_membership(mu, gamma, theta_bar) == ConeCase::ZeroCone) {
    CriticalSolveResult r;
    r.theta_star = theta_bar;
    r.X_star = asymptotic_direction(tilt(mu, theta_bar));
    r.lambda = 0;
    r.objective = -X.dot(chi(mu, theta_bar));
    r.residuals.rho_gap = std::abs(rho_at(mu, theta_bar) - 1.0);
    r.cone_case = ConeCase::ZeroCone;
    r.start = "theta_bar";
    return r;
  }
  const Vec gx = gamma.apply(X);
  if (gx.norm() == 0) throw InputError("Gamma X must be nonzero");

  const Mat& B = gamma.kernel_basis();
  const Vec chi_bar = chi(mu, theta_bar);
  std::vector<std::string> trajectory;
  std::vector<std::pair<std::string, Vec>> starts{{"theta_bar", theta_bar}};
  try {
    starts.emplace_back("companion", theta_bar + subcritical_companion(tilt(mu, theta_bar)));
  } catch (const Error& e) {
    trajectory.push_back(std::string("companion start unavailable: ") + e.what());
  }

  for (const auto& [label, start] : starts) {
    std::optional<CoreSolution> sol;
    try {
      sol = solve_core(mu, B, chi_bar, X, start, options, label, trajectory);
    } catch (const DomainError& e) {
      trajectory.push_back(label + ": " + e.what());
    }
    if (!sol) continue;
    CriticalSolveResult r;
    r.theta_star = sol->theta;
    r.iterations = sol->iterations;
    r.final_penalty = sol->penalty;
    r.start = label;
    std::string why;
    if (!certify(mu, B, theta_bar, X, options, r, why)) {
      trajectory.push_back(label + ": rejected, " + why);
      continue;
    }
    Vec gs = gamma.apply(r.X_star);
    r.lambda = gx.dot(gs) / gx.squaredNorm();
    if (!(r.lambda > 0)) {
      std::ostringstream msg;
      msg << "critical point found with lambda = " << r.lambda << " <= 0";
      throw NegativeScaleError(msg.str(), r.lambda);
    }
    return r;
  }
  throw SolverDivergence("no critical Gamma-equivalent tilting reached within the iteration budget",
                         trajectory);
}

CriticalSolveResult critical_for_direction(const ProjectedFamily& mu, const Vec& X,
                                           const SolverOptions& options,
                                           std::optional<TiltVector> start) {
  const int k = mu.types();
  check_direction(X, k);
  const Mat B(k, 0);
  const Vec zero = Vec::Zero(k);
  std::vector<std::string> trajectory;
  std::vector<std::pair<std::string, Vec>> starts;
  if (start) {
    check_tilt(*start, k);
    starts.emplace_back("given", *start);
  }
  starts.emplace_back("origin", zero);
  try {
    starts.emplace_back("companion", subcritical_companion(mu));
  } catch (const Error& e) {
    trajectory.push_back(std::string("companion start unavailable: ") + e.what());
  }
  const Vec target = X / X.sum();
  for (const auto& [label, s] : starts) {
    std::optional<CoreSolution> sol;
    try {
      sol = solve_core(mu, B, zero, X, s, options, label, trajectory);
    } catch (const DomainError& e) {
      trajectory.push_back(label + ": " + e.what());
    }
    if (!sol) continue;
    CriticalSolveResult r;
    r.theta_star = sol->theta;
    r.iterations = sol->iterations;
    r.start = label;
    std::string why;
    if (!certify(mu, B, zero, X, options, r, why)) {
      trajectory.push_back(label + ": rejected, " + why);
      continue;
    }
    double gap = (r.X_star - target).lpNorm<1>();
    if (gap > options.direction_tol) {
      trajectory.push_back(label + ": direction mismatch " + std::to_string(gap));
      continue;
    }
    r.lambda = 1.0 / X.sum();
    return r;
  }
  throw SolverDivergence("f_X has no maximizer within the iteration budget (direction not attained)",
                         trajectory);
}

BoundaryTrace trace_boundary(const ProjectedFamily& mu, int n_points, const TraceOptions& options) {
  if (mu.types() != 2) throw InputError("boundary tracing needs a two-type family");
  if (n_points < 1) throw InputError("n_points must be >= 1");
  const double margin = options.margin;
  if (!(margin > 0 && margin < 0.5)) throw InputError("margin must lie in (0, 1/2)");

  auto direction = [](double t) {
    Vec x(2);
    x << t, 1 - t;
    return x;
  };
  auto admissible = [&](double t) {
    try {
      critical_for_direction(mu, direction(t), options.solver);
      return true;
    } catch (const Error&) {
      return false;
    }
  };

  double lo = margin;
  double hi = 1 - margin;
  if (options.auto_range) {
    constexpr int kCoarse = 33;
    std::vector<double> grid(kCoarse);
    std::vector<bool> ok(kCoarse);
    for (int i = 0; i < kCoarse; ++i) {
      grid[i] = margin + (1 - 2 * margin) * i / (kCoarse - 1);
      ok[i] = admissible(grid[i]);
    }
    // Longest run of admissible grid points; the admissible set is an interval.
    int best_start = -1;
    int best_len = 0;
    for (int i = 0; i < kCoarse;) {
      if (!ok[i]) {
        ++i;
        continue;
      }
      int j = i;
      while (j < kCoarse && ok[j]) ++j;
      if (j - i > best_len) {
        best_len = j - i;
        best_start = i;
      }
      i = j;
    }
    if (best_start < 0) throw SolverDivergence("no admissible direction found on the coarse grid", {});
    const int first = best_start;
    const int last = best_start + best_len - 1;
    auto edge = [&](double good, double bad) {
      for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (good + bad);
        (admissible(mid) ? good : bad) = mid;
      }
      return good;
    };
    lo = first == 0 ? grid[0] : edge(grid[first], grid[first - 1]) + margin;
    hi = last == kCoarse - 1 ? grid[last] : edge(grid[last], grid[last + 1]) - margin;
    if (!(lo <= hi)) {
      lo = grid[first];
      hi = grid[last];
    }
  }

  std::vector<double> ts(n_points);
  for (int i = 0; i < n_points; ++i)
    ts[i] = n_points == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n_points - 1);

  std::vector<std::optional<BoundaryPoint>> slots(n_points);
  std::vector<std::string> errors(n_points);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n_points; i = next++) {
      try {
        CriticalSolveResult r = critical_for_direction(mu, direction(ts[i]), options.solver);
        slots[i] = BoundaryPoint{ts[i], r.theta_star, chi(mu, r.theta_star)};
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  const int threads = std::clamp(options.threads, 1, n_points);
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  BoundaryTrace trace;
  trace.t_min = ts.front();
  trace.t_max = ts.back();
  for (int i = 0; i < n_points; ++i) {
    if (slots[i])
      trace.points.push_back(std::move(*slots[i]));
    else
      trace.failures.emplace_back(ts[i], errors[i]);
  }
  return trace;
}

std::set<Counts> accessible_directions(const FiniteFamily& mu, int max_vertices, int budget) {
  if (max_vertices < 1) throw InputError("max_vertices must be >= 1");
  if (max_vertices > budget)
    throw BudgetError("max_vertices " + std::to_string(max_vertices) + " exceeds the enumeration budget " +
                      std::to_string(budget));
  const int k = mu.types();
  std::set<Counts> out;

  // A tree is a multiset of (vertex type, offspring) choices, so vertices can
  // be expanded in any fixed order: always the smallest pending type.
  struct State {
    Counts pending;
    Counts ntilde;
    int vertices;
    bool leaf;
    bool root_done;
    auto operator<=>(const State&) const = default;
  };

  for (int root = 0; root < k; ++root) {
    bool can_die = false;
    for (const auto& [counts, p] : mu.law(root))
      if (std::all_of(counts.begin(), counts.end(), [](int c) { return c == 0; })) can_die = true;
    if (!can_die) continue;

    std::set<State> seen;
    std::vector<State> stack;
    State init{Counts(k, 0), Counts(k, 0), 1, false, false};
    init.pending[root] = 1;
    stack.push_back(init);
    seen.insert(init);
    while (!stack.empty()) {
      State s = std::move(stack.back());
      stack.pop_back();
      auto it = std::find_if(s.pending.begin(), s.pending.end(), [](int c) { return c > 0; });
      if (it == s.pending.end()) {
        if (s.leaf && s.vertices >= 2) out.insert(s.ntilde);
        continue;
      }
      const int t = static_cast<int>(it - s.pending.begin());
      for (const auto& [counts, p] : mu.law(t)) {
        const int size = std::accumulate(counts.begin(), counts.end(), 0);
        if (!s.root_done && size == 0) continue;
        if (s.vertices + size > max_vertices) continue;
        State n = s;
        n.pending[t] -= 1;
        for (int j = 0; j < k; ++j) {
          n.pending[j] += counts[j];
          n.ntilde[j] += counts[j];
        }
        n.vertices += size;
        if (s.root_done && size == 0 && t == root) n.leaf = true;
        n.root_done = true;
        if (seen.insert(n).second) stack.push_back(std::move(n));
      }
    }
  }
  return out;
}

std::set<Counts> accessible_directions(const OrderedFamily& zeta, int max_vertices, int budget) {
  return accessible_directions(project(zeta), max_vertices, budget);
}

}  // namespace bgwtilt
