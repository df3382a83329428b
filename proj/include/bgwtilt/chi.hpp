#pragma once

// The map chi(theta)_i = log phi^{(i)}(e^theta) - theta_i and everything built
// on it: Gamma-equivalence, the concave objective f_X = -X^T chi, the critical
// Gamma-equivalent tilting solver, boundary tracing of chi(R^K) and the
// accessible-direction enumeration.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bgwtilt/family.hpp"
#include "bgwtilt/lattice.hpp"

namespace bgwtilt {

// An l x K integer matrix of rank l, optionally with a target g in Z^l.
class GammaConstraint {
 public:
  GammaConstraint(std::vector<IntRow> rows, std::optional<IntRow> target = std::nullopt);

  // Rows separated by ';', entries by spaces or commas: "1 1", "2 -1; 0 1".
  static GammaConstraint parse(const std::string& text);

  int rows() const { return static_cast<int>(rows_.size()); }
  int types() const { return static_cast<int>(rows_.front().size()); }
  const std::vector<IntRow>& matrix() const { return rows_; }
  const std::optional<IntRow>& target() const { return target_; }
  GammaConstraint with_target(IntRow target) const;

  Mat as_matrix() const;
  // Orthonormal basis of ker(Gamma), K x (K - l); empty when l = K.
  const Mat& kernel_basis() const { return kernel_; }
  IntRow apply(const Counts& n) const;
  Vec apply(const Vec& x) const;

 private:
  std::vector<IntRow> rows_;
  std::optional<IntRow> target_;
  Mat kernel_;
};

Vec chi(const ProjectedFamily& mu, const TiltVector& theta);

// M_theta - I_K.
Mat chi_jacobian(const ProjectedFamily& mu, const TiltVector& theta);

struct ObjectiveValue {
  double value = 0;
  Vec gradient;                // X^T (I - M_theta), as a column
  std::optional<Mat> hessian;  // -sum_k X_k Cov_k
};

// f_X(theta) = -X^T chi(theta). Throws InputError unless every X_i > 0.
ObjectiveValue f_and_grad(const ProjectedFamily& mu, const Vec& X, const TiltVector& theta,
                          bool with_hessian = false);

// Norm of the component of chi(theta) - chi(theta') orthogonal to Im(Gamma^T).
double equivalence_residual(const ProjectedFamily& mu, const TiltVector& theta,
                            const TiltVector& theta_prime, const GammaConstraint& gamma);

bool gamma_equivalent(const ProjectedFamily& mu, const TiltVector& theta,
                      const TiltVector& theta_prime, const GammaConstraint& gamma,
                      double tol = 1e-9);

enum class ConeCase { ZeroCone, OpenCone };
std::string to_string(ConeCase c);

// ZeroCone iff mu_theta_bar is critical and |Gamma X_theta_bar| <= 1e-9.
ConeCase cone_membership(const ProjectedFamily& mu, const GammaConstraint& gamma,
                         const TiltVector& theta_bar, double critical_tol = 1e-9);

struct SolverOptions {
  int max_newton_iterations = 200;    // per inner ascent
  int max_outer_rounds = 40;          // augmented-Lagrangian rounds
  double initial_penalty = 1.0;
  double penalty_ramp = 10.0;
  double max_penalty = 1e16;          // give up once the penalty would exceed this
  double constraint_tol = 1e-10;      // |P(chi(theta) - chi(theta_bar))|
  double gradient_tol = 1e-11;
  double divergence_bound = 500.0;    // |theta|_inf beyond this counts as divergence
  double critical_tol = 1e-8;         // required |rho_theta* - 1|
  double equivalence_tol = 1e-8;
  double direction_tol = 1e-6;        // |X_theta* - X|_1 for critical_for_direction
};

struct SolveResiduals {
  double rho_gap = 0;               // |rho_theta* - 1|
  double equivalence_residual = 0;  // |P(chi(theta*) - chi(theta_bar))|
  double gradient_norm = 0;         // gradient of f_X projected on the constraint tangent space
};

struct CriticalSolveResult {
  TiltVector theta_star;
  Vec X_star;          // asymptotic direction of mu_theta*
  double lambda = 0;   // Gamma X_star = lambda Gamma X (least squares)
  double objective = 0;
  SolveResiduals residuals;
  ConeCase cone_case = ConeCase::OpenCone;
  int iterations = 0;
  double final_penalty = 0;
  std::string start;   // "theta_bar", "companion" or "origin"
};

// Maximizes f_X over {theta : theta ~_Gamma theta_bar}. Throws
// SolverDivergence when no maximizer is reached within the budget.
CriticalSolveResult find_critical_equivalent(const ProjectedFamily& mu,
                                             const GammaConstraint& gamma,
                                             const TiltVector& theta_bar, const Vec& X,
                                             const SolverOptions& options = {});

// Unconstrained maximizer of f_X: the critical tilting with direction X.
CriticalSolveResult critical_for_direction(const ProjectedFamily& mu, const Vec& X,
                                           const SolverOptions& options = {},
                                           std::optional<TiltVector> start = std::nullopt);

struct BoundaryPoint {
  double t = 0;
  TiltVector theta;
  Vec chi;
};

struct BoundaryTrace {
  std::vector<BoundaryPoint> points;                     // ordered by t
  std::vector<std::pair<double, std::string>> failures;  // skipped grid points
  double t_min = 0;                                      // grid range actually used
  double t_max = 0;
};

struct TraceOptions {
  double margin = 1e-3;
  // Locate the interval of directions (t, 1 - t) that admit a critical
  // tilting before laying out the grid; otherwise grid all of (margin, 1 - margin).
  bool auto_range = true;
  int threads = 1;
  SolverOptions solver;
};

// K = 2 only: chi(theta*_t) for directions X(t) = (t, 1 - t).
BoundaryTrace trace_boundary(const ProjectedFamily& mu, int n_points,
                             const TraceOptions& options = {});

// Distinct non-root type counts of positive-probability trees with at least
// two vertices, root type childless with positive probability, and a leaf of
// the root's type. Throws BudgetError when max_vertices exceeds `budget`.
std::set<Counts> accessible_directions(const FiniteFamily& mu, int max_vertices, int budget = 12);
std::set<Counts> accessible_directions(const OrderedFamily& zeta, int max_vertices,
                                       int budget = 12);

}  // namespace bgwtilt
