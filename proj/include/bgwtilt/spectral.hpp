#pragma once

// Perron-Frobenius analysis of mean matrices, criticality, extinction
// probabilities and the subcritical companion tilting.

#include <optional>
#include <string>

#include "bgwtilt/family.hpp"

namespace bgwtilt {

inline constexpr double kDefaultCriticalTol = 1e-9;

// Certified two-sided bounds on the spectral radius of a nonnegative matrix.
struct RadiusBounds {
  double lower = 0;
  double upper = 0;
  int iterations = 0;
  bool certified = false;  // false when the matrix is reducible (general eigensolve)
  double estimate() const { return 0.5 * (lower + upper); }
};

// Positivity digraph of the matrix is strongly connected.
bool is_irreducible(const Mat& m);

// Power iteration on M + I with Collatz-Wielandt bounds; stops once the
// bound gap is below 1e-13 (relative to max(1, rho)). Reducible matrices fall
// back to a general eigensolve.
RadiusBounds spectral_radius_bounds(const MeanMatrix& m, int max_iterations = 1'000'000);
double spectral_radius(const MeanMatrix& m);

struct PerronData {
  double rho = 0;
  Vec a;                          // left eigenvector, sum a_i = 1
  Vec b;                          // right eigenvector, sum a_i b_i = 1
  std::optional<Vec> direction;   // asymptotic direction when rho = 1
};

PerronData perron_vectors(const MeanMatrix& m, double critical_tol = kDefaultCriticalTol);

enum class CriticalityLabel { Subcritical, Critical, Supercritical };
std::string to_string(CriticalityLabel label);

struct Criticality {
  CriticalityLabel label = CriticalityLabel::Critical;
  double rho = 0;
  double tol = kDefaultCriticalTol;
};

Criticality classify(const ProjectedFamily& mu, double tol = kDefaultCriticalTol);
Criticality classify_matrix(const MeanMatrix& m, double tol = kDefaultCriticalTol);

// Spectral radius of the mean matrix of mu_theta.
double rho_at(const ProjectedFamily& mu, const TiltVector& theta);

// L1-normalized positive left 1-eigenvector of M. Throws InputError unless
// mu is critical within `tol` and irreducible.
Vec asymptotic_direction(const ProjectedFamily& mu, double tol = kDefaultCriticalTol);

// Componentwise-minimal fixed point of p -> phi(p): per-type probability
// that the tree is finite.
Vec extinction_probabilities(const ProjectedFamily& mu, int max_iterations = 1'000'000);

// q = log p. Throws DomainError when some p_i = 0 (family not finite).
TiltVector subcritical_companion(const ProjectedFamily& mu);

// lambda in [0, 1] with |rho_{lambda theta_end} - 1| <= tol, by bisection.
double critical_on_segment(const ProjectedFamily& mu, const TiltVector& theta_end,
                           double tol = 1e-10);

// Smallest s >= 0 on the doubling ladder 0, 1, 2, 4, ... with mu_{s*1} supercritical.
double supercritical_scale(const ProjectedFamily& mu, double max_scale = 512.0);

}  // namespace bgwtilt
