#pragma once

// Offspring families of a multitype BGW tree.
//
// An ordered family assigns to every type a finite law on ordered type-words;
// its projection forgets the order and keeps per-type child counts. Both come
// in an exact (rational) and a floating-point flavour; conversion is explicit
// through to_double(). A projected family can additionally be backed by a
// closed-form generating function (AnalyticGenerating) for laws with infinite
// support.
//
// Type indices are 0-based in the API. Family files and printed reports use
// the 1-based labels 1..K.

#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

namespace bgwtilt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rational = boost::multiprecision::cpp_rational;

using Word = std::vector<int>;    // ordered child types
using Counts = std::vector<int>;  // child count per type, length K

// Exponential tilt parameter; one entry per type.
using TiltVector = Vec;
// Mean offspring matrix, m(i, j) = expected number of type-j children of a type-i vertex.
using MeanMatrix = Mat;

// Largest admissible |theta_i| in floating point.
inline constexpr double kTiltOverflowGuard = 700.0;

inline double to_double(double p) { return p; }
inline double to_double(const Rational& p) { return p.convert_to<double>(); }

// Parses "num/den", "num" or a decimal literal ("0.25", "1e-3") exactly.
Rational parse_rational(const std::string& text);

template <class Key, class P>
using AtomList = std::vector<std::pair<Key, P>>;

// Per-type laws on ordered words. Atoms are merged, zero masses dropped and
// sorted, so two families with the same laws compare equal.
template <class P>
class BasicOrderedFamily {
 public:
  using Law = AtomList<Word, P>;

  BasicOrderedFamily() = default;
  BasicOrderedFamily(int types, std::vector<Law> laws);

  int types() const { return types_; }
  const Law& law(int type) const { return laws_.at(type); }
  const std::vector<Law>& laws() const { return laws_; }

  bool operator==(const BasicOrderedFamily&) const = default;

 private:
  int types_ = 0;
  std::vector<Law> laws_;
};

// Per-type laws on count vectors in Z_+^K with finite support.
template <class P>
class BasicFiniteFamily {
 public:
  using Law = AtomList<Counts, P>;

  BasicFiniteFamily() = default;
  BasicFiniteFamily(int types, std::vector<Law> laws);

  int types() const { return types_; }
  const Law& law(int type) const { return laws_.at(type); }
  const std::vector<Law>& laws() const { return laws_; }

  bool operator==(const BasicFiniteFamily&) const = default;

 private:
  int types_ = 0;
  std::vector<Law> laws_;
};

using OrderedFamily = BasicOrderedFamily<double>;
using ExactOrderedFamily = BasicOrderedFamily<Rational>;
using FiniteFamily = BasicFiniteFamily<double>;
using ExactFiniteFamily = BasicFiniteFamily<Rational>;

OrderedFamily to_double(const ExactOrderedFamily& family);
FiniteFamily to_double(const ExactFiniteFamily& family);

// Structural properties an analytic family cannot have checked by finite
// procedures; the operator declares them.
struct DeclaredFlags {
  bool entire = false;
  bool finite = false;
  bool nondegenerate = false;
  bool nonlocalized = false;
  bool irreducible = false;
  bool aperiodic = false;
};

// Closed-form generating functions phi^{(i)}(x) with first and second
// derivatives, valid on a declared domain of R^K.
class AnalyticGenerating {
 public:
  virtual ~AnalyticGenerating() = default;

  virtual int types() const = 0;
  virtual std::string name() const = 0;
  virtual std::vector<std::pair<std::string, double>> parameters() const = 0;
  virtual DeclaredFlags declared_flags() const = 0;

  virtual bool in_domain(const Vec& x) const = 0;
  virtual double value(int type, const Vec& x) const = 0;
  virtual Vec gradient(int type, const Vec& x) const = 0;
  virtual Mat hessian(int type, const Vec& x) const = 0;

  // Checks phi^{(i)}(1,...,1) = 1 within `tol` for every type.
  void check_normalized(double tol = 1e-10) const;
};

// A projected family: finite support (canonical) or analytic.
class ProjectedFamily {
 public:
  ProjectedFamily(FiniteFamily finite);  // NOLINT(google-explicit-constructor)
  explicit ProjectedFamily(std::shared_ptr<const AnalyticGenerating> analytic);

  int types() const;
  bool has_finite_support() const { return std::holds_alternative<FiniteFamily>(backend_); }
  const FiniteFamily& finite() const;
  const AnalyticGenerating& analytic() const;
  std::shared_ptr<const AnalyticGenerating> analytic_ptr() const;

 private:
  std::variant<FiniteFamily, std::shared_ptr<const AnalyticGenerating>> backend_;
};

template <class P>
BasicFiniteFamily<P> project(const BasicOrderedFamily<P>& zeta);

// Orders each count vector as the nondecreasing word (1..1 2..2 ...). Used when
// a family file only gives counts but a sampler needs words.
OrderedFamily canonical_words(const FiniteFamily& mu);

// Throws InputError on a size mismatch or a non-finite entry and DomainError
// past the overflow guard.
void check_tilt(const TiltVector& theta, int types);

// Quantities of the tilted laws mu_theta that only depend on the
// log-normalizers and their derivatives.
struct TiltedMoments {
  Vec log_normalizer;            // log phi^{(i)}(e^theta)
  Mat mean;                      // M_theta
  std::vector<Mat> covariance;   // offspring covariance per type, if requested
};

TiltedMoments tilted_moments(const ProjectedFamily& mu, const TiltVector& theta,
                             bool with_covariance = false);

double gf_eval(const ProjectedFamily& mu, int type, const Vec& x);
Vec gf_gradient(const ProjectedFamily& mu, int type, const Vec& x);

FiniteFamily tilt(const FiniteFamily& mu, const TiltVector& theta);
ProjectedFamily tilt(const ProjectedFamily& mu, const TiltVector& theta);
OrderedFamily tilt_ordered(const OrderedFamily& zeta, const TiltVector& theta);

MeanMatrix mean_matrix(const ProjectedFamily& mu);

}  // namespace bgwtilt
