#include "bgwtilt/family.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "bgwtilt/errors.hpp"

namespace bgwtilt {

namespace {

using boost::multiprecision::cpp_int;

cpp_int parse_integer(const std::string& s) {
  if (s.empty()) throw InputError("empty integer literal");
  std::size_t start = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (start == s.size()) throw InputError("bad integer literal '" + s + "'");
  for (std::size_t i = start; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i])))
      throw InputError("bad integer literal '" + s + "'");
  // cpp_int reads a leading 0 as octal
  std::size_t first = s.find_first_not_of('0', start);
  if (first == std::string::npos) return 0;
  cpp_int v(s.substr(first));
  return s[0] == '-' ? cpp_int(-v) : v;
}

cpp_int pow10(long e) {
  cpp_int r = 1;
  for (long i = 0; i < e; ++i) r *= 10;
  return r;
}

template <class P>
bool near_one(const P& sum) {
  if constexpr (std::is_same_v<P, Rational>) {
    Rational gap = sum - 1;
    if (gap < 0) gap = -gap;
    return gap <= Rational(1, 1'000'000'000'000LL);
  } else {
    return std::abs(sum - 1.0) <= 1e-12;
  }
}

template <class P>
std::string show(const P& p) {
  std::ostringstream out;
  if constexpr (std::is_same_v<P, Rational>) {
    out << p.str();
  } else {
    out.precision(17);
    out << p;
  }
  return out.str();
}

// Merges duplicate keys, drops zero masses, sorts and checks normalization.
template <class Key, class P>
AtomList<Key, P> canonicalize(AtomList<Key, P> atoms, int type) {
  std::map<Key, P> merged;
  for (auto& [key, prob] : atoms) {
    if (prob < 0) throw InputError("negative probability for type " + std::to_string(type + 1));
    if constexpr (std::is_same_v<P, double>) {
      if (!std::isfinite(prob))
        throw InputError("non-finite probability for type " + std::to_string(type + 1));
    }
    merged[key] += prob;
  }
  AtomList<Key, P> out;
  P total = 0;
  for (auto& [key, prob] : merged) {
    if (prob == 0) continue;
    total += prob;
    out.emplace_back(key, prob);
  }
  if (!near_one(total))
    throw InputError("law of type " + std::to_string(type + 1) + " sums to " + show(total));
  return out;
}

class TiltedAnalytic final : public AnalyticGenerating {
 public:
  TiltedAnalytic(std::shared_ptr<const AnalyticGenerating> base, Vec theta)
      : base_(std::move(base)), theta_(std::move(theta)), scale_(theta_.array().exp()) {
    if (!base_->in_domain(scale_))
      throw DomainError("tilt outside the domain of " + base_->name());
    normalizer_.resize(base_->types());
    for (int i = 0; i < base_->types(); ++i) {
      normalizer_[i] = base_->value(i, scale_);
      if (!(normalizer_[i] > 0) || !std::isfinite(normalizer_[i]))
        throw DomainError("tilt normalizer not positive and finite");
    }
  }

  const AnalyticGenerating& base() const { return *base_; }
  std::shared_ptr<const AnalyticGenerating> base_ptr() const { return base_; }
  const Vec& theta() const { return theta_; }

  int types() const override { return base_->types(); }
  std::string name() const override { return base_->name() + " (tilted)"; }
  std::vector<std::pair<std::string, double>> parameters() const override {
    auto p = base_->parameters();
    for (int i = 0; i < theta_.size(); ++i)
      p.emplace_back("theta" + std::to_string(i + 1), theta_[i]);
    return p;
  }
  DeclaredFlags declared_flags() const override { return base_->declared_flags(); }

  bool in_domain(const Vec& x) const override {
    return base_->in_domain(x.cwiseProduct(scale_));
  }
  double value(int i, const Vec& x) const override {
    return base_->value(i, x.cwiseProduct(scale_)) / normalizer_[i];
  }
  Vec gradient(int i, const Vec& x) const override {
    return base_->gradient(i, x.cwiseProduct(scale_)).cwiseProduct(scale_) / normalizer_[i];
  }
  Mat hessian(int i, const Vec& x) const override {
    Mat h = base_->hessian(i, x.cwiseProduct(scale_));
    return scale_.asDiagonal() * h * scale_.asDiagonal() / normalizer_[i];
  }

 private:
  std::shared_ptr<const AnalyticGenerating> base_;
  Vec theta_;
  Vec scale_;
  Vec normalizer_;
};

double log_sum_exp(const std::vector<double>& v) {
  double m = *std::max_element(v.begin(), v.end());
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

Rational parse_rational(const std::string& raw) {
  std::string text;
  for (char c : raw)
    if (!std::isspace(static_cast<unsigned char>(c))) text += c;
  if (text.empty()) throw InputError("empty probability literal");

  if (auto slash = text.find('/'); slash != std::string::npos) {
    cpp_int num = parse_integer(text.substr(0, slash));
    cpp_int den = parse_integer(text.substr(slash + 1));
    if (den == 0) throw InputError("zero denominator in '" + raw + "'");
    return Rational(num, den);
  }

  // Decimal literal with optional exponent, converted exactly.
  std::string mantissa = text;
  long exponent = 0;
  if (auto e = text.find_first_of("eE"); e != std::string::npos) {
    mantissa = text.substr(0, e);
    exponent = static_cast<long>(parse_integer(text.substr(e + 1)).convert_to<long long>());
  }
  bool negative = !mantissa.empty() && mantissa[0] == '-';
  if (!mantissa.empty() && (mantissa[0] == '-' || mantissa[0] == '+')) mantissa.erase(0, 1);
  std::string digits;
  long fraction_digits = 0;
  if (auto dot = mantissa.find('.'); dot != std::string::npos) {
    digits = mantissa.substr(0, dot) + mantissa.substr(dot + 1);
    fraction_digits = static_cast<long>(mantissa.size() - dot - 1);
  } else {
    digits = mantissa;
  }
  if (digits.empty()) throw InputError("bad probability literal '" + raw + "'");
  cpp_int num = parse_integer(digits);
  if (negative) num = -num;
  long shift = exponent - fraction_digits;
  if (shift >= 0) return Rational(num * pow10(shift));
  return Rational(num, pow10(-shift));
}

template <class P>
BasicOrderedFamily<P>::BasicOrderedFamily(int types, std::vector<Law> laws) : types_(types) {
  if (types < 1) throw InputError("number of types must be positive");
  if (static_cast<int>(laws.size()) != types)
    throw InputError("expected " + std::to_string(types) + " offspring laws, got " +
                     std::to_string(laws.size()));
  laws_.reserve(laws.size());
  for (int i = 0; i < types; ++i) {
    for (const auto& [word, prob] : laws[i])
      for (int t : word)
        if (t < 0 || t >= types)
          throw InputError("word of type " + std::to_string(i + 1) + " uses unknown type " +
                           std::to_string(t + 1));
    laws_.push_back(canonicalize(std::move(laws[i]), i));
  }
}

template <class P>
BasicFiniteFamily<P>::BasicFiniteFamily(int types, std::vector<Law> laws) : types_(types) {
  if (types < 1) throw InputError("number of types must be positive");
  if (static_cast<int>(laws.size()) != types)
    throw InputError("expected " + std::to_string(types) + " offspring laws, got " +
                     std::to_string(laws.size()));
  laws_.reserve(laws.size());
  for (int i = 0; i < types; ++i) {
    for (const auto& [counts, prob] : laws[i]) {
      if (static_cast<int>(counts.size()) != types)
        throw InputError("count vector of type " + std::to_string(i + 1) + " has wrong length");
      for (int c : counts)
        if (c < 0) throw InputError("negative child count for type " + std::to_string(i + 1));
    }
    laws_.push_back(canonicalize(std::move(laws[i]), i));
  }
}

template class BasicOrderedFamily<double>;
template class BasicOrderedFamily<Rational>;
template class BasicFiniteFamily<double>;
template class BasicFiniteFamily<Rational>;

OrderedFamily to_double(const ExactOrderedFamily& family) {
  std::vector<OrderedFamily::Law> laws;
  for (const auto& law : family.laws()) {
    OrderedFamily::Law out;
    for (const auto& [w, p] : law) out.emplace_back(w, to_double(p));
    laws.push_back(std::move(out));
  }
  return OrderedFamily(family.types(), std::move(laws));
}

FiniteFamily to_double(const ExactFiniteFamily& family) {
  std::vector<FiniteFamily::Law> laws;
  for (const auto& law : family.laws()) {
    FiniteFamily::Law out;
    for (const auto& [k, p] : law) out.emplace_back(k, to_double(p));
    laws.push_back(std::move(out));
  }
  return FiniteFamily(family.types(), std::move(laws));
}

void AnalyticGenerating::check_normalized(double tol) const {
  Vec ones = Vec::Ones(types());
  for (int i = 0; i < types(); ++i) {
    double v = value(i, ones);
    if (!(std::abs(v - 1.0) <= tol))
      throw InputError(name() + ": phi^(" + std::to_string(i + 1) + ")(1) = " +
                       std::to_string(v) + " is not 1");
  }
}

ProjectedFamily::ProjectedFamily(FiniteFamily finite) : backend_(std::move(finite)) {}

ProjectedFamily::ProjectedFamily(std::shared_ptr<const AnalyticGenerating> analytic) {
  if (!analytic) throw InputError("null analytic family");
  analytic->check_normalized();
  backend_ = std::move(analytic);
}

int ProjectedFamily::types() const {
  if (has_finite_support()) return std::get<FiniteFamily>(backend_).types();
  return std::get<std::shared_ptr<const AnalyticGenerating>>(backend_)->types();
}

const FiniteFamily& ProjectedFamily::finite() const {
  if (!has_finite_support()) throw InputError("operation requires a finite-support family");
  return std::get<FiniteFamily>(backend_);
}

const AnalyticGenerating& ProjectedFamily::analytic() const { return *analytic_ptr(); }

std::shared_ptr<const AnalyticGenerating> ProjectedFamily::analytic_ptr() const {
  if (has_finite_support()) throw InputError("operation requires an analytic family");
  return std::get<std::shared_ptr<const AnalyticGenerating>>(backend_);
}

template <class P>
BasicFiniteFamily<P> project(const BasicOrderedFamily<P>& zeta) {
  const int k = zeta.types();
  std::vector<typename BasicFiniteFamily<P>::Law> laws(k);
  for (int i = 0; i < k; ++i) {
    for (const auto& [word, prob] : zeta.law(i)) {
      Counts counts(k, 0);
      for (int t : word) ++counts[t];
      laws[i].emplace_back(std::move(counts), prob);
    }
  }
  return BasicFiniteFamily<P>(k, std::move(laws));
}

template FiniteFamily project(const OrderedFamily&);
template ExactFiniteFamily project(const ExactOrderedFamily&);

OrderedFamily canonical_words(const FiniteFamily& mu) {
  std::vector<OrderedFamily::Law> laws(mu.types());
  for (int i = 0; i < mu.types(); ++i) {
    for (const auto& [counts, prob] : mu.law(i)) {
      Word w;
      for (int t = 0; t < mu.types(); ++t) w.insert(w.end(), counts[t], t);
      laws[i].emplace_back(std::move(w), prob);
    }
  }
  return OrderedFamily(mu.types(), std::move(laws));
}

void check_tilt(const TiltVector& theta, int types) {
  if (theta.size() != types)
    throw InputError("tilt has " + std::to_string(theta.size()) + " entries, expected " +
                     std::to_string(types));
  for (int i = 0; i < theta.size(); ++i) {
    if (!std::isfinite(theta[i])) throw InputError("tilt entries must be finite");
    if (std::abs(theta[i]) > kTiltOverflowGuard)
      throw DomainError("tilt entry " + std::to_string(theta[i]) + " exceeds overflow guard");
  }
}

TiltedMoments tilted_moments(const ProjectedFamily& mu, const TiltVector& theta,
                             bool with_covariance) {
  const int k = mu.types();
  check_tilt(theta, k);
  TiltedMoments out;
  out.log_normalizer.resize(k);
  out.mean = Mat::Zero(k, k);
  if (with_covariance) out.covariance.assign(k, Mat::Zero(k, k));

  if (mu.has_finite_support()) {
    const FiniteFamily& fam = mu.finite();
    std::vector<double> logw;
    for (int i = 0; i < k; ++i) {
      const auto& law = fam.law(i);
      logw.resize(law.size());
      for (std::size_t a = 0; a < law.size(); ++a) {
        double dot = 0;
        for (int j = 0; j < k; ++j) dot += theta[j] * law[a].first[j];
        logw[a] = std::log(law[a].second) + dot;
      }
      double lse = log_sum_exp(logw);
      out.log_normalizer[i] = lse;
      Vec m = Vec::Zero(k);
      std::vector<double> w(law.size());
      for (std::size_t a = 0; a < law.size(); ++a) {
        w[a] = std::exp(logw[a] - lse);
        for (int j = 0; j < k; ++j) m[j] += w[a] * law[a].first[j];
      }
      out.mean.row(i) = m.transpose();
      if (with_covariance) {
        Mat& c = out.covariance[i];
        for (std::size_t a = 0; a < law.size(); ++a) {
          Vec d(k);
          for (int j = 0; j < k; ++j) d[j] = law[a].first[j] - m[j];
          c.noalias() += w[a] * d * d.transpose();
        }
      }
    }
    return out;
  }

  const AnalyticGenerating& g = mu.analytic();
  Vec x = theta.array().exp();
  if (!g.in_domain(x)) throw DomainError("tilt outside the domain of " + g.name());
  for (int i = 0; i < k; ++i) {
    double phi = g.value(i, x);
    if (!(phi > 0) || !std::isfinite(phi))
      throw DomainError("generating function not positive and finite at e^theta");
    out.log_normalizer[i] = std::log(phi);
    Vec grad = g.gradient(i, x);
    Vec m = x.cwiseProduct(grad) / phi;
    out.mean.row(i) = m.transpose();
    if (with_covariance) {
      Mat h = g.hessian(i, x);
      Mat c = x.asDiagonal() * h * x.asDiagonal() / phi;
      c.diagonal() += m;
      c -= m * m.transpose();
      out.covariance[i] = c;
    }
  }
  return out;
}

double gf_eval(const ProjectedFamily& mu, int type, const Vec& x) {
  if (type < 0 || type >= mu.types()) throw InputError("type index out of range");
  if (x.size() != mu.types()) throw InputError("argument has wrong dimension");
  if (mu.has_finite_support()) {
    double s = 0;
    for (const auto& [counts, prob] : mu.finite().law(type)) {
      double term = prob;
      for (int j = 0; j < mu.types(); ++j)
        if (counts[j] > 0) term *= std::pow(x[j], counts[j]);
      s += term;
    }
    return s;
  }
  const AnalyticGenerating& g = mu.analytic();
  if (!g.in_domain(x)) throw DomainError("argument outside the domain of " + g.name());
  return g.value(type, x);
}

Vec gf_gradient(const ProjectedFamily& mu, int type, const Vec& x) {
  if (type < 0 || type >= mu.types()) throw InputError("type index out of range");
  if (x.size() != mu.types()) throw InputError("argument has wrong dimension");
  const int k = mu.types();
  if (mu.has_finite_support()) {
    Vec grad = Vec::Zero(k);
    for (const auto& [counts, prob] : mu.finite().law(type)) {
      for (int j = 0; j < k; ++j) {
        if (counts[j] == 0) continue;
        double term = prob * counts[j];
        for (int l = 0; l < k; ++l) {
          int e = counts[l] - (l == j ? 1 : 0);
          if (e > 0) term *= std::pow(x[l], e);
        }
        grad[j] += term;
      }
    }
    return grad;
  }
  const AnalyticGenerating& g = mu.analytic();
  if (!g.in_domain(x)) throw DomainError("argument outside the domain of " + g.name());
  return g.gradient(type, x);
}

FiniteFamily tilt(const FiniteFamily& mu, const TiltVector& theta) {
  const int k = mu.types();
  check_tilt(theta, k);
  std::vector<FiniteFamily::Law> laws(k);
  std::vector<double> logw;
  for (int i = 0; i < k; ++i) {
    const auto& law = mu.law(i);
    logw.resize(law.size());
    for (std::size_t a = 0; a < law.size(); ++a) {
      double dot = 0;
      for (int j = 0; j < k; ++j) dot += theta[j] * law[a].first[j];
      logw[a] = std::log(law[a].second) + dot;
    }
    double lse = log_sum_exp(logw);
    for (std::size_t a = 0; a < law.size(); ++a)
      laws[i].emplace_back(law[a].first, std::exp(logw[a] - lse));
  }
  return FiniteFamily(k, std::move(laws));
}

ProjectedFamily tilt(const ProjectedFamily& mu, const TiltVector& theta) {
  if (mu.has_finite_support()) return ProjectedFamily(tilt(mu.finite(), theta));
  check_tilt(theta, mu.types());
  auto base = mu.analytic_ptr();
  Vec total = theta;
  // Flatten nested tilts so the group law holds exactly.
  if (auto tilted = std::dynamic_pointer_cast<const TiltedAnalytic>(base)) {
    total += tilted->theta();
    base = tilted->base_ptr();
  }
  check_tilt(total, mu.types());
  if (total.cwiseAbs().maxCoeff() == 0.0) return ProjectedFamily(base);
  return ProjectedFamily(std::make_shared<TiltedAnalytic>(base, total));
}

OrderedFamily tilt_ordered(const OrderedFamily& zeta, const TiltVector& theta) {
  const int k = zeta.types();
  check_tilt(theta, k);
  std::vector<OrderedFamily::Law> laws(k);
  std::vector<double> logw;
  for (int i = 0; i < k; ++i) {
    const auto& law = zeta.law(i);
    logw.resize(law.size());
    for (std::size_t a = 0; a < law.size(); ++a) {
      double dot = 0;
      for (int t : law[a].first) dot += theta[t];
      logw[a] = std::log(law[a].second) + dot;
    }
    double lse = log_sum_exp(logw);
    for (std::size_t a = 0; a < law.size(); ++a)
      laws[i].emplace_back(law[a].first, std::exp(logw[a] - lse));
  }
  return OrderedFamily(k, std::move(laws));
}

MeanMatrix mean_matrix(const ProjectedFamily& mu) {
  return tilted_moments(mu, Vec::Zero(mu.types())).mean;
}

}  // namespace bgwtilt
