#include "bgwtilt/validate.hpp"

#include <numeric>

#include "bgwtilt/errors.hpp"
#include "bgwtilt/lattice.hpp"
#include "bgwtilt/spectral.hpp"

namespace bgwtilt {

namespace {

IntRow difference(const Counts& a, const Counts& b) {
  IntRow d(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) d[j] = static_cast<std::int64_t>(a[j]) - b[j];
  return d;
}

}  // namespace

ValidationReport validate(const ProjectedFamily& mu) {
  ValidationReport r;
  const int k = mu.types();

  if (!mu.has_finite_support()) {
    DeclaredFlags f = mu.analytic().declared_flags();
    r.entire = f.entire;
    r.finite = f.finite;
    r.nondegenerate = f.nondegenerate;
    r.nonlocalized = f.nonlocalized;
    r.irreducible = f.irreducible;
    r.aperiodic = f.aperiodic;
    r.declared = true;
    r.reasons.push_back("analytic family: flags are operator-declared");
    return r;
  }

  const FiniteFamily& fam = mu.finite();
  r.entire = true;  // polynomial generating functions

  for (int i = 0; i < k && !r.nondegenerate; ++i)
    for (const auto& [counts, prob] : fam.law(i))
      if (std::accumulate(counts.begin(), counts.end(), 0) >= 2) {
        r.nondegenerate = true;
        break;
      }
  if (!r.nondegenerate) r.reasons.push_back("nondegenerate: no type has two or more children");

  // Nonlocalized: within-type support differences span R^K.
  std::vector<IntRow> within;
  for (int i = 0; i < k; ++i) {
    const auto& law = fam.law(i);
    for (std::size_t a = 1; a < law.size(); ++a)
      within.push_back(difference(law[a].first, law[0].first));
  }
  r.nonlocalized = integer_rank(within) == k;
  if (!r.nonlocalized)
    r.reasons.push_back("nonlocalized: within-type support differences have rank " +
                        std::to_string(integer_rank(within)) + " < " + std::to_string(k));

  Mat m = mean_matrix(mu);
  r.irreducible = is_irreducible(m);
  if (!r.irreducible) r.reasons.push_back("irreducible: positivity digraph of M is not strongly connected");

  // Aperiodic: differences of the pooled support generate Z^K.
  std::vector<Counts> pooled;
  for (int i = 0; i < k; ++i)
    for (const auto& [counts, prob] : fam.law(i)) pooled.push_back(counts);
  std::vector<IntRow> diffs;
  for (std::size_t a = 1; a < pooled.size(); ++a) diffs.push_back(difference(pooled[a], pooled[0]));
  r.aperiodic = generates_integer_lattice(diffs, k);
  if (!r.aperiodic) r.reasons.push_back("aperiodic: support differences generate a proper sublattice of Z^K");

  try {
    r.extinction_probs = extinction_probabilities(mu);
    r.finite = r.extinction_probs.minCoeff() > 0;
    if (!r.finite) r.reasons.push_back("finite: some type never yields a finite tree");
  } catch (const ConvergenceError& e) {
    r.finite = false;
    r.reasons.push_back(std::string("finite: ") + e.what());
  }
  return r;
}

}  // namespace bgwtilt
