#pragma once

// Sampling and exact enumeration of multitype BGW trees: unconditioned and
// Gamma-conditioned draws, integer preimages of targets, the size-biased law
// and Kesten prefixes, ball laws and the blob expectation check.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bgwtilt/chi.hpp"
#include "bgwtilt/family.hpp"
#include "bgwtilt/tree.hpp"

namespace bgwtilt {

struct SampleSpec {
  std::uint64_t seed = 0;
  int cap = 1'000'000;               // max vertices per tree
  std::int64_t attempts = 100'000'000;  // max rejection trials
  int threads = 1;

  void check() const;
};

// Returned instead of a tree when the vertex cap would be exceeded.
struct Overflow {
  int cap = 0;
};

// Precomputed cumulative tables for drawing words; reusable across draws.
class TreeSampler {
 public:
  explicit TreeSampler(const OrderedFamily& zeta);

  int types() const { return types_; }

  // Draw number `draw` of run `seed`. Deterministic in (zeta, root, seed, draw).
  std::variant<MultitypeTree, Overflow> sample(int root_type, std::uint64_t seed, std::uint64_t draw,
                                               int cap) const;

  // Word drawn by a vertex with the given key.
  const Word& draw_word(int type, std::uint64_t key) const;

 private:
  int types_;
  std::vector<std::vector<double>> cumulative_;
  std::vector<std::vector<Word>> words_;
};

std::variant<MultitypeTree, Overflow> sample_tree(const OrderedFamily& zeta, int root_type,
                                                  const SampleSpec& spec);

// Every tree with at most max_vertices vertices and positive probability,
// exactly once, with its probability. Throws BudgetError past `budget`.
template <class P>
std::vector<std::pair<MultitypeTree, P>> enumerate_trees(const BasicOrderedFamily<P>& zeta,
                                                         int root_type, int max_vertices,
                                                         int budget = 14);

// Conditional laws P(T = t | Gamma N(T) = g) from an enumeration, keyed by g
// and then by tree signature. Targets with zero mass are absent.
template <class P>
std::map<IntRow, std::map<std::string, P>> conditional_laws(
    const std::vector<std::pair<MultitypeTree, P>>& trees, const GammaConstraint& gamma);

struct ConditionedBatch {
  std::vector<MultitypeTree> trees;
  std::int64_t attempts = 0;   // trials used to collect `trees`
  double acceptance_rate() const {
    return attempts ? static_cast<double>(trees.size()) / static_cast<double>(attempts) : 0.0;
  }
};

// Rejection sampling until Gamma N(T) = g, where g = gamma.target(). Draw i
// uses root key (seed, i); the first accepted draw is returned.
MultitypeTree sample_conditioned(const OrderedFamily& zeta, const GammaConstraint& gamma,
                                 int root_type, const SampleSpec& spec);

// The first `count` accepted draws in draw order. Parallel over blocks of
// draws; the result does not depend on spec.threads.
ConditionedBatch sample_conditioned_batch(const OrderedFamily& zeta, const GammaConstraint& gamma,
                                          int root_type, const SampleSpec& spec, int count);

// Lexicographically smallest r in {0..bound}^K with Gamma r = k.
std::optional<Counts> integer_preimage(const GammaConstraint& gamma, const IntRow& k, int bound);

// zeta_hat(j)(x) = (1/b_j) sum_k b_{x_k} zeta(j)(x). Throws InputError unless
// the projection is critical.
OrderedFamily size_biased_law(const OrderedFamily& zeta, const Vec& b);
OrderedFamily size_biased_law(const OrderedFamily& zeta);

struct KestenPrefix {
  MultitypeTree tree;
  std::vector<int> spine;       // node indices, one per generation 0..depth
  std::vector<bool> truncated;  // per node: offspring not drawn (depth == limit)
  int depth = 0;
};

// Kesten tree cut at generation `depth`. Spine vertices reproduce by
// zeta_hat, the spine child is picked with probability proportional to b of
// its type and every other child roots an ordinary BGW tree.
KestenPrefix kesten_sample(const OrderedFamily& zeta, int root_type, int depth, const SampleSpec& spec,
                           std::uint64_t draw = 0);

class KestenSampler {
 public:
  explicit KestenSampler(const OrderedFamily& zeta);
  KestenPrefix sample(int root_type, int depth, std::uint64_t seed, std::uint64_t draw, int cap) const;
  const Vec& b() const { return b_; }
  const OrderedFamily& size_biased() const { return hat_; }

 private:
  OrderedFamily zeta_;
  Vec b_;
  OrderedFamily hat_;
  TreeSampler plain_;
  TreeSampler biased_;
};

std::string ball(const KestenPrefix& prefix, int r);

// Half the L1 distance between the empirical laws of two nonempty multisets.
double empirical_tv(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct BlobRow {
  int type = 0;  // 0-based, never the root type 0
  double estimate = 0;
  double standard_error = 0;
  double expected = 0;  // X(j) / X(1)
  double z = 0;
};

struct BlobReport {
  std::vector<BlobRow> rows;
  std::int64_t samples = 0;
  std::int64_t overflows = 0;
};

// Monte Carlo estimate of E[N_j^(1)], the number of type-j vertices with no
// type-1 ancestor other than the root, for trees with a type-1 root.
BlobReport blob_expectation_check(const OrderedFamily& zeta, std::int64_t n_samples,
                                  std::uint64_t seed, int cap = 1'000'000, int threads = 1);

}  // namespace bgwtilt
