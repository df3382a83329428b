#include "bgwtilt/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "bgwtilt/errors.hpp"
#include "bgwtilt/rng.hpp"
#include "bgwtilt/spectral.hpp"

namespace bgwtilt {

namespace {

struct Pending {
  int parent;
  int type;
  std::uint64_t key;
  int depth;
};

// Pops pending vertices in preorder, drawing each vertex's word from its own
// key (stream 0); child c gets key derive(key, c + 1). `admit(type)` is
// called once per created vertex and may stop the growth by returning false.
template <class Admit>
bool grow(const TreeSampler& s, int cap, std::vector<Pending>& stack, std::vector<TreeNode>& nodes,
          Admit&& admit) {
  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    if (static_cast<int>(nodes.size()) >= cap) return false;
    const int idx = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{p.parent, p.type, 0, p.depth});
    if (!admit(p.type)) return false;
    const Word& w = s.draw_word(p.type, p.key);
    nodes[idx].children = static_cast<int>(w.size());
    for (int c = static_cast<int>(w.size()) - 1; c >= 0; --c)
      stack.push_back(Pending{idx, w[c], rng::derive(p.key, static_cast<std::uint64_t>(c) + 1), p.depth + 1});
  }
  return true;
}

void check_root(int root_type, int types) {
  if (root_type < 0 || root_type >= types) throw InputError("root type out of range");
}

template <class P>
struct Enumerator {
  const BasicOrderedFamily<P>& zeta;
  int max_vertices;
  std::vector<TreeNode> nodes;
  std::vector<std::pair<int, int>> pending;  // (parent, type), top = next in preorder
  std::vector<std::pair<MultitypeTree, P>> out;

  void run(const P& prob) {
    if (pending.empty()) {
      if (out.size() >= 5'000'000) throw BudgetError("more than 5e6 trees in the enumeration");
      out.emplace_back(MultitypeTree(zeta.types(), nodes), prob);
      return;
    }
    const auto [parent, type] = pending.back();
    pending.pop_back();
    const int idx = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{parent, type, 0, 0});
    for (const auto& [word, p] : zeta.law(type)) {
      if (nodes.size() + pending.size() + word.size() > static_cast<std::size_t>(max_vertices)) continue;
      nodes[idx].children = static_cast<int>(word.size());
      for (auto it = word.rbegin(); it != word.rend(); ++it) pending.emplace_back(idx, *it);
      run(prob * p);
      pending.resize(pending.size() - word.size());
    }
    nodes.pop_back();
    pending.emplace_back(parent, type);
  }
};

}  // namespace

void SampleSpec::check() const {
  if (cap < 1) throw InputError("cap must be >= 1");
  if (attempts < 1) throw InputError("attempts must be >= 1");
  if (threads < 1) throw InputError("threads must be >= 1");
}

TreeSampler::TreeSampler(const OrderedFamily& zeta) : types_(zeta.types()) {
  for (int i = 0; i < types_; ++i) {
    std::vector<double> cum;
    std::vector<Word> words;
    double total = 0;
    for (const auto& [w, p] : zeta.law(i)) {
      total += p;
      cum.push_back(total);
      words.push_back(w);
    }
    if (words.empty()) throw InputError("type " + std::to_string(i + 1) + " has an empty law");
    for (double& c : cum) c /= total;
    cum.back() = 1.0;
    cumulative_.push_back(std::move(cum));
    words_.push_back(std::move(words));
  }
}

const Word& TreeSampler::draw_word(int type, std::uint64_t key) const {
  const auto& cum = cumulative_[type];
  const double u = rng::uniform(key, 0);
  const auto it = std::upper_bound(cum.begin(), cum.end(), u);
  return words_[type][std::min<std::size_t>(it - cum.begin(), cum.size() - 1)];
}

std::variant<MultitypeTree, Overflow> TreeSampler::sample(int root_type, std::uint64_t seed,
                                                          std::uint64_t draw, int cap) const {
  check_root(root_type, types_);
  std::vector<Pending> stack{{-1, root_type, rng::root_key(seed, draw, root_type), 0}};
  std::vector<TreeNode> nodes;
  if (!grow(*this, cap, stack, nodes, [](int) { return true; })) return Overflow{cap};
  return MultitypeTree(types_, std::move(nodes));
}

std::variant<MultitypeTree, Overflow> sample_tree(const OrderedFamily& zeta, int root_type,
                                                  const SampleSpec& spec) {
  spec.check();
  return TreeSampler(zeta).sample(root_type, spec.seed, 0, spec.cap);
}

template <class P>
std::vector<std::pair<MultitypeTree, P>> enumerate_trees(const BasicOrderedFamily<P>& zeta,
                                                         int root_type, int max_vertices, int budget) {
  check_root(root_type, zeta.types());
  if (max_vertices < 1) throw InputError("max_vertices must be >= 1");
  if (max_vertices > budget)
    throw BudgetError("max_vertices " + std::to_string(max_vertices) + " exceeds the enumeration budget " +
                      std::to_string(budget));
  Enumerator<P> e{zeta, max_vertices, {}, {{-1, root_type}}, {}};
  e.run(P(1));
  return std::move(e.out);
}

template <class P>
std::map<IntRow, std::map<std::string, P>> conditional_laws(
    const std::vector<std::pair<MultitypeTree, P>>& trees, const GammaConstraint& gamma) {
  std::map<IntRow, std::map<std::string, P>> laws;
  std::map<IntRow, P> mass;
  for (const auto& [tree, p] : trees) {
    if (p == P(0)) continue;
    IntRow g = gamma.apply(tree.counts());
    laws[g][tree.signature()] += p;
    mass[g] += p;
  }
  for (auto& [g, law] : laws)
    for (auto& [sig, p] : law) p /= mass[g];
  return laws;
}

template std::vector<std::pair<MultitypeTree, double>> enumerate_trees(const OrderedFamily&, int, int, int);
template std::vector<std::pair<MultitypeTree, Rational>> enumerate_trees(const ExactOrderedFamily&, int,
                                                                         int, int);
template std::map<IntRow, std::map<std::string, double>> conditional_laws(
    const std::vector<std::pair<MultitypeTree, double>>&, const GammaConstraint&);
template std::map<IntRow, std::map<std::string, Rational>> conditional_laws(
    const std::vector<std::pair<MultitypeTree, Rational>>&, const GammaConstraint&);

ConditionedBatch sample_conditioned_batch(const OrderedFamily& zeta, const GammaConstraint& gamma,
                                          int root_type, const SampleSpec& spec, int count) {
  spec.check();
  check_root(root_type, zeta.types());
  if (count < 1) throw InputError("sample count must be >= 1");
  if (gamma.types() != zeta.types()) throw InputError("Gamma has the wrong number of columns");
  if (!gamma.target()) throw InputError("conditioning needs a target g");
  const IntRow& g = *gamma.target();
  const int l = gamma.rows();
  // With a nonnegative Gamma the running value of Gamma N only grows, so a
  // draw can be abandoned as soon as it overshoots g.
  bool monotone = true;
  for (const auto& row : gamma.matrix())
    for (auto v : row)
      if (v < 0) monotone = false;

  TreeSampler sampler(zeta);
  auto attempt = [&](std::uint64_t draw, std::vector<Pending>& stack, std::vector<TreeNode>& nodes,
                     IntRow& gn) -> bool {
    stack.assign(1, Pending{-1, root_type, rng::root_key(spec.seed, draw, root_type), 0});
    nodes.clear();
    std::fill(gn.begin(), gn.end(), 0);
    auto admit = [&](int type) {
      bool ok = true;
      for (int r = 0; r < l; ++r) {
        gn[r] += gamma.matrix()[r][type];
        if (monotone && gn[r] > g[r]) ok = false;
      }
      return ok;
    };
    if (!grow(sampler, spec.cap, stack, nodes, admit)) return false;
    return gn == g;
  };

  constexpr std::int64_t kBlock = 1 << 16;
  ConditionedBatch batch;
  const int threads = spec.threads;
  std::int64_t next_draw = 0;
  while (static_cast<int>(batch.trees.size()) < count) {
    if (next_draw >= spec.attempts) {
      std::ostringstream msg;
      msg << "rejection attempts exhausted: " << batch.trees.size() << " accepted in " << next_draw
          << " draws (acceptance rate " << batch.acceptance_rate() << ")";
      throw ConvergenceError(msg.str(), {static_cast<double>(batch.trees.size()) / static_cast<double>(next_draw),
                                         static_cast<double>(next_draw)});
    }
    const std::int64_t block = std::min(kBlock, spec.attempts - next_draw);
    std::vector<std::vector<std::pair<std::int64_t, MultitypeTree>>> found(threads);
    auto work = [&](int t) {
      std::vector<Pending> stack;
      std::vector<TreeNode> nodes;
      IntRow gn(l, 0);
      const std::int64_t lo = next_draw + block * t / threads;
      const std::int64_t hi = next_draw + block * (t + 1) / threads;
      for (std::int64_t d = lo; d < hi; ++d)
        if (attempt(static_cast<std::uint64_t>(d), stack, nodes, gn))
          found[t].emplace_back(d, MultitypeTree(zeta.types(), nodes));
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(work, t);
    work(0);
    for (auto& th : pool) th.join();
    for (auto& part : found)
      for (auto& [d, tree] : part) {
        if (static_cast<int>(batch.trees.size()) == count) break;
        batch.trees.push_back(std::move(tree));
        batch.attempts = d + 1;
      }
    next_draw += block;
    if (static_cast<int>(batch.trees.size()) < count) batch.attempts = next_draw;
  }
  return batch;
}

MultitypeTree sample_conditioned(const OrderedFamily& zeta, const GammaConstraint& gamma, int root_type,
                                 const SampleSpec& spec) {
  return std::move(sample_conditioned_batch(zeta, gamma, root_type, spec, 1).trees.front());
}

std::optional<Counts> integer_preimage(const GammaConstraint& gamma, const IntRow& k, int bound) {
  const int l = gamma.rows();
  const int kk = gamma.types();
  if (static_cast<int>(k.size()) != l) throw InputError("k must have one entry per row of Gamma");
  if (bound < 0) throw InputError("bound must be >= 0");
  const auto& G = gamma.matrix();
  // Range of sum_{c >= j} Gamma(r, c) x_c over the box, per suffix j.
  std::vector<IntRow> lo(kk + 1, IntRow(l, 0));
  std::vector<IntRow> hi(kk + 1, IntRow(l, 0));
  for (int j = kk - 1; j >= 0; --j)
    for (int r = 0; r < l; ++r) {
      const std::int64_t v = G[r][j] * bound;
      lo[j][r] = lo[j + 1][r] + std::min<std::int64_t>(0, v);
      hi[j][r] = hi[j + 1][r] + std::max<std::int64_t>(0, v);
    }
  Counts x(kk, 0);
  IntRow partial(l, 0);
  auto search = [&](auto&& self, int j) -> bool {
    if (j == kk) return partial == k;
    for (int v = 0; v <= bound; ++v) {
      bool feasible = true;
      for (int r = 0; r < l && feasible; ++r) {
        const std::int64_t s = partial[r] + G[r][j] * v;
        const std::int64_t rest = k[r] - s;
        if (rest < lo[j + 1][r] || rest > hi[j + 1][r]) feasible = false;
      }
      if (!feasible) continue;
      x[j] = v;
      for (int r = 0; r < l; ++r) partial[r] += G[r][j] * v;
      if (self(self, j + 1)) return true;
      for (int r = 0; r < l; ++r) partial[r] -= G[r][j] * v;
    }
    x[j] = 0;
    return false;
  };
  if (!search(search, 0)) return std::nullopt;
  return x;
}

OrderedFamily size_biased_law(const OrderedFamily& zeta, const Vec& b) {
  const int k = zeta.types();
  if (b.size() != k) throw InputError("b has the wrong length");
  for (int i = 0; i < k; ++i)
    if (!(b[i] > 0) || !std::isfinite(b[i])) throw InputError("b must be positive");
  Criticality c = classify(project(zeta));
  if (c.label != CriticalityLabel::Critical) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "size-biased law needs a critical family (rho = " << c.rho << ")";
    throw InputError(msg.str());
  }
  std::vector<OrderedFamily::Law> laws(k);
  for (int j = 0; j < k; ++j) {
    double total = 0;
    for (const auto& [word, p] : zeta.law(j)) {
      if (word.empty()) continue;
      double weight = 0;
      for (int t : word) weight += b[t];
      const double mass = p * weight / b[j];
      laws[j].emplace_back(word, mass);
      total += mass;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "size-biased law of type " << j + 1 << " has mass " << total << " (M b != b)";
      throw InputError(msg.str());
    }
  }
  return OrderedFamily(k, std::move(laws));
}

OrderedFamily size_biased_law(const OrderedFamily& zeta) {
  return size_biased_law(zeta, perron_vectors(mean_matrix(project(zeta))).b);
}

KestenSampler::KestenSampler(const OrderedFamily& zeta)
    : zeta_(zeta),
      b_(perron_vectors(mean_matrix(project(zeta))).b),
      hat_(size_biased_law(zeta, b_)),
      plain_(zeta_),
      biased_(hat_) {}

KestenPrefix KestenSampler::sample(int root_type, int depth, std::uint64_t seed, std::uint64_t draw,
                                   int cap) const {
  check_root(root_type, zeta_.types());
  if (depth < 0) throw InputError("depth must be >= 0");
  struct Item {
    Pending p;
    bool spine;
  };
  std::vector<Item> stack{{{-1, root_type, rng::root_key(seed, draw, root_type), 0}, true}};
  std::vector<TreeNode> nodes;
  std::vector<int> spine;
  std::vector<bool> truncated;
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    if (static_cast<int>(nodes.size()) >= cap)
      throw BudgetError("Kesten prefix exceeds " + std::to_string(cap) + " vertices");
    const int idx = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{it.p.parent, it.p.type, 0, it.p.depth});
    if (it.spine) spine.push_back(idx);
    if (it.p.depth == depth) {
      truncated.push_back(true);
      continue;
    }
    truncated.push_back(false);
    const Word& w = (it.spine ? biased_ : plain_).draw_word(it.p.type, it.p.key);
    int chosen = -1;
    if (it.spine) {
      double total = 0;
      for (int t : w) total += b_[t];
      double u = rng::uniform(it.p.key, 1) * total;
      chosen = static_cast<int>(w.size()) - 1;
      for (int c = 0; c < static_cast<int>(w.size()); ++c) {
        u -= b_[w[c]];
        if (u < 0) {
          chosen = c;
          break;
        }
      }
    }
    nodes[idx].children = static_cast<int>(w.size());
    for (int c = static_cast<int>(w.size()) - 1; c >= 0; --c)
      stack.push_back(
          {{idx, w[c], rng::derive(it.p.key, static_cast<std::uint64_t>(c) + 1), it.p.depth + 1}, c == chosen});
  }
  KestenPrefix out{MultitypeTree(zeta_.types(), std::move(nodes)), std::move(spine), std::move(truncated), depth};
  return out;
}

KestenPrefix kesten_sample(const OrderedFamily& zeta, int root_type, int depth, const SampleSpec& spec,
                           std::uint64_t draw) {
  spec.check();
  return KestenSampler(zeta).sample(root_type, depth, spec.seed, draw, spec.cap);
}

std::string ball(const KestenPrefix& prefix, int r) {
  if (r > prefix.depth) throw InputError("ball radius exceeds the prefix depth");
  return ball(prefix.tree, r);
}

double empirical_tv(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) throw InputError("empirical_tv needs nonempty samples");
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> freq;
  for (const auto& s : a) ++freq[s].first;
  for (const auto& s : b) ++freq[s].second;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double sum = 0;
  for (const auto& [sig, c] : freq) sum += std::abs(static_cast<double>(c.first) / na - static_cast<double>(c.second) / nb);
  return 0.5 * sum;
}

BlobReport blob_expectation_check(const OrderedFamily& zeta, std::int64_t n_samples, std::uint64_t seed,
                                  int cap, int threads) {
  if (n_samples < 1) throw InputError("n_samples must be >= 1");
  if (threads < 1) throw InputError("threads must be >= 1");
  const int k = zeta.types();
  BlobReport report;
  if (k == 1) {
    report.samples = n_samples;
    return report;
  }
  const Vec X = asymptotic_direction(project(zeta));
  TreeSampler sampler(zeta);

  struct Partial {
    std::vector<std::int64_t> sum;
    std::vector<std::int64_t> sumsq;
    std::int64_t used = 0;
    std::int64_t overflows = 0;
  };
  std::vector<Partial> parts(threads, Partial{std::vector<std::int64_t>(k, 0), std::vector<std::int64_t>(k, 0)});
  auto work = [&](int t) {
    Partial& part = parts[t];
    std::vector<std::pair<int, std::uint64_t>> stack;
    std::vector<std::int64_t> n(k);
    const std::int64_t lo = n_samples * t / threads;
    const std::int64_t hi = n_samples * (t + 1) / threads;
    for (std::int64_t s = lo; s < hi; ++s) {
      std::fill(n.begin(), n.end(), 0);
      const std::uint64_t root = rng::root_key(seed, static_cast<std::uint64_t>(s), 0);
      stack.clear();
      const Word& w0 = sampler.draw_word(0, root);
      for (int c = static_cast<int>(w0.size()) - 1; c >= 0; --c)
        stack.emplace_back(w0[c], rng::derive(root, static_cast<std::uint64_t>(c) + 1));
      std::int64_t size = 1;
      bool overflow = false;
      while (!stack.empty()) {
        const auto [type, key] = stack.back();
        stack.pop_back();
        if (type == 0) continue;
        ++n[type];
        if (++size > cap) {
          overflow = true;
          break;
        }
        const Word& w = sampler.draw_word(type, key);
        for (int c = static_cast<int>(w.size()) - 1; c >= 0; --c)
          stack.emplace_back(w[c], rng::derive(key, static_cast<std::uint64_t>(c) + 1));
      }
      if (overflow) {
        ++part.overflows;
        continue;
      }
      ++part.used;
      for (int j = 1; j < k; ++j) {
        part.sum[j] += n[j];
        part.sumsq[j] += n[j] * n[j];
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work, t);
  work(0);
  for (auto& th : pool) th.join();

  Partial total{std::vector<std::int64_t>(k, 0), std::vector<std::int64_t>(k, 0)};
  for (const auto& p : parts) {
    total.used += p.used;
    total.overflows += p.overflows;
    for (int j = 0; j < k; ++j) {
      total.sum[j] += p.sum[j];
      total.sumsq[j] += p.sumsq[j];
    }
  }
  report.samples = total.used;
  report.overflows = total.overflows;
  if (static_cast<double>(total.used) < 1e-4 * static_cast<double>(n_samples))
    throw ConvergenceError("blob sampling dominated by overflow", {static_cast<double>(total.used)});
  const double n = static_cast<double>(total.used);
  for (int j = 1; j < k; ++j) {
    BlobRow row;
    row.type = j;
    row.estimate = static_cast<double>(total.sum[j]) / n;
    const double var = n > 1 ? (static_cast<double>(total.sumsq[j]) - n * row.estimate * row.estimate) / (n - 1) : 0.0;
    row.standard_error = std::sqrt(std::max(var, 0.0) / n);
    row.expected = X[j] / X[0];
    const double diff = row.estimate - row.expected;
    row.z = row.standard_error > 0 ? diff / row.standard_error : (diff == 0 ? 0.0 : std::copysign(INFINITY, diff));
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace bgwtilt
