#pragma once

// Brute-force enumeration of small trees by expanding pending vertices in
// preorder, independent of the library's enumerator.

#include <map>
#include <string>
#include <vector>

#include "bgwtilt/family.hpp"

namespace oracle {

struct Tree {
  std::vector<std::pair<int, int>> preorder;  // (type, number of children)
  double prob = 0;
};

inline std::string signature_at(const std::vector<std::pair<int, int>>& pre, std::size_t& pos) {
  const auto [type, n] = pre[pos++];
  std::string s = std::to_string(type + 1);
  if (n == 0) return s;
  s += '(';
  for (int c = 0; c < n; ++c) {
    if (c) s += ',';
    s += signature_at(pre, pos);
  }
  return s + ')';
}

inline std::string signature(const Tree& t) {
  std::size_t pos = 0;
  return signature_at(t.preorder, pos);
}

inline std::vector<int> counts(const Tree& t, int k) {
  std::vector<int> c(k, 0);
  for (const auto& [type, n] : t.preorder) ++c[type];
  return c;
}

inline void expand(const bgwtilt::OrderedFamily& zeta, std::vector<int>& pending, Tree& cur, int max_vertices,
                   std::vector<Tree>& out) {
  if (pending.empty()) {
    out.push_back(cur);
    return;
  }
  const int type = pending.back();
  pending.pop_back();
  for (const auto& [word, p] : zeta.law(type)) {
    if (p <= 0) continue;
    const int size = static_cast<int>(cur.preorder.size()) + 1 + static_cast<int>(pending.size() + word.size());
    if (size > max_vertices) continue;
    cur.preorder.emplace_back(type, static_cast<int>(word.size()));
    const double saved = cur.prob;
    cur.prob *= p;
    for (auto it = word.rbegin(); it != word.rend(); ++it) pending.push_back(*it);
    expand(zeta, pending, cur, max_vertices, out);
    pending.resize(pending.size() - word.size());
    cur.prob = saved;
    cur.preorder.pop_back();
  }
  pending.push_back(type);
}

inline std::vector<Tree> enumerate(const bgwtilt::OrderedFamily& zeta, int root, int max_vertices) {
  std::vector<Tree> out;
  std::vector<int> pending{root};
  Tree cur;
  cur.prob = 1.0;
  expand(zeta, pending, cur, max_vertices, out);
  return out;
}

// P(T = t | Gamma N(T) = g) keyed by g then signature; Gamma given as rows.
inline std::map<std::vector<long>, std::map<std::string, double>> conditional(
    const std::vector<Tree>& trees, const std::vector<std::vector<long>>& gamma, int k) {
  std::map<std::vector<long>, std::map<std::string, double>> out;
  std::map<std::vector<long>, double> mass;
  for (const auto& t : trees) {
    const auto c = counts(t, k);
    std::vector<long> g;
    for (const auto& row : gamma) {
      long s = 0;
      for (int j = 0; j < k; ++j) s += row[j] * c[j];
      g.push_back(s);
    }
    out[g][signature(t)] += t.prob;
    mass[g] += t.prob;
  }
  for (auto& [g, law] : out)
    for (auto& [sig, p] : law) p /= mass[g];
  return out;
}

}  // namespace oracle
