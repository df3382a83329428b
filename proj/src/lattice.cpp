#include "bgwtilt/lattice.hpp"

#include <cstdlib>
#include <utility>

#include <boost/multiprecision/cpp_int.hpp>

#include "bgwtilt/errors.hpp"

namespace bgwtilt {

namespace {

using boost::multiprecision::cpp_int;
using BigRow = std::vector<cpp_int>;

std::vector<BigRow> widen(const std::vector<IntRow>& rows, std::size_t dim) {
  std::vector<BigRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.size() != dim) throw InputError("rows of unequal length");
    out.emplace_back(r.begin(), r.end());
  }
  return out;
}

// Hermite-style echelon form by Euclidean row operations (unimodular).
// Returns the pivots in column order.
std::vector<cpp_int> echelon_pivots(std::vector<BigRow> m, std::size_t dim) {
  std::vector<cpp_int> pivots;
  std::size_t top = 0;
  for (std::size_t col = 0; col < dim && top < m.size(); ++col) {
    // Euclid on column `col` among rows top..end until one nonzero remains.
    while (true) {
      std::size_t best = m.size();
      for (std::size_t r = top; r < m.size(); ++r)
        if (m[r][col] != 0 && (best == m.size() || abs(m[r][col]) < abs(m[best][col]))) best = r;
      if (best == m.size()) break;
      std::swap(m[top], m[best]);
      bool reduced = true;
      for (std::size_t r = top + 1; r < m.size(); ++r) {
        if (m[r][col] == 0) continue;
        cpp_int q = m[r][col] / m[top][col];
        for (std::size_t c = col; c < dim; ++c) m[r][c] -= q * m[top][c];
        if (m[r][col] != 0) reduced = false;
      }
      if (reduced) break;
    }
    if (m[top][col] != 0) {
      pivots.push_back(m[top][col]);
      ++top;
    }
  }
  return pivots;
}

}  // namespace

int integer_rank(const std::vector<IntRow>& rows) {
  if (rows.empty()) return 0;
  const std::size_t dim = rows.front().size();
  return static_cast<int>(echelon_pivots(widen(rows, dim), dim).size());
}

bool generates_integer_lattice(const std::vector<IntRow>& rows, int dim) {
  if (dim <= 0) return true;
  auto pivots = echelon_pivots(widen(rows, static_cast<std::size_t>(dim)), dim);
  if (static_cast<int>(pivots.size()) != dim) return false;
  for (const auto& p : pivots)
    if (abs(p) != 1) return false;
  return true;
}

}  // namespace bgwtilt
