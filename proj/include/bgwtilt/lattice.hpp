#pragma once

// Small exact integer linear algebra: rank and lattice generation.

#include <cstdint>
#include <vector>

namespace bgwtilt {

using IntRow = std::vector<std::int64_t>;

// Rank over Q of the given rows (all of the same length).
int integer_rank(const std::vector<IntRow>& rows);

// True iff the rows generate Z^dim as an abelian group. Decided by
// unimodular row reduction to echelon form: the lattice is Z^dim exactly when
// there are dim pivots, all equal to +-1.
bool generates_integer_lattice(const std::vector<IntRow>& rows, int dim);

}  // namespace bgwtilt
