#pragma once

// Family config files.
//
//   {"K": 2, "types": [{"type": 1, "atoms": [{"word": [1, 2, 2], "prob": "1/3"}, ...]}, ...]}
//
// Atoms give either an ordered "word" or a "counts" vector; types are 1-based.
// String probabilities are parsed exactly, numbers through their decimal
// text. The analytic family is selected with
//
//   {"K": 2, "analytic": {"name": "appendix_a", "A": 10, "eps": 0.01}}

#include <optional>
#include <string>

#include <json.hpp>

#include "bgwtilt/family.hpp"

namespace bgwtilt {

struct LoadedFamily {
  int types = 0;
  std::optional<ExactOrderedFamily> exact_ordered;  // every atom had a word
  std::optional<ExactFiniteFamily> exact_counts;    // finite support
  std::optional<OrderedFamily> ordered;             // words, or canonical words for count-only files
  ProjectedFamily projected;
  nlohmann::json source;
};

LoadedFamily parse_family(const nlohmann::json& doc);
LoadedFamily load_family(const std::string& path);

nlohmann::json family_to_json(const ExactOrderedFamily& zeta);

}  // namespace bgwtilt
