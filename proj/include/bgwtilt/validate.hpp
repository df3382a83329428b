#pragma once

#include <string>
#include <vector>

#include "bgwtilt/family.hpp"

namespace bgwtilt {

// Standing hypotheses on a projected family. For finite-support families every
// flag is decided by a finite procedure; analytic families report the flags
// their author declared (`declared` is then true).
struct ValidationReport {
  bool entire = false;
  bool finite = false;
  bool nondegenerate = false;
  bool nonlocalized = false;
  bool irreducible = false;
  bool aperiodic = false;
  bool declared = false;
  Vec extinction_probs;              // empty when not computed
  std::vector<std::string> reasons;  // one line per failed flag

  bool all() const {
    return entire && finite && nondegenerate && nonlocalized && irreducible && aperiodic;
  }
};

ValidationReport validate(const ProjectedFamily& mu);

}  // namespace bgwtilt
