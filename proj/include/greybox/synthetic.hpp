#pragma once

#include <cstdint>

#include "greybox/dataset.hpp"

namespace greybox {

/// Two Gaussian class blobs separated along a random direction, with a
/// fraction of labels flipped. Stands in for licensed corpora so the whole
/// pipeline runs self-contained.
struct SyntheticConfig {
  std::size_t n = 4000;
  std::size_t d = 16;
  double malicious_fraction = 0.71;
  double separation = 3.0;   // distance between class means, in noise sigmas
  double label_noise = 0.02;
  std::uint64_t seed = 0;
};

/// Raw table with tags "attack" / "natural", ready for the normal
/// sanitize -> binarize -> normalize path.
RawTable make_synthetic(const SyntheticConfig& cfg);

}  // namespace greybox
