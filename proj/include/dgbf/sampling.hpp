#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgbf/matrix.hpp"
#include "dgbf/rng.hpp"

namespace dgbf::sampling {

class SamplingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Mode { kFull, kBootstrap, kDynamic };

const char* to_string(Mode mode);
Mode mode_from_string(const std::string& name);

// Tree index used to key the layer-0 partition stream; never a real tree slot.
inline constexpr std::uint64_t kPartitionStream = ~std::uint64_t{0};

struct SamplingPlan {
  Mode mode = Mode::kDynamic;
  Index n_rows = 0;
  Index layers = 1;
  Index trees = 1;
  double p_max = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

// Fraction of the rows each dynamic-mode tree sees at `layer`: 1/T at the first
// layer, rising linearly to p_max at the last.
double dynamic_fraction(const SamplingPlan& plan, Index layer);

// One index set per tree slot. Dynamic-mode sets are sorted; bootstrap sets
// keep draw order (duplicates included).
std::vector<IndexSet> layer_samples(const SamplingPlan& plan, Index layer);

// Order-independent 64-bit digest of an index set.
std::uint64_t hash_index_set(const IndexSet& set);

}  // namespace dgbf::sampling
