#include "dgbf/sampling.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dgbf::sampling {

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::kFull: return "full";
    case Mode::kBootstrap: return "bootstrap";
    case Mode::kDynamic: return "dynamic";
  }
  return "full";
}

Mode mode_from_string(const std::string& name) {
  if (name == "full") return Mode::kFull;
  if (name == "bootstrap") return Mode::kBootstrap;
  if (name == "dynamic") return Mode::kDynamic;
  throw SamplingError(fmt::format("unknown sampling mode '{}'", name));
}

void SamplingPlan::validate() const {
  if (n_rows == 0) throw SamplingError("sampling: no rows");
  if (layers == 0 || trees == 0) throw SamplingError("sampling: layers and trees must be >= 1");
  if (!(p_max > 0.0 && p_max <= 1.0)) {
    throw SamplingError(fmt::format("sampling: p_max must be in (0,1], got {}", p_max));
  }
  if (mode == Mode::kDynamic && trees > n_rows) {
    throw SamplingError(
        fmt::format("sampling: dynamic mode needs trees ({}) <= rows ({})", trees, n_rows));
  }
}

double dynamic_fraction(const SamplingPlan& plan, Index layer) {
  const double base = 1.0 / static_cast<double>(plan.trees);
  if (plan.layers <= 1) return base;
  return base + (plan.p_max - base) * static_cast<double>(layer) /
                    static_cast<double>(plan.layers - 1);
}

namespace {

std::vector<IndexSet> partition_rows(const SamplingPlan& plan) {
  IndexSet perm(plan.n_rows);
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng = derive_rng(plan.seed, 0, kPartitionStream);
  for (Index i = plan.n_rows - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  // Cell t takes positions t, t+T, t+2T, ...: sizes differ by at most one.
  std::vector<IndexSet> cells(plan.trees);
  for (Index i = 0; i < plan.n_rows; ++i) cells[i % plan.trees].push_back(perm[i]);
  for (auto& cell : cells) std::sort(cell.begin(), cell.end());
  return cells;
}

// Adds rows not yet in `set` (sorted) until it holds `target` rows.
void grow(IndexSet& set, Index n_rows, Index target, Rng& rng) {
  if (set.size() >= target) return;
  IndexSet outside;
  outside.reserve(n_rows - set.size());
  auto it = set.begin();
  for (Index r = 0; r < n_rows; ++r) {
    if (it != set.end() && *it == r) {
      ++it;
    } else {
      outside.push_back(r);
    }
  }
  const Index need = target - set.size();
  for (Index i = 0; i < need; ++i) {
    std::swap(outside[i], outside[i + rng.below(outside.size() - i)]);
  }
  set.insert(set.end(), outside.begin(), outside.begin() + static_cast<std::ptrdiff_t>(need));
  std::sort(set.begin(), set.end());
}

}  // namespace

std::vector<IndexSet> layer_samples(const SamplingPlan& plan, Index layer) {
  plan.validate();
  if (layer >= plan.layers) {
    throw SamplingError(fmt::format("sampling: layer {} out of range ({} layers)", layer,
                                    plan.layers));
  }
  std::vector<IndexSet> sets(plan.trees);
  switch (plan.mode) {
    case Mode::kFull:
      for (auto& s : sets) {
        s.resize(plan.n_rows);
        std::iota(s.begin(), s.end(), Index{0});
      }
      break;
    case Mode::kBootstrap:
      for (Index t = 0; t < plan.trees; ++t) {
        Rng rng = derive_rng(plan.seed, layer, t);
        sets[t].resize(plan.n_rows);
        for (auto& r : sets[t]) r = rng.below(plan.n_rows);
      }
      break;
    case Mode::kDynamic: {
      sets = partition_rows(plan);
      const auto n = static_cast<double>(plan.n_rows);
      for (Index l = 1; l <= layer; ++l) {
        // The 1e-9 absorbs rounding in the fraction (0.2 + 0.7 > 0.9 in doubles).
        const auto target = std::min(
            plan.n_rows, static_cast<Index>(std::ceil(dynamic_fraction(plan, l) * n - 1e-9)));
        for (Index t = 0; t < plan.trees; ++t) {
          Rng rng = derive_rng(plan.seed, l, t);
          grow(sets[t], plan.n_rows, target, rng);
        }
      }
      break;
    }
  }
  return sets;
}

std::uint64_t hash_index_set(const IndexSet& set) {
  // Commutative combination of per-element mixes, plus the size.
  std::uint64_t sum = 0;
  std::uint64_t xr = 0;
  for (Index r : set) {
    const std::uint64_t h = mix64(r);
    sum += h;
    xr ^= mix64(h);
  }
  return mix64(sum ^ mix64(xr + set.size()));
}

}  // namespace dgbf::sampling
