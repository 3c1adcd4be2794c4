#pragma once

// Hub point mining: bipartite kNN graphs from center points to neighbor
// points, hubness scores, and top-eta hub selection.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "qhp/core.hpp"

namespace qhp {

inline constexpr double kDefaultEpsilon = 1e-6;

/// Directed bipartite graph; adjacency[c] lists the neighbors of center c in
/// descending similarity.
struct KnnGraph {
  int k = 0;
  std::size_t center_count = 0;
  std::size_t neighbor_count = 0;
  std::vector<std::vector<std::size_t>> adjacency;
};

/// Top-eta hubs, sorted by (score desc, index asc).
struct HubSet {
  std::vector<std::size_t> indices;
  std::vector<double> scores;
  int eta = 0;

  std::size_t size() const { return indices.size(); }
};

/// self_index[c] is the neighbor row that is the same point as center c, or
/// kNoSelf.
inline constexpr std::ptrdiff_t kNoSelf = -1;

namespace detail {

// Ordering shared by the kNN lists and hub selection: higher value first,
// ties toward the lower index.
struct DescendingThenIndex {
  std::span<const double> value;
  bool operator()(std::size_t a, std::size_t b) const {
    if (value[a] != value[b]) return value[a] > value[b];
    return a < b;
  }
};

inline void require_normalized(const FeatureMatrix& f, const char* what) {
  if (!f.normalized()) throw Error(std::string(what) + " must be unit-normalized");
}

}  // namespace detail

/// Brute-force exact kNN under cosine similarity. When self_index is
/// non-empty, each center's own neighbor row is dropped before truncation.
inline KnnGraph build_bipartite_knn(const FeatureMatrix& centers, const FeatureMatrix& neighbors,
                                    int k, std::span<const std::ptrdiff_t> self_index = {}) {
  if (k <= 0) throw Error("k must be positive");
  if (centers.dim() != neighbors.dim()) throw Error("dimension mismatch between centers and neighbors");
  if (!self_index.empty() && self_index.size() != centers.rows()) {
    throw Error("self index map must have one entry per center");
  }
  detail::require_normalized(centers, "centers");
  detail::require_normalized(neighbors, "neighbors");

  const std::size_t n = neighbors.rows();
  KnnGraph g;
  g.k = k;
  g.center_count = centers.rows();
  g.neighbor_count = n;
  g.adjacency.resize(centers.rows());

  std::vector<double> sim(n);
  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const auto center = centers.row(c);
    for (std::size_t j = 0; j < n; ++j) sim[j] = dot(center, neighbors.row(j));

    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (!self_index.empty() && self_index[c] != kNoSelf) {
      order.erase(order.begin() + self_index[c]);
    }
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      detail::DescendingThenIndex{sim});
    g.adjacency[c].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return g;
}

/// Number of adjacency lists each neighbor appears in.
inline std::vector<std::size_t> membership_counts(const KnnGraph& g) {
  std::vector<std::size_t> counts(g.neighbor_count, 0);
  for (const auto& list : g.adjacency) {
    for (std::size_t n : list) ++counts[n];
  }
  return counts;
}

/// s(n) = membership count + epsilon.
inline std::vector<double> hubness_scores(const KnnGraph& g, double epsilon = kDefaultEpsilon) {
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
  const auto counts = membership_counts(g);
  std::vector<double> s(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) s[i] = static_cast<double>(counts[i]) + epsilon;
  return s;
}

/// Top-eta among the candidate indices (all indices when candidates is empty).
inline HubSet select_top_hubs(std::span<const double> scores, int eta,
                              std::span<const std::size_t> candidates) {
  if (eta < 1) throw Error("eta must be at least 1");
  std::vector<std::size_t> order(candidates.begin(), candidates.end());
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(eta), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    detail::DescendingThenIndex{scores});
  HubSet h;
  h.eta = eta;
  h.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
  for (std::size_t i : h.indices) h.scores.push_back(scores[i]);
  return h;
}

inline HubSet select_top_hubs(std::span<const double> scores, int eta) {
  std::vector<std::size_t> all(scores.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return select_top_hubs(scores, eta, all);
}

/// Splits eta over shots: floor(eta/K) each, the remainder to the earliest
/// shots. A shot with fewer points than its share gives the shortfall to later
/// (then earlier) shots with spare points, so the total is
/// min(eta, sum(available)).
inline std::vector<std::size_t> hub_quota(int eta, std::span<const std::size_t> available) {
  const std::size_t shots = available.size();
  std::vector<std::size_t> quota(shots, 0);
  if (shots == 0) return quota;
  const auto e = static_cast<std::size_t>(eta);
  std::size_t spill = 0;
  for (std::size_t s = 0; s < shots; ++s) {
    const std::size_t want = e / shots + (s < e % shots ? 1 : 0);
    quota[s] = std::min(want, available[s]);
    spill += want - quota[s];
  }
  for (std::size_t s = 0; s < shots && spill > 0; ++s) {
    const std::size_t extra = std::min(spill, available[s] - quota[s]);
    quota[s] += extra;
    spill -= extra;
  }
  return quota;
}

/// Hubness over a precomputed score vector, then per-class top-eta selection
/// split across shots. Result index c holds the hubs of class c (0 = background),
/// as indices into the flattened support.
inline std::vector<HubSet> select_class_hubs(std::span<const double> scores, const FlatSupport& s,
                                             int num_classes, int n_shot, int eta) {
  if (eta < 1) throw Error("eta must be at least 1");
  std::vector<HubSet> out;
  for (ClassId c = 0; c < num_classes; ++c) {
    std::vector<std::vector<std::size_t>> pools(static_cast<std::size_t>(n_shot));
    for (std::size_t i = 0; i < s.mask.size(); ++i) {
      if (s.mask.labels[i] == c) pools[static_cast<std::size_t>(s.shot[i])].push_back(i);
    }
    std::vector<std::size_t> available;
    for (const auto& p : pools) available.push_back(p.size());
    if (std::accumulate(available.begin(), available.end(), std::size_t{0}) == 0) {
      throw Error("class " + std::to_string(c) + " has no support points");
    }
    const auto quota = hub_quota(eta, available);

    HubSet merged;
    merged.eta = eta;
    for (std::size_t k = 0; k < pools.size(); ++k) {
      if (quota[k] == 0) continue;
      const HubSet part = select_top_hubs(scores, static_cast<int>(quota[k]), pools[k]);
      merged.indices.insert(merged.indices.end(), part.indices.begin(), part.indices.end());
      merged.scores.insert(merged.scores.end(), part.scores.begin(), part.scores.end());
    }
    out.push_back(std::move(merged));
  }
  return out;
}

/// Query points are the centers, all support points are the neighbors.
inline std::vector<HubSet> mine_class_hubs(const Episode& e, const FlatSupport& support,
                                           const FeatureMatrix& query, int k, int eta,
                                           double epsilon = kDefaultEpsilon) {
  const KnnGraph g = build_bipartite_knn(query, support.features, k);
  const auto scores = hubness_scores(g, epsilon);
  return select_class_hubs(scores, support, e.num_classes(), e.n_shot, eta);
}

inline std::vector<HubSet> mine_class_hubs(const Episode& e, int k, int eta,
                                           double epsilon = kDefaultEpsilon) {
  const auto validation = validate_episode(e);
  if (!validation.ok()) throw Error("invalid episode: " + validation.violations.front());
  return mine_class_hubs(e, flatten_support(e), flatten_query(e).features, k, eta, epsilon);
}

}  // namespace qhp
