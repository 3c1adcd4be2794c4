#pragma once

// Prototype generation: point-to-seed clustering around hub points, the
// farthest-point-sampling baseline, and hub/FPS ratio mixing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <vector>

#include "qhp/core.hpp"
#include "qhp/hpm.hpp"

namespace qhp {

enum class SeedKind { kHub, kFps, kMean };

struct Provenance {
  SeedKind kind = SeedKind::kMean;
  std::size_t index = 0;  // support row of the seed

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// m unit prototypes with class labels; grouped by ascending class.
struct PrototypeSet {
  FeatureMatrix features;
  std::vector<ClassId> labels;
  std::vector<Provenance> provenance;

  std::size_t size() const { return labels.size(); }

  std::size_t count(ClassId c) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c));
  }

  /// Ascending list of labels that own at least one prototype.
  std::vector<ClassId> classes() const {
    std::vector<ClassId> out(labels);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  friend bool operator==(const PrototypeSet&, const PrototypeSet&) = default;
};

struct ClusterResult {
  PrototypeSet prototypes;
  /// assignment[i] = position (within prototypes) of the cluster that support
  /// row i joined; -1 for rows of classes without seeds.
  std::vector<std::ptrdiff_t> assignment;
};

/// Single-pass point-to-seed clustering. seeds[c] are support rows labeled c;
/// every row labeled c joins the seed with the highest cosine (ties to the
/// lower seed row). Each prototype is the renormalized mean of its cluster, or
/// the seed itself when the cluster is empty.
inline ClusterResult cluster_around_seeds(const FeatureMatrix& features, const ClassMask& mask,
                                          const std::vector<std::vector<std::size_t>>& seeds,
                                          SeedKind kind) {
  if (mask.size() != features.rows()) throw Error("mask length does not match features");
  const std::size_t d = features.dim();

  ClusterResult out;
  out.assignment.assign(features.rows(), -1);
  std::vector<double> proto_data;
  for (std::size_t c = 0; c < seeds.size(); ++c) {
    const auto& seed_rows = seeds[c];
    const auto cls = static_cast<ClassId>(c);
    const auto members = mask.indices_of(cls);
    if (seed_rows.empty()) {
      if (!members.empty()) throw Error("empty seed set for present class " + std::to_string(c));
      continue;
    }
    for (std::size_t s : seed_rows) {
      if (s >= features.rows() || mask.labels[s] != cls) {
        throw Error("seed row " + std::to_string(s) + " is not a point of class " +
                    std::to_string(c));
      }
    }

    const std::size_t base = out.prototypes.labels.size();
    std::vector<double> sums(seed_rows.size() * d, 0.0);
    std::vector<std::size_t> sizes(seed_rows.size(), 0);
    for (std::size_t i : members) {
      std::size_t best = 0;
      double best_sim = -2.0;
      for (std::size_t j = 0; j < seed_rows.size(); ++j) {
        const double sim = dot(features.row(i), features.row(seed_rows[j]));
        if (sim > best_sim || (sim == best_sim && seed_rows[j] < seed_rows[best])) {
          best = j;
          best_sim = sim;
        }
      }
      out.assignment[i] = static_cast<std::ptrdiff_t>(base + best);
      ++sizes[best];
      const auto row = features.row(i);
      for (std::size_t t = 0; t < d; ++t) sums[best * d + t] += row[t];
    }
    for (std::size_t j = 0; j < seed_rows.size(); ++j) {
      std::span<double> p(sums.data() + j * d, d);
      const double n = FeatureMatrix::norm(p);
      if (sizes[j] == 0 || n < 1e-12) {
        const auto seed = features.row(seed_rows[j]);
        const double sn = FeatureMatrix::norm(seed);
        for (std::size_t t = 0; t < d; ++t) p[t] = seed[t] / sn;
      } else {
        for (double& x : p) x /= n;
      }
      proto_data.insert(proto_data.end(), p.begin(), p.end());
      out.prototypes.labels.push_back(cls);
      out.prototypes.provenance.push_back({kind, seed_rows[j]});
    }
  }
  if (out.prototypes.labels.empty()) throw Error("no prototypes produced");
  out.prototypes.features =
      FeatureMatrix(out.prototypes.labels.size(), d, std::move(proto_data), true);
  return out;
}

/// Prototypes clustered around per-class hub sets (hubs[c] for class c).
inline PrototypeSet cluster_hub_prototypes(const FeatureMatrix& support_features,
                                           const ClassMask& mask, const std::vector<HubSet>& hubs) {
  std::vector<std::vector<std::size_t>> seeds;
  for (std::size_t c = 0; c < hubs.size(); ++c) {
    if (hubs[c].indices.empty() && mask.count(static_cast<ClassId>(c)) > 0) {
      throw Error("empty hub set for present class " + std::to_string(c));
    }
    seeds.push_back(hubs[c].indices);
  }
  return cluster_around_seeds(support_features, mask, seeds, SeedKind::kHub).prototypes;
}

/// Greedy farthest-point sampling under cosine distance within one class.
/// The first seed is the point farthest from the class centroid.
inline std::vector<std::size_t> fps_seeds(const FeatureMatrix& features,
                                          std::span<const std::size_t> members, int eta) {
  if (eta < 1) throw Error("eta must be at least 1");
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(eta), members.size());
  std::vector<std::size_t> seeds;
  if (take == 0) return seeds;

  const std::size_t d = features.dim();
  std::vector<double> centroid(d, 0.0);
  for (std::size_t i : members) {
    const auto r = features.row(i);
    for (std::size_t t = 0; t < d; ++t) centroid[t] += r[t];
  }
  const double cn = FeatureMatrix::norm(centroid);
  if (cn > 0.0) {
    for (double& x : centroid) x /= cn;
  }

  // min_dist starts as the distance to the centroid so the first argmax picks
  // the point farthest from it.
  std::vector<double> min_dist(members.size());
  for (std::size_t m = 0; m < members.size(); ++m) {
    min_dist[m] = 1.0 - dot(features.row(members[m]), centroid);
  }
  std::vector<bool> chosen(members.size(), false);
  for (std::size_t round = 0; round < take; ++round) {
    std::size_t best = members.size();
    for (std::size_t m = 0; m < members.size(); ++m) {
      if (chosen[m]) continue;
      if (best == members.size() || min_dist[m] > min_dist[best] ||
          (min_dist[m] == min_dist[best] && members[m] < members[best])) {
        best = m;
      }
    }
    chosen[best] = true;
    seeds.push_back(members[best]);
    const auto seed = features.row(members[best]);
    for (std::size_t m = 0; m < members.size(); ++m) {
      const double dist = 1.0 - dot(features.row(members[m]), seed);
      if (round == 0) {
        min_dist[m] = dist;
      } else {
        min_dist[m] = std::min(min_dist[m], dist);
      }
    }
  }
  return seeds;
}

/// FPS baseline: eta seeds per class (clamped to class size), then the same
/// point-to-seed clustering as the hub prototypes.
inline PrototypeSet fps_prototypes(const FeatureMatrix& support_features, const ClassMask& mask,
                                   int eta) {
  if (eta < 1) throw Error("eta must be at least 1");
  ClassId max_label = 0;
  for (ClassId l : mask.labels) max_label = std::max(max_label, l);
  std::vector<std::vector<std::size_t>> seeds;
  for (ClassId c = 0; c <= max_label; ++c) {
    const auto members = mask.indices_of(c);
    seeds.push_back(fps_seeds(support_features, members, eta));
  }
  return cluster_around_seeds(support_features, mask, seeds, SeedKind::kFps).prototypes;
}

/// Per class, round(ratio * m) prototypes sampled without replacement from the
/// hub set and the remainder from the FPS set, where m is the per-class count
/// (which both sets must share). Relative order inside each source is kept.
inline PrototypeSet mix_prototypes(const PrototypeSet& hub_set, const PrototypeSet& fps_set,
                                   double hub_ratio, SeededRng& rng) {
  if (!(hub_ratio >= 0.0 && hub_ratio <= 1.0)) throw Error("hub ratio must lie in [0, 1]");
  const auto classes = hub_set.classes();
  if (classes != fps_set.classes()) throw Error("class coverage mismatch between prototype sets");
  if (hub_set.features.dim() != fps_set.features.dim()) throw Error("dimension mismatch");

  const std::size_t d = hub_set.features.dim();
  PrototypeSet out;
  std::vector<double> data;
  auto take = [&](const PrototypeSet& from, const std::vector<std::size_t>& rows) {
    for (std::size_t r : rows) {
      const auto f = from.features.row(r);
      data.insert(data.end(), f.begin(), f.end());
      out.labels.push_back(from.labels[r]);
      out.provenance.push_back(from.provenance[r]);
    }
  };
  for (ClassId c : classes) {
    std::vector<std::size_t> hub_rows, fps_rows;
    for (std::size_t i = 0; i < hub_set.size(); ++i) {
      if (hub_set.labels[i] == c) hub_rows.push_back(i);
    }
    for (std::size_t i = 0; i < fps_set.size(); ++i) {
      if (fps_set.labels[i] == c) fps_rows.push_back(i);
    }
    if (hub_rows.size() != fps_rows.size()) {
      throw Error("class coverage mismatch: class " + std::to_string(c) + " has " +
                  std::to_string(hub_rows.size()) + " hub and " +
                  std::to_string(fps_rows.size()) + " fps prototypes");
    }
    const std::size_t m = hub_rows.size();
    const auto n_hub = std::min<std::size_t>(
        m, static_cast<std::size_t>(std::llround(hub_ratio * static_cast<double>(m))));
    std::vector<std::size_t> pick_hub, pick_fps;
    std::sample(hub_rows.begin(), hub_rows.end(), std::back_inserter(pick_hub), n_hub, rng);
    std::sample(fps_rows.begin(), fps_rows.end(), std::back_inserter(pick_fps), m - n_hub, rng);
    take(hub_set, pick_hub);
    take(fps_set, pick_fps);
  }
  out.features = FeatureMatrix(out.labels.size(), d, std::move(data), true);
  return out;
}

}  // namespace qhp
