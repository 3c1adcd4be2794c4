#pragma once

// Prototype distribution optimization: the global query+support association
// graph, hub purity and bad-hub selection, the purity-reweighted contrastive
// loss with analytic gradients, and a gradient-descent demo on embeddings.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "qhp/core.hpp"
#include "qhp/hpg.hpp"
#include "qhp/hpm.hpp"

namespace qhp {

struct LabeledKnnGraph {
  KnnGraph graph;
  ClassMask center_labels;
};

/// Centers are all query points followed by all support points; neighbors
/// are the support points. A support center never lists itself.
inline LabeledKnnGraph build_global_graph(const FlatSupport& support, const LabeledCloud& query,
                                          int k) {
  const FeatureMatrix centers = concat_rows({&query.features, &support.features});
  std::vector<std::ptrdiff_t> self(centers.rows(), kNoSelf);
  for (std::size_t i = 0; i < support.features.rows(); ++i) {
    self[query.features.rows() + i] = static_cast<std::ptrdiff_t>(i);
  }
  LabeledKnnGraph out;
  out.graph = build_bipartite_knn(centers, support.features, k, self);
  out.center_labels.labels = query.mask.labels;
  out.center_labels.labels.insert(out.center_labels.labels.end(), support.mask.labels.begin(),
                                  support.mask.labels.end());
  return out;
}

inline LabeledKnnGraph build_global_graph(const Episode& e, int k) {
  return build_global_graph(flatten_support(e), flatten_query(e), k);
}

struct PurityEntry {
  std::size_t index = 0;     // neighbor (support) row
  double score = 0.0;        // s(h)
  std::size_t same_class = 0;  // t(h)
  double purity = 0.0;
  bool bad = false;
};

struct PurityTable {
  std::vector<PurityEntry> entries;
  double gamma = 0.0;
  double epsilon = 0.0;

  const PurityEntry* find(std::size_t index) const {
    for (const auto& e : entries) {
      if (e.index == index) return &e;
    }
    return nullptr;
  }

  std::vector<std::size_t> bad_hubs() const {
    std::vector<std::size_t> out;
    for (const auto& e : entries) {
      if (e.bad) out.push_back(e.index);
    }
    return out;
  }
};

/// Same-class connection counts t(n) for every neighbor.
inline std::vector<std::size_t> same_class_counts(const LabeledKnnGraph& g,
                                                  const ClassMask& neighbor_labels) {
  if (neighbor_labels.size() != g.graph.neighbor_count) {
    throw Error("neighbor labels do not match the graph's neighbor count");
  }
  if (g.center_labels.size() != g.graph.center_count) {
    throw Error("center labels do not match the graph's center count");
  }
  std::vector<std::size_t> t(g.graph.neighbor_count, 0);
  for (std::size_t c = 0; c < g.graph.adjacency.size(); ++c) {
    for (std::size_t n : g.graph.adjacency[c]) {
      if (neighbor_labels.labels[n] == g.center_labels.labels[c]) ++t[n];
    }
  }
  return t;
}

/// Purity t(h)/s(h) per hub; a hub is bad when its purity is below gamma.
inline PurityTable purity_table(const LabeledKnnGraph& g, const HubSet& hubs,
                                const ClassMask& neighbor_labels, double gamma,
                                double epsilon = kDefaultEpsilon) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error("gamma must lie in (0, 1)");
  const auto s = hubness_scores(g.graph, epsilon);
  const auto t = same_class_counts(g, neighbor_labels);
  PurityTable table;
  table.gamma = gamma;
  table.epsilon = epsilon;
  for (std::size_t h : hubs.indices) {
    if (h >= g.graph.neighbor_count) throw Error("hub index out of range");
    PurityEntry e;
    e.index = h;
    e.score = s[h];
    e.same_class = t[h];
    e.purity = static_cast<double>(t[h]) / s[h];
    e.bad = e.purity < gamma;
    table.entries.push_back(e);
  }
  return table;
}

/// What an anchor is: a foreground prototype, or a support hub.
struct AnchorRef {
  enum class Kind { kPrototype, kHub };
  Kind kind = Kind::kPrototype;
  std::size_t index = 0;
};

/// w(a) = 1 - purity for bad hubs, 1 for foreground prototypes.
inline double reweight_factor(const AnchorRef& a, const PurityTable& table) {
  if (a.kind == AnchorRef::Kind::kPrototype) return 1.0;
  const PurityEntry* e = table.find(a.index);
  if (e == nullptr) throw Error("anchor hub " + std::to_string(a.index) + " is not in the purity table");
  if (!e->bad) throw Error("anchor hub " + std::to_string(a.index) + " is not a bad hub");
  return 1.0 - e->purity;
}

struct PcLossResult {
  double loss = 0.0;
  std::vector<double> grad_anchors;     // |A| x D, row-major
  std::vector<double> grad_prototypes;  // m x D, row-major
};

/// Purity-reweighted contrastive loss with similarity = dot product of the
/// given rows; weights are constants under differentiation.
///
///   loss = -1/|A| sum_a log( w_a U+_a / (w_a U+_a + U-_a) )
///   U+-_a = sum over same-label / other-label prototypes of exp(a.p / tau)
inline PcLossResult pc_loss(const FeatureMatrix& anchors, std::span<const ClassId> anchor_labels,
                            std::span<const double> weights, const FeatureMatrix& prototypes,
                            std::span<const ClassId> prototype_labels, double tau) {
  if (!(tau > 0.0)) throw Error("tau must be positive");
  const std::size_t na = anchors.rows();
  const std::size_t np = prototypes.rows();
  const std::size_t d = anchors.dim();
  if (prototypes.dim() != d) throw Error("dimension mismatch between anchors and prototypes");
  if (anchor_labels.size() != na || weights.size() != na) {
    throw Error("anchor labels and weights must have one entry per anchor");
  }
  if (prototype_labels.size() != np) throw Error("prototype labels must have one entry per prototype");

  PcLossResult r;
  r.grad_anchors.assign(na * d, 0.0);
  r.grad_prototypes.assign(np * d, 0.0);
  const double inv_count = 1.0 / static_cast<double>(na);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::vector<double> z(np);
  std::vector<double> dz(np);
  for (std::size_t a = 0; a < na; ++a) {
    const double w = weights[a];
    if (!(w > 0.0)) throw Error("anchor weight must be positive");
    const auto arow = anchors.row(a);
    double max_pos = kNegInf, max_neg = kNegInf;
    for (std::size_t p = 0; p < np; ++p) {
      z[p] = dot(arow, prototypes.row(p)) / tau;
      if (prototype_labels[p] == anchor_labels[a]) {
        max_pos = std::max(max_pos, z[p]);
      } else {
        max_neg = std::max(max_neg, z[p]);
      }
    }
    if (max_pos == kNegInf) {
      throw Error("isolated anchor class: anchor " + std::to_string(a) + " has no positive prototype");
    }
    double sum_pos = 0.0, sum_neg = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
      if (prototype_labels[p] == anchor_labels[a]) {
        sum_pos += std::exp(z[p] - max_pos);
      } else {
        sum_neg += std::exp(z[p] - max_neg);
      }
    }
    if (sum_neg == 0.0) continue;  // no negatives: loss and gradient are exactly zero

    // log(U- / (w U+)), then loss = softplus of it.
    const double log_ratio = std::log(sum_neg) + max_neg - std::log(w) - std::log(sum_pos) - max_pos;
    const double loss_a =
        log_ratio > 0.0 ? log_ratio + std::log1p(std::exp(-log_ratio)) : std::log1p(std::exp(log_ratio));
    // sigma = U- / (w U+ + U-)
    const double sigma = 1.0 / (1.0 + std::exp(-log_ratio));
    r.loss += loss_a * inv_count;

    for (std::size_t p = 0; p < np; ++p) {
      if (prototype_labels[p] == anchor_labels[a]) {
        dz[p] = -sigma * std::exp(z[p] - max_pos) / sum_pos;
      } else {
        dz[p] = sigma * std::exp(z[p] - max_neg) / sum_neg;
      }
    }
    for (std::size_t p = 0; p < np; ++p) {
      const double g = dz[p] * inv_count / tau;
      const auto prow = prototypes.row(p);
      for (std::size_t t = 0; t < d; ++t) {
        r.grad_anchors[a * d + t] += g * prow[t];
        r.grad_prototypes[p * d + t] += g * arow[t];
      }
    }
  }
  return r;
}

inline PcLossResult pc_loss(const FeatureMatrix& anchors, std::span<const ClassId> anchor_labels,
                            std::span<const double> weights, const PrototypeSet& prototypes,
                            double tau) {
  return pc_loss(anchors, anchor_labels, weights, prototypes.features, prototypes.labels, tau);
}

/// Anchors for the contrastive objective. An anchor either aliases a
/// prototype (foreground prototype anchors share its variable) or is a free
/// support hub.
struct AnchorSet {
  FeatureMatrix features;
  std::vector<ClassId> labels;
  std::vector<double> weights;
  std::vector<std::ptrdiff_t> prototype_alias;  // -1 for bad hubs
  std::vector<std::size_t> hub_index;           // support row for bad hubs

  std::size_t size() const { return labels.size(); }
  bool is_bad_hub(std::size_t a) const { return prototype_alias[a] < 0; }
};

/// Anchors = foreground prototypes (w = 1) followed by the table's bad hubs
/// (w = 1 - purity) with their support labels.
inline AnchorSet make_anchor_set(const PrototypeSet& prototypes, const FeatureMatrix& support,
                                 const ClassMask& support_labels, const PurityTable& table) {
  AnchorSet a;
  std::vector<double> data;
  for (std::size_t p = 0; p < prototypes.size(); ++p) {
    if (prototypes.labels[p] == kBackground) continue;
    const auto row = prototypes.features.row(p);
    data.insert(data.end(), row.begin(), row.end());
    a.labels.push_back(prototypes.labels[p]);
    a.weights.push_back(reweight_factor({AnchorRef::Kind::kPrototype, p}, table));
    a.prototype_alias.push_back(static_cast<std::ptrdiff_t>(p));
    a.hub_index.push_back(0);
  }
  for (std::size_t h : table.bad_hubs()) {
    const auto row = support.row(h);
    data.insert(data.end(), row.begin(), row.end());
    a.labels.push_back(support_labels.labels[h]);
    a.weights.push_back(reweight_factor({AnchorRef::Kind::kHub, h}, table));
    a.prototype_alias.push_back(-1);
    a.hub_index.push_back(h);
  }
  if (a.labels.empty()) throw Error("anchor set is empty");
  a.features = FeatureMatrix(a.labels.size(), support.dim(), std::move(data), true);
  return a;
}

struct OptimizeResult {
  AnchorSet anchors;
  PrototypeSet prototypes;
  std::vector<double> loss;            // steps + 1 entries, index 0 before any step
  std::vector<double> bad_hub_cosine;  // same length; empty entries are NaN
};

/// Mean cosine between bad-hub anchors and the normalized centroid of their
/// class's prototypes; NaN when there are no bad hubs.
inline double bad_hub_centroid_cosine(const AnchorSet& anchors, const PrototypeSet& prototypes) {
  const std::size_t d = prototypes.features.dim();
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (!anchors.is_bad_hub(a)) continue;
    std::vector<double> centroid(d, 0.0);
    for (std::size_t p = 0; p < prototypes.size(); ++p) {
      if (prototypes.labels[p] != anchors.labels[a]) continue;
      const auto row = prototypes.features.row(p);
      for (std::size_t t = 0; t < d; ++t) centroid[t] += row[t];
    }
    const double cn = FeatureMatrix::norm(centroid);
    if (cn == 0.0) continue;
    total += dot(anchors.features.row(a), centroid) / cn;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(n);
}

namespace detail {

inline void step_and_normalize(std::vector<double>& x, const std::vector<double>& g, double step,
                               std::size_t d) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= step * g[i];
  for (std::size_t r = 0; r * d < x.size(); ++r) {
    std::span<double> row(x.data() + r * d, d);
    const double n = FeatureMatrix::norm(row);
    if (n == 0.0) throw Error("embedding collapsed to zero during optimization");
    for (double& v : row) v /= n;
  }
}

}  // namespace detail

/// Gradient descent on anchors and prototypes with the contrastive gradients,
/// renormalizing rows after every step. Aliased anchors move with their
/// prototype.
inline OptimizeResult optimize_embeddings(const AnchorSet& anchors, const PrototypeSet& prototypes,
                                          double tau, int steps, double step_size) {
  if (steps <= 0) throw Error("steps must be positive");
  if (!(step_size > 0.0)) throw Error("step size must be positive");
  const std::size_t d = prototypes.features.dim();

  OptimizeResult out{anchors, prototypes, {}, {}};
  std::vector<double> a_data = anchors.features.data();
  std::vector<double> p_data = prototypes.features.data();

  auto evaluate = [&]() {
    return pc_loss(out.anchors.features, out.anchors.labels, out.anchors.weights,
                   out.prototypes.features, out.prototypes.labels, tau);
  };
  auto sync = [&]() {
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const auto alias = anchors.prototype_alias[a];
      if (alias < 0) continue;
      std::copy_n(p_data.begin() + alias * static_cast<std::ptrdiff_t>(d), d,
                  a_data.begin() + static_cast<std::ptrdiff_t>(a * d));
    }
    out.anchors.features = FeatureMatrix(anchors.size(), d, a_data, true);
    out.prototypes.features = FeatureMatrix(prototypes.size(), d, p_data, true);
  };

  PcLossResult current = evaluate();
  out.loss.push_back(current.loss);
  out.bad_hub_cosine.push_back(bad_hub_centroid_cosine(out.anchors, out.prototypes));
  for (int s = 0; s < steps; ++s) {
    std::vector<double> gp = current.grad_prototypes;
    std::vector<double> ga(a_data.size(), 0.0);
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const auto alias = anchors.prototype_alias[a];
      for (std::size_t t = 0; t < d; ++t) {
        const double g = current.grad_anchors[a * d + t];
        if (alias >= 0) {
          gp[static_cast<std::size_t>(alias) * d + t] += g;
        } else {
          ga[a * d + t] = g;
        }
      }
    }
    detail::step_and_normalize(p_data, gp, step_size, d);
    detail::step_and_normalize(a_data, ga, step_size, d);
    sync();
    current = evaluate();
    out.loss.push_back(current.loss);
    out.bad_hub_cosine.push_back(bad_hub_centroid_cosine(out.anchors, out.prototypes));
  }
  return out;
}

/// Global graph, per-class hubs on it, and their purity table.
struct PdoAnalysis {
  LabeledKnnGraph graph;
  std::vector<HubSet> class_hubs;
  PurityTable table;
};

inline PdoAnalysis analyze_hub_purity(const Episode& e, const FlatSupport& support,
                                      const LabeledCloud& query, int k, int eta, double gamma,
                                      double epsilon = kDefaultEpsilon) {
  PdoAnalysis out;
  out.graph = build_global_graph(support, query, k);
  const auto scores = hubness_scores(out.graph.graph, epsilon);
  out.class_hubs = select_class_hubs(scores, support, e.num_classes(), e.n_shot, eta);
  HubSet all;
  all.eta = eta;
  for (const auto& h : out.class_hubs) {
    all.indices.insert(all.indices.end(), h.indices.begin(), h.indices.end());
    all.scores.insert(all.scores.end(), h.scores.begin(), h.scores.end());
  }
  out.table = purity_table(out.graph, all, support.mask, gamma, epsilon);
  return out;
}

}  // namespace qhp
