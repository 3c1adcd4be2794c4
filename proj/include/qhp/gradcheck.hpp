#pragma once

// Central finite-difference check of the contrastive loss gradients on
// random instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qhp/core.hpp"
#include "qhp/pdo.hpp"

namespace qhp {

struct PcLossInstance {
  FeatureMatrix anchors;
  std::vector<ClassId> anchor_labels;
  std::vector<double> weights;
  FeatureMatrix prototypes;
  std::vector<ClassId> prototype_labels;
  double tau = 0.1;
};

/// |A| <= 20, m <= 30, D <= 8, tau in {0.1, 1.0}; unit rows; every anchor
/// label owns at least one prototype; weights in (0.05, 1].
inline PcLossInstance random_pc_instance(SeededRng& rng) {
  PcLossInstance inst;
  const std::size_t d = 2 + rng.below(7);
  const int classes = 1 + static_cast<int>(rng.below(4));
  const std::size_t m = static_cast<std::size_t>(classes) + rng.below(31 - static_cast<std::size_t>(classes));
  const std::size_t na = 1 + rng.below(20);
  inst.tau = rng.below(2) == 0 ? 0.1 : 1.0;

  auto unit_rows = [&](std::size_t n) {
    std::vector<double> data(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      double norm = 0.0;
      while (norm < 1e-6) {
        for (std::size_t t = 0; t < d; ++t) data[i * d + t] = rng.normal();
        norm = FeatureMatrix::norm(std::span<const double>(data.data() + i * d, d));
      }
      for (std::size_t t = 0; t < d; ++t) data[i * d + t] /= norm;
    }
    return FeatureMatrix(n, d, std::move(data), true);
  };
  inst.prototypes = unit_rows(m);
  for (std::size_t p = 0; p < m; ++p) {
    inst.prototype_labels.push_back(p < static_cast<std::size_t>(classes)
                                        ? static_cast<ClassId>(p)
                                        : static_cast<ClassId>(rng.below(static_cast<std::size_t>(classes))));
  }
  inst.anchors = unit_rows(na);
  for (std::size_t a = 0; a < na; ++a) {
    inst.anchor_labels.push_back(static_cast<ClassId>(rng.below(static_cast<std::size_t>(classes))));
    inst.weights.push_back(0.05 + 0.95 * rng.uniform());
  }
  return inst;
}

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::uint64_t worst_case = 0;  // stream id of the worst instance
  std::size_t cases = 0;
};

/// ||analytic - numeric|| / max(||analytic||, ||numeric||) over the joint
/// anchor+prototype gradient; 0 when both vanish.
inline double pc_loss_gradient_error(const PcLossInstance& inst, double h = 1e-5,
                                     double corrupt = 0.0) {
  PcLossResult analytic = pc_loss(inst.anchors, inst.anchor_labels, inst.weights, inst.prototypes,
                                  inst.prototype_labels, inst.tau);
  if (corrupt != 0.0 && !analytic.grad_anchors.empty()) analytic.grad_anchors[0] += corrupt;

  auto loss_at = [&](bool anchor_side, std::size_t flat, double delta) {
    const FeatureMatrix& src = anchor_side ? inst.anchors : inst.prototypes;
    std::vector<double> data = src.data();
    data[flat] += delta;
    const FeatureMatrix moved(src.rows(), src.dim(), std::move(data), false);
    return anchor_side ? pc_loss(moved, inst.anchor_labels, inst.weights, inst.prototypes,
                                 inst.prototype_labels, inst.tau).loss
                       : pc_loss(inst.anchors, inst.anchor_labels, inst.weights, moved,
                                 inst.prototype_labels, inst.tau).loss;
  };

  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  auto accumulate = [&](bool anchor_side, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double numeric = (loss_at(anchor_side, i, h) - loss_at(anchor_side, i, -h)) / (2.0 * h);
      diff2 += (grad[i] - numeric) * (grad[i] - numeric);
      a2 += grad[i] * grad[i];
      n2 += numeric * numeric;
    }
  };
  accumulate(true, analytic.grad_anchors);
  accumulate(false, analytic.grad_prototypes);
  const double scale = std::sqrt(std::max(a2, n2));
  if (scale < 1e-12) return std::sqrt(diff2);
  return std::sqrt(diff2) / scale;
}

/// Instance i uses stream (seed, i).
inline GradcheckResult gradcheck_pc_loss(std::uint64_t seed, std::size_t cases, double corrupt = 0.0) {
  GradcheckResult r;
  r.cases = cases;
  for (std::size_t i = 0; i < cases; ++i) {
    SeededRng rng(seed, i);
    const double err = pc_loss_gradient_error(random_pc_instance(rng), 1e-5, corrupt);
    if (err > r.max_relative_error || i == 0) {
      r.max_relative_error = err;
      r.worst_case = i;
    }
  }
  return r;
}

}  // namespace qhp
