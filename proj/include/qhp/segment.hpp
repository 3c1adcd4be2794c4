#pragma once

// Prototype-to-query matching, mask prediction, losses, and IoU metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "qhp/core.hpp"
#include "qhp/hpg.hpp"

namespace qhp {

inline constexpr double kDefaultLambda = 0.1;

/// n x (C+1) per-point class scores, row-major.
struct ClassLogits {
  std::size_t points = 0;
  std::size_t classes = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t c) const { return values[i * classes + c]; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * classes, classes}; }
};

/// logit(i, c) = max cosine between point i and the prototypes of class c,
/// divided by tau_seg.
inline ClassLogits class_logits(const FeatureMatrix& query, const PrototypeSet& protos,
                                int num_classes, double tau_seg) {
  if (!(tau_seg > 0.0)) throw Error("tau_seg must be positive");
  if (query.dim() != protos.features.dim()) throw Error("dimension mismatch between query and prototypes");
  for (ClassId c = 0; c < num_classes; ++c) {
    if (protos.count(c) == 0) throw Error("missing class " + std::to_string(c) + " in prototype set");
  }
  ClassLogits out;
  out.points = query.rows();
  out.classes = static_cast<std::size_t>(num_classes);
  out.values.assign(out.points * out.classes, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < query.rows(); ++i) {
    const auto q = query.row(i);
    double* row = out.values.data() + i * out.classes;
    for (std::size_t p = 0; p < protos.size(); ++p) {
      const auto c = static_cast<std::size_t>(protos.labels[p]);
      if (c >= out.classes) continue;
      row[c] = std::max(row[c], dot(q, protos.features.row(p)));
    }
    for (std::size_t c = 0; c < out.classes; ++c) row[c] /= tau_seg;
  }
  return out;
}

/// Row-wise argmax; ties go to the lower class id.
inline ClassMask predict_mask(const ClassLogits& logits) {
  ClassMask m;
  m.labels.resize(logits.points);
  for (std::size_t i = 0; i < logits.points; ++i) {
    const auto r = logits.row(i);
    m.labels[i] = static_cast<ClassId>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return m;
}

/// Mean over points of -log softmax(logits)[gt].
inline double ce_loss(const ClassLogits& logits, const ClassMask& gt) {
  if (gt.size() != logits.points) throw Error("logits and ground truth lengths differ");
  if (logits.points == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < logits.points; ++i) {
    const auto r = logits.row(i);
    const auto label = static_cast<std::size_t>(gt.labels[i]);
    if (label >= logits.classes) throw Error("ground-truth label out of range");
    const double m = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double v : r) s += std::exp(v - m);
    total += std::log(s) + m - r[label];
  }
  return total / static_cast<double>(logits.points);
}

inline double total_loss(double ce, double pc, double lambda = kDefaultLambda) {
  return ce + lambda * pc;
}

struct IouReport {
  std::vector<std::optional<double>> per_class;
  double miou = 0.0;
};

/// Per-class IoU; classes absent from both pred and gt are undefined and
/// excluded from the mean.
inline IouReport miou(const ClassMask& pred, const ClassMask& gt, int num_classes) {
  if (pred.size() != gt.size()) throw Error("prediction and ground truth lengths differ");
  const auto nc = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> inter(nc, 0), uni(nc, 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto p = static_cast<std::size_t>(pred.labels[i]);
    const auto g = static_cast<std::size_t>(gt.labels[i]);
    if (p >= nc || g >= nc) throw Error("label out of range for miou");
    if (p == g) {
      ++inter[p];
      ++uni[p];
    } else {
      ++uni[p];
      ++uni[g];
    }
  }
  IouReport r;
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    if (uni[c] == 0) {
      r.per_class.emplace_back();
      continue;
    }
    const double iou = static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    r.per_class.emplace_back(iou);
    sum += iou;
    ++defined;
  }
  r.miou = defined == 0 ? 0.0 : sum / static_cast<double>(defined);
  return r;
}

}  // namespace qhp
