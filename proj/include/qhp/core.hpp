#pragma once

// Domain types shared by every qhp module: feature matrices, class masks,
// episodes, and seeded random streams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qhp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Background is class 0 everywhere; foreground classes are 1..C.
using ClassId = int;
inline constexpr ClassId kBackground = 0;

/// n x D row-major matrix of embedded points.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<double> data,
                bool normalized = false)
      : rows_(rows), dim_(dim), data_(std::move(data)), normalized_(normalized) {
    if (rows_ == 0 || dim_ == 0) {
      throw Error("feature matrix must have at least one row and one column");
    }
    if (data_.size() != rows_ * dim_) {
      throw Error("feature matrix data size does not match rows x dim");
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw Error("feature matrix entry is not finite");
    }
    if (normalized_) {
      for (std::size_t i = 0; i < rows_; ++i) {
        if (std::abs(norm(row(i)) - 1.0) > 1e-9) {
          throw Error("row " + std::to_string(i) +
                      " is flagged normalized but is not unit length");
        }
      }
    }
  }

  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows,
                                 bool normalized = false) {
    if (rows.empty()) throw Error("feature matrix must have at least one row");
    const std::size_t dim = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * dim);
    for (const auto& r : rows) {
      if (r.size() != dim) throw Error("ragged rows in feature matrix");
      data.insert(data.end(), r.begin(), r.end());
    }
    return FeatureMatrix(rows.size(), dim, std::move(data), normalized);
  }

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  bool normalized() const { return normalized_; }
  const std::vector<double>& data() const { return data_; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }

  static double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
  bool normalized_ = false;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Per-point class labels. Binary per-class masks and their complements are
/// derived views, so a mask and its inverse can never disagree.
struct ClassMask {
  std::vector<ClassId> labels;

  std::size_t size() const { return labels.size(); }
  bool is(std::size_t i, ClassId c) const { return labels[i] == c; }

  std::vector<bool> binary(ClassId c) const {
    std::vector<bool> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == c;
    return out;
  }

  std::vector<std::size_t> indices_of(ClassId c) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) out.push_back(i);
    }
    return out;
  }

  std::size_t count(ClassId c) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c));
  }

  friend bool operator==(const ClassMask&, const ClassMask&) = default;
};

struct LabeledCloud {
  FeatureMatrix features;
  ClassMask mask;

  friend bool operator==(const LabeledCloud&, const LabeledCloud&) = default;
};

/// One C-way K-shot task. support[c-1][k] is shot k of foreground class c;
/// its mask uses labels {0, c}.
struct Episode {
  int n_way = 0;
  int n_shot = 0;
  std::vector<std::vector<LabeledCloud>> support;
  std::vector<LabeledCloud> query;

  int n_query() const { return static_cast<int>(query.size()); }
  int num_classes() const { return n_way + 1; }

  friend bool operator==(const Episode&, const Episode&) = default;
};

/// Support clouds flattened in (class, shot) order, with the shot each point
/// came from.
struct FlatSupport {
  FeatureMatrix features;
  ClassMask mask;
  std::vector<int> shot;
};

inline FeatureMatrix concat_rows(const std::vector<const FeatureMatrix*>& parts) {
  if (parts.empty()) throw Error("nothing to concatenate");
  const std::size_t dim = parts.front()->dim();
  std::size_t rows = 0;
  bool normalized = true;
  for (const auto* p : parts) {
    if (p->dim() != dim) throw Error("dimension mismatch");
    rows += p->rows();
    normalized = normalized && p->normalized();
  }
  std::vector<double> data;
  data.reserve(rows * dim);
  for (const auto* p : parts) data.insert(data.end(), p->data().begin(), p->data().end());
  return FeatureMatrix(rows, dim, std::move(data), normalized);
}

inline FlatSupport flatten_support(const Episode& e) {
  std::vector<const FeatureMatrix*> parts;
  FlatSupport out;
  for (const auto& shots : e.support) {
    for (std::size_t k = 0; k < shots.size(); ++k) {
      parts.push_back(&shots[k].features);
      out.mask.labels.insert(out.mask.labels.end(), shots[k].mask.labels.begin(),
                             shots[k].mask.labels.end());
      out.shot.insert(out.shot.end(), shots[k].mask.size(), static_cast<int>(k));
    }
  }
  out.features = concat_rows(parts);
  return out;
}

inline LabeledCloud flatten_query(const Episode& e) {
  std::vector<const FeatureMatrix*> parts;
  LabeledCloud out;
  for (const auto& q : e.query) {
    parts.push_back(&q.features);
    out.mask.labels.insert(out.mask.labels.end(), q.mask.labels.begin(), q.mask.labels.end());
  }
  out.features = concat_rows(parts);
  return out;
}

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Collects every violated episode invariant. Never throws.
inline ValidationReport validate_episode(const Episode& e) {
  ValidationReport r;
  auto add = [&r](std::string v) { r.violations.push_back(std::move(v)); };

  if (e.n_way < 1) add("n_way must be at least 1");
  if (e.n_shot < 1) add("n_shot must be at least 1");
  if (e.support.size() != static_cast<std::size_t>(std::max(e.n_way, 0))) {
    add("support has " + std::to_string(e.support.size()) + " classes, expected " +
        std::to_string(e.n_way));
  }

  std::size_t dim = 0;
  bool dim_mismatch = false;
  auto check_cloud = [&](const LabeledCloud& cloud, const std::string& where,
                         ClassId max_label) {
    if (cloud.features.rows() == 0) {
      add("empty point cloud at " + where);
      return;
    }
    if (dim == 0) {
      dim = cloud.features.dim();
    } else if (cloud.features.dim() != dim && !dim_mismatch) {
      dim_mismatch = true;
      add("dimension mismatch at " + where + ": " + std::to_string(cloud.features.dim()) +
          " vs " + std::to_string(dim));
    }
    if (cloud.mask.size() != cloud.features.rows()) {
      add("mask length mismatch at " + where);
    }
    for (ClassId l : cloud.mask.labels) {
      if (l < 0 || l > max_label) {
        add("label out of range at " + where + ": " + std::to_string(l));
        break;
      }
    }
  };

  for (std::size_t c = 0; c < e.support.size(); ++c) {
    const auto cls = static_cast<ClassId>(c + 1);
    if (e.support[c].size() != static_cast<std::size_t>(std::max(e.n_shot, 0))) {
      add("class " + std::to_string(cls) + " has " + std::to_string(e.support[c].size()) +
          " shots, expected " + std::to_string(e.n_shot));
    }
    for (std::size_t k = 0; k < e.support[c].size(); ++k) {
      const auto& cloud = e.support[c][k];
      const std::string where =
          "support class " + std::to_string(cls) + " shot " + std::to_string(k);
      check_cloud(cloud, where, e.n_way);
      for (ClassId l : cloud.mask.labels) {
        if (l != kBackground && l != cls) {
          add("support label " + std::to_string(l) + " at " + where +
              " is neither background nor the shot's class");
          break;
        }
      }
      if (cloud.mask.count(cls) == 0) add("empty foreground support at " + where);
    }
  }
  if (e.query.empty()) add("episode has no query clouds");
  for (std::size_t l = 0; l < e.query.size(); ++l) {
    check_cloud(e.query[l], "query " + std::to_string(l), e.n_way);
  }
  return r;
}

/// Divides every row by its Euclidean norm.
inline FeatureMatrix normalize_rows(const FeatureMatrix& f) {
  std::vector<double> out(f.data());
  const std::size_t d = f.dim();
  for (std::size_t i = 0; i < f.rows(); ++i) {
    const double n = FeatureMatrix::norm(f.row(i));
    if (n == 0.0) throw Error("degenerate point: row " + std::to_string(i) + " has zero norm");
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] /= n;
  }
  return FeatureMatrix(f.rows(), d, std::move(out), true);
}

/// Deterministic random stream keyed by (master_seed, stream_id).
class SeededRng {
 public:
  using result_type = std::uint64_t;

  SeededRng(std::uint64_t master_seed, std::uint64_t stream_id)
      : master_seed_(master_seed), stream_id_(stream_id), engine_(mix(master_seed, stream_id)) {}

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  std::size_t below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  /// Child stream; distinct ids give independent streams.
  SeededRng fork(std::uint64_t id) const { return SeededRng(mix(master_seed_, stream_id_), id); }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix(splitmix(a) ^ (b * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

}  // namespace qhp
