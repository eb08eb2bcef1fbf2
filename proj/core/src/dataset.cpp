#include "hops/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hops/error.hpp"
#include "hops/random.hpp"

namespace hops {

void validate_labels(const LabelVector& labels, std::size_t num_classes) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      raise(Errc::InvalidParam, "label " + std::to_string(labels[i]) + " at instance " +
                                    std::to_string(i) + " is not below C=" + std::to_string(num_classes));
    }
  }
}

EmbeddingSet EmbeddingSet::from_rows(const Matrix& rows) {
  return from_float(to_float(normalize_rows(rows)));
}

EmbeddingSet EmbeddingSet::from_float(MatrixF rows) {
  if (rows.rows() < 1) raise(Errc::InvalidParam, "embedding set needs n >= 1");
  if (rows.cols() < 2) raise(Errc::InvalidParam, "embedding set needs d >= 2");
  return EmbeddingSet(std::move(rows));
}

std::vector<double> EmbeddingSet::row(std::size_t i) const {
  auto r = values_.row(i);
  return {r.begin(), r.end()};
}

CandidateMatrix::CandidateMatrix(std::size_t rows, std::size_t num_classes)
    : rows_(rows), classes_(num_classes), bits_(rows * num_classes, 0) {}

std::size_t CandidateMatrix::row_size(std::size_t i) const noexcept {
  auto r = row(i);
  return static_cast<std::size_t>(std::count(r.begin(), r.end(), std::uint8_t{1}));
}

std::vector<ClassId> CandidateMatrix::members(std::size_t i) const {
  std::vector<ClassId> out;
  for (ClassId c = 0; c < classes_; ++c) {
    if (contains(i, c)) out.push_back(c);
  }
  return out;
}

CandidateMatrix CandidateMatrix::select_rows(std::span<const std::size_t> indices) const {
  CandidateMatrix out(indices.size(), classes_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    auto src = row(indices[k]);
    std::copy(src.begin(), src.end(), out.bits_.begin() + static_cast<std::ptrdiff_t>(k * classes_));
  }
  return out;
}

void DatasetBundle::validate() const {
  const std::size_t count = n();
  if (num_classes < 1) raise(Errc::DimensionMismatch, "bundle has no classes");
  if (labels) {
    if (labels->size() != count) raise(Errc::DimensionMismatch, "labels length differs from n");
    validate_labels(*labels, num_classes);
  }
  if (candidates) {
    if (candidates->rows() != count || candidates->num_classes() != num_classes) {
      raise(Errc::DimensionMismatch, "candidate matrix shape differs from n x C");
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (candidates->row_size(i) == 0) raise(Errc::EmptyRow, "candidate row " + std::to_string(i) + " is empty");
    }
  }
  if (class_anchors) {
    if (class_anchors->rows() != num_classes || class_anchors->cols() != d()) {
      raise(Errc::DimensionMismatch, "class anchors shape differs from C x d");
    }
    for (std::size_t j = 0; j < num_classes; ++j) {
      double s = 0.0;
      for (float v : class_anchors->row(j)) s += static_cast<double>(v) * v;
      if (std::abs(std::sqrt(s) - 1.0) > 1e-6) {
        raise(Errc::InvalidParam, "class anchor " + std::to_string(j) + " is not unit norm");
      }
    }
  }
  if (class_names && class_names->size() != num_classes) {
    raise(Errc::DimensionMismatch, "class names count differs from C");
  }
}

DatasetBundle DatasetBundle::select(std::span<const std::size_t> indices) const {
  DatasetBundle out;
  MatrixF rows(indices.size(), d());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    auto src = embeddings.values().row(indices[k]);
    std::copy(src.begin(), src.end(), rows.row(k).begin());
  }
  out.embeddings = EmbeddingSet::from_float(std::move(rows));
  out.num_classes = num_classes;
  if (labels) {
    LabelVector l;
    l.reserve(indices.size());
    for (std::size_t i : indices) l.push_back((*labels)[i]);
    out.labels = std::move(l);
  }
  if (candidates) out.candidates = candidates->select_rows(indices);
  out.class_anchors = class_anchors;
  out.class_names = class_names;
  return out;
}

std::vector<std::vector<std::size_t>> indices_by_class(const DatasetBundle& bundle) {
  if (!bundle.labels) raise(Errc::MissingLabels, "bundle has no labels");
  std::vector<std::vector<std::size_t>> groups(bundle.num_classes);
  for (std::size_t i = 0; i < bundle.labels->size(); ++i) groups[(*bundle.labels)[i]].push_back(i);
  return groups;
}

AffinityMatrix cosine_affinity(const EmbeddingSet& e) {
  const Matrix x = e.as_double();
  const std::size_t n = x.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(norm2(x.row(i)) - 1.0) > 1e-5) {
      raise(Errc::InvalidParam, "row " + std::to_string(i) + " is not unit norm");
    }
  }
  AffinityMatrix a{Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(x.row(i), x.row(j));
      a.values(i, j) = v;
      a.values(j, i) = v;
    }
  }
  return a;
}

DatasetBundle sample_few_shot(const DatasetBundle& bundle, std::size_t shots, std::uint64_t seed) {
  auto groups = indices_by_class(bundle);
  Rng rng = make_rng(seed, 0x5a4f);
  std::vector<std::size_t> chosen;
  chosen.reserve(shots * groups.size());
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto& g = groups[c];
    if (g.size() < shots) {
      raise(Errc::InsufficientClassCount, "class " + std::to_string(c) + " has " + std::to_string(g.size()) +
                                              " instances, need " + std::to_string(shots));
    }
    std::shuffle(g.begin(), g.end(), rng);
    chosen.insert(chosen.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(shots));
  }
  std::sort(chosen.begin(), chosen.end());
  return bundle.select(chosen);
}

namespace {

std::vector<double> gaussian_vector(std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(d);
  for (double& x : v) x = normal(rng);
  return v;
}

void normalize_in_place(std::span<double> v) {
  const double n = norm2(v);
  if (!(n >= 1e-12)) raise(Errc::ZeroRow, "degenerate direction in synthetic generator");
  for (double& x : v) x /= n;
}

struct Mixture {
  Matrix means;
  Matrix anchors;
};

Mixture draw_mixture(const SynthParams& p) {
  Rng rng = make_rng(p.seed, 1);
  Mixture m{Matrix(p.classes, p.dim), Matrix(p.classes, p.dim)};
  auto base = gaussian_vector(p.dim, rng);
  normalize_in_place(base);
  for (std::size_t j = 0; j < p.classes; ++j) {
    auto u = gaussian_vector(p.dim, rng);
    normalize_in_place(u);
    auto mean = m.means.row(j);
    for (std::size_t k = 0; k < p.dim; ++k) mean[k] = base[k] + p.separation * u[k];
    normalize_in_place(mean);
  }
  Rng anchor_rng = make_rng(p.seed, 2);
  for (std::size_t j = 0; j < p.classes; ++j) {
    auto a = m.anchors.row(j);
    auto mean = m.means.row(j);
    std::copy(mean.begin(), mean.end(), a.begin());
    if (p.anchor_noise > 0.0) {
      auto g = gaussian_vector(p.dim, anchor_rng);
      for (std::size_t k = 0; k < p.dim; ++k) a[k] += p.anchor_noise * g[k];
      normalize_in_place(a);
    }
  }
  return m;
}

DatasetBundle draw_instances(const SynthParams& p, const Mixture& mix, std::size_t per_class,
                             std::uint64_t stream) {
  Rng rng = make_rng(p.seed, stream);
  Matrix rows(p.classes * per_class, p.dim);
  LabelVector labels;
  labels.reserve(rows.rows());
  for (std::size_t j = 0; j < p.classes; ++j) {
    auto mean = mix.means.row(j);
    for (std::size_t s = 0; s < per_class; ++s) {
      const std::size_t i = j * per_class + s;
      auto r = rows.row(i);
      auto g = gaussian_vector(p.dim, rng);
      for (std::size_t k = 0; k < p.dim; ++k) r[k] = mean[k] + p.noise * g[k];
      labels.push_back(static_cast<ClassId>(j));
    }
  }
  DatasetBundle b;
  b.embeddings = EmbeddingSet::from_rows(rows);
  b.num_classes = p.classes;
  b.labels = std::move(labels);
  b.class_anchors = to_float(mix.anchors);
  return b;
}

void check_params(const SynthParams& p) {
  if (p.classes < 2) raise(Errc::InvalidParam, "synthetic mixture needs C >= 2");
  if (p.dim < 2) raise(Errc::InvalidParam, "synthetic mixture needs d >= 2");
  if (p.per_class < 1) raise(Errc::InvalidParam, "synthetic mixture needs per_class >= 1");
  if (!(p.separation > 0.0)) raise(Errc::InvalidParam, "separation must be positive");
  if (!(p.noise >= 0.0) || !(p.anchor_noise >= 0.0)) raise(Errc::InvalidParam, "noise must be non-negative");
}

}  // namespace

DatasetBundle synth_gaussian_mixture(const SynthParams& params) {
  check_params(params);
  return draw_instances(params, draw_mixture(params), params.per_class, 3);
}

std::pair<DatasetBundle, DatasetBundle> synth_gaussian_mixture_split(const SynthParams& params,
                                                                     std::size_t test_per_class) {
  check_params(params);
  if (test_per_class < 1) raise(Errc::InvalidParam, "test split needs at least one instance per class");
  const Mixture mix = draw_mixture(params);
  return {draw_instances(params, mix, params.per_class, 3), draw_instances(params, mix, test_per_class, 4)};
}

}  // namespace hops
