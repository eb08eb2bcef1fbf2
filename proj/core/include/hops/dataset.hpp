#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hops/matrix.hpp"

namespace hops {

using ClassId = std::uint32_t;

/// Ground-truth class index per instance.
using LabelVector = std::vector<ClassId>;

/// Throws Errc::InvalidParam if any label is >= num_classes.
void validate_labels(const LabelVector& labels, std::size_t num_classes);

/// Frozen image features, one row per instance. Values are held as 32-bit
/// floats (the on-disk precision); arithmetic widens to double.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  /// Normalizes each row (in double) and stores the result as float.
  static EmbeddingSet from_rows(const Matrix& rows);
  /// Stores rows verbatim. Requires n >= 1 and d >= 2.
  static EmbeddingSet from_float(MatrixF rows);

  std::size_t n() const noexcept { return values_.rows(); }
  std::size_t d() const noexcept { return values_.cols(); }
  const MatrixF& values() const noexcept { return values_; }
  double at(std::size_t i, std::size_t j) const noexcept { return values_(i, j); }
  std::vector<double> row(std::size_t i) const;
  Matrix as_double() const { return to_double(values_); }

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  explicit EmbeddingSet(MatrixF v) : values_(std::move(v)) {}
  MatrixF values_;
};

/// n x C binary indicator of candidate label sets.
class CandidateMatrix {
 public:
  CandidateMatrix() = default;
  CandidateMatrix(std::size_t rows, std::size_t num_classes);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t num_classes() const noexcept { return classes_; }

  bool contains(std::size_t i, ClassId c) const noexcept { return bits_[i * classes_ + c] != 0; }
  void set(std::size_t i, ClassId c, bool on = true) noexcept { bits_[i * classes_ + c] = on ? 1 : 0; }
  std::span<const std::uint8_t> row(std::size_t i) const noexcept {
    return {bits_.data() + i * classes_, classes_};
  }

  std::size_t row_size(std::size_t i) const noexcept;
  /// Members of row i in ascending class order.
  std::vector<ClassId> members(std::size_t i) const;

  CandidateMatrix select_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const CandidateMatrix&, const CandidateMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t classes_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Pairwise cosine similarities between instances.
struct AffinityMatrix {
  Matrix values;

  std::size_t size() const noexcept { return values.rows(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values(i, j); }
};

struct DatasetBundle {
  EmbeddingSet embeddings;
  std::size_t num_classes = 0;
  std::optional<LabelVector> labels;
  std::optional<CandidateMatrix> candidates;
  /// C x d unit-norm class-side vectors.
  std::optional<MatrixF> class_anchors;
  std::optional<std::vector<std::string>> class_names;

  std::size_t n() const noexcept { return embeddings.n(); }
  std::size_t d() const noexcept { return embeddings.d(); }

  /// Dimensional consistency across all present components.
  void validate() const;

  /// Instances at `indices`, in that order, with every per-instance field.
  DatasetBundle select(std::span<const std::size_t> indices) const;

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

/// Instance indices grouped by ground-truth class. Requires labels.
std::vector<std::vector<std::size_t>> indices_by_class(const DatasetBundle& bundle);

/// A[i][j] = <row_i, row_j>. Rows must be unit norm (1e-5).
AffinityMatrix cosine_affinity(const EmbeddingSet& e);

/// Class-balanced subsample: exactly `shots` instances per class, returned
/// in ascending original-index order. Pure function of its arguments.
DatasetBundle sample_few_shot(const DatasetBundle& bundle, std::size_t shots, std::uint64_t seed);

struct SynthParams {
  std::size_t classes = 10;
  std::size_t dim = 64;
  std::size_t per_class = 16;
  /// Larger values spread the class mean directions apart; pairwise mean
  /// cosine is roughly 1 / (1 + separation^2).
  double separation = 1.0;
  /// Per-coordinate standard deviation of the isotropic instance noise.
  double noise = 0.1;
  /// Per-coordinate perturbation of the emitted class anchors away from the
  /// true means. Zero makes the anchors the mixture means.
  double anchor_noise = 0.0;
  std::uint64_t seed = 0;
};

/// Gaussian mixture on the unit sphere, instances in class-major order.
DatasetBundle synth_gaussian_mixture(const SynthParams& params);

/// Same mixture (identical means, anchors and training draws) plus an
/// independent held-out draw with `test_per_class` instances per class.
std::pair<DatasetBundle, DatasetBundle> synth_gaussian_mixture_split(const SynthParams& params,
                                                                     std::size_t test_per_class);

}  // namespace hops
