#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "modviz/models/models.hpp"
#include "modviz/signal/dataset.hpp"

namespace modviz::train {

/// Dense square matrix of reals, row-major.
struct RealMatrix {
  std::size_t n = 0;
  std::vector<double> v;

  RealMatrix() = default;
  explicit RealMatrix(std::size_t n_) : n(n_), v(n_ * n_, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return v[r * n + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * n + c]; }
  double row_sum(std::size_t r) const;
};

/// Rows are true labels, columns predictions.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t n) : n_(n), counts_(n * n, 0) {}

  void add(int truth, int predicted);

  std::size_t size() const { return n_; }
  std::int64_t count(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }
  std::int64_t row_total(std::size_t truth) const;
  std::int64_t total() const;
  double accuracy() const;
  /// Rows divided by their totals; a row without samples stays all-zero.
  RealMatrix row_normalized() const;
  /// True for rows that received no samples.
  std::vector<bool> empty_rows() const;
  /// Labels with at least one sample (as truth or prediction).
  std::vector<std::size_t> active_labels() const;
  /// Restriction to the given label indices, in that order.
  ConfusionMatrix restrict(std::span<const std::size_t> labels) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::int64_t> counts_;
};

/// a - b of two row-normalized matrices.
RealMatrix relative_confusion(const RealMatrix& a, const RealMatrix& b);

struct SnrCell {
  std::int64_t correct = 0;
  std::int64_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct EvalResult {
  double accuracy = 0.0;
  std::int64_t count = 0;
  ConfusionMatrix confusion;
  std::map<int, SnrCell> per_snr;
};

/// Maps a batch of samples to predicted labels.
using Predictor = std::function<std::vector<int>(std::span<const signal::RadioSample* const>)>;

/// Accuracy, confusion and per-SNR table over one split. Throws
/// InvalidArgument when the split is empty.
EvalResult evaluate(const signal::Dataset& ds, signal::Split split, const Predictor& predictor,
                    std::size_t n_y, std::size_t batch = 256);

template <typename T>
Predictor model_predictor(const models::Classifier<T>& model);

}  // namespace modviz::train
