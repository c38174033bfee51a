#include "modviz/train/metrics.hpp"

#include <numeric>

#include "modviz/common/errors.hpp"

namespace modviz::train {

double RealMatrix::row_sum(std::size_t r) const {
  double s = 0.0;
  for (std::size_t c = 0; c < n; ++c) s += at(r, c);
  return s;
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= n_ || static_cast<std::size_t>(predicted) >= n_)
    throw InvalidArgument("confusion: label outside 0.." + std::to_string(n_ - 1));
  ++counts_[static_cast<std::size_t>(truth) * n_ + static_cast<std::size_t>(predicted)];
}

std::int64_t ConfusionMatrix::row_total(std::size_t truth) const {
  return std::accumulate(counts_.begin() + static_cast<std::ptrdiff_t>(truth * n_),
                         counts_.begin() + static_cast<std::ptrdiff_t>((truth + 1) * n_), std::int64_t{0});
}

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }

double ConfusionMatrix::accuracy() const {
  const auto t = total();
  if (t == 0) return 0.0;
  std::int64_t diag = 0;
  for (std::size_t i = 0; i < n_; ++i) diag += count(i, i);
  return static_cast<double>(diag) / static_cast<double>(t);
}

RealMatrix ConfusionMatrix::row_normalized() const {
  RealMatrix m(n_);
  for (std::size_t r = 0; r < n_; ++r) {
    const auto t = row_total(r);
    if (t == 0) continue;
    for (std::size_t c = 0; c < n_; ++c) m.at(r, c) = static_cast<double>(count(r, c)) / static_cast<double>(t);
  }
  return m;
}

std::vector<bool> ConfusionMatrix::empty_rows() const {
  std::vector<bool> out(n_);
  for (std::size_t r = 0; r < n_; ++r) out[r] = row_total(r) == 0;
  return out;
}

std::vector<std::size_t> ConfusionMatrix::active_labels() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_; ++i) {
    bool any = row_total(i) > 0;
    for (std::size_t r = 0; r < n_ && !any; ++r) any = count(r, i) > 0;
    if (any) out.push_back(i);
  }
  return out;
}

ConfusionMatrix ConfusionMatrix::restrict(std::span<const std::size_t> labels) const {
  ConfusionMatrix out(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r)
    for (std::size_t c = 0; c < labels.size(); ++c) {
      if (labels[r] >= n_ || labels[c] >= n_) throw InvalidArgument("confusion: label index out of range");
      out.counts_[r * labels.size() + c] = count(labels[r], labels[c]);
    }
  return out;
}

RealMatrix relative_confusion(const RealMatrix& a, const RealMatrix& b) {
  if (a.n != b.n || a.v.size() != b.v.size())
    throw ShapeError("relative confusion: " + std::to_string(a.n) + "x" + std::to_string(a.n) + " vs " +
                     std::to_string(b.n) + "x" + std::to_string(b.n));
  RealMatrix out(a.n);
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] - b.v[i];
  return out;
}

EvalResult evaluate(const signal::Dataset& ds, signal::Split split, const Predictor& predictor, std::size_t n_y,
                    std::size_t batch) {
  const auto idx = ds.indices(split);
  if (idx.empty()) throw InvalidArgument(std::string("evaluate: split '") + signal::split_name(split) + "' is empty");
  EvalResult r;
  r.confusion = ConfusionMatrix(n_y);
  std::vector<const signal::RadioSample*> chunk;
  for (std::size_t start = 0; start < idx.size(); start += batch) {
    chunk.clear();
    for (std::size_t k = start; k < std::min(idx.size(), start + batch); ++k) chunk.push_back(&ds.samples[idx[k]]);
    const auto pred = predictor(chunk);
    if (pred.size() != chunk.size()) throw ShapeError("predictor returned the wrong number of labels");
    for (std::size_t k = 0; k < chunk.size(); ++k) {
      r.confusion.add(chunk[k]->label, pred[k]);
      auto& cell = r.per_snr[chunk[k]->snr_db];
      ++cell.total;
      if (pred[k] == chunk[k]->label) ++cell.correct;
    }
  }
  r.count = r.confusion.total();
  r.accuracy = r.confusion.accuracy();
  return r;
}

template <typename T>
Predictor model_predictor(const models::Classifier<T>& model) {
  return [&model](std::span<const signal::RadioSample* const> batch) {
    const auto preds = models::predict(model, models::make_input<T>(batch, model.spec().input_format));
    std::vector<int> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back(p.j_star);
    return out;
  };
}

template Predictor model_predictor<float>(const models::Classifier<float>&);
template Predictor model_predictor<double>(const models::Classifier<double>&);

}  // namespace modviz::train
