#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "modviz/grad/graph.hpp"
#include "modviz/grad/ops.hpp"

namespace testing {

using modviz::grad::Shape;
using modviz::grad::Tensor;
using modviz::grad::Var;

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.span()) v = n(rng);
  return t;
}

/// Values kept at least `gap` away from zero so a central difference never
/// straddles a kink of relu or |x|.
inline Tensor<double> away_from_zero(Shape shape, std::mt19937_64& rng, double gap = 1e-2) {
  auto t = random_tensor(std::move(shape), rng);
  for (auto& v : t.span())
    if (std::abs(v) < gap) v = v < 0 ? -gap - std::abs(v) : gap + v;
  return t;
}

struct GradReport {
  double worst = 0.0;  // largest tensor-wise relative error seen
  std::string where;
};

/// Central differences of the scalar `f` with respect to every entry of each
/// input, compared with the gradient reverse mode accumulates into it.
/// Relative error per input is ||analytic - numeric|| / max(||analytic||, ||numeric||).
inline GradReport check_gradients(const std::vector<Var<double>>& inputs, const std::function<Var<double>()>& f,
                                  double step = 1e-5) {
  for (const auto& v : inputs) v.zero_grad();
  auto out = f();
  modviz::grad::backward(out);
  GradReport rep;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto& v = inputs[k];
    std::vector<double> analytic(v.grad().span().begin(), v.grad().span().end());
    auto& val = v.mutable_value();
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double keep = val[i];
      val[i] = keep + step;
      const double up = f().value()[0];
      val[i] = keep - step;
      const double down = f().value()[0];
      val[i] = keep;
      const double numeric = (up - down) / (2.0 * step);
      diff += (numeric - analytic[i]) * (numeric - analytic[i]);
      na += analytic[i] * analytic[i];
      nn += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    const double rel = (na == 0.0 && nn == 0.0) ? 0.0 : std::sqrt(diff) / denom;
    if (rel > rep.worst) {
      rep.worst = rel;
      rep.where = "input " + std::to_string(k);
    }
  }
  return rep;
}

/// Fixed weights that turn any tensor into a scalar with a non-trivial gradient.
inline Var<double> weighted_sum(const Var<double>& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return modviz::grad::sum(modviz::grad::mul(x, Var<double>::leaf(random_tensor(x.shape(), rng))));
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("modviz-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
