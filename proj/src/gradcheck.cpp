// SPDX-License-Identifier: Apache-2.0
#include "sgn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace sgn {

namespace {

double evaluate(const LossBuilder& loss) {
  Tape<double> tape(false);
  const double value = loss(tape).value().item();
  if (!std::isfinite(value)) throw NumericError("gradcheck: objective is not finite");
  return value;
}

}  // namespace

GradcheckResult gradcheck(const LossBuilder& loss, std::span<Tensor<double>* const> params,
                          const GradcheckOptions& options) {
  if (!(options.epsilon > 0.0 && options.epsilon <= 1e-2)) {
    throw ContractError("gradcheck: epsilon must lie in (0, 1e-2]");
  }
  for (Tensor<double>* p : params) {
    p->set_requires_grad(true);
    p->zero_grad();
  }
  {
    Tape<double> tape;
    Var<double> out = loss(tape);
    if (!std::isfinite(out.value().item())) throw NumericError("gradcheck: objective is not finite");
    tape.backward(out);
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p]->size(); ++i) coords.emplace_back(p, i);
  }
  if (options.max_coordinates != 0 && coords.size() > options.max_coordinates) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradcheckResult result;
  for (auto [p, i] : coords) {
    Tensor<double>& param = *params[p];
    const double saved = param[i];
    param[i] = saved + options.epsilon;
    const double up = evaluate(loss);
    param[i] = saved - options.epsilon;
    const double down = evaluate(loss);
    param[i] = saved;
    const double numeric = (up - down) / (2.0 * options.epsilon);
    const double analytic = param.grad()[i];
    const double abs_err = std::abs(analytic - numeric);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.relative_floor});
    result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
    result.max_relative_error = std::max(result.max_relative_error, abs_err / denom);
    ++result.coordinates;
  }
  return result;
}

}  // namespace sgn
