#include "spikecast/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "spikecast/errors.hpp"

namespace spikecast {

template <typename T>
bool has_custom_gradient(const BasicTensor<T>& root) {
  for (auto* node : topological_order(root)) {
    if (node->creator && node->creator->custom_gradient) return true;
  }
  return false;
}

template <typename T>
GradCheckReport<T> grad_check(const std::function<BasicTensor<T>(const BasicTensor<T>&)>& f,
                              const BasicTensor<T>& x, T h, double tol) {
  BasicTensor<T> probe(x.shape(), std::vector<T>(x.data().begin(), x.data().end()), true);
  auto loss = f(probe);
  if (loss.numel() != 1) throw ContractError("grad_check: f must return a scalar");
  if (!loss.requires_grad()) throw ContractError("grad_check: f does not depend on x");
  if (has_custom_gradient(loss)) {
    throw ContractError("grad_check: f contains a custom-gradient op; finite differences do not apply");
  }
  loss.backward();
  const std::vector<T> analytic(probe.grad().begin(), probe.grad().end());

  std::vector<T> numeric(x.numel());
  {
    NoGradGuard no_grad;
    auto values = probe.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T saved = values[i];
      values[i] = saved + h;
      const double up = static_cast<double>(f(probe).item());
      values[i] = saved - h;
      const double down = static_cast<double>(f(probe).item());
      values[i] = saved;
      numeric[i] = static_cast<T>((up - down) / (2.0 * static_cast<double>(h)));
    }
  }

  GradCheckReport<T> report;
  double scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    scale = std::max({scale, std::abs(static_cast<double>(analytic[i])),
                      std::abs(static_cast<double>(numeric[i]))});
    const double err = std::abs(static_cast<double>(analytic[i]) - static_cast<double>(numeric[i]));
    if (err > report.max_abs_error) {
      report.max_abs_error = err;
      report.worst_index = i;
    }
  }
  report.max_relative_error = scale > 0.0 ? report.max_abs_error / scale : report.max_abs_error;
  report.passed = report.max_relative_error < tol;
  return report;
}

template bool has_custom_gradient(const BasicTensor<float>&);
template bool has_custom_gradient(const BasicTensor<double>&);
template GradCheckReport<float> grad_check(
    const std::function<BasicTensor<float>(const BasicTensor<float>&)>&, const BasicTensor<float>&,
    float, double);
template GradCheckReport<double> grad_check(
    const std::function<BasicTensor<double>(const BasicTensor<double>&)>&,
    const BasicTensor<double>&, double, double);

}  // namespace spikecast
