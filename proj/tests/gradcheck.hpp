#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "goal/tape.hpp"
#include "goal/tensor.hpp"

namespace goal::testing {

// Largest per-tensor ||analytic - numeric|| / max(||analytic||, ||numeric||, floor)
// with central differences of step h. A coordinate whose difference moves when the
// step shrinks tenfold has a ReLU kink inside its stencil; the step keeps shrinking
// (down to h / 100) until two successive estimates agree.
inline double grad_check(ParamStore<double>& store, const std::function<Var(Tape<double>&)>& loss, double h = 1e-6,
                         std::string* worst_name = nullptr, double floor = 1e-6) {
  store.zero_grad();
  {
    Tape<double> tape;
    tape.backward(loss(tape));
  }
  double worst = 0.0;
  for (const auto& p : store.params()) {
    double diff = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data[i];
      auto central = [&](double step) {
        p->value.data[i] = saved + step;
        Tape<double> up(false);
        const double fu = up.value(loss(up)).data[0];
        p->value.data[i] = saved - step;
        Tape<double> down(false);
        const double fd = down.value(loss(down)).data[0];
        p->value.data[i] = saved;
        return (fu - fd) / (2 * step);
      };
      double num = central(h);
      for (double step = h; step > h / 50; step /= 10) {
        const double finer = central(step / 10);
        if (std::abs(finer - num) <= 1e-3 * std::max(std::abs(num), std::abs(finer)) + 1e-8) break;
        num = finer;
      }
      const double ana = p->grad.data[i];
      diff += (num - ana) * (num - ana);
      na += ana * ana;
      nn += num * num;
    }
    const double denom = std::max(std::sqrt(std::max(na, nn)), floor);
    const double err = std::sqrt(diff) / denom;
    if (err > worst) {
      worst = err;
      if (worst_name != nullptr) *worst_name = p->name;
    }
  }
  return worst;
}

}  // namespace goal::testing
