#pragma once

#include <functional>
#include <stdexcept>

namespace bfc {

struct QuadratureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace quad {

// Adaptive Gauss-Kronrod integral of f over [a, b]. The error estimate is
// accumulated into *err_acc; callers enforce their own tolerance on the sum.
double integrate_panel(const std::function<double(double)>& f, double a, double b,
                       double* err_acc);

}  // namespace quad
}  // namespace bfc
