#include "ioext/integrate.hpp"

#include <cmath>

#include "ioext/error.hpp"

namespace ioext {

std::vector<double> step_rk4(const VectorField& field, double t, std::span<const double> x, double dt,
                             long step_index) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidModel, "step size must be positive");
  const std::size_t n = x.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n), out(n);
  field(t, x, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  field(t + 0.5 * dt, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  field(t + 0.5 * dt, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
  field(t + dt, tmp, k4);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(out[i])) throw DivergenceError(step_index);
  }
  return out;
}

}  // namespace ioext
