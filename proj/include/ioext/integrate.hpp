#pragma once

#include <functional>
#include <span>
#include <vector>

namespace ioext {

// dx = F(t, x); the callee writes into dx (same length as x).
using VectorField = std::function<void(double t, std::span<const double> x, std::span<double> dx)>;

// One classical RK4 step. Inputs held by the caller stay constant across the
// step. Throws DivergenceError(step_index) if the result is not finite.
std::vector<double> step_rk4(const VectorField& field, double t, std::span<const double> x, double dt,
                             long step_index = 0);

}  // namespace ioext
