#pragma once

namespace gridswitch {

/// One classical fourth-order Runge-Kutta step for an autonomous-in-form system
/// `dx/dt = f(x, t)`. `State` needs `State + State` and `double * State`.
template <class State, class Derivative>
State rk4_step(const State& x, double t, double dt, Derivative&& f) {
  const State k1 = f(x, t);
  const State k2 = f(x + (0.5 * dt) * k1, t + 0.5 * dt);
  const State k3 = f(x + (0.5 * dt) * k2, t + 0.5 * dt);
  const State k4 = f(x + dt * k3, t + dt);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace gridswitch
