#include "gridswitch/errors.hpp"

namespace gridswitch {

NumericalDivergence::NumericalDivergence(std::size_t state_index, double time)
    : Error("non-finite state at index " + std::to_string(state_index) + " (t = " +
            std::to_string(time) + " s)"),
      state_index_(state_index), time_(time) {}

CapExceeded::CapExceeded(std::size_t cap)
    : Error("arborescence enumeration exceeded cap of " + std::to_string(cap) + " trees"),
      cap_(cap) {}

DivergenceError::DivergenceError(std::size_t epoch)
    : Error("training loss became non-finite at epoch " + std::to_string(epoch)), epoch_(epoch) {}

} // namespace gridswitch
