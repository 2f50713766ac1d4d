#ifndef PTOC_INSTRUMENTATION_HPP_
#define PTOC_INSTRUMENTATION_HPP_

#include <atomic>
#include <cstdint>

namespace ptoc {

// Global work counters. sim_steps is the canonical x-axis of every metrics
// file: one increment per dynamics step evaluation, wherever it happens
// (solver sweeps, line-search rollouts, policy evaluations, tests).
struct Counters {
  std::atomic<std::uint64_t> sim_steps{0};
  std::atomic<std::uint64_t> policy_vjp{0};        // input_vjp sweeps
  std::atomic<std::uint64_t> policy_jacobian{0};   // full d(pi)/dx assemblies
  std::atomic<std::uint64_t> sobolev_sweeps{0};    // reverse-over-reverse sweeps
  std::atomic<std::uint64_t> solve_batch_calls{0};
  std::atomic<std::uint64_t> fit_calls{0};

  void reset() {
    sim_steps = 0;
    policy_vjp = 0;
    policy_jacobian = 0;
    sobolev_sweeps = 0;
    solve_batch_calls = 0;
    fit_calls = 0;
  }
};

inline Counters& counters() {
  static Counters instance;
  return instance;
}

}  // namespace ptoc

#endif  // PTOC_INSTRUMENTATION_HPP_
