#ifndef PTOC_TYPES_HPP_
#define PTOC_TYPES_HPP_

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace ptoc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Desired terminal state or end-effector position of a task instance.
struct GoalDesc {
  enum class Kind { kState, kEndEffector };
  Kind kind{Kind::kState};
  Vec target;
};

// Randomized instance data: initial condition plus goal descriptor.
struct ProblemParams {
  Vec x0;
  GoalDesc goal;
};

struct SampleSet {
  std::vector<ProblemParams> params;
  std::uint64_t seed{0};

  int size() const { return static_cast<int>(params.size()); }
};

// State/control trajectory with the local feedback law from the solver.
// Convention: du = k + K * dx around (xs, us).
struct Trajectory {
  std::vector<Vec> xs;  // T+1 states
  std::vector<Vec> us;  // T controls
  std::vector<Vec> ks;  // T feedforward terms (empty for plain rollouts)
  std::vector<Mat> Ks;  // T feedback gains, nu x nx
  double cost{0.0};     // plain trajectory cost under (xs, us)

  int horizon() const { return static_cast<int>(us.size()); }
};

class DivergedRollout : public std::runtime_error {
 public:
  explicit DivergedRollout(int step)
      : std::runtime_error("rollout diverged at step " + std::to_string(step)),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ptoc

#endif  // PTOC_TYPES_HPP_
