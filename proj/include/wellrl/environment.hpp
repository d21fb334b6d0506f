#pragma once

#include <span>
#include <vector>

namespace wellrl {

struct Transition {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
};

/// Episodic environment with a continuous action vector.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int observation_dim() const = 0;
  virtual int action_dim() const = 0;

  virtual std::vector<double> reset() = 0;
  virtual Transition step(std::span<const double> action) = 0;
};

}  // namespace wellrl
