#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqoco/linalg.hpp"

namespace vqoco {

/// One round as seen by the harness: the action, what it cost, and the
/// learner's state after observing the round.
struct RoundRecord {
  Vec x;
  double loss = 0.0;
  Vec g;       // g_t(x_t)
  Vec lambda;  // queue after the round's dual update
  double lambda_norm = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  double residual = 0.0;
};

struct Trajectory {
  std::string algorithm;
  std::string preset;
  std::uint64_t seed = 0;
  std::size_t num_constraints = 0;
  std::string minimizer_source;  // "exact" or "solver"
  std::vector<RoundRecord> rounds;
  double max_invariant_violation = 0.0;  // worst queue-property slack observed
  int unconverged_rounds = 0;

  int length() const { return static_cast<int>(rounds.size()); }
  double max_residual() const;
};

}  // namespace vqoco
