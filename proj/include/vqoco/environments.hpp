#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "vqoco/problem.hpp"

namespace vqoco {

enum class Drift { Log, Sqrt };

/// Online ridge regression with a drifting ground truth.
struct OrrConfig {
  int n = 5;        // training pairs per round
  int k = 5;        // dimension
  double C = 7.0;   // box bound
  double b = 1.0;   // intercept
  Drift drift = Drift::Log;
  int horizon = 1000;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Half-width of the drift interval at round t.
double orr_half_width(Drift d, int t);

ProblemInstance orr_generate(const OrrConfig& cfg);

/// sup_x |g_t(x) - g_{t-1}(x)| for g_t(x) = ||x|| - a_t.
inline double orr_sup_deviation(double a_prev, double a_now) { return a_now > a_prev ? a_now - a_prev : a_prev - a_now; }

/// Two-dimensional family with Slater point 0 and bounded constraint drift.
struct SlaterConfig {
  int horizon = 1000;
  std::uint64_t seed = 1;
  double eps = 0.4;
  double drift_cap = 0.05;

  void validate() const;
};

ProblemInstance slater_instance(const SlaterConfig& cfg);

/// Cloud network with J mapping nodes and K data centers (relaxed workload
/// conservation as a long-term constraint).
struct NetworkConfig {
  int J = 3;
  int K = 2;
  /// I x E node-incidence matrix; built from (J, K) when empty.
  Matrix incidence;
  Vec bandwidth;  // B_jk, row-major over (j, k); defaults to 4 each
  Vec capacity;   // C_k; defaults to 6 each
  double arrival_base = 2.0;
  double arrival_amplitude = 0.5;
  double arrival_noise = 0.3;
  double arrival_period = 50.0;
  double power_quad_lo = 0.05, power_quad_hi = 0.2;
  double power_lin_lo = 0.1, power_lin_hi = 0.5;
  double link_quad_lo = 0.01, link_quad_hi = 0.05;
  double link_lin_lo = 0.01, link_lin_hi = 0.1;
  double cost_step = 0.01;  // random-walk step for cost coefficients
  int horizon = 1000;
  std::uint64_t seed = 1;

  int num_nodes() const { return J + K; }
  int num_edges() const { return J * K + K; }
  /// Fills defaults and checks the incidence structure.
  NetworkConfig resolved() const;
};

/// The incidence structure: link (j,k) leaves node j and enters center k;
/// the exogenous edge of center k leaves it.
Matrix network_incidence(int J, int K);

ProblemInstance network_instance(const NetworkConfig& cfg);

struct Job {
  int arrival = 0;   // a_j
  int demand = 1;    // d_j cores
  int duration = 1;  // p_j
};

struct JobSchedConfig {
  std::vector<int> cores;  // C_i per server
  std::vector<Job> jobs;   // explicit jobs; generated from the seed when empty
  int num_jobs = 8;        // used when generating
  int max_demand = 4;
  int max_duration = 10;
  double norm_order = 2.0;  // k >= 1
  int horizon = 100;        // predicted completion horizon T
  std::uint64_t seed = 1;

  JobSchedConfig resolved() const;
};

ProblemInstance jobsched_instance(const JobSchedConfig& cfg);

/// Largest distance of d_j y_j from an integer over the given actions.
double integrality_gap(const JobSchedConfig& cfg, std::span<const Vec> actions);

/// Deterministic text dump: constants, metadata, then one line per
/// (round, coefficient table) and per-round minimizers. Floats use 17
/// significant digits.
void write_snapshot(const ProblemInstance& instance, std::ostream& os);

}  // namespace vqoco
