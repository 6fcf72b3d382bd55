#include "vqoco/environments.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "vqoco/algorithms.hpp"

namespace vqoco {

namespace {

std::string fmt17(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Online ridge regression

void OrrConfig::validate() const {
  require(n >= 1, "orr: n must be >= 1");
  require(k >= 1, "orr: k must be >= 1");
  require(C > 0.0, "orr: C must be > 0");
  require(horizon >= 1, "orr: horizon must be >= 1");
}

double orr_half_width(Drift d, int t) {
  return d == Drift::Log ? 1.0 / (2.0 * t) : 1.0 / (2.0 * std::sqrt(static_cast<double>(t)));
}

ProblemInstance orr_generate(const OrrConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.n);
  const auto k = static_cast<std::size_t>(cfg.k);
  const auto T = static_cast<std::size_t>(cfg.horizon);
  Rng rng(cfg.seed);
  const FeasibleSet chi = FeasibleSet::uniform_box(k, -cfg.C, cfg.C);

  ProblemInstance inst;
  inst.name = cfg.drift == Drift::Log ? "orr_log" : "orr_sqrt";
  inst.dim = k;
  inst.num_constraints = 1;
  inst.horizon = cfg.horizon;
  inst.minimizers.emplace();
  inst.sup_deviation.emplace(T, 0.0);

  Vec x_star(k, 0.0);
  Matrix p(n, Vec(k));
  for (auto& row : p)
    for (auto& v : row) v = rng.uniform(-1.0, 1.0);

  double envelope = 1.0;  // bound on |p entries| over the run
  double a_prev = 0.0;
  for (std::size_t t = 1; t <= T; ++t) {
    const double h = orr_half_width(cfg.drift, static_cast<int>(t));
    envelope += h;
    Vec step(k);
    for (auto& v : step) v = rng.uniform(-h, h);
    for (std::size_t i = 0; i < k; ++i) step[i] += x_star[i];
    x_star = project(chi, step);
    for (auto& row : p)
      for (auto& v : row) v += rng.uniform(-h, h);
    Vec q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = dot(p[i], x_star) + cfg.b;
    const double a = norm(x_star);

    auto rows = std::make_shared<const Matrix>(p);
    auto targets = std::make_shared<const Vec>(q);
    const double b = cfg.b;
    inst.losses.push_back(LossOracle{
        [rows, targets, b](std::span<const double> x) {
          double s = 0.0;
          for (std::size_t i = 0; i < rows->size(); ++i) {
            const double r = dot((*rows)[i], x) + b - (*targets)[i];
            s += r * r;
          }
          return s;
        },
        [rows, targets, b](std::span<const double> x) {
          Vec g(x.size(), 0.0);
          for (std::size_t i = 0; i < rows->size(); ++i) {
            const double r = dot((*rows)[i], x) + b - (*targets)[i];
            axpy(2.0 * r, (*rows)[i], g);
          }
          return g;
        }});
    // g_t(x) = ||x|| - a_t; the gradient at the origin is taken as 0.
    inst.constraints.push_back(ConstraintOracle{
        1, [a](std::span<const double> x) { return Vec{norm(x) - a}; },
        [](std::span<const double> x) {
          const double nx = norm(x);
          Vec g(x.size(), 0.0);
          if (nx > 0.0)
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = x[i] / nx;
          return Matrix{g};
        }});
    inst.sets.push_back(chi);
    inst.minimizers->push_back(x_star);
    if (t >= 2) (*inst.sup_deviation)[t - 1] = orr_sup_deviation(a_prev, a);
    a_prev = a;

    std::vector<std::pair<std::string, Vec>> coeffs;
    for (std::size_t i = 0; i < n; ++i) coeffs.emplace_back("p" + std::to_string(i + 1), p[i]);
    coeffs.emplace_back("q", q);
    coeffs.emplace_back("a", Vec{a});
    inst.coefficients.push_back(std::move(coeffs));
  }

  const double R = diameter(chi);
  const double p_norm = std::sqrt(static_cast<double>(k)) * envelope;
  const double g_bound = cfg.C * std::sqrt(static_cast<double>(k));
  inst.constants.R = R;
  inst.constants.F = std::max(static_cast<double>(n) * (p_norm * R) * (p_norm * R), g_bound);
  inst.constants.G = std::max(2.0 * static_cast<double>(n) * p_norm * p_norm * R, 1.0);
  inst.constants.beta = 1.0;  // ||x|| - a is 1-Lipschitz
  inst.metadata = {{"n", cfg.n},   {"k", cfg.k},       {"C", cfg.C},
                   {"b", cfg.b},   {"p0_range", 1.0},  {"x0_star_norm", 0.0},
                   {"p_envelope", envelope}};
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------------------
// Slater family

void SlaterConfig::validate() const {
  require(horizon >= 1, "slater instance: horizon must be >= 1");
  require(eps > 0.0, "slater instance: eps must be > 0");
  require(drift_cap >= 0.0 && drift_cap < eps, "slater instance: drift_cap must lie in [0, eps)");
}

ProblemInstance slater_instance(const SlaterConfig& cfg) {
  cfg.validate();
  const auto T = static_cast<std::size_t>(cfg.horizon);
  Rng rng(cfg.seed);
  const FeasibleSet chi = FeasibleSet::uniform_box(2, -1.0, 1.0);
  // ||c_t|| stays in [kMinNorm, kMaxNorm]; targets sit kMargin past the
  // boundary so the constraint binds at every per-slot minimizer.
  constexpr double kMinNorm = 0.6;
  constexpr double kMaxNorm = 1.0;
  constexpr double kMargin = 0.3;
  constexpr double kSwing = 0.4;
  constexpr double kAngularSpeed = 0.01;

  ProblemInstance inst;
  inst.name = "slater";
  inst.dim = 2;
  inst.num_constraints = 1;
  inst.horizon = cfg.horizon;
  inst.sup_deviation.emplace(T, 0.0);

  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double psi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  Vec c{0.8 * std::cos(phi), 0.8 * std::sin(phi)};
  double measured_cap = 0.0;
  double max_c_norm = 0.0;
  double max_target = 0.0;
  for (std::size_t t = 1; t <= T; ++t) {
    if (t >= 2) {
      // Step with ||dc||_1 <= drift_cap; steps leaving the annulus are dropped.
      Vec next(2);
      for (std::size_t i = 0; i < 2; ++i) next[i] = c[i] + 0.5 * cfg.drift_cap * rng.uniform(-1.0, 1.0);
      const double nn = norm(next);
      if (nn >= kMinNorm && nn <= kMaxNorm) {
        // sup over [-1,1]^2 of |dc^T x| is ||dc||_1.
        const double dev = std::abs(next[0] - c[0]) + std::abs(next[1] - c[1]);
        (*inst.sup_deviation)[t - 1] = dev;
        measured_cap = std::max(measured_cap, dev);
        c = next;
      }
    }
    const double cn = norm(c);
    max_c_norm = std::max(max_c_norm, cn);
    const Vec along{c[0] / cn, c[1] / cn};
    const Vec across{-along[1], along[0]};
    const double shift = (cfg.eps + kMargin) / cn;
    const double swing = kSwing * std::sin(psi + kAngularSpeed * static_cast<double>(t));
    Vec z{shift * along[0] + swing * across[0], shift * along[1] + swing * across[1]};
    max_target = std::max(max_target, norm(z));
    inst.losses.push_back(LossOracle::tracking(z));
    // d_t = eps so g_t(0) = -eps.
    inst.constraints.push_back(ConstraintOracle::affine(Matrix{c}, Vec{cfg.eps}));
    inst.sets.push_back(chi);
    inst.coefficients.push_back({{"c", c}, {"d", Vec{cfg.eps}}, {"z", z}});
  }

  const double R = diameter(chi);
  const double reach = std::sqrt(2.0) + max_target;  // max ||x - z|| over the box
  inst.constants.R = R;
  inst.constants.F = std::max(reach * reach, max_c_norm * std::sqrt(2.0) + cfg.eps);
  inst.constants.G = std::max(2.0 * reach, max_c_norm);
  inst.constants.beta = max_c_norm;
  inst.constants.epsilon = cfg.eps;
  inst.constants.vbar_g = cfg.drift_cap;
  inst.metadata = {{"eps", cfg.eps},
                   {"drift_cap", cfg.drift_cap},
                   {"measured_max_deviation", measured_cap},
                   {"queue_bound_a_half",
                    slater_queue_bound(inst.constants, slater_params(0.5, cfg.horizon, inst.constants.beta))}};
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------------------
// Network resource allocation

Matrix network_incidence(int J, int K) {
  const int I = J + K;
  const int E = J * K + K;
  Matrix A(static_cast<std::size_t>(I), Vec(static_cast<std::size_t>(E), 0.0));
  for (int j = 0; j < J; ++j)
    for (int k = 0; k < K; ++k) {
      const int e = j * K + k;
      A[j][e] = -1.0;
      A[J + k][e] = 1.0;
    }
  for (int k = 0; k < K; ++k) A[J + k][J * K + k] = -1.0;
  return A;
}

NetworkConfig NetworkConfig::resolved() const {
  require(J >= 1 && K >= 1, "network: J and K must be >= 1");
  require(horizon >= 1, "network: horizon must be >= 1");
  NetworkConfig c = *this;
  const auto I = static_cast<std::size_t>(num_nodes());
  const auto E = static_cast<std::size_t>(num_edges());
  const Matrix expected = network_incidence(J, K);
  if (c.incidence.empty()) {
    c.incidence = expected;
  } else {
    require(c.incidence.size() == I, "network: incidence matrix must have J+K rows");
    for (const auto& row : c.incidence) require(row.size() == E, "network: incidence matrix must have J*K+K columns");
    require(c.incidence == expected,
            "network: incidence matrix inconsistent with J, K (links must leave mapping nodes and enter centers)");
  }
  if (c.bandwidth.empty()) c.bandwidth.assign(static_cast<std::size_t>(J * K), 4.0);
  if (c.capacity.empty()) c.capacity.assign(static_cast<std::size_t>(K), 6.0);
  require(c.bandwidth.size() == static_cast<std::size_t>(J * K), "network: need J*K bandwidths");
  require(c.capacity.size() == static_cast<std::size_t>(K), "network: need K capacities");
  for (double v : c.bandwidth) require(v > 0.0, "network: bandwidths must be > 0");
  for (double v : c.capacity) require(v > 0.0, "network: capacities must be > 0");
  require(arrival_base >= 0.0 && arrival_amplitude >= 0.0 && arrival_noise >= 0.0 && arrival_period > 0.0,
          "network: arrival parameters must be nonnegative (period > 0)");
  require(power_quad_lo > 0.0 && power_quad_lo <= power_quad_hi && link_quad_lo > 0.0 && link_quad_lo <= link_quad_hi,
          "network: quadratic cost ranges must be positive and ordered");
  require(power_lin_lo >= 0.0 && power_lin_lo <= power_lin_hi && link_lin_lo >= 0.0 && link_lin_lo <= link_lin_hi,
          "network: linear cost ranges must be nonnegative and ordered");
  return c;
}

ProblemInstance network_instance(const NetworkConfig& raw) {
  const NetworkConfig cfg = raw.resolved();
  const int J = cfg.J, K = cfg.K;
  const auto E = static_cast<std::size_t>(cfg.num_edges());
  const auto I = static_cast<std::size_t>(cfg.num_nodes());
  const auto T = static_cast<std::size_t>(cfg.horizon);
  Rng rng(cfg.seed);

  Vec upper(cfg.bandwidth);
  upper.insert(upper.end(), cfg.capacity.begin(), cfg.capacity.end());
  const FeasibleSet chi = FeasibleSet::box(Vec(E, 0.0), upper);

  // Cost coefficients per edge: quadratic a_e(t), linear c_e(t).
  Vec quad(E), lin(E), quad_lo(E), quad_hi(E), lin_lo(E), lin_hi(E);
  for (std::size_t e = 0; e < E; ++e) {
    const bool link = e < static_cast<std::size_t>(J * K);
    quad_lo[e] = link ? cfg.link_quad_lo : cfg.power_quad_lo;
    quad_hi[e] = link ? cfg.link_quad_hi : cfg.power_quad_hi;
    lin_lo[e] = link ? cfg.link_lin_lo : cfg.power_lin_lo;
    lin_hi[e] = link ? cfg.link_lin_hi : cfg.power_lin_hi;
    quad[e] = rng.uniform(quad_lo[e], quad_hi[e]);
    lin[e] = rng.uniform(lin_lo[e], lin_hi[e]);
  }
  Vec phase(static_cast<std::size_t>(J));
  for (auto& v : phase) v = rng.uniform(0.0, 2.0 * std::numbers::pi);

  ProblemInstance inst;
  inst.name = "network";
  inst.dim = E;
  inst.num_constraints = I;
  inst.horizon = cfg.horizon;
  inst.sup_deviation.emplace(T, 0.0);

  Vec b_prev;
  for (std::size_t t = 1; t <= T; ++t) {
    if (t >= 2)
      for (std::size_t e = 0; e < E; ++e) {
        quad[e] = std::clamp(quad[e] + rng.uniform(-cfg.cost_step, cfg.cost_step), quad_lo[e], quad_hi[e]);
        lin[e] = std::clamp(lin[e] + rng.uniform(-cfg.cost_step, cfg.cost_step), lin_lo[e], lin_hi[e]);
      }
    Vec b(I, 0.0);
    for (int j = 0; j < J; ++j) {
      const double wave = 1.0 + cfg.arrival_amplitude *
                                    std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / cfg.arrival_period + phase[j]);
      b[j] = std::max(0.0, cfg.arrival_base * wave + rng.uniform(-cfg.arrival_noise, cfg.arrival_noise));
    }
    if (t >= 2) (*inst.sup_deviation)[t - 1] = dist(b, b_prev);  // g_t - g_{t-1} = b_t - b_{t-1}
    b_prev = b;

    auto qa = std::make_shared<const Vec>(quad);
    auto la = std::make_shared<const Vec>(lin);
    inst.losses.push_back(LossOracle{[qa, la](std::span<const double> x) {
                                       double s = 0.0;
                                       for (std::size_t e = 0; e < x.size(); ++e) s += ((*qa)[e] * x[e] + (*la)[e]) * x[e];
                                       return s;
                                     },
                                     [qa, la](std::span<const double> x) {
                                       Vec g(x.size());
                                       for (std::size_t e = 0; e < x.size(); ++e) g[e] = 2.0 * (*qa)[e] * x[e] + (*la)[e];
                                       return g;
                                     }});
    Vec neg_b(I);
    for (std::size_t i = 0; i < I; ++i) neg_b[i] = -b[i];
    inst.constraints.push_back(ConstraintOracle::affine(cfg.incidence, neg_b));  // A x + b_t
    inst.sets.push_back(chi);
    inst.coefficients.push_back({{"quad", quad}, {"lin", lin}, {"arrivals", b}});
  }

  // Constants over the box [0, c].
  double f_max = 0.0, grad_sq = 0.0;
  for (std::size_t e = 0; e < E; ++e) {
    f_max += (quad_hi[e] * upper[e] + lin_hi[e]) * upper[e];
    const double ge = 2.0 * quad_hi[e] * upper[e] + lin_hi[e];
    grad_sq += ge * ge;
  }
  const double peak_arrival = cfg.arrival_base * (1.0 + cfg.arrival_amplitude) + cfg.arrival_noise;
  double g_sq = 0.0;
  for (int j = 0; j < J; ++j) {
    double out = 0.0;
    for (int k = 0; k < K; ++k) out += cfg.bandwidth[static_cast<std::size_t>(j * K + k)];
    const double m = std::max(peak_arrival, out);
    g_sq += m * m;
  }
  for (int k = 0; k < K; ++k) {
    double in = 0.0;
    for (int j = 0; j < J; ++j) in += cfg.bandwidth[static_cast<std::size_t>(j * K + k)];
    const double m = std::max(in, cfg.capacity[static_cast<std::size_t>(k)]);
    g_sq += m * m;
  }
  double frob = 0.0;
  for (const auto& row : cfg.incidence) frob += dot(row, row);
  double row_max = 0.0;
  for (const auto& row : cfg.incidence) row_max = std::max(row_max, norm(row));

  inst.constants.R = diameter(chi);
  inst.constants.F = std::max(f_max, std::sqrt(g_sq));
  inst.constants.G = std::max(std::sqrt(grad_sq), row_max);
  inst.constants.beta = std::sqrt(frob);  // Frobenius bound on ||A||_2
  inst.metadata = {{"J", J}, {"K", K}, {"peak_arrival", peak_arrival}};
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------------------
// Job scheduling

JobSchedConfig JobSchedConfig::resolved() const {
  require(horizon >= 2, "jobsched: horizon must be >= 2");
  require(norm_order >= 1.0, "jobsched: norm order k must be >= 1");
  JobSchedConfig c = *this;
  if (c.cores.empty()) c.cores = {4, 4};
  int total = 0;
  for (int v : c.cores) {
    require(v >= 1, "jobsched: server cores must be >= 1");
    total += v;
  }
  auto rate = [&](const Job& j) { return static_cast<double>(j.duration) / (horizon - j.arrival); };
  if (c.jobs.empty()) {
    require(num_jobs >= 1 && max_demand >= 1 && max_duration >= 1, "jobsched: generator limits must be >= 1");
    Rng rng(seed);
    double load = 0.0;
    int attempts = 0;
    while (static_cast<int>(c.jobs.size()) < num_jobs) {
      require(++attempts < 100000, "jobsched: could not generate a schedulable job set");
      Job j;
      j.arrival = static_cast<int>(rng.integer(0, std::max(0, horizon / 2)));
      const int room = horizon - j.arrival;
      j.duration = static_cast<int>(rng.integer(1, std::max(1, std::min(max_duration, room))));
      j.demand = static_cast<int>(rng.integer(1, std::min(max_demand, total)));
      if (load + j.demand * rate(j) <= total) {
        load += j.demand * rate(j);
        c.jobs.push_back(j);
      }
    }
    std::stable_sort(c.jobs.begin(), c.jobs.end(), [](const Job& a, const Job& b) { return a.arrival < b.arrival; });
  }
  double load = 0.0;
  for (const auto& j : c.jobs) {
    require(j.arrival >= 0 && j.demand >= 1 && j.duration >= 1, "jobsched: job fields out of range");
    require(j.demand <= total, "jobsched: job demand exceeds total cores");
    require(j.arrival + j.duration <= horizon, "jobsched: job cannot finish by the horizon (a_j + p_j > T)");
    load += j.demand * rate(j);
  }
  require(load <= total + 1e-12, "jobsched: required service rates exceed total cores");
  return c;
}

ProblemInstance jobsched_instance(const JobSchedConfig& raw) {
  const JobSchedConfig cfg = raw.resolved();
  const auto N = cfg.jobs.size();
  const int T = cfg.horizon;
  double total_cores = 0.0;
  for (int v : cfg.cores) total_cores += v;

  Vec rate(N), demand(N);
  for (std::size_t j = 0; j < N; ++j) {
    rate[j] = static_cast<double>(cfg.jobs[j].duration) / (T - cfg.jobs[j].arrival);
    demand[j] = cfg.jobs[j].demand;
  }

  ProblemInstance inst;
  inst.name = "jobsched";
  inst.dim = N;
  inst.num_constraints = N;
  inst.horizon = T;
  inst.minimizers.emplace();

  double f_max = 0.0, grad_max = 0.0;
  for (int t = 1; t <= T; ++t) {
    Vec cost(N, 0.0), upper(N, 0.0), weights(N, 0.0), offset(N, 0.0), x_star(N, 0.0);
    Matrix rows(N, Vec(N, 0.0));
    for (std::size_t j = 0; j < N; ++j) {
      const auto& job = cfg.jobs[j];
      if (t <= job.arrival) continue;  // active once t > a_j
      const double p = job.duration;
      cost[j] = std::pow(static_cast<double>(t - job.arrival), cfg.norm_order) / p + std::pow(p, cfg.norm_order - 1.0);
      upper[j] = 1.0;
      weights[j] = demand[j];
      rows[j][j] = -1.0;        // g_{t,j}(y) = p_j/(T-a_j) - y_j
      offset[j] = -rate[j];
      x_star[j] = rate[j];
    }
    f_max = std::max(f_max, std::accumulate(cost.begin(), cost.end(), 0.0));
    grad_max = std::max(grad_max, norm(cost));
    inst.losses.push_back(LossOracle::linear(cost));
    inst.constraints.push_back(ConstraintOracle::affine(rows, offset));
    inst.sets.push_back(FeasibleSet::capped_box(Vec(N, 0.0), upper, weights, total_cores));
    inst.minimizers->push_back(x_star);
    inst.coefficients.push_back({{"cost", cost}, {"rate", offset}, {"upper", upper}});
  }

  double g_sq = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    const double m = std::max(rate[j], 1.0 - rate[j]);
    g_sq += m * m;
  }
  inst.constants.R = std::sqrt(static_cast<double>(N));
  inst.constants.F = std::max({f_max, std::sqrt(g_sq), 1e-12});
  inst.constants.G = std::max(grad_max, 1.0);
  inst.constants.beta = 1.0;
  inst.metadata = {{"servers", static_cast<double>(cfg.cores.size())},
                   {"total_cores", total_cores},
                   {"jobs", static_cast<double>(N)},
                   {"norm_order", cfg.norm_order}};
  inst.validate();
  return inst;
}

double integrality_gap(const JobSchedConfig& raw, std::span<const Vec> actions) {
  const JobSchedConfig cfg = raw.resolved();
  double gap = 0.0;
  for (const auto& y : actions) {
    require(y.size() == cfg.jobs.size(), "integrality_gap: action length must equal the job count");
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double v = cfg.jobs[j].demand * y[j];
      gap = std::max(gap, std::abs(v - std::round(v)));
    }
  }
  return gap;
}

void write_snapshot(const ProblemInstance& inst, std::ostream& os) {
  os << "instance " << inst.name << '\n';
  os << "dim " << inst.dim << "\nconstraints " << inst.num_constraints << "\nhorizon " << inst.horizon << '\n';
  const auto& c = inst.constants;
  os << "F " << fmt17(c.F) << "\nG " << fmt17(c.G) << "\nR " << fmt17(c.R) << "\nbeta " << fmt17(c.beta) << '\n';
  if (c.epsilon) os << "epsilon " << fmt17(*c.epsilon) << '\n';
  if (c.vbar_g) os << "vbar_g " << fmt17(*c.vbar_g) << '\n';
  for (const auto& [key, value] : inst.metadata) os << "meta " << key << ' ' << fmt17(value) << '\n';
  for (std::size_t t = 0; t < inst.coefficients.size(); ++t) {
    for (const auto& [name, values] : inst.coefficients[t]) {
      os << t + 1 << ' ' << name;
      for (double v : values) os << ' ' << fmt17(v);
      os << '\n';
    }
    if (inst.minimizers) {
      os << t + 1 << " x_star";
      for (double v : (*inst.minimizers)[t]) os << ' ' << fmt17(v);
      os << '\n';
    }
    if (inst.sup_deviation) os << t + 1 << " sup_dev " << fmt17((*inst.sup_deviation)[t]) << '\n';
  }
}

}  // namespace vqoco
