#include "vqoco/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace vqoco {

namespace {

const std::vector<std::string> kAlgorithms = {"vqb_case1",          "vqb_case2", "slater",   "doubling_vqb_case1",
                                              "doubling_vqb_case2", "cao2018",   "chen2017", "chen2018",
                                              "chen2019"};

bool is_saddle(const std::string& name) {
  return name == "cao2018" || name == "chen2017" || name == "chen2018" || name == "chen2019";
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
std::optional<T> to_number(std::string_view s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) return std::nullopt;
  return v;
}

template <typename T>
std::optional<std::vector<T>> to_list(std::string_view s, char sep = ',') {
  std::vector<T> out;
  if (trim(s).empty()) return out;
  for (const auto& item : split(s, sep)) {
    auto v = to_number<T>(item);
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  return out;
}

AlgorithmSpec named_algorithm(const std::string& name) {
  AlgorithmSpec a;
  a.name = name;
  return a;
}

struct Entry {
  int line;
  std::string key;
  std::string value;
};

// A setter returns an error message, or empty on success.
using Setter = std::function<std::string(const std::string&, EnvironmentSpec&)>;

template <typename T>
Setter number_setter(std::function<T&(EnvironmentSpec&)> field, const char* what) {
  return [field, what](const std::string& v, EnvironmentSpec& env) -> std::string {
    auto n = to_number<T>(v);
    if (!n) return std::string("expected ") + what + ", got '" + v + "'";
    field(env) = *n;
    return {};
  };
}

Setter real(std::function<double&(EnvironmentSpec&)> f) { return number_setter<double>(std::move(f), "a number"); }
Setter integer(std::function<int&(EnvironmentSpec&)> f) { return number_setter<int>(std::move(f), "an integer"); }

Setter range_pair(std::function<double&(EnvironmentSpec&)> lo, std::function<double&(EnvironmentSpec&)> hi) {
  return [lo, hi](const std::string& v, EnvironmentSpec& env) -> std::string {
    auto l = to_list<double>(v);
    if (!l || l->size() != 2) return "expected two numbers 'lo, hi', got '" + v + "'";
    lo(env) = (*l)[0];
    hi(env) = (*l)[1];
    return {};
  };
}

Setter real_list(std::function<Vec&(EnvironmentSpec&)> f) {
  return [f](const std::string& v, EnvironmentSpec& env) -> std::string {
    auto l = to_list<double>(v);
    if (!l) return "expected a comma-separated list of numbers, got '" + v + "'";
    f(env) = *l;
    return {};
  };
}

const std::map<std::string, Setter>& setters(EnvironmentType type) {
  static const std::map<std::string, Setter> orr = {
      {"n", integer([](EnvironmentSpec& e) -> int& { return e.orr.n; })},
      {"k", integer([](EnvironmentSpec& e) -> int& { return e.orr.k; })},
      {"C", real([](EnvironmentSpec& e) -> double& { return e.orr.C; })},
      {"b", real([](EnvironmentSpec& e) -> double& { return e.orr.b; })},
      {"drift",
       [](const std::string& v, EnvironmentSpec& e) -> std::string {
         if (v == "log") e.orr.drift = Drift::Log;
         else if (v == "sqrt") e.orr.drift = Drift::Sqrt;
         else return "drift must be 'log' or 'sqrt', got '" + v + "'";
         return {};
       }},
  };
  static const std::map<std::string, Setter> slater = {
      {"eps", real([](EnvironmentSpec& e) -> double& { return e.slater.eps; })},
      {"drift_cap", real([](EnvironmentSpec& e) -> double& { return e.slater.drift_cap; })},
  };
  static const std::map<std::string, Setter> network = {
      {"J", integer([](EnvironmentSpec& e) -> int& { return e.network.J; })},
      {"K", integer([](EnvironmentSpec& e) -> int& { return e.network.K; })},
      {"incidence",
       [](const std::string& v, EnvironmentSpec& e) -> std::string {
         Matrix m;
         for (const auto& row : split(v, ';')) {
           auto r = to_list<double>(row);
           if (!r) return "incidence rows must be comma-separated numbers separated by ';'";
           m.push_back(*r);
         }
         e.network.incidence = m;
         return {};
       }},
      {"bandwidth", real_list([](EnvironmentSpec& e) -> Vec& { return e.network.bandwidth; })},
      {"capacity", real_list([](EnvironmentSpec& e) -> Vec& { return e.network.capacity; })},
      {"arrival_base", real([](EnvironmentSpec& e) -> double& { return e.network.arrival_base; })},
      {"arrival_amplitude", real([](EnvironmentSpec& e) -> double& { return e.network.arrival_amplitude; })},
      {"arrival_noise", real([](EnvironmentSpec& e) -> double& { return e.network.arrival_noise; })},
      {"arrival_period", real([](EnvironmentSpec& e) -> double& { return e.network.arrival_period; })},
      {"power_quad", range_pair([](EnvironmentSpec& e) -> double& { return e.network.power_quad_lo; },
                                [](EnvironmentSpec& e) -> double& { return e.network.power_quad_hi; })},
      {"power_lin", range_pair([](EnvironmentSpec& e) -> double& { return e.network.power_lin_lo; },
                               [](EnvironmentSpec& e) -> double& { return e.network.power_lin_hi; })},
      {"link_quad", range_pair([](EnvironmentSpec& e) -> double& { return e.network.link_quad_lo; },
                               [](EnvironmentSpec& e) -> double& { return e.network.link_quad_hi; })},
      {"link_lin", range_pair([](EnvironmentSpec& e) -> double& { return e.network.link_lin_lo; },
                              [](EnvironmentSpec& e) -> double& { return e.network.link_lin_hi; })},
      {"cost_step", real([](EnvironmentSpec& e) -> double& { return e.network.cost_step; })},
  };
  static const std::map<std::string, Setter> jobsched = {
      {"cores",
       [](const std::string& v, EnvironmentSpec& e) -> std::string {
         auto l = to_list<int>(v);
         if (!l) return "expected a comma-separated list of integers, got '" + v + "'";
         e.jobsched.cores = *l;
         return {};
       }},
      {"jobs",
       [](const std::string& v, EnvironmentSpec& e) -> std::string {
         std::vector<Job> jobs;
         for (const auto& item : split(v, ',')) {
           auto parts = to_list<int>(item, ':');
           if (!parts || parts->size() != 3) return "jobs must be 'arrival:demand:duration' items, got '" + item + "'";
           jobs.push_back({(*parts)[0], (*parts)[1], (*parts)[2]});
         }
         e.jobsched.jobs = jobs;
         return {};
       }},
      {"num_jobs", integer([](EnvironmentSpec& e) -> int& { return e.jobsched.num_jobs; })},
      {"max_demand", integer([](EnvironmentSpec& e) -> int& { return e.jobsched.max_demand; })},
      {"max_duration", integer([](EnvironmentSpec& e) -> int& { return e.jobsched.max_duration; })},
      {"norm_order", real([](EnvironmentSpec& e) -> double& { return e.jobsched.norm_order; })},
  };
  switch (type) {
    case EnvironmentType::Orr: return orr;
    case EnvironmentType::Slater: return slater;
    case EnvironmentType::Network: return network;
    case EnvironmentType::JobSched: return jobsched;
  }
  return orr;
}

std::optional<EnvironmentType> env_type(const std::string& s) {
  if (s == "orr") return EnvironmentType::Orr;
  if (s == "slater") return EnvironmentType::Slater;
  if (s == "network") return EnvironmentType::Network;
  if (s == "jobsched") return EnvironmentType::JobSched;
  return std::nullopt;
}

// Checks the environment block against one horizon by resolving it.
void check_environment(const EnvironmentSpec& env, int horizon) {
  switch (env.type) {
    case EnvironmentType::Orr: {
      auto c = env.orr;
      c.horizon = horizon;
      c.validate();
      break;
    }
    case EnvironmentType::Slater: {
      auto c = env.slater;
      c.horizon = horizon;
      c.validate();
      break;
    }
    case EnvironmentType::Network: {
      auto c = env.network;
      c.horizon = horizon;
      (void)c.resolved();
      break;
    }
    case EnvironmentType::JobSched: {
      auto c = env.jobsched;
      c.horizon = horizon;
      (void)c.resolved();
      break;
    }
  }
}

std::string join_numbers(std::span<const double> v, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += format_double(v[i]);
  }
  return out;
}

}  // namespace

std::string EnvironmentSpec::type_name() const {
  switch (type) {
    case EnvironmentType::Orr: return "orr";
    case EnvironmentType::Slater: return "slater";
    case EnvironmentType::Network: return "network";
    case EnvironmentType::JobSched: return "jobsched";
  }
  return "orr";
}

const std::vector<std::string>& algorithm_names() { return kAlgorithms; }

ConfigParseError::ConfigParseError(std::vector<ConfigIssue> issues)
    : ConfigError([&] {
        std::string msg;
        for (const auto& i : issues) {
          if (!msg.empty()) msg += '\n';
          msg += i.line > 0 ? "line " + std::to_string(i.line) + ": " + i.message : "config: " + i.message;
        }
        return msg;
      }()),
      issues_(std::move(issues)) {}

ExperimentConfig parse_config(std::string_view text) {
  std::vector<ConfigIssue> issues;
  std::vector<Entry> experiment, environment;
  std::deque<std::pair<std::string, std::vector<Entry>>> algo_sections;
  enum class Section { None, Experiment, Environment, Algorithm } section = Section::None;
  std::vector<Entry>* current = nullptr;
  std::string section_tag;
  std::map<std::string, int> seen;  // "section/key" -> line

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.push_back({line_no, "malformed section header '" + line + "'"});
        section = Section::None;
        current = nullptr;
        continue;
      }
      const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
      if (name == "experiment") {
        section = Section::Experiment;
        current = &experiment;
        section_tag = name;
      } else if (name == "environment") {
        section = Section::Environment;
        current = &environment;
        section_tag = name;
      } else if (name.rfind("algorithm ", 0) == 0) {
        const std::string algo = trim(std::string_view(name).substr(10));
        if (std::find(kAlgorithms.begin(), kAlgorithms.end(), algo) == kAlgorithms.end()) {
          issues.push_back({line_no, "unknown algorithm '" + algo + "'"});
          section = Section::None;
          current = nullptr;
          continue;
        }
        section = Section::Algorithm;
        section_tag = name;
        auto it = std::find_if(algo_sections.begin(), algo_sections.end(),
                               [&](const auto& s) { return s.first == algo; });
        if (it != algo_sections.end()) {
          issues.push_back({line_no, "duplicate section for algorithm '" + algo + "'"});
          current = &it->second;
        } else {
          algo_sections.emplace_back(algo, std::vector<Entry>{});
          current = &algo_sections.back().second;
        }
      } else {
        issues.push_back({line_no, "unknown section '" + name + "'"});
        section = Section::None;
        current = nullptr;
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({line_no, "expected 'key = value', got '" + line + "'"});
      continue;
    }
    Entry e{line_no, trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1))};
    if (e.key.empty()) {
      issues.push_back({line_no, "missing key before '='"});
      continue;
    }
    if (!current) {
      if (section == Section::None) issues.push_back({line_no, "key '" + e.key + "' outside a valid section"});
      continue;
    }
    const std::string tag = section_tag + "/" + e.key;
    if (auto [it, fresh] = seen.emplace(tag, line_no); !fresh) {
      issues.push_back({line_no, "duplicate key '" + e.key + "' (first set on line " + std::to_string(it->second) + ")"});
      continue;
    }
    current->push_back(std::move(e));
  }

  ExperimentConfig cfg;
  int algorithms_line = 0;
  for (const auto& e : experiment) {
    const int ln = e.line;
    auto bad = [&](const std::string& msg) { issues.push_back({ln, msg}); };
    if (e.key == "horizons") {
      auto l = to_list<int>(e.value);
      if (!l) {
        bad("horizons: expected a comma-separated list of integers, got '" + e.value + "'");
        continue;
      }
      for (int h : *l)
        if (h < 1) bad("horizon ≥ 1 (got " + std::to_string(h) + ")");
      cfg.horizons = *l;
    } else if (e.key == "seeds") {
      auto l = to_list<std::uint64_t>(e.value);
      if (!l) bad("seeds: expected a comma-separated list of nonnegative integers, got '" + e.value + "'");
      else cfg.seeds = *l;
    } else if (e.key == "algorithms") {
      algorithms_line = ln;
      for (const auto& name : split(e.value, ',')) {
        if (name.empty()) continue;
        if (std::find(kAlgorithms.begin(), kAlgorithms.end(), name) == kAlgorithms.end()) {
          bad("unknown algorithm '" + name + "'");
        } else if (std::any_of(cfg.algorithms.begin(), cfg.algorithms.end(),
                               [&](const AlgorithmSpec& a) { return a.name == name; })) {
          bad("algorithm '" + name + "' listed twice");
        } else {
          cfg.algorithms.push_back(named_algorithm(name));
        }
      }
    } else if (e.key == "output") {
      if (e.value.empty()) bad("output must not be empty");
      else cfg.output_dir = e.value;
    } else if (e.key == "vg_samples") {
      auto v = to_number<int>(e.value);
      if (!v || *v < 1) bad("vg_samples must be an integer ≥ 1, got '" + e.value + "'");
      else cfg.vg_samples = *v;
    } else if (e.key == "window") {
      auto l = to_list<double>(e.value);
      if (!l || l->size() != 2 || (*l)[0] < 0.0 || (*l)[0] >= (*l)[1] || (*l)[1] > 1.0)
        bad("window must be 'lo, hi' fractions with 0 ≤ lo < hi ≤ 1, got '" + e.value + "'");
      else {
        cfg.window_lo = (*l)[0];
        cfg.window_hi = (*l)[1];
      }
    } else if (e.key == "minimizers") {
      if (e.value == "exact") cfg.minimizers = MinimizerSource::Exact;
      else if (e.value == "solver") cfg.minimizers = MinimizerSource::Solver;
      else bad("minimizers must be 'exact' or 'solver', got '" + e.value + "'");
    } else if (e.key == "solver_max_iters") {
      auto v = to_number<int>(e.value);
      if (!v || *v < 1) bad("solver_max_iters must be an integer ≥ 1, got '" + e.value + "'");
      else cfg.solver.max_iters = *v;
    } else if (e.key == "solver_tol") {
      auto v = to_number<double>(e.value);
      if (!v || *v <= 0.0) bad("solver_tol must be a number > 0, got '" + e.value + "'");
      else cfg.solver.tol = *v;
    } else if (e.key == "solver_step") {
      auto v = to_number<double>(e.value);
      if (!v || *v <= 0.0) bad("solver_step must be a number > 0, got '" + e.value + "'");
      else cfg.solver.step = *v;
    } else if (e.key == "solver_step_rule") {
      if (e.value == "fixed") cfg.solver.step_rule = StepRule::Fixed;
      else if (e.value == "backtracking") cfg.solver.step_rule = StepRule::Backtracking;
      else bad("solver_step_rule must be 'fixed' or 'backtracking', got '" + e.value + "'");
    } else if (e.key == "plot_script") {
      if (e.value == "true") cfg.plot_script = true;
      else if (e.value == "false") cfg.plot_script = false;
      else bad("plot_script must be 'true' or 'false', got '" + e.value + "'");
    } else {
      bad("unknown key '" + e.key + "' in [experiment]");
    }
  }

  int type_line = 0;
  for (const auto& e : environment)
    if (e.key == "type") {
      type_line = e.line;
      if (auto t = env_type(e.value)) cfg.environment.type = *t;
      else issues.push_back({e.line, "unknown environment type '" + e.value + "' (orr, slater, network, jobsched)"});
    }
  if (!type_line) issues.push_back({0, "[environment] needs a 'type'"});
  const auto& table = setters(cfg.environment.type);
  for (const auto& e : environment) {
    if (e.key == "type") continue;
    auto it = table.find(e.key);
    if (it == table.end()) {
      issues.push_back({e.line, "unknown key '" + e.key + "' for environment type '" + cfg.environment.type_name() + "'"});
      continue;
    }
    if (auto err = it->second(e.value, cfg.environment); !err.empty()) issues.push_back({e.line, e.key + ": " + err});
  }

  for (const auto& [name, entries] : algo_sections) {
    auto it = std::find_if(cfg.algorithms.begin(), cfg.algorithms.end(),
                           [&](const AlgorithmSpec& a) { return a.name == name; });
    if (it == cfg.algorithms.end()) {
      cfg.algorithms.push_back(named_algorithm(name));
      it = cfg.algorithms.end() - 1;
    }
    for (const auto& e : entries) {
      auto v = to_number<double>(e.value);
      if (!v) {
        issues.push_back({e.line, e.key + ": expected a number, got '" + e.value + "'"});
        continue;
      }
      if ((e.key == "eta" || e.key == "mu") && is_saddle(name)) {
        if (*v <= 0.0) issues.push_back({e.line, e.key + " must be > 0"});
        else (e.key == "eta" ? it->eta : it->mu) = *v;
      } else if (e.key == "a" && name == "slater") {
        if (*v <= 0.0 || *v >= 1.0) issues.push_back({e.line, "a must lie in (0, 1)"});
        else it->slater_a = *v;
      } else {
        issues.push_back({e.line, "unknown key '" + e.key + "' for algorithm '" + name + "'"});
      }
    }
  }

  if (cfg.algorithms.empty()) issues.push_back({algorithms_line, "at least one algorithm is required"});
  if (cfg.horizons.empty()) issues.push_back({0, "at least one horizon is required"});
  if (cfg.seeds.empty()) issues.push_back({0, "at least one seed is required"});

  if (type_line) {
    std::vector<std::string> env_errors;
    for (int h : cfg.horizons) {
      if (h < 1) continue;
      try {
        check_environment(cfg.environment, h);
      } catch (const ConfigError& err) {
        std::string msg = err.what();
        if (std::find(env_errors.begin(), env_errors.end(), msg) == env_errors.end()) env_errors.push_back(msg);
      }
    }
    for (const auto& msg : env_errors) issues.push_back({type_line, msg});
  }

  if (!issues.empty()) {
    std::stable_sort(issues.begin(), issues.end(), [](const ConfigIssue& a, const ConfigIssue& b) {
      return a.line < b.line;
    });
    throw ConfigParseError(std::move(issues));
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  auto ints = [](const auto& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
    return out;
  };
  os << "[experiment]\n";
  os << "horizons = " << ints(cfg.horizons) << '\n';
  os << "seeds = " << ints(cfg.seeds) << '\n';
  os << "algorithms = ";
  for (std::size_t i = 0; i < cfg.algorithms.size(); ++i) os << (i ? ", " : "") << cfg.algorithms[i].name;
  os << '\n';
  os << "output = " << cfg.output_dir << '\n';
  os << "vg_samples = " << cfg.vg_samples << '\n';
  os << "window = " << format_double(cfg.window_lo) << ", " << format_double(cfg.window_hi) << '\n';
  os << "minimizers = " << (cfg.minimizers == MinimizerSource::Exact ? "exact" : "solver") << '\n';
  os << "solver_max_iters = " << cfg.solver.max_iters << '\n';
  os << "solver_tol = " << format_double(cfg.solver.tol) << '\n';
  os << "solver_step = " << format_double(cfg.solver.step) << '\n';
  os << "solver_step_rule = " << (cfg.solver.step_rule == StepRule::Fixed ? "fixed" : "backtracking") << '\n';
  os << "plot_script = " << (cfg.plot_script ? "true" : "false") << '\n';

  const auto& env = cfg.environment;
  os << "\n[environment]\ntype = " << env.type_name() << '\n';
  switch (env.type) {
    case EnvironmentType::Orr:
      os << "n = " << env.orr.n << "\nk = " << env.orr.k << "\nC = " << format_double(env.orr.C)
         << "\nb = " << format_double(env.orr.b) << "\ndrift = " << (env.orr.drift == Drift::Log ? "log" : "sqrt")
         << '\n';
      break;
    case EnvironmentType::Slater:
      os << "eps = " << format_double(env.slater.eps) << "\ndrift_cap = " << format_double(env.slater.drift_cap)
         << '\n';
      break;
    case EnvironmentType::Network: {
      const auto& n = env.network;
      os << "J = " << n.J << "\nK = " << n.K << '\n';
      if (!n.incidence.empty()) {
        os << "incidence = ";
        for (std::size_t r = 0; r < n.incidence.size(); ++r) os << (r ? "; " : "") << join_numbers(n.incidence[r]);
        os << '\n';
      }
      if (!n.bandwidth.empty()) os << "bandwidth = " << join_numbers(n.bandwidth) << '\n';
      if (!n.capacity.empty()) os << "capacity = " << join_numbers(n.capacity) << '\n';
      os << "arrival_base = " << format_double(n.arrival_base) << "\narrival_amplitude = "
         << format_double(n.arrival_amplitude) << "\narrival_noise = " << format_double(n.arrival_noise)
         << "\narrival_period = " << format_double(n.arrival_period) << '\n';
      os << "power_quad = " << format_double(n.power_quad_lo) << ", " << format_double(n.power_quad_hi) << '\n';
      os << "power_lin = " << format_double(n.power_lin_lo) << ", " << format_double(n.power_lin_hi) << '\n';
      os << "link_quad = " << format_double(n.link_quad_lo) << ", " << format_double(n.link_quad_hi) << '\n';
      os << "link_lin = " << format_double(n.link_lin_lo) << ", " << format_double(n.link_lin_hi) << '\n';
      os << "cost_step = " << format_double(n.cost_step) << '\n';
      break;
    }
    case EnvironmentType::JobSched: {
      const auto& j = env.jobsched;
      if (!j.cores.empty()) os << "cores = " << ints(j.cores) << '\n';
      if (!j.jobs.empty()) {
        os << "jobs = ";
        for (std::size_t i = 0; i < j.jobs.size(); ++i)
          os << (i ? ", " : "") << j.jobs[i].arrival << ':' << j.jobs[i].demand << ':' << j.jobs[i].duration;
        os << '\n';
      }
      os << "num_jobs = " << j.num_jobs << "\nmax_demand = " << j.max_demand << "\nmax_duration = " << j.max_duration
         << "\nnorm_order = " << format_double(j.norm_order) << '\n';
      break;
    }
  }
  for (const auto& a : cfg.algorithms) {
    if (a.name == "slater") {
      os << "\n[algorithm slater]\na = " << format_double(a.slater_a) << '\n';
    } else if (a.eta || a.mu) {
      os << "\n[algorithm " << a.name << "]\n";
      if (a.eta) os << "eta = " << format_double(*a.eta) << '\n';
      if (a.mu) os << "mu = " << format_double(*a.mu) << '\n';
    }
  }
  return os.str();
}

std::uint64_t instance_seed(std::uint64_t seed, int horizon) {
  return mix_seed(seed, static_cast<std::uint64_t>(horizon));
}

std::uint64_t tuple_seed(std::uint64_t seed, int horizon, std::size_t algorithm_index) {
  return mix_seed(seed, static_cast<std::uint64_t>(horizon), static_cast<std::uint64_t>(algorithm_index) + 1);
}

ProblemInstance build_instance(const EnvironmentSpec& env, int horizon, std::uint64_t seed) {
  switch (env.type) {
    case EnvironmentType::Orr: {
      auto c = env.orr;
      c.horizon = horizon;
      c.seed = seed;
      return orr_generate(c);
    }
    case EnvironmentType::Slater: {
      auto c = env.slater;
      c.horizon = horizon;
      c.seed = seed;
      return slater_instance(c);
    }
    case EnvironmentType::Network: {
      auto c = env.network;
      c.horizon = horizon;
      c.seed = seed;
      return network_instance(c);
    }
    case EnvironmentType::JobSched: {
      auto c = env.jobsched;
      c.horizon = horizon;
      c.seed = seed;
      return jobsched_instance(c);
    }
  }
  throw ConfigError("unknown environment type");
}

namespace {

// Shared, read-only data of one (environment, horizon, seed) family.
struct Family {
  int horizon = 0;
  std::uint64_t seed = 0;
  std::optional<ProblemInstance> instance;
  Comparator comparator;
  FunctionVariation vg;
  std::string error;
};

// (n, C) for the tabulated preset constants: the ORR pair count and box bound,
// otherwise the dimension and half the diameter.
std::pair<std::size_t, double> preset_scale(const EnvironmentSpec& env, const ProblemInstance& inst) {
  if (env.type == EnvironmentType::Orr) return {static_cast<std::size_t>(env.orr.n), env.orr.C};
  return {inst.dim, 0.5 * inst.constants.R};
}

std::unique_ptr<OnlineLearner> make_learner(const AlgorithmSpec& spec, const LearnerContext& ctx,
                                            std::pair<std::size_t, double> scale) {
  const auto& name = spec.name;
  if (name == "vqb_case1") return make_vqb_learner(GammaCase::Case1, ctx);
  if (name == "vqb_case2") return make_vqb_learner(GammaCase::Case2, ctx);
  if (name == "slater") return make_slater_learner(spec.slater_a, ctx);
  if (name == "doubling_vqb_case1" || name == "doubling_vqb_case2") {
    const GammaCase c = name == "doubling_vqb_case1" ? GammaCase::Case1 : GammaCase::Case2;
    LearnerFactory factory = [ctx, c](int epoch_horizon, const Vec& x1) {
      LearnerContext inner = ctx;
      inner.horizon = epoch_horizon;
      inner.x1 = x1;
      return make_vqb_learner(c, inner);
    };
    return make_doubling_learner(std::move(factory), ctx.x1, name);
  }
  PresetParams p = preset_params(name, ctx.horizon, scale.first, scale.second);
  if (spec.eta) p.eta = *spec.eta;
  if (spec.mu) p.mu = *spec.mu;
  return make_saddle_learner(p, ctx);
}

bool uses_minimizers(const std::string& name) { return name.find("vqb") != std::string::npos; }

}  // namespace

std::vector<TupleResult> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < cfg.algorithms.size(); ++i)
    if (opts.filter.empty() || cfg.algorithms[i].name == opts.filter) selected.push_back(i);
  if (!opts.filter.empty() && selected.empty())
    throw ConfigError("--filter '" + opts.filter + "' matches no configured algorithm");

  // Families are built one at a time; the comparator solve inside is parallel.
  std::vector<Family> families;
  for (int h : cfg.horizons)
    for (std::uint64_t s : cfg.seeds) {
      Family fam;
      fam.horizon = h;
      fam.seed = s;
      try {
        const std::uint64_t iseed = instance_seed(s, h);
        fam.instance = build_instance(cfg.environment, h, iseed);
        fam.comparator = compute_comparator(*fam.instance);
        fam.vg = function_variation(*fam.instance, cfg.vg_samples, iseed);
        // Learners that track x_t^* read the comparator sequence, so the
        // per-slot problem is solved once per family rather than per learner.
        if (!fam.instance->minimizers && cfg.minimizers == MinimizerSource::Exact)
          fam.instance->minimizers = fam.comparator.points;
      } catch (const std::exception& e) {
        fam.error = std::string("instance generation failed: ") + e.what();
      }
      families.push_back(std::move(fam));
    }

  const std::size_t per_family = selected.size();
  std::vector<TupleResult> results(families.size() * per_family);
  const long long n = static_cast<long long>(results.size());
  const int threads = opts.jobs > 0 ? opts.jobs : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long long idx = 0; idx < n; ++idx) {
    const auto& fam = families[static_cast<std::size_t>(idx) / per_family];
    const std::size_t algo_index = selected[static_cast<std::size_t>(idx) % per_family];
    const auto& spec = cfg.algorithms[algo_index];
    TupleResult& r = results[static_cast<std::size_t>(idx)];
    r.environment = cfg.environment.type_name();
    r.algorithm = spec.name;
    r.algorithm_index = algo_index;
    r.horizon = fam.horizon;
    r.seed = fam.seed;
    r.run_seed = tuple_seed(fam.seed, fam.horizon, algo_index);
    if (!fam.error.empty()) {
      r.error = fam.error;
      continue;
    }
    try {
      const auto& inst = *fam.instance;
      LearnerContext ctx;
      ctx.horizon = inst.horizon;
      ctx.constants = inst.constants;
      ctx.x1 = project(inst.set_at(1), Vec(inst.dim, 0.0));
      ctx.num_constraints = inst.num_constraints;
      ctx.solver = cfg.solver;
      ctx.minimizers = cfg.minimizers;
      auto learner = make_learner(spec, ctx, preset_scale(cfg.environment, inst));
      r.trajectory = run_online(*learner, inst, cfg.minimizers == MinimizerSource::Exact);
      r.trajectory.seed = r.run_seed;
      if (!uses_minimizers(spec.name)) r.minimizer_source = "none";
      else if (cfg.minimizers == MinimizerSource::Solver) r.minimizer_source = "solver";
      else r.minimizer_source = fam.comparator.exact ? "exact" : "solver";
      r.trajectory.minimizer_source = r.minimizer_source;
      const int T = inst.horizon;
      const int lo = std::max(1, static_cast<int>(std::floor(cfg.window_lo * T)));
      const int hi = std::max(lo, static_cast<int>(std::lround(cfg.window_hi * T)));
      r.metrics = compute_metrics(r.trajectory, fam.comparator, fam.vg, {lo, hi});
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  }
  return results;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> trajectory_header(std::size_t num_constraints) {
  std::vector<std::string> h = {"t", "loss", "regret_cum", "regret_avg"};
  for (std::size_t k = 1; k <= num_constraints; ++k) h.push_back("vio" + std::to_string(k) + "_cum");
  for (const char* c : {"vio_max_avg", "lambda_norm", "alpha", "gamma", "residual"}) h.emplace_back(c);
  return h;
}

std::vector<std::string> summary_header() {
  return {"environment",      "algorithm",         "horizon",     "seed",          "run_seed",
          "status",           "num_constraints",   "regret_cum",  "regret_avg",    "vio_max_cum",
          "vio_max_avg",      "max_lambda_norm",   "V_x",         "V_g",           "V_g_analytic",
          "regret_exponent",  "vio_exponent",      "comparator_max_violation",     "minimizer_source",
          "unconverged_rounds", "max_invariant_violation", "max_residual", "error"};
}

namespace {

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

// Keeps free text inside one CSV cell.
std::string sanitize(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = c == ',' ? ';' : ' ';
  return s;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

constexpr const char* kPlotScript = R"(# Plots Regret(t)/t and max_k Vio_k(t)/t for every trajectory CSV here.
import glob
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

here = os.path.dirname(os.path.abspath(__file__))
files = sorted(f for f in glob.glob(os.path.join(here, "*.csv")) if not f.endswith(("summary.csv", "instances.csv")))
if not files:
    sys.exit("no trajectory CSVs")
fig, (ax_r, ax_v) = plt.subplots(1, 2, figsize=(11, 4))
for f in files:
    d = pd.read_csv(f)
    label = os.path.basename(f)[:-4]
    ax_r.plot(d["t"], d["regret_avg"], label=label)
    ax_v.plot(d["t"], d["vio_max_avg"], label=label)
ax_r.set_xlabel("t"); ax_r.set_ylabel("Regret(t)/t")
ax_v.set_xlabel("t"); ax_v.set_ylabel("max_k Vio_k(t)/t")
ax_r.legend(fontsize=6)
fig.tight_layout()
fig.savefig(os.path.join(here, "curves.png"), dpi=150)
)";

}  // namespace

std::vector<std::filesystem::path> write_csv(std::span<const TupleResult> results, const std::filesystem::path& dir,
                                             bool plot_script) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;

  for (const auto& r : results) {
    if (!r.ok) continue;
    const auto path = dir / (r.environment + "_" + r.algorithm + "_T" + std::to_string(r.horizon) + "_seed" +
                             std::to_string(r.seed) + ".csv");
    auto out = open_out(path);
    const std::size_t K = r.trajectory.num_constraints;
    out << join(trajectory_header(K)) << '\n';
    const auto vmax = max_violation_series(r.metrics);
    for (std::size_t t = 0; t < r.trajectory.rounds.size(); ++t) {
      const auto& rec = r.trajectory.rounds[t];
      std::vector<std::string> row = {std::to_string(t + 1), format_double(rec.loss),
                                      format_double(r.metrics.regret_cum[t]), format_double(r.metrics.regret_avg[t])};
      for (std::size_t k = 0; k < K; ++k) row.push_back(format_double(r.metrics.vio_cum[k][t]));
      row.push_back(format_double(vmax[t] / static_cast<double>(t + 1)));
      row.push_back(format_double(rec.lambda_norm));
      row.push_back(format_double(rec.alpha));
      row.push_back(format_double(rec.gamma));
      row.push_back(format_double(rec.residual));
      out << join(row) << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
    written.push_back(path);
  }

  const auto summary = dir / "summary.csv";
  auto out = open_out(summary);
  out << join(summary_header()) << '\n';
  for (const auto& r : results) {
    std::vector<std::string> row = {r.environment, r.algorithm, std::to_string(r.horizon), std::to_string(r.seed),
                                    std::to_string(r.run_seed), r.ok ? "ok" : "failed"};
    if (r.ok) {
      const auto& m = r.metrics;
      const auto& tr = r.trajectory;
      const double T = static_cast<double>(tr.length());
      const auto vmax = max_violation_series(m);
      double lam = 0.0;
      for (const auto& rec : tr.rounds) lam = std::max(lam, rec.lambda_norm);
      row.push_back(std::to_string(tr.num_constraints));
      row.push_back(format_double(m.regret_cum.back()));
      row.push_back(format_double(m.regret_cum.back() / T));
      row.push_back(format_double(vmax.back()));
      row.push_back(format_double(vmax.back() / T));
      row.push_back(format_double(lam));
      row.push_back(format_double(m.V_x));
      row.push_back(format_double(m.V_g.value));
      row.push_back(m.V_g.analytic ? "true" : "false");
      row.push_back(m.regret_exponent ? format_double(m.regret_exponent->slope) : "n/a");
      row.push_back(m.vio_exponent ? format_double(m.vio_exponent->slope) : "n/a");
      row.push_back(format_double(m.comparator_max_violation));
      row.push_back(r.minimizer_source);
      row.push_back(std::to_string(tr.unconverged_rounds));
      row.push_back(format_double(tr.max_invariant_violation));
      row.push_back(format_double(tr.max_residual()));
      row.push_back("");
    } else {
      for (int i = 0; i < 16; ++i) row.emplace_back();
      row.push_back(sanitize(r.error));
    }
    out << join(row) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + summary.string() + "'");
  written.push_back(summary);

  if (plot_script) {
    const auto path = dir / "plot.py";
    auto py = open_out(path);
    py << kPlotScript;
    written.push_back(path);
  }
  return written;
}

SummaryRow summarize(const TupleResult& r) {
  SummaryRow s;
  s.environment = r.environment;
  s.algorithm = r.algorithm;
  s.horizon = r.horizon;
  s.seed = r.seed;
  s.status = r.ok ? "ok" : "failed";
  if (r.ok) {
    const double T = static_cast<double>(r.trajectory.length());
    s.regret_avg = r.metrics.regret_cum.back() / T;
    s.vio_max_avg = max_violation_series(r.metrics).back() / T;
    if (r.metrics.regret_exponent) s.regret_exponent = r.metrics.regret_exponent->slope;
    if (r.metrics.vio_exponent) s.vio_exponent = r.metrics.vio_exponent->slope;
  }
  return s;
}

std::vector<SummaryRow> read_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path.string() + "' is empty");
  const auto header = split(line, ',');
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("'" + path.string() + "' has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_env = col("environment"), c_alg = col("algorithm"), c_h = col("horizon"), c_seed = col("seed"),
             c_status = col("status"), c_r = col("regret_avg"), c_v = col("vio_max_avg"),
             c_re = col("regret_exponent"), c_ve = col("vio_exponent");
  std::vector<SummaryRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " cells");
    SummaryRow s;
    s.environment = cells[c_env];
    s.algorithm = cells[c_alg];
    s.horizon = to_number<int>(cells[c_h]).value_or(0);
    s.seed = to_number<std::uint64_t>(cells[c_seed]).value_or(0);
    s.status = cells[c_status];
    if (s.status == "ok") {
      auto r = to_number<double>(cells[c_r]);
      auto v = to_number<double>(cells[c_v]);
      if (!r || !v)
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad regret/violation value");
      s.regret_avg = *r;
      s.vio_max_avg = *v;
      s.regret_exponent = to_number<double>(cells[c_re]);
      s.vio_exponent = to_number<double>(cells[c_ve]);
    }
    rows.push_back(std::move(s));
  }
  return rows;
}

std::string compare_table(std::span<const SummaryRow> rows) {
  struct Group {
    std::string environment, algorithm;
    int horizon = 0;
    int runs = 0, failed = 0;
    std::vector<double> regret, vio, regret_exp, vio_exp;
  };
  std::vector<Group> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.algorithm == r.algorithm && g.horizon == r.horizon && g.environment == r.environment;
    });
    if (it == groups.end()) {
      Group g;
      g.environment = r.environment;
      g.algorithm = r.algorithm;
      g.horizon = r.horizon;
      groups.push_back(std::move(g));
      it = groups.end() - 1;
    }
    ++it->runs;
    if (r.status != "ok") {
      ++it->failed;
      continue;
    }
    it->regret.push_back(r.regret_avg);
    it->vio.push_back(r.vio_max_avg);
    if (r.regret_exponent) it->regret_exp.push_back(*r.regret_exponent);
    if (r.vio_exponent) it->vio_exp.push_back(*r.vio_exponent);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::numeric_limits<double>::infinity() : s / static_cast<double>(v.size());
  };
  std::stable_sort(groups.begin(), groups.end(), [&](const Group& a, const Group& b) {
    const double ma = mean(a.regret), mb = mean(b.regret);
    if (ma != mb) return ma < mb;
    if (a.algorithm != b.algorithm) return a.algorithm < b.algorithm;
    if (a.environment != b.environment) return a.environment < b.environment;
    return a.horizon < b.horizon;
  });

  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  auto stat = [&](const std::vector<double>& v) {
    if (v.empty()) return std::string("n/a");
    return num(mean(v)) + " [" + num(*std::min_element(v.begin(), v.end())) + ", " +
           num(*std::max_element(v.begin(), v.end())) + "]";
  };
  auto avg = [&](const std::vector<double>& v) { return v.empty() ? std::string("n/a") : num(mean(v)); };

  std::vector<std::vector<std::string>> table = {{"environment", "algorithm", "T", "runs", "failed",
                                                  "regret(T)/T mean [min, max]", "vio(T)/T mean [min, max]",
                                                  "regret_exp", "vio_exp"}};
  for (const auto& g : groups)
    table.push_back({g.environment, g.algorithm, std::to_string(g.horizon), std::to_string(g.runs),
                     std::to_string(g.failed), stat(g.regret), stat(g.vio), avg(g.regret_exp), avg(g.vio_exp)});
  std::vector<std::size_t> width(table[0].size(), 0);
  for (const auto& row : table)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (std::size_t c = 0; c < table[r].size(); ++c) {
      out += table[r][c];
      if (c + 1 < table[r].size()) out += std::string(width[c] - table[r][c].size() + 2, ' ');
    }
    out += '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out += std::string(total - 2, '-') + '\n';
    }
  }
  return out;
}

}  // namespace vqoco
