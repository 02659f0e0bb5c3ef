#include "mdpstat/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mdpstat/approx_vi.hpp"
#include "mdpstat/errors.hpp"
#include "mdpstat/estimation.hpp"
#include "mdpstat/inference.hpp"
#include "mdpstat/io.hpp"

namespace mdpstat {

namespace {

using nlohmann::json;

std::string pair_label(const char* name, int s, int a, const std::string& suffix = "") {
  std::ostringstream out;
  out << name << '(' << s << ',' << a << ')' << suffix;
  return out.str();
}

double binomial_half_width(double p, std::int64_t m) {
  if (m <= 0) {
    return 0.0;
  }
  return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(m));
}

double mean_half_width(const std::vector<double>& xs) {
  const std::size_t m = xs.size();
  if (m < 2) {
    return 0.0;
  }
  double mean = 0.0;
  for (const double x : xs) {
    mean += x;
  }
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (const double x : xs) {
    var += (x - mean) * (x - mean);
  }
  var /= static_cast<double>(m - 1);
  return 1.96 * std::sqrt(var / static_cast<double>(m));
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) {
    return 0.0;
  }
  double mean = 0.0;
  for (const double x : xs) {
    mean += x;
  }
  return mean / static_cast<double>(xs.size());
}

/// Runs body(rep) for every replication index on a small worker pool.  Each
/// rep writes to its own slot, so aggregation afterwards is a deterministic
/// fold in index order regardless of thread count.
void parallel_for_reps(int reps, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, reps));
  if (threads == 1) {
    for (int r = 0; r < reps; ++r) {
      body(r);
    }
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= reps) {
        return;
      }
      try {
        body(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) {
          first_error = std::current_exception();
        }
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int i = 0; i < threads; ++i) {
    pool.emplace_back(worker);
  }
  for (auto& t : pool) {
    t.join();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
}

std::uint64_t agent_stream(int agent_idx, int rep) {
  return (static_cast<std::uint64_t>(agent_idx) << 32) | static_cast<std::uint64_t>(rep);
}

Policy fixed_policy_from_agent(const TabularMdp& env, const AgentConfig& agent) {
  if (agent.type == "re") {
    if (env.m_a != 2) {
      throw ConfigError("re agents need a two-action environment");
    }
    return random_explore_policy(env.m_s, agent.p_right);
  }
  if (agent.type == "policy") {
    Policy pi{agent.probs};
    if (pi.m_s() != env.m_s || pi.m_a() != env.m_a) {
      throw ConfigError("policy table has wrong shape");
    }
    pi.validate();
    return pi;
  }
  throw ConfigError("this experiment needs a fixed exploration policy (re or policy)");
}

std::vector<std::int64_t> staged_batches(std::int64_t n, double fraction, int stages) {
  const auto warm = static_cast<std::int64_t>(fraction * static_cast<double>(n));
  if (warm < 1 || warm >= n) {
    throw ConfigError("warm fraction leaves no room for a second stage");
  }
  std::vector<std::int64_t> batches{warm};
  const std::int64_t rest = n - warm;
  const int later = stages - 1;
  for (int k = 0; k < later; ++k) {
    batches.push_back(rest / later + (k == later - 1 ? rest % later : 0));
  }
  return batches;
}

/// One agent, one replication: the full two-stage protocol on a single
/// chain, returning the dataset the final estimates are built from.  Throws
/// UnvisitedError when the staged allocation cannot be re-solved.
TrajectoryDataset run_agent(const TabularMdp& env, const AgentConfig& agent,
                            const WarmConfig& warm, std::int64_t n, std::uint64_t seed,
                            std::uint64_t stream) {
  RngStream rng(seed, stream);

  if (agent.type == "re" || agent.type == "policy") {
    const Policy pi = fixed_policy_from_agent(env, agent);
    TrajectoryDataset data(env.m_s, env.m_a);
    collect_steps(data, env, pi, n, rng);
    return data;
  }

  if (agent.type == "qocba" || agent.type == "qocba-chi") {
    QocbaOptions opts;
    opts.stages = agent.stages;
    opts.batches = staged_batches(n, warm.fraction, agent.stages);
    opts.pi0 = random_explore_policy(env.m_s, warm.p_right);
    opts.chi_objective = agent.type == "qocba-chi";
    opts.solver = agent.solver;
    return run_qocba(env, opts, seed, stream).data;
  }

  const auto warm_len = static_cast<std::int64_t>(warm.fraction * static_cast<double>(n));
  TrajectoryDataset data(env.m_s, env.m_a);
  int state = rng.categorical(env.rho);
  if (warm_len > 0) {
    state = collect_steps(data, env, random_explore_policy(env.m_s, warm.p_right), warm_len,
                          rng, state);
  }
  const std::int64_t rest = n - warm_len;

  if (agent.type == "eps-greedy") {
    EpsGreedyOptions opts;
    opts.eps = agent.eps;
    opts.refreshes = agent.refreshes;
    run_eps_greedy(data, env, opts, rest, rng, state);
    return data;
  }
  if (agent.type == "psrl") {
    PsrlAgent psrl(env.m_s, env.m_a, env.gamma, agent.prior);
    for (const auto& rec : data.records()) {
      psrl.observe(rec.s, rec.a, rec.r, rec.s_next);
    }
    const std::int64_t chunk = std::max<std::int64_t>(1, rest / std::max(1, agent.episodes));
    std::int64_t used = 0;
    while (used < rest) {
      const std::int64_t len = std::min(chunk, rest - used);
      state = psrl.run_episode(data, env, len, rng, state);
      used += len;
    }
    return data;
  }
  throw ConfigError("unknown agent type: " + agent.type);
}

json parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config " + path);
  }
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse config " + path + ": " + e.what());
  }
}

AgentConfig agent_from_json(const json& a) {
  AgentConfig agent;
  agent.type = a.at("type").get<std::string>();
  agent.label = a.value("label", std::string());
  agent.p_right = a.value("p_right", agent.p_right);
  agent.eps = a.value("eps", agent.eps);
  agent.refreshes = a.value("refreshes", agent.refreshes);
  agent.episodes = a.value("episodes", agent.episodes);
  agent.prior.dirichlet_weight = a.value("dirichlet_weight", agent.prior.dirichlet_weight);
  agent.prior.mean0 = a.value("mean0", agent.prior.mean0);
  agent.prior.var0 = a.value("var0", agent.prior.var0);
  agent.prior.obs_var = a.value("obs_var", agent.prior.obs_var);
  agent.stages = a.value("stages", agent.stages);
  agent.solver.eta = a.value("eta", agent.solver.eta);
  agent.solver.rel_tol = a.value("rel_tol", agent.solver.rel_tol);
  if (a.contains("probs")) {
    const auto& rows = a.at("probs");
    const int m_s = static_cast<int>(rows.size());
    const int m_a = m_s > 0 ? static_cast<int>(rows[0].size()) : 0;
    agent.probs.resize(m_s, m_a);
    for (int s = 0; s < m_s; ++s) {
      for (int j = 0; j < m_a; ++j) {
        agent.probs(s, j) = rows[s][j].get<double>();
      }
    }
  }
  return agent;
}

}  // namespace

std::string AgentConfig::display() const {
  if (!label.empty()) {
    return label;
  }
  char buf[64];
  if (type == "re") {
    std::snprintf(buf, sizeof(buf), "re(%g)", p_right);
  } else if (type == "eps-greedy") {
    std::snprintf(buf, sizeof(buf), "eps-greedy(%g)", eps);
  } else if (type == "psrl") {
    std::snprintf(buf, sizeof(buf), "psrl(%d)", episodes);
  } else if (type == "qocba" || type == "qocba-chi") {
    std::snprintf(buf, sizeof(buf), "%s(%d)", type.c_str(), stages);
  } else {
    return type;
  }
  return buf;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  const json doc = parse_config_file(path);
  ExperimentConfig cfg;
  try {
    cfg.kind = doc.at("kind").get<std::string>();
    if (doc.contains("env")) {
      const auto& env = doc.at("env");
      const std::string type = env.value("type", std::string("riverswim"));
      if (type == "file") {
        // Relative model paths resolve against the config file's directory.
        std::filesystem::path model_path = env.at("path").get<std::string>();
        if (model_path.is_relative()) {
          model_path = std::filesystem::path(path).parent_path() / model_path;
        }
        cfg.env_path = model_path.string();
      } else if (type == "riverswim") {
        cfg.river.m_s = env.value("m_s", cfg.river.m_s);
        cfg.river.p_right_success = env.value("p_right_success", cfg.river.p_right_success);
        cfg.river.p_stay = env.value("p_stay", cfg.river.p_stay);
        cfg.river.p_left_slip = env.value("p_left_slip", cfg.river.p_left_slip);
        cfg.river.r_l = env.value("r_l", cfg.river.r_l);
        cfg.river.r_r = env.value("r_r", cfg.river.r_r);
        cfg.river.reward_noise_var = env.value("reward_noise_var", cfg.river.reward_noise_var);
        cfg.river.gamma = env.value("gamma", cfg.river.gamma);
      } else {
        throw ConfigError("unknown env type: " + type);
      }
    }
    cfg.n = doc.value("n", cfg.n);
    cfg.reps = doc.value("reps", cfg.reps);
    cfg.alpha = doc.value("alpha", cfg.alpha);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.threads = doc.value("threads", cfg.threads);
    cfg.output = doc.value("output", cfg.output);
    if (doc.contains("warm")) {
      cfg.warm.fraction = doc.at("warm").value("fraction", cfg.warm.fraction);
      cfg.warm.p_right = doc.at("warm").value("p_right", cfg.warm.p_right);
    }
    if (doc.contains("approx")) {
      cfg.approx = true;
      cfg.stride = doc.at("approx").value("stride", 0);
      if (doc.at("approx").contains("knots")) {
        cfg.knots = doc.at("approx").at("knots").get<std::vector<int>>();
      }
    }
    if (doc.contains("agents")) {
      for (const auto& a : doc.at("agents")) {
        cfg.agents.push_back(agent_from_json(a));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("bad config " + path + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

TabularMdp ExperimentConfig::build_env() const {
  if (!env_path.empty()) {
    return load_mdp(env_path);
  }
  return build_riverswim(river);
}

void ExperimentConfig::validate() const {
  if (kind != "solve" && kind != "coverage" && kind != "select" && kind != "ci-length" &&
      kind != "qocba-run") {
    throw ConfigError("unknown experiment kind: " + kind);
  }
  if (n < 1) {
    throw ConfigError("n must be at least 1");
  }
  if (reps < 1) {
    throw ConfigError("reps must be at least 1");
  }
  if (alpha <= 0.0 || alpha >= 1.0) {
    throw ConfigError("alpha must lie in (0,1)");
  }
  if (warm.fraction < 0.0 || warm.fraction >= 1.0) {
    throw ConfigError("warm fraction must lie in [0,1)");
  }
  if (kind != "solve" && agents.empty()) {
    throw ConfigError("experiment needs at least one agent");
  }
  if ((kind == "coverage" || kind == "qocba-run") && agents.size() != 1) {
    throw ConfigError(kind + " takes exactly one agent");
  }
}

std::string ResultTable::to_csv() const {
  std::ostringstream out;
  out << "quantity,estimate,half_width,na_count\n";
  for (const auto& row : rows) {
    out << row.quantity << ',' << format_sig6(row.estimate) << ','
        << format_sig6(row.half_width) << ',' << row.na_count << '\n';
  }
  return out.str();
}

int resolve_threads(int requested) {
  if (requested > 0) {
    return requested;
  }
  if (const char* env = std::getenv("MDPSTAT_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed > 0) {
      return parsed;
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

ResultTable solve_summary(const ExperimentConfig& cfg) {
  const TabularMdp env = cfg.build_env();
  const QTable q = solve_q(env);
  const Eigen::VectorXd v = q.state_max();
  ResultTable table;
  table.replications = 0;
  for (int s = 0; s < env.m_s; ++s) {
    for (int a = 0; a < env.m_a; ++a) {
      table.rows.push_back({pair_label("q", s, a), q(s, a), 0.0, 0});
    }
  }
  for (int s = 0; s < env.m_s; ++s) {
    table.rows.push_back({"v(" + std::to_string(s) + ")", v[s], 0.0, 0});
  }
  for (int s = 0; s < env.m_s; ++s) {
    table.rows.push_back(
        {"a_star(" + std::to_string(s) + ")", static_cast<double>(q.best_action(s)), 0.0, 0});
  }
  table.rows.push_back({"chi", env.rho.dot(v), 0.0, 0});
  return table;
}

namespace {

struct CoverageRep {
  bool na = true;
  std::vector<char> q_cover;
  std::vector<char> v_cover;
  char chi_cover = 0;
};

void append_indicator_rows(ResultTable& table, const char* name,
                           const std::vector<CoverageRep>& reps, int count,
                           const std::function<const std::vector<char>&(const CoverageRep&)>&
                               select,
                           int m_a) {
  const std::int64_t total = static_cast<std::int64_t>(reps.size());
  std::int64_t used = 0;
  for (const auto& rep : reps) {
    if (!rep.na) {
      ++used;
    }
  }
  const std::int64_t na = total - used;

  std::vector<double> per_rep_avg;
  per_rep_avg.reserve(used);
  for (int idx = 0; idx < count; ++idx) {
    double hits = 0.0;
    for (const auto& rep : reps) {
      if (!rep.na) {
        hits += select(rep)[idx];
      }
    }
    const double p = used > 0 ? hits / static_cast<double>(used) : 0.0;
    const std::string label =
        m_a > 0 ? pair_label(name, idx / m_a, idx % m_a) : std::string(name) + "(" +
                                                               std::to_string(idx) + ")";
    table.rows.push_back({label + "_coverage", p, binomial_half_width(p, used), na});
  }
  for (const auto& rep : reps) {
    if (rep.na) {
      continue;
    }
    double avg = 0.0;
    for (int idx = 0; idx < count; ++idx) {
      avg += select(rep)[idx];
    }
    per_rep_avg.push_back(avg / count);
  }
  table.rows.push_back({std::string(name) + "_coverage_avg", mean_of(per_rep_avg),
                        mean_half_width(per_rep_avg), na});
}

}  // namespace

ResultTable coverage_experiment(const ExperimentConfig& cfg) {
  const TabularMdp env = cfg.build_env();
  const Policy pi = fixed_policy_from_agent(env, cfg.agents.at(0));
  const int n_pairs = env.n_pairs();
  const double z = normal_quantile(1.0 - cfg.alpha / 2.0);
  const int threads = resolve_threads(cfg.threads);

  CovarianceOptions cov_opts;
  cov_opts.force = true;  // plug-in ties break to the lowest index

  // Ground truth the intervals are checked against.
  RepresentativeSet s0;
  GeneralizationMap map;
  Eigen::VectorXd q_true(n_pairs);
  Eigen::VectorXd v_true(env.m_s);
  if (cfg.approx) {
    s0 = cfg.knots.empty() ? stride_representative_set(env.m_s, cfg.stride)
                           : RepresentativeSet{cfg.knots};
    map = interp_jacobian(env.m_s, env.m_a, s0);
    const ApproxSolution sol = approx_solve_q(env.reward_means(), env.transition, env.gamma,
                                              env.m_s, env.m_a, s0, map);
    q_true = sol.q.values;
    v_true = sol.q.state_max();
  } else {
    const QTable q = solve_q(env);
    q_true = q.values;
    v_true = q.state_max();
  }
  const double chi_true = env.rho.dot(v_true);

  std::vector<CoverageRep> results(cfg.reps);
  parallel_for_reps(cfg.reps, threads, [&](int rep) {
    CoverageRep& out = results[rep];
    RngStream rng(cfg.seed, static_cast<std::uint64_t>(rep));
    TrajectoryDataset data(env.m_s, env.m_a);
    collect_steps(data, env, pi, cfg.n, rng);
    const EmpiricalModel est = empirical_model(data);

    try {
      Eigen::VectorXd q_hat(n_pairs);
      Eigen::MatrixXd sigma;
      Eigen::VectorXd v_hat(env.m_s);
      Eigen::VectorXd v_var(env.m_s);
      double chi_hat = 0.0;
      double chi_var = 0.0;
      if (cfg.approx) {
        const ModelParams params = approx_params_from_empirical(est, env.gamma, s0);
        const ApproxSolution sol = approx_solve_q(params.mu_r, params.p, params.gamma,
                                                  env.m_s, env.m_a, s0, map);
        sigma = approx_q_covariance(params, s0, map, cov_opts);
        q_hat = sol.q.values;
        const GreedyResult greedy = greedy_policy(sol.q, 0.0);
        chi_hat = 0.0;
        chi_var = 0.0;
        for (int s = 0; s < env.m_s; ++s) {
          const int k = pair_index(s, sol.q.best_action(s), env.m_a);
          v_hat[s] = sol.q(s, sol.q.best_action(s));
          v_var[s] = sigma(k, k);
          chi_hat += env.rho[s] * v_hat[s];
          for (int s2 = 0; s2 < env.m_s; ++s2) {
            const int k2 = pair_index(s2, sol.q.best_action(s2), env.m_a);
            chi_var += env.rho[s] * env.rho[s2] * sigma(k, k2);
          }
        }
        (void)greedy;
      } else {
        const ModelParams params = ModelParams::from_empirical(est, env.gamma);
        const CovarianceReport report =
            covariance_report(params, env.rho, PluginInfo::from_data(est.n), cov_opts);
        q_hat = report.q.values;
        sigma = report.sigma_q;
        for (int s = 0; s < env.m_s; ++s) {
          v_hat[s] = report.v_star.values[s];
          v_var[s] = report.sigma_v(s, s);
        }
        chi_hat = env.rho.dot(report.v_star.values);
        chi_var = report.sigma_chi;
      }

      out.q_cover.resize(n_pairs);
      for (int k = 0; k < n_pairs; ++k) {
        const double hw = z * std::sqrt(std::max(0.0, sigma(k, k)) / cfg.n);
        out.q_cover[k] = std::abs(q_hat[k] - q_true[k]) <= hw ? 1 : 0;
      }
      out.v_cover.resize(env.m_s);
      for (int s = 0; s < env.m_s; ++s) {
        const double hw = z * std::sqrt(std::max(0.0, v_var[s]) / cfg.n);
        out.v_cover[s] = std::abs(v_hat[s] - v_true[s]) <= hw ? 1 : 0;
      }
      const double chi_hw = z * std::sqrt(std::max(0.0, chi_var) / cfg.n);
      out.chi_cover = std::abs(chi_hat - chi_true) <= chi_hw ? 1 : 0;
      out.na = false;
    } catch (const UnvisitedError&) {
      out.na = true;
    }
  });

  ResultTable table;
  table.replications = cfg.reps;
  append_indicator_rows(table, "q", results, n_pairs,
                        [](const CoverageRep& r) -> const std::vector<char>& {
                          return r.q_cover;
                        },
                        env.m_a);
  append_indicator_rows(table, "v", results, env.m_s,
                        [](const CoverageRep& r) -> const std::vector<char>& {
                          return r.v_cover;
                        },
                        0);
  std::int64_t used = 0;
  double chi_hits = 0.0;
  for (const auto& rep : results) {
    if (!rep.na) {
      ++used;
      chi_hits += rep.chi_cover;
    }
  }
  const double chi_p = used > 0 ? chi_hits / static_cast<double>(used) : 0.0;
  table.rows.push_back({"chi_coverage", chi_p, binomial_half_width(chi_p, used),
                        static_cast<std::int64_t>(cfg.reps) - used});
  return table;
}

ResultTable correct_selection_experiment(const ExperimentConfig& cfg) {
  const TabularMdp env = cfg.build_env();
  const QTable q_true = solve_q(env);
  const GreedyResult truth = greedy_policy(q_true, 1e-9);
  if (!truth.unique) {
    throw ConfigError("selection target is ambiguous: true argmax not unique");
  }
  std::vector<int> best(env.m_s);
  for (int s = 0; s < env.m_s; ++s) {
    best[s] = q_true.best_action(s);
  }
  const int threads = resolve_threads(cfg.threads);

  ResultTable table;
  table.replications = cfg.reps;
  for (std::size_t a_idx = 0; a_idx < cfg.agents.size(); ++a_idx) {
    const AgentConfig& agent = cfg.agents[a_idx];
    std::vector<int> outcome(cfg.reps, -1);  // -1 NA, else 0/1
    parallel_for_reps(cfg.reps, threads, [&](int rep) {
      try {
        const TrajectoryDataset data = run_agent(env, agent, cfg.warm, cfg.n, cfg.seed,
                                                 agent_stream(static_cast<int>(a_idx), rep));
        const EmpiricalModel est = empirical_model(data);
        if (!est.unvisited.empty()) {
          return;  // stays NA
        }
        const ModelParams params = ModelParams::from_empirical(est, env.gamma);
        const QTable q_hat = solve_q(params.mu_r, params.p, params.gamma, env.m_s, env.m_a);
        int ok = 1;
        for (int s = 0; s < env.m_s; ++s) {
          if (q_hat.best_action(s) != best[s]) {
            ok = 0;
            break;
          }
        }
        outcome[rep] = ok;
      } catch (const UnvisitedError&) {
        // stays NA
      }
    });
    std::int64_t used = 0;
    double hits = 0.0;
    for (const int o : outcome) {
      if (o >= 0) {
        ++used;
        hits += o;
      }
    }
    const double p = used > 0 ? hits / static_cast<double>(used) : 0.0;
    table.rows.push_back({"correct_selection(" + agent.display() + ")", p,
                          binomial_half_width(p, used),
                          static_cast<std::int64_t>(cfg.reps) - used});
  }
  return table;
}

ResultTable ci_length_experiment(const ExperimentConfig& cfg) {
  const TabularMdp env = cfg.build_env();
  const QTable q_true = solve_q(env);
  const Eigen::VectorXd v_true = q_true.state_max();
  const double chi_true = env.rho.dot(v_true);
  const int n_pairs = env.n_pairs();
  const double z = normal_quantile(1.0 - cfg.alpha / 2.0);
  const int threads = resolve_threads(cfg.threads);

  CovarianceOptions cov_opts;
  cov_opts.force = true;

  struct Rep {
    bool na = true;
    double q_len_avg = 0.0;
    double q_cover_avg = 0.0;
    double chi_len = 0.0;
    char chi_cover = 0;
  };

  ResultTable table;
  table.replications = cfg.reps;
  for (std::size_t a_idx = 0; a_idx < cfg.agents.size(); ++a_idx) {
    const AgentConfig& agent = cfg.agents[a_idx];
    std::vector<Rep> results(cfg.reps);
    parallel_for_reps(cfg.reps, threads, [&](int rep) {
      Rep& out = results[rep];
      try {
        const TrajectoryDataset data = run_agent(env, agent, cfg.warm, cfg.n, cfg.seed,
                                                 agent_stream(static_cast<int>(a_idx), rep));
        const EmpiricalModel est = empirical_model(data);
        const ModelParams params = ModelParams::from_empirical(est, env.gamma);
        const CovarianceReport report =
            covariance_report(params, env.rho, PluginInfo::from_data(est.n), cov_opts);
        double len_sum = 0.0;
        double cover_sum = 0.0;
        for (int k = 0; k < n_pairs; ++k) {
          const double hw = z * std::sqrt(std::max(0.0, report.sigma_q(k, k)) / cfg.n);
          len_sum += 2.0 * hw;
          cover_sum += std::abs(report.q.values[k] - q_true.values[k]) <= hw ? 1.0 : 0.0;
        }
        out.q_len_avg = len_sum / n_pairs;
        out.q_cover_avg = cover_sum / n_pairs;
        const double chi_hw = z * std::sqrt(std::max(0.0, report.sigma_chi) / cfg.n);
        out.chi_len = 2.0 * chi_hw;
        const double chi_hat = env.rho.dot(report.v_star.values);
        out.chi_cover = std::abs(chi_hat - chi_true) <= chi_hw ? 1 : 0;
        out.na = false;
      } catch (const UnvisitedError&) {
        out.na = true;
      }
    });

    std::vector<double> q_lens, q_covers, chi_lens;
    std::int64_t used = 0;
    double chi_hits = 0.0;
    for (const auto& r : results) {
      if (r.na) {
        continue;
      }
      ++used;
      q_lens.push_back(r.q_len_avg);
      q_covers.push_back(r.q_cover_avg);
      chi_lens.push_back(r.chi_len);
      chi_hits += r.chi_cover;
    }
    const std::int64_t na = static_cast<std::int64_t>(cfg.reps) - used;
    const std::string who = "(" + agent.display() + ")";
    const double chi_p = used > 0 ? chi_hits / static_cast<double>(used) : 0.0;
    table.rows.push_back(
        {"q_ci_length_avg" + who, mean_of(q_lens), mean_half_width(q_lens), na});
    table.rows.push_back(
        {"q_coverage_avg" + who, mean_of(q_covers), mean_half_width(q_covers), na});
    table.rows.push_back(
        {"chi_ci_length" + who, mean_of(chi_lens), mean_half_width(chi_lens), na});
    table.rows.push_back({"chi_coverage" + who, chi_p, binomial_half_width(chi_p, used), na});
  }
  return table;
}

ResultTable qocba_run(const ExperimentConfig& cfg) {
  const TabularMdp env = cfg.build_env();
  const AgentConfig& agent = cfg.agents.at(0);
  if (agent.type != "qocba" && agent.type != "qocba-chi") {
    throw ConfigError("qocba-run takes a qocba or qocba-chi agent");
  }
  QocbaOptions opts;
  opts.stages = agent.stages;
  opts.batches = staged_batches(cfg.n, cfg.warm.fraction, agent.stages);
  opts.pi0 = random_explore_policy(env.m_s, cfg.warm.p_right);
  opts.chi_objective = agent.type == "qocba-chi";
  opts.solver = agent.solver;
  opts.alpha = cfg.alpha;
  const QocbaResult res = run_qocba(env, opts, cfg.seed, 0);

  const double z = normal_quantile(1.0 - cfg.alpha / 2.0);
  ResultTable table;
  table.replications = 1;
  if (!res.allocations.empty()) {
    const Allocation& alloc = res.allocations.back();
    for (int s = 0; s < env.m_s; ++s) {
      for (int a = 0; a < env.m_a; ++a) {
        table.rows.push_back(
            {pair_label("alloc_w", s, a), alloc.w[pair_index(s, a, env.m_a)], 0.0, 0});
      }
    }
  }
  for (int s = 0; s < env.m_s; ++s) {
    for (int a = 0; a < env.m_a; ++a) {
      const int k = pair_index(s, a, env.m_a);
      table.rows.push_back({pair_label("q_hat", s, a), res.q_hat(s, a), 0.0, 0});
      table.rows.push_back(
          {pair_label("q_half_width", s, a),
           z * std::sqrt(std::max(0.0, res.report.sigma_q(k, k)) / res.model.n), 0.0, 0});
    }
  }
  const double chi_hat = env.rho.dot(res.report.v_star.values);
  table.rows.push_back({"chi_hat", chi_hat, 0.0, 0});
  table.rows.push_back(
      {"chi_half_width", z * std::sqrt(std::max(0.0, res.report.sigma_chi) / res.model.n), 0.0,
       0});
  return table;
}

}  // namespace mdpstat
