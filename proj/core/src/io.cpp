#include "mdpstat/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mdpstat/errors.hpp"

namespace mdpstat {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw IoError("cannot parse " + path + ": " + e.what());
  }
  return doc;
}

ScalarDistribution dist_from_json(const json& spec) {
  const std::string family = spec.at("family").get<std::string>();
  if (family == "deterministic") {
    return ScalarDistribution::deterministic(spec.at("mean").get<double>());
  }
  if (family == "gaussian") {
    return ScalarDistribution::gaussian(spec.at("mean").get<double>(),
                                        spec.at("variance").get<double>());
  }
  if (family == "bernoulli") {
    return ScalarDistribution::bernoulli_scaled(spec.at("scale").get<double>(),
                                                spec.at("prob").get<double>());
  }
  throw IoError("unknown distribution family: " + family);
}

json dist_to_json(const ScalarDistribution& dist) {
  json spec;
  switch (dist.family) {
    case DistFamily::Deterministic:
      spec["family"] = "deterministic";
      spec["mean"] = dist.mean;
      break;
    case DistFamily::Gaussian:
      spec["family"] = "gaussian";
      spec["mean"] = dist.mean;
      spec["variance"] = dist.variance;
      break;
    case DistFamily::BernoulliScaled:
      spec["family"] = "bernoulli";
      spec["scale"] = dist.scale;
      spec["prob"] = dist.prob;
      break;
  }
  return spec;
}

std::vector<ScalarDistribution> dist_table_from_json(const json& arr, int n,
                                                     const char* what) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != n) {
    throw IoError(std::string(what) + " table must have one entry per state-action pair");
  }
  std::vector<ScalarDistribution> table;
  table.reserve(arr.size());
  for (const auto& spec : arr) {
    table.push_back(dist_from_json(spec));
  }
  return table;
}

TabularMdp mdp_from_json(const json& doc, const std::string& path) {
  TabularMdp model;
  try {
    model.m_s = doc.at("m_s").get<int>();
    model.m_a = doc.at("m_a").get<int>();
    model.gamma = doc.at("gamma").get<double>();
  } catch (const json::exception& e) {
    throw IoError("bad MDP file " + path + ": " + e.what());
  }
  if (model.m_s <= 0 || model.m_a <= 0) {
    throw IoError("bad MDP file " + path + ": nonpositive dimensions");
  }
  const int n = model.m_s * model.m_a;

  const auto& rho = doc.at("rho");
  if (!rho.is_array() || static_cast<int>(rho.size()) != model.m_s) {
    throw IoError("rho must have one entry per state");
  }
  model.rho.resize(model.m_s);
  for (int s = 0; s < model.m_s; ++s) {
    model.rho[s] = rho[s].get<double>();
  }

  const auto& rows = doc.at("transition");
  if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
    throw IoError("transition must have one row per state-action pair");
  }
  model.transition.resize(n, model.m_s);
  for (int k = 0; k < n; ++k) {
    const auto& row = rows[k];
    if (!row.is_array() || static_cast<int>(row.size()) != model.m_s) {
      throw IoError("transition rows must have one entry per state");
    }
    double sum = 0.0;
    for (int s = 0; s < model.m_s; ++s) {
      const double p = row[s].get<double>();
      if (p < 0.0) {
        throw ModelError("transition probabilities must be nonnegative");
      }
      model.transition(k, s) = p;
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ModelError("transition row does not sum to 1");
    }
    model.transition.row(k) /= sum;
  }

  model.reward = dist_table_from_json(doc.at("rewards"), n, "rewards");
  model.validate();
  return model;
}

json mdp_to_json(const TabularMdp& model) {
  json doc;
  doc["m_s"] = model.m_s;
  doc["m_a"] = model.m_a;
  doc["gamma"] = model.gamma;
  doc["rho"] = std::vector<double>(model.rho.data(), model.rho.data() + model.rho.size());
  json rows = json::array();
  for (int k = 0; k < model.n_pairs(); ++k) {
    json row = json::array();
    for (int s = 0; s < model.m_s; ++s) {
      row.push_back(model.transition(k, s));
    }
    rows.push_back(std::move(row));
  }
  doc["transition"] = std::move(rows);
  json rewards = json::array();
  for (const auto& dist : model.reward) {
    rewards.push_back(dist_to_json(dist));
  }
  doc["rewards"] = std::move(rewards);
  return doc;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path);
  }
  out << text;
  if (!out) {
    throw IoError("write failed for " + path);
  }
}

void write_matrix(std::ostream& out, const char* name, const Eigen::MatrixXd& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) {
        out << ' ';
      }
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf;
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix(std::istream& in, const std::string& name) {
  std::string tag;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  if (!(in >> tag >> rows >> cols) || tag != name) {
    throw IoError("report is missing section " + name);
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(in >> m(i, j))) {
        throw IoError("report section " + name + " is truncated");
      }
    }
  }
  return m;
}

}  // namespace

TabularMdp load_mdp(const std::string& path) { return mdp_from_json(parse_file(path), path); }

void save_mdp(const TabularMdp& model, const std::string& path) {
  model.validate();
  write_text(path, mdp_to_json(model).dump(2) + "\n");
}

bool is_constrained_mdp_file(const std::string& path) {
  const json doc = parse_file(path);
  return doc.contains("costs") && doc.contains("budget");
}

ConstrainedMdp load_constrained_mdp(const std::string& path) {
  const json doc = parse_file(path);
  ConstrainedMdp cm;
  cm.base = mdp_from_json(doc, path);
  if (!doc.contains("costs") || !doc.contains("budget")) {
    throw IoError(path + " has no costs/budget fields");
  }
  cm.cost = dist_table_from_json(doc.at("costs"), cm.base.n_pairs(), "costs");
  cm.budget = doc.at("budget").get<double>();
  cm.validate();
  return cm;
}

void save_constrained_mdp(const ConstrainedMdp& cm, const std::string& path) {
  cm.validate();
  json doc = mdp_to_json(cm.base);
  json costs = json::array();
  for (const auto& dist : cm.cost) {
    costs.push_back(dist_to_json(dist));
  }
  doc["costs"] = std::move(costs);
  doc["budget"] = cm.budget;
  write_text(path, doc.dump(2) + "\n");
}

void save_dataset(const TrajectoryDataset& data, const std::string& path) {
  std::ostringstream out;
  out << "t,s,a,r,s_next\n";
  for (const auto& rec : data.records()) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", rec.r);
    out << rec.t << ',' << rec.s << ',' << rec.a << ',' << buf << ',' << rec.s_next << '\n';
  }
  write_text(path, out.str());
}

TrajectoryDataset load_dataset(const std::string& path, int m_s, int m_a) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line != "t,s,a,r,s_next") {
    throw IoError(path + " has no dataset header");
  }
  TrajectoryDataset data(m_s, m_a);
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    TransitionRecord rec;
    long long t = 0;
    if (std::sscanf(line.c_str(), "%lld,%d,%d,%lf,%d", &t, &rec.s, &rec.a, &rec.r,
                    &rec.s_next) != 5) {
      throw IoError(path + " has a malformed dataset row");
    }
    rec.t = static_cast<std::int64_t>(t);
    if (rec.s < 0 || rec.s >= m_s || rec.s_next < 0 || rec.s_next >= m_s || rec.a < 0 ||
        rec.a >= m_a) {
      throw IoError(path + " has out-of-range states or actions");
    }
    data.push(rec);
  }
  return data;
}

void save_report(const CovarianceReport& report, const std::string& path) {
  std::ostringstream out;
  out << "covariance_report 1\n";
  out << "dims " << report.m_s << ' ' << report.m_a << '\n';
  out << "plugin " << (report.inputs.empirical ? 1 : 0) << ' ' << report.inputs.n << '\n';
  write_matrix(out, "q", report.q.values.transpose());
  write_matrix(out, "v_star", report.v_star.values.transpose());
  write_matrix(out, "pi_star", report.pi_star.probs);
  write_matrix(out, "sigma_q", report.sigma_q);
  write_matrix(out, "sigma_v", report.sigma_v);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", report.sigma_chi);
  out << "sigma_chi " << buf << '\n';
  write_text(path, out.str());
}

CovarianceReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "covariance_report" || version != 1) {
    throw IoError(path + " is not a covariance report");
  }
  CovarianceReport report;
  int empirical = 0;
  if (!(in >> tag >> report.m_s >> report.m_a) || tag != "dims") {
    throw IoError(path + " is missing the dims line");
  }
  if (!(in >> tag >> empirical >> report.inputs.n) || tag != "plugin") {
    throw IoError(path + " is missing the plugin line");
  }
  report.inputs.empirical = empirical != 0;
  report.q.m_s = report.m_s;
  report.q.m_a = report.m_a;
  report.q.values = read_matrix(in, "q").transpose();
  report.v_star.values = read_matrix(in, "v_star").transpose();
  report.v_star.role = ValueRole::Optimal;
  report.pi_star.probs = read_matrix(in, "pi_star");
  report.sigma_q = read_matrix(in, "sigma_q");
  report.sigma_v = read_matrix(in, "sigma_v");
  if (!(in >> tag >> report.sigma_chi) || tag != "sigma_chi") {
    throw IoError(path + " is missing the sigma_chi line");
  }
  return report;
}

std::string format_sig6(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return std::string(buf);
}

}  // namespace mdpstat
