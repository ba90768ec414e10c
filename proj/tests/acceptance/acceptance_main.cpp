// Acceptance run: one PASS/FAIL line per criterion. Limits are pinned here,
// not read from the shipped configs, so editing a config cannot loosen them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ccl/constraints.hpp"
#include "ccl/experiments.hpp"
#include "ccl/kinematics.hpp"
#include "ccl/learning.hpp"
#include "ccl/metrics.hpp"
#include "ccl/simulator.hpp"

namespace {

using namespace ccl;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

const fs::path kConfigs = fs::path(CCL_SOURCE_DIR) / "configs";

struct Verdict {
  bool ok = true;
  std::vector<std::string> notes;

  void require(bool cond, const std::string& what) {
    ok = ok && cond;
    notes.push_back((cond ? "" : "!") + what);
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

RunSettings quiet(std::size_t workers = default_worker_count()) {
  RunSettings s;
  s.workers = workers;
  s.log_level = LogLevel::Quiet;
  return s;
}

ExperimentOutput run(const json& config, const std::string& label, RunSettings s = quiet()) {
  Experiment exp(ConfigNode(ConfigDoc::from_json(config, label)), std::nullopt, s);
  return exp.run(s);
}

json load_json(const std::string& name) {
  std::ifstream in(kConfigs / name);
  return json::parse(in);
}

const json* find_row(const json& report, const std::string& row) {
  for (const auto& r : report.at("rows")) {
    if (r.at("row") == row) return &r;
  }
  return nullptr;
}

double check_value(const ExperimentOutput& out, const std::string& name) {
  for (const auto& c : out.checks) {
    if (c.name == name) return c.value;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void table_rows(Verdict& v, const ExperimentOutput& out, const std::vector<std::string>& rows,
                double e_w_max, double e_n_max) {
  for (const auto& name : rows) {
    const json* r = find_row(out.report, name);
    if (r == nullptr) {
      v.require(false, name + " missing");
      continue;
    }
    const double ew = r->at("e_w").at("mean").get<double>();
    v.require(ew <= e_w_max, name + " E_w=" + fmt(ew));
    if (e_n_max > 0) {
      const double en = r->at("e_n").at("mean").get<double>();
      v.require(en <= e_n_max, name + " E_N=" + fmt(en));
    }
  }
}

Verdict criterion1() {
  Verdict v;
  json cfg = load_json("toy.json");
  cfg["trials"] = 50;
  cfg["toy"]["train_points"] = 150;
  auto t0 = Clock::now();
  auto out = run(cfg, "toy.json");
  const double t = seconds_since(t0);
  table_rows(v, out, {"linear", "limit_cycle", "sinusoidal"}, 1e-8, 1e-6);
  v.require(t <= 300.0, "runtime " + fmt(t) + " s");
  return v;
}

json sweep_subset(const json& series) {
  json cfg = load_json("sweep.json");
  cfg["trials"] = 50;
  cfg.erase("row_thresholds");
  cfg["sweep"].erase("data_sizes");
  cfg["sweep"].erase("u_noise");
  cfg["sweep"].erase("pi_noise");
  for (const auto& [k, val] : series.items()) cfg["sweep"][k] = val;
  return cfg;
}

Verdict criterion2() {
  Verdict v;
  auto t0 = Clock::now();
  auto out = run(sweep_subset({{"data_sizes", {5}}}), "sweep.json[n=5]");
  const double t = seconds_since(t0);
  v.require(out.report.at("policy") == "limit_cycle", "limit-cycle prior");
  table_rows(v, out, {"n=5"}, 1e-6, -1);
  v.require(t <= 60.0, "runtime " + fmt(t) + " s");
  return v;
}

Verdict criterion3() {
  Verdict v;
  auto t0 = Clock::now();
  auto out = run(sweep_subset({{"u_noise", {0.10}}, {"pi_noise", {0.04}}}), "sweep.json[noise]");
  const double t = seconds_since(t0);
  table_rows(v, out, {"u_eps=0.1", "pi_eps=0.04"}, 0.1, -1);
  v.require(t <= 300.0, "runtime " + fmt(t) + " s");
  return v;
}

Verdict criterion4() {
  Verdict v;
  json cfg = load_json("three_link.json");
  cfg["trials"] = 10;
  cfg["three_link"]["trajectories"] = 100;
  cfg["three_link"]["train_fraction"] = 0.5;
  cfg["three_link"]["setup"]["points"] = 50;
  auto t0 = Clock::now();
  auto out = run(cfg, "three_link.json");
  const double t = seconds_since(t0);
  std::vector<std::string> rows;
  for (const auto& r : out.report.at("rows")) rows.push_back(r.at("row").get<std::string>());
  v.require(rows.size() == 6, std::to_string(rows.size()) + " cases");
  table_rows(v, out, rows, 1e-8, 1e-5);
  v.require(t <= 900.0, "runtime " + fmt(t) + " s");
  return v;
}

Verdict criterion5() {
  Verdict v;
  json cfg = load_json("compare_baseline.json");
  const auto& cb = cfg.at("compare_baseline");
  v.require(cb.at("duration").get<double>() <= 4.0, "duration " + fmt(cb.at("duration").get<double>()) + " s");
  auto out = run(cfg, "compare_baseline.json");
  const double xy = check_value(out, "xy: proposed final task error");
  const double th = check_value(out, "theta: proposed final task error");
  v.require(xy <= 1e-3, "xy final error " + fmt(xy) + " cm");
  v.require(th <= 1e-3, "theta final error " + fmt(th) + " rad");
  for (const char* f : {"xy_baseline.csv", "theta_baseline.csv"}) {
    auto it = out.files.find(f);
    v.require(it != out.files.end() && it->second.size() > 100, std::string(f) + " logged");
  }
  return v;
}

Verdict criterion6() {
  Verdict v;
  auto obstacle = run(load_json("retarget_obstacle.json"), "retarget_obstacle.json");
  const double ret = check_value(obstacle, "retargeted violating steps");
  const double dir = check_value(obstacle, "direct imitation violating steps");
  v.require(ret == 0.0, "retargeted violations " + fmt(ret));
  v.require(dir >= 1.0, "direct violations " + fmt(dir));
  auto emb = run(load_json("retarget_embodiment.json"), "retarget_embodiment.json");
  const double rmse = check_value(emb, "imitator task trace RMSE");
  // lengths are in cm: 1e-2 m = 1.0 cm
  v.require(rmse <= 1.0, "3->7 DoF RMSE " + fmt(rmse) + " cm");
  return v;
}

Verdict criterion7() {
  Verdict v;
  auto t0 = Clock::now();
  Rng rng(7);
  auto rnd = [&](Index r, Index c) {
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m(i) = uniform(rng, -3.0, 3.0);
    return m;
  };

  double proj = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Index n = 2 + i % 6;
    Matrix a = rnd(1 + i % (n - 1), n);
    Matrix nn = Projector(a).nullspace();
    proj = std::max({proj, (nn * nn - nn).cwiseAbs().maxCoeff(), (a * nn).cwiseAbs().maxCoeff(),
                     (nn - nn.transpose()).cwiseAbs().maxCoeff()});
  }
  v.require(proj <= 1e-8, "projector identities " + fmt(proj));

  double penrose = 0.0;
  for (int i = 0; i < 300; ++i) {
    const Index r = 1 + i % 5, c = 1 + (i / 5) % 6, rank = 1 + i % std::min(r, c);
    Matrix a = rnd(r, rank) * rnd(rank, c);
    Matrix p = pseudo_inverse(a);
    const double s = std::max(1.0, a.norm() * p.norm());
    penrose = std::max({penrose, (a * p * a - a).norm() / (s * a.norm()),
                        (p * a * p - p).norm() / (s * p.norm()),
                        ((a * p).transpose() - a * p).norm() / s,
                        ((p * a).transpose() - p * a).norm() / s});
  }
  v.require(penrose <= 1e-10, "Penrose " + fmt(penrose));

  double ortho = 0.0;
  auto scan = [&](const Dataset& ds) {
    const auto obs = ds.observations();
    const auto truth = ds.truth();
    for (std::size_t i = 0; i < obs.size(); ++i) {
      ortho = std::max({ortho, std::abs(truth[i].v.dot(truth[i].w)),
                        std::abs(truth[i].w.dot(obs[i].u - truth[i].w))});
    }
  };
  for (std::uint64_t s = 0; s < 20; ++s) scan(generate_toy_dataset(150, s, SinusoidalPolicy{}));
  for (const char* axes : {"x", "y", "theta", "x,y", "x,theta", "y,theta"}) {
    scan(generate_arm_dataset(ArmDemoSetup::three_link_default(), axis_selection(parse_axes(axes)),
                              10, 3));
  }
  v.require(ortho <= 1e-10, "simulator orthogonality " + fmt(ortho));

  double consistency = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    Dataset ds = generate_toy_dataset(150, s, default_linear_policy());
    auto obs = ds.observations();
    consistency = std::max(consistency, consistency_error(ConstraintModel::constant(ds.truth()[0].a),
                                                          obs, action_std(obs)));
  }
  v.require(consistency <= 1e-10, "true-model consistency " + fmt(consistency));

  double grid_gap = 0.0;
  OptimizerConfig opt;
  for (std::uint64_t s = 1; s <= 50; ++s) {
    Dataset ds = generate_toy_dataset(150, s, default_linear_policy());
    auto obs = ds.observations();
    opt.seed = derive_seed(s, 3);
    auto fit = learn_constraint(obs, 1, SphericalRepresentation{2}, opt);
    const Matrix a = fit.model.matrix(obs[0].x);
    const double learned = std::atan2(a(0, 1), a(0, 0));
    double best = 0.0, best_v = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 1800; ++k) {
      const double t = deg2rad(0.1 * k);
      const Eigen::Vector2d c(std::cos(t), std::sin(t));
      double val = 0.0;
      for (const auto& o : obs) {
        const Vector d = o.u - o.pi;
        val += std::abs(o.pi.dot(d) - c.dot(o.pi) * c.dot(d));
      }
      if (val < best_v) {
        best_v = val;
        best = t;
      }
    }
    double d = std::fmod(std::abs(learned - best), kPi);
    grid_gap = std::max(grid_gap, rad2deg(std::min(d, kPi - d)));
  }
  v.require(grid_gap <= 0.5, "grid oracle gap " + fmt(grid_gap) + " deg");

  double jac = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Index n = 1 + i % 6;
    std::vector<double> links(static_cast<std::size_t>(n));
    for (auto& l : links) l = uniform(rng, 0.5, 15.0);
    PlanarArm arm(links);
    Vector q(n);
    for (Index j = 0; j < n; ++j) q(j) = uniform(rng, -kPi, kPi);
    Matrix jm = arm.jacobian(q);
    for (Index c = 0; c < n; ++c) {
      Vector qp = q, qm = q;
      qp(c) += 1e-6;
      qm(c) -= 1e-6;
      Eigen::Vector3d fd = (arm.task_coordinates(qp) - arm.task_coordinates(qm)) / 2e-6;
      jac = std::max(jac, (jm.col(c) - fd).cwiseAbs().maxCoeff());
    }
  }
  v.require(jac <= 1e-6, "Jacobian FD " + fmt(jac));

  auto ingest = run(load_json("ingest_learn.json"), "ingest_learn.json", quiet(1));
  const double q_err = check_value(ingest, "recovered angle error");
  const double n_err = check_value(ingest, "projector distance to direct learning");
  v.require(q_err <= 1e-6, "ingest q " + fmt(q_err));
  v.require(n_err <= 1e-4, "ingest N " + fmt(n_err));

  const double t = seconds_since(t0);
  v.require(t <= 60.0, "runtime " + fmt(t) + " s");
  return v;
}

std::string trials_csv(const ExperimentOutput& out, const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("ccl_acceptance_" + tag);
  fs::remove_all(dir);
  write_experiment_output(out, dir);
  std::ifstream in(dir / "trials.csv", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  fs::remove_all(dir);
  return ss.str();
}

Verdict criterion8() {
  Verdict v;
  const std::vector<std::pair<std::string, std::size_t>> configs{
      {"toy.json", 5},
      {"sweep.json", 2},
      {"three_link.json", 1},
      {"compare_baseline.json", 1},
      {"retarget_obstacle.json", 1},
      {"retarget_embodiment.json", 1},
      {"ingest_learn.json", 1}};
  for (const auto& [name, trials] : configs) {
    json cfg = load_json(name);
    cfg["trials"] = trials;
    auto a = trials_csv(run(cfg, name, quiet(1)), "a");
    auto b = trials_csv(run(cfg, name, quiet(2)), "b");
    v.require(!a.empty() && a == b, name);
  }
  return v;
}

}  // namespace

int main() {
  struct Item {
    int id;
    const char* title;
    std::function<Verdict()> fn;
  };
  const std::vector<Item> items{
      {1, "toy table reproduction", criterion1},
      {2, "few-data learning", criterion2},
      {3, "noise robustness", criterion3},
      {4, "three-link table reproduction", criterion4},
      {5, "baseline comparison rollout", criterion5},
      {6, "retargeting", criterion6},
      {7, "property suites", criterion7},
      {8, "determinism", criterion8},
  };
  int failed = 0;
  for (const auto& item : items) {
    Verdict v;
    auto t0 = Clock::now();
    try {
      v = item.fn();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    std::string detail;
    for (const auto& n : v.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::printf("%s criterion %d (%s) [%.1f s]: %s\n", v.ok ? "PASS" : "FAIL", item.id, item.title,
                seconds_since(t0), detail.c_str());
    std::fflush(stdout);
    if (!v.ok) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
