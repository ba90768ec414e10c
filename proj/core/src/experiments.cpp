#include "ccl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

#include "ccl/baseline.hpp"
#include "ccl/dataset_io.hpp"
#include "ccl/ingest.hpp"
#include "ccl/learning.hpp"
#include "ccl/random.hpp"
#include "ccl/retarget.hpp"
#include "ccl/simulator.hpp"
#include "ccl/version.hpp"

namespace ccl {

using nlohmann::json;

namespace {

struct KindName {
  ExperimentKind kind;
  const char* name;
  const char* section;
};

constexpr KindName kKinds[] = {
    {ExperimentKind::Toy, "toy", "toy"},
    {ExperimentKind::Sweep, "sweep", "sweep"},
    {ExperimentKind::ThreeLink, "three-link", "three_link"},
    {ExperimentKind::CompareBaseline, "compare-baseline", "compare_baseline"},
    {ExperimentKind::RetargetObstacle, "retarget-obstacle", "retarget_obstacle"},
    {ExperimentKind::RetargetEmbodiment, "retarget-embodiment", "retarget_embodiment"},
    {ExperimentKind::IngestLearn, "ingest-learn", "ingest_learn"},
};

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& name) {
  std::string norm = name;
  std::replace(norm.begin(), norm.end(), '_', '-');
  for (const auto& k : kKinds) {
    if (norm == k.name) return k.kind;
  }
  throw ConfigError("unknown experiment \"" + name + "\"");
}

std::string experiment_name(ExperimentKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "?";
}

std::string experiment_section(ExperimentKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.section;
  }
  return "?";
}

std::vector<ExperimentKind> all_experiments() {
  std::vector<ExperimentKind> out;
  for (const auto& k : kKinds) out.push_back(k.kind);
  return out;
}

std::size_t default_worker_count() {
  if (const char* env = std::getenv("CCL_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  workers = std::clamp<std::size_t>(workers, 1, n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool ExperimentOutput::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed(); });
}

namespace {

// ---------------------------------------------------------------------------
// Parameters

struct Thresholds {
  std::map<std::string, double> global;
  std::map<std::string, std::map<std::string, double>> rows;

  std::optional<double> get(const std::string& row, const std::string& key) const {
    if (auto r = rows.find(row); r != rows.end()) {
      if (auto it = r->second.find(key); it != r->second.end()) return it->second;
    }
    if (auto it = global.find(key); it != global.end()) return it->second;
    return std::nullopt;
  }
};

struct NamedPolicy {
  std::string name;
  PolicySpec policy;
};

struct ToyParams {
  std::size_t train_points = 150;
  std::size_t test_points = 150;
  std::vector<NamedPolicy> policies;
  NoiseSpec noise;
};

struct SweepParams {
  PolicySpec policy = LimitCyclePolicy{};
  std::size_t train_points = 150;
  std::size_t test_points = 150;
  std::vector<std::size_t> data_sizes;
  std::vector<double> u_noise;
  std::vector<double> pi_noise;
};

struct ThreeLinkParams {
  ArmDemoSetup setup = ArmDemoSetup::three_link_default();
  std::vector<std::string> cases;
  std::size_t trajectories = 100;
  double train_fraction = 0.5;
};

struct Scenario {
  std::string name;
  std::vector<TaskAxis> axes;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
};

struct CompareParams {
  ArmDemoSetup setup = ArmDemoSetup::three_link_default();
  std::size_t train_points = 100;
  JointState start;
  double task_gain = 5.0;
  double duration = 4.0;
  std::vector<Scenario> scenarios;
  BaselineConfig baseline;
};

struct DemoParams {
  ArmDemoSetup setup = ArmDemoSetup::three_link_default();
  std::size_t train_trajectories = 10;
  std::vector<TaskAxis> axes{TaskAxis::X, TaskAxis::Y};
  JointState start;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  double duration = 10.0;
};

struct ObstacleParams {
  DemoParams demo;
  PolicySpec robot_policy;
  ObstacleRegion obstacle{0.0, 0.0, 1.0, 1.0};
};

enum class TaskSourceKind { Replay, Attractor };

struct EmbodimentParams {
  DemoParams demo;
  PlanarArm imitator{{1.0}};
  JointState imitator_start;
  PolicySpec robot_policy;
  std::vector<Index> correspondence{0, 1, 2};
  TaskSourceKind task_source = TaskSourceKind::Replay;
};

struct SynthSpec {
  ArmDemoSetup setup;
  std::vector<TaskAxis> axes{TaskAxis::X, TaskAxis::Y};
  std::size_t trajectories = 20;
  SkeletonLayout layout;
};

struct IngestParams {
  IngestOptions options;
  std::vector<std::filesystem::path> inputs;
  std::optional<SynthSpec> synth;
  PolicySpec prior;
  std::optional<Index> k;  // nullopt: sweep k
  bool write_keypoints = true;
};

using Params = std::variant<ToyParams, SweepParams, ThreeLinkParams, CompareParams, ObstacleParams,
                            EmbodimentParams, IngestParams>;

// ---------------------------------------------------------------------------
// Parsing helpers

std::size_t positive_size(const ConfigNode& node, const std::string& key, std::size_t fallback) {
  auto n = node.find(key);
  if (!n) return fallback;
  const long long v = n->as_integer();
  if (v < 1) n->fail("must be >= 1");
  return static_cast<std::size_t>(v);
}

double positive_number(const ConfigNode& node, const std::string& key, double fallback) {
  auto n = node.find(key);
  if (!n) return fallback;
  const double v = n->as_number();
  if (!(v > 0.0)) n->fail("must be positive");
  return v;
}

std::vector<TaskAxis> axes_from(const ConfigNode& node) {
  try {
    return parse_axes(node.as_string());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    node.fail(e.what());
  }
}

std::pair<double, double> range_from(const ConfigNode& node) {
  const auto v = node.as_numbers();
  if (v.size() != 2 || !(v[0] <= v[1])) node.fail("expected [lo, hi] with lo <= hi");
  return {v[0], v[1]};
}

ArmDemoSetup setup_from(const std::optional<ConfigNode>& node, ArmDemoSetup s) {
  if (!node) return s;
  node->expect_keys({"arm", "start_min_deg", "start_min_rad", "start_max_deg", "start_max_rad",
                     "target_x", "target_y", "target_theta_deg", "target_theta_rad", "prior",
                     "task_gain", "dt", "points", "max_redraws"});
  if (auto a = node->find("arm")) s.arm = arm_from_config(*a);
  s.start_min = node->angles("start_min", s.start_min);
  s.start_max = node->angles("start_max", s.start_max);
  const Index n = s.arm.joint_count();
  if (s.start_min.size() != n || s.start_max.size() != n) {
    node->fail("start_min/start_max need one angle per joint (" + std::to_string(n) + ")");
  }
  if (auto r = node->find("target_x")) std::tie(s.target_min(0), s.target_max(0)) = range_from(*r);
  if (auto r = node->find("target_y")) std::tie(s.target_min(1), s.target_max(1)) = range_from(*r);
  if (auto th = node->angles("target_theta")) {
    if (th->size() != 2 || !((*th)(0) <= (*th)(1))) node->fail("target_theta needs [lo, hi]");
    s.target_min(2) = (*th)(0);
    s.target_max(2) = (*th)(1);
  }
  if (auto p = node->find("prior")) {
    s.prior = policy_from_config(*p, PolicyContext{s.arm, std::nullopt});
  }
  s.task_gain = positive_number(*node, "task_gain", s.task_gain);
  s.dt = positive_number(*node, "dt", s.dt);
  s.points_per_trajectory = positive_size(*node, "points", s.points_per_trajectory);
  s.max_redraws = static_cast<std::size_t>(node->integer("max_redraws", static_cast<long long>(s.max_redraws)));
  return s;
}

Eigen::Vector3d target_from(const ConfigNode& node) {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  if (auto xy = node.find("target")) {
    const auto v = xy->as_numbers();
    if (v.size() != 2) xy->fail("expected [x, y]");
    t(0) = v[0];
    t(1) = v[1];
  }
  t(2) = node.angle("target_theta", 0.0);
  return t;
}

DemoParams demo_from(const ConfigNode& node) {
  DemoParams d;
  d.setup = setup_from(node.find("setup"), d.setup);
  d.train_trajectories = positive_size(node, "train_trajectories", d.train_trajectories);
  if (auto a = node.find("axes")) d.axes = axes_from(*a);
  auto start = node.angles("start");
  if (!start) node.fail("missing start_deg / start_rad");
  if (start->size() != d.setup.arm.joint_count()) node.fail("start needs one angle per joint");
  d.start = *start;
  d.target = target_from(node);
  d.duration = positive_number(node, "duration", d.duration);
  return d;
}

ToyParams toy_from(const ConfigNode& node) {
  node.expect_keys({"train_points", "test_points", "policies", "noise"});
  ToyParams p;
  p.train_points = positive_size(node, "train_points", p.train_points);
  p.test_points = positive_size(node, "test_points", p.test_points);
  if (auto pols = node.find("policies")) {
    for (const auto& e : pols->elements()) {
      if (e.json().is_string()) {
        json spec = {{"type", e.as_string()}};
        auto doc = ConfigDoc::from_json(spec, e.where());
        p.policies.push_back({e.as_string(), policy_from_config(ConfigNode(doc))});
      } else {
        const std::string name = e.string("name", e.string("type", ""));
        json spec = e.json();
        spec.erase("name");
        auto doc = ConfigDoc::from_json(spec, e.where());
        p.policies.push_back({name, policy_from_config(ConfigNode(doc))});
      }
    }
    if (p.policies.empty()) pols->fail("need at least one policy");
  } else {
    p.policies = {{"linear", default_linear_policy()},
                  {"limit_cycle", LimitCyclePolicy{}},
                  {"sinusoidal", SinusoidalPolicy{}}};
  }
  for (const auto& pol : p.policies) {
    if (std::holds_alternative<TaskPointAttractor>(pol.policy) ||
        std::holds_alternative<ManipulabilityGradient>(pol.policy)) {
      node.at("policies").fail("toy policies must act on the 2-D state");
    }
  }
  if (auto n = node.find("noise")) {
    n->expect_keys({"epsilon", "target"});
    p.noise.epsilon = n->number("epsilon", 0.0);
    if (p.noise.epsilon < 0.0) n->at("epsilon").fail("must be >= 0");
    const std::string target = n->string("target", "actions");
    if (target == "actions") {
      p.noise.target = NoiseTarget::Actions;
    } else if (target == "prior_policy") {
      p.noise.target = NoiseTarget::PriorPolicy;
    } else {
      n->at("target").fail("expected \"actions\" or \"prior_policy\"");
    }
  }
  return p;
}

SweepParams sweep_from(const ConfigNode& node) {
  node.expect_keys({"policy", "train_points", "test_points", "data_sizes", "u_noise", "pi_noise"});
  SweepParams p;
  if (auto pol = node.find("policy")) p.policy = policy_from_config(*pol);
  p.train_points = positive_size(node, "train_points", p.train_points);
  p.test_points = positive_size(node, "test_points", p.test_points);
  if (auto sizes = node.find("data_sizes")) {
    for (const auto& e : sizes->elements()) {
      const long long v = e.as_integer();
      if (v < 2) e.fail("data size must be >= 2");
      p.data_sizes.push_back(static_cast<std::size_t>(v));
    }
  }
  const auto eps = [&](const char* key) {
    std::vector<double> out = node.numbers(key, {});
    for (double v : out) {
      if (v < 0.0) node.at(key).fail("noise levels must be >= 0");
    }
    return out;
  };
  p.u_noise = eps("u_noise");
  p.pi_noise = eps("pi_noise");
  if (p.data_sizes.empty() && p.u_noise.empty() && p.pi_noise.empty()) {
    node.fail("sweep needs data_sizes, u_noise or pi_noise");
  }
  return p;
}

ThreeLinkParams three_link_from(const ConfigNode& node) {
  node.expect_keys({"setup", "cases", "trajectories", "train_fraction"});
  ThreeLinkParams p;
  p.setup = setup_from(node.find("setup"), p.setup);
  if (auto cases = node.find("cases")) {
    for (const auto& e : cases->elements()) {
      p.cases.push_back(axes_label(axes_from(e)));
    }
  } else {
    p.cases = {"x", "y", "theta", "x,y", "x,theta", "y,theta"};
  }
  p.trajectories = positive_size(node, "trajectories", p.trajectories);
  p.train_fraction = node.number("train_fraction", p.train_fraction);
  if (!(p.train_fraction > 0.0 && p.train_fraction < 1.0)) {
    node.at("train_fraction").fail("must be in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(p.train_fraction * static_cast<double>(p.trajectories)));
  if (n_train < 1 || n_train >= p.trajectories) node.fail("split leaves an empty train or test set");
  return p;
}

CompareParams compare_from(const ConfigNode& node) {
  node.expect_keys({"setup", "train_points", "start_deg", "start_rad", "task_gain", "duration",
                    "scenarios", "baseline"});
  CompareParams p;
  p.setup = setup_from(node.find("setup"), p.setup);
  p.train_points = positive_size(node, "train_points", p.train_points);
  auto start = node.angles("start");
  if (!start) node.fail("missing start_deg / start_rad");
  if (start->size() != p.setup.arm.joint_count()) node.fail("start needs one angle per joint");
  p.start = *start;
  p.task_gain = positive_number(node, "task_gain", p.task_gain);
  p.duration = positive_number(node, "duration", p.duration);
  for (const auto& s : node.at("scenarios").elements()) {
    s.expect_keys({"name", "axes", "target", "target_theta_deg", "target_theta_rad"});
    Scenario sc;
    sc.axes = axes_from(s.at("axes"));
    sc.name = s.string("name", axes_label(sc.axes));
    sc.target = target_from(s);
    p.scenarios.push_back(sc);
  }
  if (p.scenarios.empty()) node.at("scenarios").fail("need at least one scenario");
  if (auto b = node.find("baseline")) {
    b->expect_keys({"num_centers", "norm_floor", "max_function_evals"});
    p.baseline.num_centers = positive_size(*b, "num_centers", p.baseline.num_centers);
    p.baseline.norm_floor = positive_number(*b, "norm_floor", p.baseline.norm_floor);
    p.baseline.max_function_evals =
        static_cast<int>(positive_size(*b, "max_function_evals",
                                       static_cast<std::size_t>(p.baseline.max_function_evals)));
  }
  return p;
}

ObstacleParams obstacle_from(const ConfigNode& node) {
  node.expect_keys({"setup", "train_trajectories", "axes", "start_deg", "start_rad", "target",
                    "target_theta_deg", "target_theta_rad", "duration", "robot_policy",
                    "obstacle"});
  ObstacleParams p;
  p.demo = demo_from(node);
  p.robot_policy = policy_from_config(node.at("robot_policy"), PolicyContext{p.demo.setup.arm, std::nullopt});
  const auto ob = node.at("obstacle");
  ob.expect_keys({"x_min", "y_min", "x_max", "y_max"});
  try {
    p.obstacle = ObstacleRegion(ob.number("x_min"), ob.number("y_min"), ob.number("x_max"),
                                ob.number("y_max"));
  } catch (const ConfigError& e) {
    ob.fail(e.what());
  }
  return p;
}

EmbodimentParams embodiment_from(const ConfigNode& node) {
  node.expect_keys({"setup", "train_trajectories", "axes", "start_deg", "start_rad", "target",
                    "target_theta_deg", "target_theta_rad", "duration", "imitator",
                    "imitator_start_deg", "imitator_start_rad", "robot_policy",
                    "row_correspondence", "task_source"});
  EmbodimentParams p;
  p.demo = demo_from(node);
  p.imitator = arm_from_config(node.at("imitator"));
  auto start = node.angles("imitator_start");
  if (!start) node.fail("missing imitator_start_deg / imitator_start_rad");
  if (start->size() != p.imitator.joint_count()) node.fail("imitator_start needs one angle per imitator joint");
  p.imitator_start = *start;
  p.robot_policy = policy_from_config(node.at("robot_policy"), PolicyContext{p.imitator, std::nullopt});
  if (auto corr = node.find("row_correspondence")) {
    p.correspondence.clear();
    std::vector<bool> used(3, false);
    for (const auto& e : corr->elements()) {
      const auto axes = axes_from(e);
      if (axes.size() != 1) e.fail("each entry names one imitator task row");
      const auto row = static_cast<Index>(axes.front());
      if (used[static_cast<std::size_t>(row)]) e.fail("row correspondence is not injective");
      used[static_cast<std::size_t>(row)] = true;
      p.correspondence.push_back(row);
    }
    if (p.correspondence.size() != 3) corr->fail("need one imitator row for each of x, y, theta");
  }
  const std::string src = node.string("task_source", "replay");
  if (src == "replay") {
    p.task_source = TaskSourceKind::Replay;
  } else if (src == "attractor") {
    p.task_source = TaskSourceKind::Attractor;
  } else {
    node.at("task_source").fail("expected \"replay\" or \"attractor\"");
  }
  return p;
}

IngestParams ingest_from(const ConfigNode& node, const std::filesystem::path& base) {
  node.expect_keys({"inputs", "synthesize", "side", "facing", "fps", "scale", "confidence_floor",
                    "smoothing_window", "prior", "k", "write_keypoints"});
  IngestParams p;
  const std::string side = node.string("side", "right");
  if (side != "left" && side != "right") node.at("side").fail("expected \"left\" or \"right\"");
  p.options.side = side == "left" ? BodySide::Left : BodySide::Right;
  const std::string facing = node.string("facing", "left");
  if (facing != "left" && facing != "right") node.at("facing").fail("expected \"left\" or \"right\"");
  p.options.facing = facing == "left" ? Facing::Left : Facing::Right;
  p.options.fps = positive_number(node, "fps", p.options.fps);
  p.options.scale = positive_number(node, "scale", p.options.scale);
  p.options.confidence_floor = node.number("confidence_floor", p.options.confidence_floor);
  if (p.options.confidence_floor < 0.0 || p.options.confidence_floor > 1.0) {
    node.at("confidence_floor").fail("must be in [0, 1]");
  }
  p.options.smoothing_window = positive_size(node, "smoothing_window", 1);
  if (p.options.smoothing_window % 2 == 0) node.at("smoothing_window").fail("must be odd");
  p.write_keypoints = node.boolean("write_keypoints", true);

  if (auto k = node.find("k")) {
    if (!(k->json().is_string() && k->as_string() == "auto")) {
      const long long v = k->as_integer();
      if (v < 1 || v > 3) k->fail("k must be 1..3 or \"auto\"");
      p.k = static_cast<Index>(v);
    }
  }
  if (auto inputs = node.find("inputs")) {
    for (const auto& e : inputs->elements()) {
      std::filesystem::path path = e.as_string();
      if (path.is_relative()) path = base / path;
      if (!std::filesystem::exists(path)) e.fail("input not found: " + path.string());
      p.inputs.push_back(path);
    }
  }
  if (auto s = node.find("synthesize")) {
    s->expect_keys({"setup", "axes", "trajectories", "shoulder_px", "trunk_px", "confidence"});
    SynthSpec spec;
    ArmDemoSetup base_setup = ArmDemoSetup::three_link_default();
    base_setup.arm = PlanarArm({1.0, 1.0, 0.5});
    base_setup.target_min = Eigen::Vector3d(-1.0, -1.5, 0.0);
    base_setup.target_max = Eigen::Vector3d(1.0, 0.5, kPi);
    base_setup.dt = 1.0 / p.options.fps;
    base_setup.points_per_trajectory = 11;
    spec.setup = setup_from(s->find("setup"), base_setup);
    if (spec.setup.arm.joint_count() != 3) s->fail("synthesis needs a 3-link arm");
    if (std::abs(spec.setup.dt * p.options.fps - 1.0) > 1e-12) {
      s->fail("setup.dt must equal 1 / fps so finite differences match the simulated actions");
    }
    if (auto a = s->find("axes")) spec.axes = axes_from(*a);
    spec.trajectories = positive_size(*s, "trajectories", spec.trajectories);
    if (auto sp = s->find("shoulder_px")) {
      const auto v = sp->as_numbers();
      if (v.size() != 2) sp->fail("expected [x, y]");
      spec.layout.shoulder_px = Eigen::Vector2d(v[0], v[1]);
    }
    spec.layout.trunk_px = positive_number(*s, "trunk_px", spec.layout.trunk_px);
    spec.layout.confidence = s->number("confidence", spec.layout.confidence);
    spec.layout.scale = p.options.scale;
    spec.layout.side = p.options.side;
    spec.layout.facing = p.options.facing;
    p.synth = spec;
  }
  if (p.inputs.empty() == !p.synth.has_value()) {
    node.fail("give exactly one of \"inputs\" or \"synthesize\"");
  }
  if (auto prior = node.find("prior")) {
    p.prior = policy_from_config(*prior);
  } else if (p.synth) {
    p.prior = p.synth->setup.prior;
  } else {
    Vector rest(3);
    rest << deg2rad(-90.0), deg2rad(90.0), 0.0;
    p.prior = PointAttractor{1.0, rest};
  }
  return p;
}

std::vector<const char*> threshold_keys(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Toy:
    case ExperimentKind::Sweep:
    case ExperimentKind::ThreeLink:
      return {"e_w_mean_max", "e_n_mean_max"};
    case ExperimentKind::CompareBaseline:
      return {"final_task_error_max", "joint_tracking_error_max"};
    case ExperimentKind::RetargetObstacle:
      return {"retargeted_violations_max", "direct_violations_min", "final_task_error_max"};
    case ExperimentKind::RetargetEmbodiment:
      return {"rmse_max"};
    case ExperimentKind::IngestLearn:
      return {"e_n_max", "projector_distance_max", "angle_error_max"};
  }
  return {};
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string sweep_label(const char* prefix, double v) { return prefix + short_number(v); }

std::vector<std::string> row_labels(const Params& params) {
  std::vector<std::string> rows;
  if (const auto* t = std::get_if<ToyParams>(&params)) {
    for (const auto& p : t->policies) rows.push_back(p.name);
  } else if (const auto* sw = std::get_if<SweepParams>(&params)) {
    for (std::size_t n : sw->data_sizes) rows.push_back("n=" + std::to_string(n));
    for (double e : sw->u_noise) rows.push_back(sweep_label("u_eps=", e));
    for (double e : sw->pi_noise) rows.push_back(sweep_label("pi_eps=", e));
  } else if (const auto* tl = std::get_if<ThreeLinkParams>(&params)) {
    rows = tl->cases;
  }
  return rows;
}

}  // namespace

// ---------------------------------------------------------------------------

struct Experiment::Impl {
  Params params;
  OptimizerConfig optimizer;
  Thresholds thresholds;
};

Experiment::Experiment(const ConfigNode& root, std::optional<ExperimentKind> expected,
                       const RunSettings& overrides) {
  if (!root.json().is_object()) root.fail("config must be a JSON object");
  std::optional<ExperimentKind> declared;
  if (auto e = root.find("experiment")) {
    try {
      declared = parse_experiment_kind(e->as_string());
    } catch (const ConfigError& err) {
      if (e->json().is_string()) e->fail(err.what());
      throw;
    }
  }
  if (declared && expected && *declared != *expected) {
    root.at("experiment").fail("config is for \"" + experiment_name(*declared) +
                               "\" but the command asked for \"" + experiment_name(*expected) + "\"");
  }
  if (!declared && !expected) root.fail("missing \"experiment\"");
  kind_ = declared ? *declared : *expected;
  const std::string section = experiment_section(kind_);

  root.expect_keys({"experiment", "seed", "trials", "output", "optimizer", "thresholds",
                    "row_thresholds", "toy", "sweep", "three_link", "compare_baseline",
                    "retarget_obstacle", "retarget_embodiment", "ingest_learn"});
  for (const auto& k : kKinds) {
    if (k.section != section && root.has(k.section)) {
      root.at(k.section).fail("section does not belong to experiment \"" + experiment_name(kind_) + "\"");
    }
  }

  if (auto s = root.find("seed")) {
    const long long v = s->as_integer();
    if (v < 0) s->fail("seed must be >= 0");
    seed_ = static_cast<std::uint64_t>(v);
  }
  trials_ = positive_size(root, "trials", kind_ == ExperimentKind::ThreeLink ? 10 : kind_ == ExperimentKind::Toy || kind_ == ExperimentKind::Sweep ? 50 : 1);
  output_ = root.string("output", "results/" + experiment_name(kind_));

  auto impl = std::make_shared<Impl>();
  impl->optimizer = root.has("optimizer") ? optimizer_from_config(root.at("optimizer")) : OptimizerConfig{};
  const auto keys = threshold_keys(kind_);
  const bool rows = kind_ == ExperimentKind::Toy || kind_ == ExperimentKind::Sweep ||
                    kind_ == ExperimentKind::ThreeLink;
  {
    Thresholds t;
    if (auto th = root.find("thresholds")) {
      if (!th->json().is_object()) th->fail("expected an object");
      for (const auto& [key, _] : th->json().items()) {
        if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end()) {
          th->at(key).fail("unknown threshold for this experiment");
        }
        t.global[key] = th->at(key).as_number();
      }
    }
    if (auto rt = root.find("row_thresholds")) {
      if (!rows) rt->fail("this experiment has no per-row thresholds");
      if (!rt->json().is_object()) rt->fail("expected an object");
      for (const auto& [row, _] : rt->json().items()) {
        const auto node = rt->at(row);
        if (!node.json().is_object()) node.fail("expected an object");
        for (const auto& [key, __] : node.json().items()) {
          if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end()) {
            node.at(key).fail("unknown threshold for this experiment");
          }
          t.rows[row][key] = node.at(key).as_number();
        }
      }
    }
    impl->thresholds = std::move(t);
  }

  std::filesystem::path config_dir;
  if (std::filesystem::exists(root.source())) config_dir = std::filesystem::path(root.source()).parent_path();

  const auto sec = root.find(section);
  const auto need = [&]() -> ConfigNode {
    if (!sec) root.fail("missing \"" + section + "\" section");
    return *sec;
  };
  const auto empty_doc = ConfigDoc::from_json(json::object(), root.where() + " [" + section + "]");
  const ConfigNode empty(empty_doc);
  switch (kind_) {
    case ExperimentKind::Toy:
      impl->params = toy_from(sec ? *sec : empty);
      break;
    case ExperimentKind::Sweep:
      impl->params = sweep_from(need());
      break;
    case ExperimentKind::ThreeLink:
      impl->params = three_link_from(sec ? *sec : empty);
      break;
    case ExperimentKind::CompareBaseline:
      impl->params = compare_from(need());
      break;
    case ExperimentKind::RetargetObstacle:
      impl->params = obstacle_from(need());
      break;
    case ExperimentKind::RetargetEmbodiment:
      impl->params = embodiment_from(need());
      break;
    case ExperimentKind::IngestLearn:
      impl->params = ingest_from(need(), config_dir);
      break;
  }
  if (const auto* ing = std::get_if<IngestParams>(&impl->params); ing && !ing->synth) trials_ = 1;
  {
    const auto rows_known = row_labels(impl->params);
    std::set<std::string> seen;
    for (const auto& r : rows_known) {
      if (!seen.insert(r).second) root.at(section).fail("duplicate row \"" + r + "\"");
    }
    for (const auto& [row, _] : impl->thresholds.rows) {
      if (!seen.count(row)) root.at("row_thresholds").at(row).fail("no such row in this experiment");
    }
  }

  if (overrides.seed) seed_ = *overrides.seed;
  if (overrides.trials) {
    if (*overrides.trials < 1) throw ConfigError("--trials must be >= 1");
    trials_ = *overrides.trials;
  }
  if (overrides.out) output_ = *overrides.out;

  effective_ = root.json();
  effective_["experiment"] = experiment_name(kind_);
  effective_["seed"] = seed_;
  effective_["trials"] = trials_;
  effective_["output"] = output_;
  impl_ = std::move(impl);
}

// ---------------------------------------------------------------------------
// Running

namespace {

struct Context {
  const Experiment& exp;
  const Experiment::Impl& impl;
  const RunSettings& settings;

  void log(LogLevel level, const std::string& msg) const {
    if (settings.log && level <= settings.log_level && settings.log_level != LogLevel::Quiet) {
      settings.log(level, msg);
    }
  }
};

std::uint64_t row_seed(std::uint64_t master, const std::string& row) {
  return derive_seed(master, fnv1a64(row));
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string trials_csv(const std::vector<MetricRecord>& recs) {
  std::string out = "row,trial,seed,e_w,e_n\n";
  for (const auto& r : recs) {
    out += csv_field(r.row) + "," + std::to_string(r.trial) + "," + std::to_string(r.seed) + "," +
           fmt17(r.e_w) + "," + fmt17(r.e_n) + "\n";
  }
  return out;
}

std::string dataset_csv(const Dataset& ds) {
  std::ostringstream os;
  write_dataset_csv(os, ds);
  return os.str();
}

Dataset single(Trajectory t) {
  Dataset ds;
  ds.trajectories.push_back(std::move(t));
  return ds;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

struct Evaluation {
  double e_w = 0.0;
  double e_n = 0.0;
};

/// Test-set metrics: w from ground truth, w_hat = N_hat pi with the clean prior.
Evaluation evaluate(const ConstraintModel& model, const std::vector<Observation>& test,
                    const std::vector<GroundTruth>& truth) {
  const Vector sigma = action_std(test);
  std::vector<Vector> w;
  std::vector<Vector> w_hat;
  std::vector<Observation> clean = test;
  for (std::size_t i = 0; i < test.size(); ++i) {
    clean[i].pi = truth[i].pi;
    w.push_back(truth[i].w);
    w_hat.push_back(Projector(model.matrix(test[i].x)).nullspace() * truth[i].pi);
  }
  return {nmse_w(w, w_hat, sigma), consistency_error(model, clean, sigma)};
}

OptimizerConfig seeded(OptimizerConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

// Trial index list honouring only_trial.
std::vector<std::size_t> trial_indices(std::size_t trials, const RunSettings& s) {
  if (s.only_trial) {
    if (*s.only_trial >= trials) {
      throw ConfigError("--trial " + std::to_string(*s.only_trial) + " is out of range (trials = " +
                        std::to_string(trials) + ")");
    }
    return {*s.only_trial};
  }
  std::vector<std::size_t> out(trials);
  for (std::size_t i = 0; i < trials; ++i) out[i] = i;
  return out;
}

struct RowJob {
  std::string row;
  std::size_t trial;
  std::uint64_t seed;
};

using RowTrialFn = std::function<Evaluation(const std::string& row, std::uint64_t seed)>;

// Shared driver for experiments that report mean +- sd per row.
void run_rows(const Context& ctx, const std::vector<std::string>& rows, const RowTrialFn& fn,
              ExperimentOutput& out) {
  std::vector<RowJob> jobs;
  const auto idx = trial_indices(ctx.exp.trials(), ctx.settings);
  for (const auto& row : rows) {
    const std::uint64_t rs = row_seed(ctx.exp.seed(), row);
    for (std::size_t t : idx) jobs.push_back({row, t, derive_seed(rs, t)});
  }
  std::vector<Evaluation> results(jobs.size());
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;
  parallel_for(jobs.size(), ctx.settings.workers, [&](std::size_t i) {
    results[i] = fn(jobs[i].row, jobs[i].seed);
    const std::size_t d = ++done;
    std::lock_guard lock(log_mutex);
    ctx.log(LogLevel::Debug, jobs[i].row + " trial " + std::to_string(jobs[i].trial) +
                                 ": e_w=" + fmt17(results[i].e_w) + " e_n=" + fmt17(results[i].e_n));
    if (d % std::max<std::size_t>(1, jobs.size() / 10) == 0 || d == jobs.size()) {
      ctx.log(LogLevel::Info, std::to_string(d) + "/" + std::to_string(jobs.size()) + " trials done");
    }
  });

  json jrows = json::array();
  for (const auto& row : rows) {
    std::vector<double> ew;
    std::vector<double> en;
    json seeds = json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].row != row) continue;
      ew.push_back(results[i].e_w);
      en.push_back(results[i].e_n);
      seeds.push_back(jobs[i].seed);
      out.trials.push_back({row, jobs[i].trial, jobs[i].seed, results[i].e_w, results[i].e_n});
    }
    const MeanSd mw = mean_sd(ew);
    const MeanSd mn = mean_sd(en);
    jrows.push_back({{"row", row},
                     {"e_w", {{"mean", mw.mean}, {"sd", mw.sd}}},
                     {"e_n", {{"mean", mn.mean}, {"sd", mn.sd}}},
                     {"trial_seeds", seeds}});
    if (auto lim = ctx.impl.thresholds.get(row, "e_w_mean_max")) {
      out.checks.push_back({row + ": mean e_w", mw.mean, *lim, true});
    }
    if (auto lim = ctx.impl.thresholds.get(row, "e_n_mean_max")) {
      out.checks.push_back({row + ": mean e_n", mn.mean, *lim, true});
    }
  }
  out.report["rows"] = std::move(jrows);
}

Evaluation toy_trial(const PolicySpec& policy, std::size_t n_train, std::size_t n_test,
                     const NoiseSpec& noise, const OptimizerConfig& opt, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 1));
  const ToyProblem problem = sample_toy_problem(policy, rng);
  Trajectory train = sample_toy_points(problem, n_train, rng);
  const Trajectory test = sample_toy_points(problem, n_test, rng);
  if (noise.epsilon > 0.0) {
    train = add_noise(single(std::move(train)), noise, derive_seed(seed, 2)).trajectories.front();
  }
  const auto learned =
      learn_constraint(train.samples, 1, SphericalRepresentation{2}, seeded(opt, derive_seed(seed, 3)));
  return evaluate(learned.model, test.samples, test.truth);
}

void run_toy(const Context& ctx, const ToyParams& p, ExperimentOutput& out) {
  std::vector<std::string> rows;
  for (const auto& pol : p.policies) rows.push_back(pol.name);
  run_rows(ctx, rows,
           [&](const std::string& row, std::uint64_t seed) {
             const auto it = std::find_if(p.policies.begin(), p.policies.end(),
                                          [&](const auto& np) { return np.name == row; });
             return toy_trial(it->policy, p.train_points, p.test_points, p.noise, ctx.impl.optimizer,
                              seed);
           },
           out);
  out.report["train_points"] = p.train_points;
  out.report["test_points"] = p.test_points;
  out.report["noise"] = {{"epsilon", p.noise.epsilon},
                         {"target", p.noise.target == NoiseTarget::Actions ? "actions" : "prior_policy"}};
}

void run_sweep(const Context& ctx, const SweepParams& p, ExperimentOutput& out) {
  struct Point {
    std::string series;
    double value;
    std::size_t n;
    NoiseSpec noise;
  };
  std::vector<Point> points;
  std::map<std::string, std::size_t> by_row;
  const auto add = [&](Point pt, const std::string& row) {
    by_row[row] = points.size();
    points.push_back(pt);
  };
  std::vector<std::string> rows;
  for (std::size_t n : p.data_sizes) {
    const std::string row = "n=" + std::to_string(n);
    add({"data_size", static_cast<double>(n), n, {}}, row);
    rows.push_back(row);
  }
  for (double e : p.u_noise) {
    const std::string row = sweep_label("u_eps=", e);
    add({"u_noise", e, p.train_points, {e, NoiseTarget::Actions}}, row);
    rows.push_back(row);
  }
  for (double e : p.pi_noise) {
    const std::string row = sweep_label("pi_eps=", e);
    add({"pi_noise", e, p.train_points, {e, NoiseTarget::PriorPolicy}}, row);
    rows.push_back(row);
  }
  run_rows(ctx, rows,
           [&](const std::string& row, std::uint64_t seed) {
             const Point& pt = points[by_row.at(row)];
             return toy_trial(p.policy, pt.n, p.test_points, pt.noise, ctx.impl.optimizer, seed);
           },
           out);
  std::string csv = "series,value,e_w_mean,e_w_sd,e_n_mean,e_n_sd\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = out.report["rows"][i];
    csv += csv_field(points[i].series) + "," + fmt17(points[i].value) + "," +
           fmt17(r["e_w"]["mean"].get<double>()) + "," + fmt17(r["e_w"]["sd"].get<double>()) + "," +
           fmt17(r["e_n"]["mean"].get<double>()) + "," + fmt17(r["e_n"]["sd"].get<double>()) + "\n";
    out.report["rows"][i]["series"] = points[i].series;
    out.report["rows"][i]["value"] = points[i].value;
  }
  out.files["sweep.csv"] = csv;
  out.report["policy"] = policy_name(p.policy);
}

void split_dataset(const Dataset& ds, std::size_t n_train, std::vector<Observation>& train,
                   std::vector<Observation>& test, std::vector<GroundTruth>& test_truth) {
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const auto& t = ds.trajectories[i];
    if (i < n_train) {
      train.insert(train.end(), t.samples.begin(), t.samples.end());
    } else {
      test.insert(test.end(), t.samples.begin(), t.samples.end());
      test_truth.insert(test_truth.end(), t.truth.begin(), t.truth.end());
    }
  }
}

void run_three_link(const Context& ctx, const ThreeLinkParams& p, ExperimentOutput& out) {
  const auto n_train = static_cast<std::size_t>(
      std::llround(p.train_fraction * static_cast<double>(p.trajectories)));
  run_rows(ctx, p.cases,
           [&](const std::string& row, std::uint64_t seed) {
             const auto axes = parse_axes(row);
             const Matrix lambda = axis_selection(axes);
             const Dataset ds = generate_arm_dataset(p.setup, lambda, p.trajectories, derive_seed(seed, 1));
             std::vector<Observation> train;
             std::vector<Observation> test;
             std::vector<GroundTruth> truth;
             split_dataset(ds, n_train, train, test, truth);
             const auto learned =
                 learn_constraint(train, lambda.rows(), SelectionRepresentation{jacobian_features(p.setup.arm)},
                                  seeded(ctx.impl.optimizer, derive_seed(seed, 3)));
             return evaluate(learned.model, test, truth);
           },
           out);
  out.report["trajectories"] = p.trajectories;
  out.report["points_per_trajectory"] = p.setup.points_per_trajectory;
  out.report["train_trajectories"] = n_train;
}

JointState final_state(const Trajectory& t) {
  const auto& last = t.samples.back();
  return last.x + t.dt * last.u;
}

double task_error(const PlanarArm& arm, const std::vector<TaskAxis>& axes,
                  const Eigen::Vector3d& target, const JointState& q) {
  Eigen::Vector3d e = target - arm.task_coordinates(q);
  e(2) = wrap_angle(e(2));
  return (axis_selection(axes) * e).norm();
}

std::string trial_prefix(std::size_t trials, std::size_t t) {
  if (trials <= 1) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial%03zu_", t);
  return buf;
}

struct ScenarioResult {
  json report;
  std::vector<MetricRecord> records;
  std::map<std::string, std::string> files;
  std::vector<ThresholdCheck> checks;
};

// Runs one trial function per trial index and merges the results in order.
void run_scenarios(const Context& ctx, const std::function<ScenarioResult(std::size_t, std::uint64_t)>& fn,
                   ExperimentOutput& out) {
  const auto idx = trial_indices(ctx.exp.trials(), ctx.settings);
  const std::uint64_t rs = row_seed(ctx.exp.seed(), experiment_name(ctx.exp.kind()));
  std::vector<ScenarioResult> results(idx.size());
  parallel_for(idx.size(), ctx.settings.workers, [&](std::size_t i) {
    results[i] = fn(idx[i], derive_seed(rs, idx[i]));
    ctx.log(LogLevel::Info, "trial " + std::to_string(idx[i]) + " done");
  });
  json trials = json::array();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto& r = results[i];
    r.report["trial"] = idx[i];
    r.report["seed"] = derive_seed(rs, idx[i]);
    trials.push_back(std::move(r.report));
    out.trials.insert(out.trials.end(), r.records.begin(), r.records.end());
    for (auto& [name, content] : r.files) {
      out.files[trial_prefix(ctx.exp.trials(), idx[i]) + name] = std::move(content);
    }
    for (auto& c : r.checks) {
      if (idx.size() > 1) c.name = "trial " + std::to_string(idx[i]) + ": " + c.name;
      out.checks.push_back(std::move(c));
    }
  }
  out.report["trials_detail"] = std::move(trials);
}

double max_joint_deviation(const Trajectory& a, const Trajectory& b) {
  double worst = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    worst = std::max(worst, (a.samples[i].x - b.samples[i].x).cwiseAbs().maxCoeff());
  }
  return worst;
}

void run_compare(const Context& ctx, const CompareParams& p, ExperimentOutput& out) {
  const auto limit_task = ctx.impl.thresholds.get("", "final_task_error_max");
  const auto limit_joint = ctx.impl.thresholds.get("", "joint_tracking_error_max");
  run_scenarios(ctx, [&](std::size_t, std::uint64_t seed) {
    ScenarioResult res;
    res.report["scenarios"] = json::array();
    const FeatureMap features = jacobian_features(p.setup.arm);
    for (std::size_t si = 0; si < p.scenarios.size(); ++si) {
      const Scenario& sc = p.scenarios[si];
      const std::uint64_t ss = derive_seed(seed, fnv1a64(sc.name));
      const Matrix lambda = axis_selection(sc.axes);
      const Index k = lambda.rows();
      ArmDemoSetup train_setup = p.setup;
      train_setup.points_per_trajectory = p.train_points;
      const Dataset train = generate_arm_dataset(train_setup, lambda, 1, derive_seed(ss, 1));
      const auto train_obs = train.observations();

      const auto learned = learn_constraint(train_obs, k, SelectionRepresentation{features},
                                            seeded(ctx.impl.optimizer, derive_seed(ss, 3)));

      const ConstraintModel truth_model(SelectionConstraint(lambda, features));
      const TaskPointAttractor task{p.setup.arm, sc.target, p.task_gain};
      const Trajectory gt =
          simulate_trajectory(truth_model, task, p.setup.prior, p.start, p.setup.dt, p.duration);

      RetargetPlan plan{learned.model, ReplayTask{estimate_task_policy(learned.model, gt.samples)},
                        p.setup.prior, std::nullopt};
      const Trajectory proposed = reproduce_trajectory(plan, p.start, p.setup.dt, p.duration);
      const double err_gt = task_error(p.setup.arm, sc.axes, sc.target, final_state(gt));
      const double err_prop = task_error(p.setup.arm, sc.axes, sc.target, final_state(proposed));
      const double dev_prop = max_joint_deviation(proposed, gt);
      const Evaluation ev_prop = evaluate(learned.model, gt.samples, gt.truth);

      json js = {{"name", sc.name},
                 {"axes", axes_label(sc.axes)},
                 {"target", vector_json(sc.target)},
                 {"ground_truth_final_error", err_gt},
                 {"proposed",
                  {{"lambda", matrix_json(learned.model.selection()->lambda())},
                   {"objective", learned.objective_value},
                   {"final_task_error", err_prop},
                   {"max_joint_deviation", dev_prop},
                   {"e_w", ev_prop.e_w},
                   {"e_n", ev_prop.e_n}}}};
      res.records.push_back({sc.name + "/proposed", 0, ss, ev_prop.e_w, ev_prop.e_n});
      res.files[sc.name + "_ground_truth.csv"] = dataset_csv(single(gt));
      res.files[sc.name + "_proposed.csv"] = dataset_csv(single(proposed));
      if (limit_task) {
        res.checks.push_back({sc.name + ": proposed final task error", err_prop, *limit_task, true});
      }
      if (limit_joint) {
        res.checks.push_back({sc.name + ": proposed joint tracking error", dev_prop, *limit_joint, true});
      }

      // Literature baseline: separate w from (x, u), then learn Lambda from w_hat.
      json jb;
      try {
        const BaselineResult sep = baseline_separate_nullspace(train_obs, p.baseline);
        std::vector<JointState> states;
        for (const auto& o : train_obs) states.push_back(o.x);
        const LearnedSelection sel = learn_selection_matrix(
            states, sep.w_hat, features, k, seeded(ctx.impl.optimizer, derive_seed(ss, 4)));
        const ConstraintModel base_model(SelectionConstraint(sel.lambda, features));
        const auto b_hat = estimate_task_policy(base_model, gt.samples);

        Trajectory roll;
        roll.dt = p.setup.dt;
        JointState x = p.start;
        std::string stopped;
        for (std::size_t t = 0; t < gt.size(); ++t) {
          const Matrix a = base_model.matrix(x);
          if (numerical_rank(a, kRankCollapseTolerance) < a.rows()) {
            stopped = "rank collapse at step " + std::to_string(t);
            break;
          }
          const Vector w = sep.model(x);
          const Vector u = pseudo_inverse(a) * b_hat[t] + w;
          if (!u.allFinite()) {
            stopped = "non-finite action at step " + std::to_string(t);
            break;
          }
          roll.samples.push_back(Observation{x, u, eval_policy(p.setup.prior, x)});
          x += p.setup.dt * u;
        }
        std::vector<Vector> w_true;
        std::vector<Vector> w_est;
        for (std::size_t t = 0; t < gt.size(); ++t) {
          w_true.push_back(gt.truth[t].w);
          w_est.push_back(sep.model(gt.samples[t].x));
        }
        const Vector sigma = action_std(gt.samples);
        const double ew = nmse_w(w_true, w_est, sigma);
        const double en = consistency_error(base_model, gt.samples, sigma);
        jb = {{"lambda", matrix_json(sel.lambda)},
              {"separation_objective", sep.objective},
              {"selection_objective", sel.objective_value},
              {"e_w", ew},
              {"e_n", en}};
        if (!roll.samples.empty()) {
          jb["final_task_error"] = task_error(p.setup.arm, sc.axes, sc.target, final_state(roll));
          jb["max_joint_deviation"] = max_joint_deviation(roll, gt);
          res.files[sc.name + "_baseline.csv"] = dataset_csv(single(roll));
        }
        if (!stopped.empty()) jb["stopped"] = stopped;
        res.records.push_back({sc.name + "/baseline", 0, ss, ew, en});
      } catch (const Error& e) {
        jb = {{"failed", e.what()}};
        ctx.log(LogLevel::Info, sc.name + ": baseline failed: " + e.what());
      }
      js["baseline"] = std::move(jb);
      res.report["scenarios"].push_back(std::move(js));
    }
    return res;
  }, out);
}

struct DemoRun {
  LearnedConstraint learned;
  Trajectory demo;
  Evaluation eval;
};

DemoRun learn_and_demonstrate(const DemoParams& d, const OptimizerConfig& opt, std::uint64_t seed) {
  const Matrix lambda = axis_selection(d.axes);
  const FeatureMap features = jacobian_features(d.setup.arm);
  const Dataset train = generate_arm_dataset(d.setup, lambda, d.train_trajectories, derive_seed(seed, 1));
  auto learned = learn_constraint(train.observations(), lambda.rows(), SelectionRepresentation{features},
                                  seeded(opt, derive_seed(seed, 3)));
  const ConstraintModel truth_model(SelectionConstraint(lambda, features));
  const TaskPointAttractor task{d.setup.arm, d.target, d.setup.task_gain};
  Trajectory demo = simulate_trajectory(truth_model, task, d.setup.prior, d.start, d.setup.dt, d.duration);
  const Evaluation ev = evaluate(learned.model, demo.samples, demo.truth);
  return {std::move(learned), std::move(demo), ev};
}

json clearance_json(const ClearanceReport& r) {
  json j = {{"clear", r.clear},
            {"violating_steps", r.violating_steps},
            {"links_hit", r.links_hit},
            {"min_distance", r.min_distance}};
  if (r.first_step) j["first_step"] = *r.first_step;
  if (r.first_link) j["first_link"] = *r.first_link;
  return j;
}

void run_obstacle(const Context& ctx, const ObstacleParams& p, ExperimentOutput& out) {
  const auto& th = ctx.impl.thresholds;
  run_scenarios(ctx, [&](std::size_t, std::uint64_t seed) {
    ScenarioResult res;
    const DemoRun d = learn_and_demonstrate(p.demo, ctx.impl.optimizer, seed);
    const PlanarArm& arm = p.demo.setup.arm;
    const AttractorTask attractor =
        fit_task_attractor(d.learned.model, arm, d.demo.samples, p.demo.setup.task_gain);
    const RetargetPlan direct_plan{d.learned.model, attractor, p.demo.setup.prior, std::nullopt};
    const RetargetPlan retarget_plan{d.learned.model, attractor, p.robot_policy, std::nullopt};
    const Trajectory direct = reproduce_trajectory(direct_plan, p.demo.start, p.demo.setup.dt, p.demo.duration);
    const Trajectory retargeted =
        reproduce_trajectory(retarget_plan, p.demo.start, p.demo.setup.dt, p.demo.duration);
    const auto c_direct = check_obstacle_clearance(direct, arm, p.obstacle);
    const auto c_retarget = check_obstacle_clearance(retargeted, arm, p.obstacle);
    const double err = task_error(arm, p.demo.axes, p.demo.target, final_state(retargeted));
    const double err_direct = task_error(arm, p.demo.axes, p.demo.target, final_state(direct));

    res.report = {{"lambda", matrix_json(d.learned.model.selection()->lambda())},
                  {"fitted_target", vector_json(attractor.target)},
                  {"obstacle",
                   {{"x_min", p.obstacle.x_min()},
                    {"y_min", p.obstacle.y_min()},
                    {"x_max", p.obstacle.x_max()},
                    {"y_max", p.obstacle.y_max()}}},
                  {"direct", {{"clearance", clearance_json(c_direct)}, {"final_task_error", err_direct}}},
                  {"retargeted", {{"clearance", clearance_json(c_retarget)}, {"final_task_error", err}}},
                  {"demo", {{"e_w", d.eval.e_w}, {"e_n", d.eval.e_n}}}};
    res.records.push_back({"demo", 0, seed, d.eval.e_w, d.eval.e_n});
    res.files["demo.csv"] = dataset_csv(single(d.demo));
    res.files["direct.csv"] = dataset_csv(single(direct));
    res.files["retargeted.csv"] = dataset_csv(single(retargeted));
    if (auto lim = th.get("", "retargeted_violations_max")) {
      res.checks.push_back({"retargeted violating steps", static_cast<double>(c_retarget.violating_steps), *lim, true});
    }
    if (auto lim = th.get("", "direct_violations_min")) {
      res.checks.push_back({"direct imitation violating steps", static_cast<double>(c_direct.violating_steps), *lim, false});
    }
    if (auto lim = th.get("", "final_task_error_max")) {
      res.checks.push_back({"retargeted final task error", err, *lim, true});
    }
    return res;
  }, out);
}

void run_embodiment(const Context& ctx, const EmbodimentParams& p, ExperimentOutput& out) {
  run_scenarios(ctx, [&](std::size_t, std::uint64_t seed) {
    ScenarioResult res;
    const DemoRun d = learn_and_demonstrate(p.demo, ctx.impl.optimizer, seed);
    const PlanarArm& demo_arm = p.demo.setup.arm;
    TaskSource source;
    if (p.task_source == TaskSourceKind::Replay) {
      source = ReplayTask{estimate_task_policy(d.learned.model, d.demo.samples)};
    } else {
      source = fit_task_attractor(d.learned.model, demo_arm, d.demo.samples, p.demo.setup.task_gain);
    }
    const RetargetPlan plan{d.learned.model, source, p.robot_policy,
                            Embodiment{p.imitator, p.correspondence}};
    const Trajectory imit = reproduce_trajectory(plan, p.imitator_start, p.demo.setup.dt, p.demo.duration);

    // Trace distance in the learned task space Lambda_hat r.
    const Matrix& lambda = d.learned.model.selection()->lambda();
    double sq = 0.0;
    double worst = 0.0;
    std::string trace = "t,demo_x,demo_y,demo_theta,imitator_x,imitator_y,imitator_theta\n";
    for (std::size_t t = 0; t < imit.size(); ++t) {
      const Eigen::Vector3d rd = demo_arm.task_coordinates(d.demo.samples[t].x);
      const Eigen::Vector3d ri = p.imitator.task_coordinates(imit.samples[t].x);
      Eigen::Vector3d mapped;
      for (Index i = 0; i < 3; ++i) mapped(i) = ri(p.correspondence[static_cast<std::size_t>(i)]);
      Eigen::Vector3d diff = mapped - rd;
      diff(2) = wrap_angle(diff(2));
      const double e = (lambda * diff).squaredNorm();
      sq += e;
      worst = std::max(worst, std::sqrt(e));
      trace += fmt17(static_cast<double>(t) * imit.dt) + "," + fmt17(rd(0)) + "," + fmt17(rd(1)) + "," +
               fmt17(rd(2)) + "," + fmt17(ri(0)) + "," + fmt17(ri(1)) + "," + fmt17(ri(2)) + "\n";
    }
    const double rmse = std::sqrt(sq / static_cast<double>(std::max<std::size_t>(1, imit.size())));
    res.report = {{"lambda", matrix_json(lambda)},
                  {"task_source", p.task_source == TaskSourceKind::Replay ? "replay" : "attractor"},
                  {"task_trace_rmse", rmse},
                  {"task_trace_max_error", worst},
                  {"demo", {{"e_w", d.eval.e_w}, {"e_n", d.eval.e_n}}}};
    res.records.push_back({"demo", 0, seed, d.eval.e_w, d.eval.e_n});
    res.files["demo.csv"] = dataset_csv(single(d.demo));
    res.files["imitator.csv"] = dataset_csv(single(imit));
    res.files["task_trace.csv"] = trace;
    if (auto lim = ctx.impl.thresholds.get("", "rmse_max")) {
      res.checks.push_back({"imitator task trace RMSE", rmse, *lim, true});
    }
    return res;
  }, out);
}

std::vector<HumanArmRecording> load_recordings(const IngestParams& p, std::vector<std::string>& warnings) {
  std::vector<HumanArmRecording> recs;
  for (const auto& path : p.inputs) {
    KeypointParse parsed = read_keypoints(path, p.options.side);
    for (auto& w : parsed.warnings) warnings.push_back(path.string() + ": " + w);
    HumanArmRecording rec;
    rec.frames = std::move(parsed.frames);
    rec.fps = p.options.fps;
    rec.side = p.options.side;
    rec.facing = p.options.facing;
    recs.push_back(std::move(rec));
  }
  return recs;
}

LearnedConstraint learn_ingested(const Dataset& ds, const PlanarArm& arm, std::optional<Index> k,
                                 const OptimizerConfig& opt) {
  const SelectionRepresentation rep{jacobian_features(arm)};
  if (k) return learn_constraint(ds.observations(), *k, rep, opt);
  return learn_constraint_sweep(ds.observations(), rep, opt);
}

void run_ingest(const Context& ctx, const IngestParams& p, ExperimentOutput& out) {
  run_scenarios(ctx, [&](std::size_t, std::uint64_t seed) {
    ScenarioResult res;
    std::vector<std::string> warnings;
    std::vector<HumanArmRecording> recs;
    std::optional<Dataset> original;
    if (p.synth) {
      const Matrix lambda = axis_selection(p.synth->axes);
      Dataset ds = generate_arm_dataset(p.synth->setup, lambda, p.synth->trajectories, derive_seed(seed, 1));
      for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
        std::vector<JointState> angles;
        for (const auto& s : ds.trajectories[i].samples) angles.push_back(s.x);
        const auto rec = synthesize_recording(p.synth->setup.arm, angles, p.synth->layout, p.options.fps);
        const std::string text = emit_keypoint_json(rec);
        if (p.write_keypoints) {
          char name[48];
          std::snprintf(name, sizeof name, "keypoints/recording_%03zu.json", i);
          res.files[name] = text;
        }
        KeypointParse parsed = parse_keypoint_json(text, p.options.side);
        HumanArmRecording back;
        back.frames = std::move(parsed.frames);
        back.fps = p.options.fps;
        back.side = p.options.side;
        back.facing = p.options.facing;
        recs.push_back(std::move(back));
      }
      original = std::move(ds);
    } else {
      recs = load_recordings(p, warnings);
    }
    IngestResult ing = recordings_to_dataset(recs, p.options);
    warnings.insert(warnings.end(), ing.warnings.begin(), ing.warnings.end());
    for (const auto& w : warnings) ctx.log(LogLevel::Info, "warning: " + w);
    attach_prior(ing.dataset, p.prior);

    const auto opt = seeded(ctx.impl.optimizer, derive_seed(seed, 3));
    const LearnedConstraint learned = learn_ingested(ing.dataset, ing.arm, p.k, opt);
    const auto obs = ing.dataset.observations();
    const Vector sigma = action_std(obs);
    const double e_n = consistency_error(learned.model, obs, sigma);
    const auto& lengths = ing.arm.link_lengths();
    res.report = {{"link_lengths", lengths},
                  {"samples", obs.size()},
                  {"recordings", recs.size()},
                  {"k", learned.model.k()},
                  {"lambda", matrix_json(learned.model.selection()->lambda())},
                  {"objective", learned.objective_value},
                  {"e_n", e_n},
                  {"warnings", warnings}};
    double e_w = std::numeric_limits<double>::quiet_NaN();
    if (auto lim = ctx.impl.thresholds.get("", "e_n_max")) {
      res.checks.push_back({"ingested e_n", e_n, *lim, true});
    }
    if (original) {
      // Compare against learning directly on the simulated data.
      Dataset orig = *original;
      double angle_err = 0.0;
      for (std::size_t i = 0; i < orig.trajectories.size(); ++i) {
        const auto& a = orig.trajectories[i].samples;
        const auto& b = ing.dataset.trajectories[i].samples;
        for (std::size_t t = 0; t < b.size(); ++t) {
          angle_err = std::max(angle_err, (a[t].x - b[t].x).cwiseAbs().maxCoeff());
        }
      }
      const auto direct = learn_ingested(orig, p.synth->setup.arm, learned.model.k(), opt);
      const double dist = max_projector_distance(learned.model, direct.model, orig.observations());
      std::vector<Observation> test;
      std::vector<GroundTruth> truth;
      for (const auto& t : orig.trajectories) {
        test.insert(test.end(), t.samples.begin(), t.samples.end());
        truth.insert(truth.end(), t.truth.begin(), t.truth.end());
      }
      e_w = evaluate(learned.model, test, truth).e_w;
      res.report["synthesis"] = {{"max_angle_error", angle_err},
                                 {"projector_distance", dist},
                                 {"e_w", e_w},
                                 {"direct_lambda", matrix_json(direct.model.selection()->lambda())}};
      if (auto lim = ctx.impl.thresholds.get("", "projector_distance_max")) {
        res.checks.push_back({"projector distance to direct learning", dist, *lim, true});
      }
      if (auto lim = ctx.impl.thresholds.get("", "angle_error_max")) {
        res.checks.push_back({"recovered angle error", angle_err, *lim, true});
      }
    }
    res.records.push_back({"ingest", 0, seed, e_w, e_n});
    res.files["ingested.csv"] = dataset_csv(ing.dataset);
    return res;
  }, out);
}

}  // namespace

ExperimentOutput Experiment::run(const RunSettings& settings) const {
  const Context ctx{*this, *impl_, settings};
  ExperimentOutput out;
  out.report["experiment"] = experiment_name(kind_);
  out.report["version"] = kVersion;
  out.report["config_hash"] = config_hash(effective_);
  out.report["seed"] = seed_;
  out.report["trials"] = trials_;
  if (settings.only_trial) out.report["only_trial"] = *settings.only_trial;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ToyParams>) {
          run_toy(ctx, p, out);
        } else if constexpr (std::is_same_v<T, SweepParams>) {
          run_sweep(ctx, p, out);
        } else if constexpr (std::is_same_v<T, ThreeLinkParams>) {
          run_three_link(ctx, p, out);
        } else if constexpr (std::is_same_v<T, CompareParams>) {
          run_compare(ctx, p, out);
        } else if constexpr (std::is_same_v<T, ObstacleParams>) {
          run_obstacle(ctx, p, out);
        } else if constexpr (std::is_same_v<T, EmbodimentParams>) {
          run_embodiment(ctx, p, out);
        } else {
          run_ingest(ctx, p, out);
        }
      },
      impl_->params);
  json checks = json::array();
  for (const auto& c : out.checks) {
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"limit", c.limit},
                      {"kind", c.upper ? "max" : "min"},
                      {"passed", c.passed()}});
  }
  out.report["checks"] = std::move(checks);
  out.report["passed"] = out.passed();
  out.files["trials.csv"] = trials_csv(out.trials);
  out.files["report.json"] = out.report.dump(2) + "\n";
  return out;
}

void write_experiment_output(const ExperimentOutput& out, const std::filesystem::path& dir) {
  for (const auto& [name, content] : out.files) {
    const auto path = dir / name;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    os << content;
  }
}

}  // namespace ccl
