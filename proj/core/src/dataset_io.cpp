#include "ccl/dataset_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace ccl {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void put_vector(std::ostream& os, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) os << ',' << v(i);
}

}  // namespace

void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  if (ds.size() == 0) throw DimensionError("write_dataset_csv: empty dataset");
  const auto& first = ds.trajectories.front().samples.front();
  const Index nx = first.x.size();
  const Index nu = first.u.size();
  const bool truth = ds.has_truth();
  Index nb = 0;
  if (truth) nb = ds.trajectories.front().truth.front().b.size();

  os << 't';
  for (Index i = 1; i <= nx; ++i) os << ",x" << i;
  for (Index i = 1; i <= nu; ++i) os << ",u" << i;
  if (truth) {
    for (Index i = 1; i <= nu; ++i) os << ",v" << i;
    for (Index i = 1; i <= nu; ++i) os << ",w" << i;
    for (Index i = 1; i <= nb; ++i) os << ",b" << i;
  }
  os << '\n';

  const auto old_flags = os.flags();
  const auto old_precision = os.precision();
  os << std::setprecision(17);
  for (const auto& traj : ds.trajectories) {
    for (std::size_t s = 0; s < traj.samples.size(); ++s) {
      const auto& obs = traj.samples[s];
      require_dim(obs.x.size(), nx, "write_dataset_csv x");
      require_dim(obs.u.size(), nu, "write_dataset_csv u");
      os << static_cast<double>(s) * traj.dt;
      put_vector(os, obs.x);
      put_vector(os, obs.u);
      if (truth) {
        const auto& gt = traj.truth[s];
        require_dim(gt.b.size(), nb, "write_dataset_csv b");
        put_vector(os, gt.v);
        put_vector(os, gt.w);
        put_vector(os, gt.b);
      }
      os << '\n';
    }
  }
  os.flags(old_flags);
  os.precision(old_precision);
}

Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("dataset csv: missing header");
  const auto header = split_csv(line);
  if (header.empty() || header[0] != "t") throw ParseError("dataset csv: header must start with 't'");
  Index nx = 0, nu = 0, nv = 0, nw = 0, nb = 0;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const char c = header[i].empty() ? '?' : header[i][0];
    switch (c) {
      case 'x': ++nx; break;
      case 'u': ++nu; break;
      case 'v': ++nv; break;
      case 'w': ++nw; break;
      case 'b': ++nb; break;
      default: throw ParseError("dataset csv: unexpected column '" + header[i] + "'");
    }
  }
  if (nx == 0 || nu == 0) throw ParseError("dataset csv: need x and u columns");
  const bool truth = nv > 0;
  if (truth && (nv != nu || nw != nu || nb == 0)) {
    throw ParseError("dataset csv: ground-truth columns must be v1..vn, w1..wn, b1..bk");
  }

  Dataset ds;
  double last_t = 0.0;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ParseError("dataset csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    std::vector<double> vals(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      try {
        vals[i] = std::stod(cells[i]);
      } catch (const std::exception&) {
        throw ParseError("dataset csv line " + std::to_string(line_no) + ": bad number '" +
                         cells[i] + "'");
      }
    }
    const double t = vals[0];
    if (ds.trajectories.empty() || t <= last_t) {
      ds.trajectories.emplace_back();
    } else if (ds.trajectories.back().samples.size() == 1) {
      ds.trajectories.back().dt = t - last_t;
    }
    last_t = t;
    auto& traj = ds.trajectories.back();
    std::size_t c = 1;
    auto take = [&](Index n) {
      Vector v(n);
      for (Index i = 0; i < n; ++i) v(i) = vals[c++];
      return v;
    };
    Observation obs;
    obs.x = take(nx);
    obs.u = take(nu);
    traj.samples.push_back(std::move(obs));
    if (truth) {
      GroundTruth gt;
      gt.v = take(nv);
      gt.w = take(nw);
      gt.b = take(nb);
      traj.truth.push_back(std::move(gt));
    }
  }
  if (ds.trajectories.empty()) throw ParseError("dataset csv: no samples");
  return ds;
}

nlohmann::json dataset_sidecar(const Dataset& ds) {
  nlohmann::json j;
  j["seed"] = ds.meta.seed;
  j["system"] = ds.meta.system;
  j["constraint"] = ds.meta.constraint;
  j["epsilon"] = ds.meta.epsilon;
  j["noise_target"] = ds.meta.noise_target;
  if (!ds.trajectories.empty()) {
    j["dt"] = ds.trajectories.front().dt;
    if (!ds.trajectories.front().samples.empty()) {
      j["state_dim"] = ds.trajectories.front().samples.front().x.size();
      j["action_dim"] = ds.trajectories.front().samples.front().u.size();
    }
  }
  std::vector<std::size_t> lengths;
  for (const auto& t : ds.trajectories) lengths.push_back(t.size());
  j["trajectory_lengths"] = lengths;
  return j;
}

void save_dataset(const std::filesystem::path& csv_path, const Dataset& ds) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  std::ofstream csv(csv_path);
  if (!csv) throw Error("cannot write " + csv_path.string());
  write_dataset_csv(csv, ds);
  std::filesystem::path side = csv_path;
  side.replace_extension(".json");
  std::ofstream js(side);
  if (!js) throw Error("cannot write " + side.string());
  js << dataset_sidecar(ds).dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& csv_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw ParseError("cannot open dataset " + csv_path.string());
  Dataset ds = read_dataset_csv(csv);
  std::filesystem::path side = csv_path;
  side.replace_extension(".json");
  std::ifstream js(side);
  if (js) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(js);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("dataset sidecar " + side.string() + ": " + e.what());
    }
    ds.meta.seed = j.value("seed", std::uint64_t{0});
    ds.meta.system = j.value("system", std::string{});
    ds.meta.constraint = j.value("constraint", std::string{});
    ds.meta.epsilon = j.value("epsilon", 0.0);
    ds.meta.noise_target = j.value("noise_target", std::string{"none"});
    if (j.contains("trajectory_lengths")) {
      // Re-split on recorded lengths; this is exact even when t does not restart.
      const auto lengths = j["trajectory_lengths"].get<std::vector<std::size_t>>();
      Dataset flat;
      flat.meta = ds.meta;
      auto all = ds.observations();
      auto truth = ds.truth();
      const double dt = j.value("dt", ds.trajectories.front().dt);
      std::size_t pos = 0;
      for (std::size_t len : lengths) {
        if (pos + len > all.size()) throw ParseError("dataset sidecar: lengths exceed sample count");
        Trajectory t;
        t.dt = dt;
        t.samples.assign(all.begin() + static_cast<std::ptrdiff_t>(pos),
                         all.begin() + static_cast<std::ptrdiff_t>(pos + len));
        if (!truth.empty()) {
          t.truth.assign(truth.begin() + static_cast<std::ptrdiff_t>(pos),
                         truth.begin() + static_cast<std::ptrdiff_t>(pos + len));
        }
        flat.trajectories.push_back(std::move(t));
        pos += len;
      }
      if (pos != all.size()) throw ParseError("dataset sidecar: lengths do not cover all samples");
      return flat;
    }
  }
  return ds;
}

void attach_prior(Dataset& ds, const PolicySpec& prior) {
  for (auto& t : ds.trajectories) {
    for (auto& s : t.samples) s.pi = eval_policy(prior, s.x);
  }
}

}  // namespace ccl
