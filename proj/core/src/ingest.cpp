#include "ccl/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>


namespace ccl {

namespace {

using nlohmann::json;

constexpr std::size_t kBodyKeypoints = 25;
constexpr std::size_t kHandKeypoints = 21;
constexpr std::size_t kHandKnuckle = 9;

struct SideIndices {
  std::size_t shoulder, elbow, wrist, hip;
  const char* hand_key;
};

SideIndices indices(BodySide side) {
  if (side == BodySide::Right) return {2, 3, 4, 9, "hand_right_keypoints_2d"};
  return {5, 6, 7, 12, "hand_left_keypoints_2d"};
}

std::string line_column(std::string_view bytes, std::size_t offset) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(offset, bytes.size()); ++i) {
    if (bytes[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

Keypoint read_point(const json& flat, std::size_t index) {
  if (!flat.is_array() || flat.size() < 3 * (index + 1)) return {};
  Keypoint k;
  k.x = flat[3 * index].get<double>();
  k.y = flat[3 * index + 1].get<double>();
  k.confidence = std::clamp(flat[3 * index + 2].get<double>(), 0.0, 1.0);
  return k;
}

void parse_frame(const json& frame, BodySide side, std::size_t frame_index, KeypointParse& out) {
  if (!frame.is_object()) throw ParseError("keypoints: frame " + std::to_string(frame_index) + " is not an object");
  const auto people = frame.find("people");
  if (people == frame.end() || !people->is_array() || people->empty()) {
    out.warnings.push_back("frame " + std::to_string(frame_index) + ": no person detected, skipped");
    return;
  }
  const json& person = people->front();
  const SideIndices idx = indices(side);
  KeypointFrame f;
  f.frame_index = frame_index;
  if (auto it = frame.find("timestamp"); it != frame.end() && it->is_number()) {
    f.timestamp = it->get<double>();
  }
  try {
    const json empty = json::array();
    const auto pose = person.find("pose_keypoints_2d");
    const json& body = pose != person.end() ? *pose : empty;
    f.shoulder = read_point(body, idx.shoulder);
    f.elbow = read_point(body, idx.elbow);
    f.wrist = read_point(body, idx.wrist);
    f.hip = read_point(body, idx.hip);
    const auto hand = person.find(idx.hand_key);
    f.hand = read_point(hand != person.end() ? *hand : empty, kHandKnuckle);
  } catch (const json::exception& e) {
    throw ParseError("keypoints: frame " + std::to_string(frame_index) + ": " + e.what());
  }
  out.frames.push_back(f);
}

double signed_angle(const Eigen::Vector2d& from, const Eigen::Vector2d& to) {
  return std::atan2(from.x() * to.y() - from.y() * to.x(), from.dot(to));
}

// Pixel coordinates to a y-up frame.
Eigen::Vector2d math_point(const Keypoint& k) { return {k.x, -k.y}; }

bool valid(const KeypointFrame& f, double floor) {
  return f.shoulder.confidence >= floor && f.elbow.confidence >= floor &&
         f.wrist.confidence >= floor && f.hip.confidence >= floor && f.hand.confidence >= floor;
}

}  // namespace

KeypointParse parse_keypoint_json(std::string_view bytes, BodySide side,
                                  std::size_t first_frame_index) {
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ParseError("keypoints: malformed JSON at " + line_column(bytes, e.byte == 0 ? 0 : e.byte - 1) +
                     ": " + e.what());
  }
  KeypointParse out;
  if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) parse_frame(doc[i], side, first_frame_index + i, out);
  } else {
    parse_frame(doc, side, first_frame_index, out);
  }
  return out;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

KeypointParse read_keypoints(const std::filesystem::path& path, BodySide side) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw ParseError("keypoints: no such file or directory: " + path.string());
  if (!fs::is_directory(path)) {
    try {
      return parse_keypoint_json(read_file(path), side);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  static const std::regex pattern(R"(^(.*)_(\d{12})_keypoints\.json$)");
  std::map<std::size_t, fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) {
      files.emplace(static_cast<std::size_t>(std::stoull(m[2].str())), entry.path());
    }
  }
  KeypointParse out;
  if (files.empty()) out.warnings.push_back(path.string() + ": no *_keypoints.json files");
  for (const auto& [index, file] : files) {
    KeypointParse one;
    try {
      one = parse_keypoint_json(read_file(file), side, index);
    } catch (const ParseError& e) {
      throw ParseError(file.string() + ": " + e.what());
    }
    out.frames.insert(out.frames.end(), one.frames.begin(), one.frames.end());
    out.warnings.insert(out.warnings.end(), one.warnings.begin(), one.warnings.end());
  }
  return out;
}

JointAngleTrack keypoints_to_joint_angles(const HumanArmRecording& rec, double confidence_floor) {
  const double s = rec.facing == Facing::Left ? 1.0 : -1.0;
  JointAngleTrack track;
  for (const auto& f : rec.frames) {
    if (!valid(f, confidence_floor)) {
      ++track.skipped;
      continue;
    }
    const Eigen::Vector2d sh = math_point(f.shoulder);
    const Eigen::Vector2d down = math_point(f.hip) - sh;
    const Eigen::Vector2d upper = math_point(f.elbow) - sh;
    const Eigen::Vector2d fore = math_point(f.wrist) - math_point(f.elbow);
    const Eigen::Vector2d hand = math_point(f.hand) - math_point(f.wrist);
    if (down.norm() == 0.0 || upper.norm() == 0.0 || fore.norm() == 0.0 || hand.norm() == 0.0) {
      ++track.skipped;
      continue;
    }
    JointState q(3);
    q << s * signed_angle(down, upper), s * signed_angle(upper, fore), s * signed_angle(fore, hand);
    if (!track.angles.empty()) {
      const JointState& prev = track.angles.back();
      for (Index i = 0; i < 3; ++i) q(i) = prev(i) + wrap_angle(q(i) - prev(i));
    }
    track.frame_indices.push_back(f.frame_index);
    track.angles.push_back(q);
  }
  if (track.angles.size() < 2) {
    throw DimensionError("keypoints_to_joint_angles: fewer than two valid frames (" +
                         std::to_string(track.angles.size()) + ")");
  }
  return track;
}

std::array<double, 3> estimate_link_lengths(std::span<const HumanArmRecording> recs, double scale,
                                            double confidence_floor) {
  if (!(scale > 0.0)) throw ConfigError("estimate_link_lengths: scale must be positive");
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  std::size_t count = 0;
  for (const auto& rec : recs) {
    for (const auto& f : rec.frames) {
      if (!valid(f, confidence_floor)) continue;
      sum[0] += (math_point(f.elbow) - math_point(f.shoulder)).norm();
      sum[1] += (math_point(f.wrist) - math_point(f.elbow)).norm();
      sum[2] += (math_point(f.hand) - math_point(f.wrist)).norm();
      ++count;
    }
  }
  if (count == 0) throw DimensionError("estimate_link_lengths: no valid frames");
  for (auto& v : sum) v /= static_cast<double>(count) * scale;
  return sum;
}

Trajectory finite_difference_velocities(const JointAngleTrack& track, double fps) {
  if (!(fps > 0.0)) throw ConfigError("finite_difference_velocities: fps must be positive");
  if (track.angles.size() < 2) throw DimensionError("finite_difference_velocities: fewer than two frames");
  if (track.frame_indices.size() != track.angles.size()) {
    throw DimensionError("finite_difference_velocities: frame index count mismatch");
  }
  Trajectory traj;
  traj.dt = 1.0 / fps;
  for (std::size_t t = 0; t + 1 < track.angles.size(); ++t) {
    const auto gap = static_cast<double>(track.frame_indices[t + 1] - track.frame_indices[t]);
    if (!(gap > 0.0)) throw DimensionError("finite_difference_velocities: frames not increasing");
    traj.samples.push_back(
        Observation{track.angles[t], (track.angles[t + 1] - track.angles[t]) * (fps / gap), Vector()});
  }
  return traj;
}

JointAngleTrack smooth_angles(const JointAngleTrack& track, std::size_t window) {
  if (window == 0 || window % 2 == 0) throw ConfigError("smooth_angles: window must be odd and >= 1");
  if (window == 1) return track;
  JointAngleTrack out = track;
  const auto n = static_cast<std::ptrdiff_t>(track.angles.size());
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, t + half);
    JointState acc = JointState::Zero(track.angles[static_cast<std::size_t>(t)].size());
    for (std::ptrdiff_t i = lo; i <= hi; ++i) acc += track.angles[static_cast<std::size_t>(i)];
    out.angles[static_cast<std::size_t>(t)] = acc / static_cast<double>(hi - lo + 1);
  }
  return out;
}

IngestResult recordings_to_dataset(std::span<const HumanArmRecording> recs,
                                   const IngestOptions& opt) {
  if (recs.empty()) throw DimensionError("recordings_to_dataset: no recordings");
  IngestResult res;
  const auto lengths = estimate_link_lengths(recs, opt.scale, opt.confidence_floor);
  res.arm = PlanarArm({lengths[0], lengths[1], lengths[2]});
  res.dataset.meta.system = "ingest";
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const auto track = smooth_angles(keypoints_to_joint_angles(recs[r], opt.confidence_floor),
                                     opt.smoothing_window);
    if (track.skipped > 0) {
      res.warnings.push_back("recording " + std::to_string(r) + ": " +
                             std::to_string(track.skipped) + " frames under confidence floor");
    }
    res.dataset.trajectories.push_back(finite_difference_velocities(track, recs[r].fps));
  }
  return res;
}

HumanArmRecording synthesize_recording(const PlanarArm& arm, std::span<const JointState> angles,
                                       const SkeletonLayout& layout, double fps) {
  require_dim(arm.joint_count(), 3, "synthesize_recording: arm joints");
  const double s = layout.facing == Facing::Left ? 1.0 : -1.0;
  HumanArmRecording rec;
  rec.fps = fps;
  rec.side = layout.side;
  rec.facing = layout.facing;
  const auto to_px = [&](const Eigen::Vector2d& p) {
    return Keypoint{layout.shoulder_px.x() + p.x(), layout.shoulder_px.y() - p.y(), layout.confidence};
  };
  for (std::size_t t = 0; t < angles.size(); ++t) {
    require_dim(angles[t].size(), 3, "synthesize_recording: joint state");
    Eigen::Vector2d p = Eigen::Vector2d::Zero();
    double phi = -kPi / 2.0;
    std::array<Keypoint, 4> chain;
    chain[0] = to_px(p);
    for (std::size_t i = 0; i < 3; ++i) {
      phi += s * angles[t](static_cast<Index>(i));
      p += layout.scale * arm.link_lengths()[i] * Eigen::Vector2d(std::cos(phi), std::sin(phi));
      chain[i + 1] = to_px(p);
    }
    KeypointFrame f;
    f.frame_index = t;
    f.shoulder = chain[0];
    f.elbow = chain[1];
    f.wrist = chain[2];
    f.hand = chain[3];
    f.hip = to_px({0.0, -layout.trunk_px});
    rec.frames.push_back(f);
  }
  return rec;
}

namespace {

json frame_json(const KeypointFrame& f, BodySide side) {
  const SideIndices idx = indices(side);
  json body = json::array();
  for (std::size_t i = 0; i < 3 * kBodyKeypoints; ++i) body.push_back(0.0);
  const auto put = [](json& arr, std::size_t i, const Keypoint& k) {
    arr[3 * i] = k.x;
    arr[3 * i + 1] = k.y;
    arr[3 * i + 2] = k.confidence;
  };
  put(body, idx.shoulder, f.shoulder);
  put(body, idx.elbow, f.elbow);
  put(body, idx.wrist, f.wrist);
  put(body, idx.hip, f.hip);
  json hand = json::array();
  for (std::size_t i = 0; i < 3 * kHandKeypoints; ++i) hand.push_back(0.0);
  put(hand, kHandKnuckle, f.hand);
  json person;
  person["person_id"] = json::array({-1});
  person["pose_keypoints_2d"] = std::move(body);
  person[idx.hand_key] = std::move(hand);
  json frame;
  frame["version"] = 1.3;
  frame["people"] = json::array({std::move(person)});
  if (f.timestamp) frame["timestamp"] = *f.timestamp;
  return frame;
}

}  // namespace

std::string emit_keypoint_json(const HumanArmRecording& rec) {
  json doc = json::array();
  for (const auto& f : rec.frames) doc.push_back(frame_json(f, rec.side));
  return doc.dump();
}

void write_keypoint_directory(const HumanArmRecording& rec, const std::filesystem::path& dir,
                              const std::string& prefix) {
  std::filesystem::create_directories(dir);
  for (const auto& f : rec.frames) {
    char number[32];
    std::snprintf(number, sizeof number, "%012zu", f.frame_index);
    const auto path = dir / (prefix + "_" + number + "_keypoints.json");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    out << frame_json(f, rec.side).dump();
  }
}

}  // namespace ccl
