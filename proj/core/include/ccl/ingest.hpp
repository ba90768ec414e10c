#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccl/kinematics.hpp"
#include "ccl/simulator.hpp"

namespace ccl {

/// Image point in pixels (y down) with detector confidence in [0, 1].
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
};

struct KeypointFrame {
  std::size_t frame_index = 0;
  std::optional<double> timestamp;
  Keypoint shoulder;
  Keypoint elbow;
  Keypoint wrist;
  Keypoint hip;
  Keypoint hand;  // hand keypoint 9 (middle-finger knuckle); needed for the wrist angle
};

enum class BodySide { Left, Right };

/// Direction the subject faces in the image. Angles are positive backward,
/// so they follow the planar-arm convention for a subject facing left.
enum class Facing { Left, Right };

struct HumanArmRecording {
  std::vector<KeypointFrame> frames;
  double fps = 30.0;
  BodySide side = BodySide::Right;
  Facing facing = Facing::Left;
};

struct KeypointParse {
  std::vector<KeypointFrame> frames;
  std::vector<std::string> warnings;
};

/// Parses one frame object, or an array of frame objects, in the body-25
/// layout (flat x, y, confidence triples per person). Only the first person
/// is used. Frames without people are skipped with a warning. Throws
/// ParseError with line and column on malformed JSON.
KeypointParse parse_keypoint_json(std::string_view bytes, BodySide side,
                                  std::size_t first_frame_index = 0);

/// Reads either a single JSON file or a directory of
/// `<prefix>_<12 digits>_keypoints.json` files (ordered by frame number).
KeypointParse read_keypoints(const std::filesystem::path& path, BodySide side);

inline constexpr double kDefaultConfidenceFloor = 0.3;

/// Shoulder, elbow and wrist angles per valid frame.
struct JointAngleTrack {
  std::vector<std::size_t> frame_indices;
  std::vector<JointState> angles;  // 3 entries each, rad, unwrapped over time
  std::size_t skipped = 0;         // frames with a keypoint under the floor
};

/// Shoulder angle is the upper arm measured from the downward trunk
/// direction (shoulder to hip), elbow and wrist are relative angles of the
/// next segment. Image y is flipped before measuring. Throws DimensionError
/// with fewer than two valid frames.
JointAngleTrack keypoints_to_joint_angles(const HumanArmRecording& rec,
                                          double confidence_floor = kDefaultConfidenceFloor);

inline constexpr double kDefaultPixelScale = 300.0;

/// Mean upper-arm, forearm and hand lengths over all valid frames of all
/// recordings, divided by `scale`.
std::array<double, 3> estimate_link_lengths(std::span<const HumanArmRecording> recs,
                                            double scale = kDefaultPixelScale,
                                            double confidence_floor = kDefaultConfidenceFloor);

/// u_t = (q_{t+1} - q_t) fps / (frame gap); the last sample is dropped.
Trajectory finite_difference_velocities(const JointAngleTrack& track, double fps);

/// Centered moving average over `window` samples (odd, >= 1; 1 is a no-op).
JointAngleTrack smooth_angles(const JointAngleTrack& track, std::size_t window);

struct IngestOptions {
  BodySide side = BodySide::Right;
  Facing facing = Facing::Left;
  double fps = 30.0;
  double scale = kDefaultPixelScale;
  double confidence_floor = kDefaultConfidenceFloor;
  std::size_t smoothing_window = 1;
};

struct IngestResult {
  Dataset dataset;  // pi is empty; see attach_prior
  PlanarArm arm{{1.0, 1.0, 1.0}};
  std::vector<std::string> warnings;
};

IngestResult recordings_to_dataset(std::span<const HumanArmRecording> recs,
                                   const IngestOptions& opt);

/// Placement of a synthetic skeleton in the image.
struct SkeletonLayout {
  Eigen::Vector2d shoulder_px{600.0, 300.0};
  double trunk_px = 450.0;
  double scale = kDefaultPixelScale;  // pixels per arm length unit
  BodySide side = BodySide::Right;
  Facing facing = Facing::Left;
  double confidence = 0.95;
};

/// Keypoints an ideal detector would report for a planar 3-link arm.
HumanArmRecording synthesize_recording(const PlanarArm& arm, std::span<const JointState> angles,
                                       const SkeletonLayout& layout, double fps);

/// JSON array of body-25 frames, one person each, with hand keypoints.
std::string emit_keypoint_json(const HumanArmRecording& rec);

/// One `<prefix>_<12 digits>_keypoints.json` file per frame.
void write_keypoint_directory(const HumanArmRecording& rec, const std::filesystem::path& dir,
                              const std::string& prefix);

}  // namespace ccl
