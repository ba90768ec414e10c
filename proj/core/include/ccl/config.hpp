#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccl/kinematics.hpp"
#include "ccl/optimizer.hpp"
#include "ccl/policies.hpp"

namespace ccl {

/// Parsed JSON text that remembers where every value starts, so validation
/// errors can point at a line and column.
class ConfigDoc {
 public:
  /// Throws ConfigError("<source>:<line>:<col>: ...") on malformed JSON.
  static std::shared_ptr<const ConfigDoc> parse(std::string text, std::string source);
  static std::shared_ptr<const ConfigDoc> load(const std::filesystem::path& path);
  /// Wraps an in-memory value (no positions).
  static std::shared_ptr<const ConfigDoc> from_json(nlohmann::json value, std::string source);

  const nlohmann::json& root() const { return root_; }
  const std::string& source() const { return source_; }
  /// "<source>:<line>:<col>" for a JSON pointer, or "<source>:<pointer>".
  std::string where(const std::string& pointer) const;

 private:
  nlohmann::json root_;
  std::string source_;
  std::map<std::string, std::pair<std::size_t, std::size_t>> positions_;
};

/// Read-only view of one value inside a ConfigDoc.
class ConfigNode {
 public:
  ConfigNode(std::shared_ptr<const ConfigDoc> doc);  // NOLINT: root view
  ConfigNode(std::shared_ptr<const ConfigDoc> doc, const nlohmann::json* value, std::string pointer);

  const nlohmann::json& json() const { return *value_; }
  const std::string& pointer() const { return pointer_; }
  const std::string& source() const { return doc_->source(); }
  std::string where() const { return doc_->where(pointer_); }
  [[noreturn]] void fail(const std::string& message) const;

  bool has(const std::string& key) const;
  ConfigNode at(const std::string& key) const;  // throws when missing
  std::optional<ConfigNode> find(const std::string& key) const;
  std::vector<ConfigNode> elements() const;  // array items
  /// Errors on keys outside `allowed`.
  void expect_keys(std::initializer_list<const char*> allowed) const;

  double as_number() const;
  long long as_integer() const;
  std::string as_string() const;
  bool as_bool() const;
  std::vector<double> as_numbers() const;

  double number(const std::string& key, double fallback) const;
  double number(const std::string& key) const;
  long long integer(const std::string& key, long long fallback) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;

  /// Angle stored as `<name>_deg` or `<name>_rad` (not both); returns rad.
  std::optional<double> angle(const std::string& name) const;
  double angle(const std::string& name, double fallback_rad) const;
  std::optional<Vector> angles(const std::string& name) const;
  Vector angles(const std::string& name, const Vector& fallback_rad) const;

 private:
  std::shared_ptr<const ConfigDoc> doc_;
  const nlohmann::json* value_;
  std::string pointer_;
};

/// Optimizer settings: restarts, max_iters, objective_tol, param_tol,
/// initial_step, init_spread. Missing keys keep `defaults`.
OptimizerConfig optimizer_from_config(const ConfigNode& node, const OptimizerConfig& defaults = {});

/// Models needed to build some policies.
struct PolicyContext {
  std::optional<PlanarArm> arm;
  std::optional<ConstraintModel> model;  // for manipulability_gradient
};

/// {"type": "linear" | "limit_cycle" | "sinusoidal" | "point_attractor" |
///  "task_attractor" | "manipulability_gradient", ...}
PolicySpec policy_from_config(const ConfigNode& node, const PolicyContext& ctx = {});

PlanarArm arm_from_config(const ConfigNode& node);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
/// Hex FNV-1a of the canonical (sorted-key, compact) dump.
std::string config_hash(const nlohmann::json& config);

}  // namespace ccl
