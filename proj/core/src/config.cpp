#include "ccl/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ccl {

namespace {

using nlohmann::json;

std::string escape_pointer_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

// Walks already-validated JSON text and records where each value starts.
class PositionScanner {
 public:
  PositionScanner(const std::string& text,
                  std::map<std::string, std::pair<std::size_t, std::size_t>>& out)
      : text_(text), out_(out) {}

  void run() {
    skip_ws();
    value("");
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) advance();
  }
  std::string string_token() {
    std::string s;
    advance();  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') {
        advance();
        // Escapes only matter for key lookup; keep the common ones readable.
        const char c = text_[pos_];
        s += c == 'n' ? '\n' : c == 't' ? '\t' : c;
      } else {
        s += text_[pos_];
      }
      advance();
    }
    advance();  // closing quote
    return s;
  }
  void value(const std::string& pointer) {
    out_[pointer] = {line_, col_};
    if (pos_ >= text_.size()) return;
    const char c = text_[pos_];
    if (c == '{') {
      advance();
      skip_ws();
      while (pos_ < text_.size() && text_[pos_] != '}') {
        const std::string key = string_token();
        skip_ws();
        advance();  // ':'
        skip_ws();
        value(pointer + "/" + escape_pointer_token(key));
        skip_ws();
        if (text_[pos_] == ',') {
          advance();
          skip_ws();
        }
      }
      advance();
    } else if (c == '[') {
      advance();
      skip_ws();
      std::size_t i = 0;
      while (pos_ < text_.size() && text_[pos_] != ']') {
        value(pointer + "/" + std::to_string(i++));
        skip_ws();
        if (text_[pos_] == ',') {
          advance();
          skip_ws();
        }
      }
      advance();
    } else if (c == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '}' &&
             text_[pos_] != ']' && !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        advance();
      }
    }
  }

  const std::string& text_;
  std::map<std::string, std::pair<std::size_t, std::size_t>>& out_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

std::pair<std::size_t, std::size_t> offset_to_line_col(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::shared_ptr<const ConfigDoc> ConfigDoc::parse(std::string text, std::string source) {
  auto doc = std::make_shared<ConfigDoc>();
  doc->source_ = std::move(source);
  try {
    doc->root_ = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = offset_to_line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(doc->source_ + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": invalid JSON: " + e.what());
  }
  PositionScanner(text, doc->positions_).run();
  return doc;
}

std::shared_ptr<const ConfigDoc> ConfigDoc::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::shared_ptr<const ConfigDoc> ConfigDoc::from_json(nlohmann::json value, std::string source) {
  auto doc = std::make_shared<ConfigDoc>();
  doc->root_ = std::move(value);
  doc->source_ = std::move(source);
  return doc;
}

std::string ConfigDoc::where(const std::string& pointer) const {
  if (auto it = positions_.find(pointer); it != positions_.end()) {
    return source_ + ":" + std::to_string(it->second.first) + ":" +
           std::to_string(it->second.second);
  }
  return source_ + ":" + (pointer.empty() ? std::string("/") : pointer);
}

ConfigNode::ConfigNode(std::shared_ptr<const ConfigDoc> doc)
    : doc_(std::move(doc)), value_(&doc_->root()), pointer_() {}

ConfigNode::ConfigNode(std::shared_ptr<const ConfigDoc> doc, const nlohmann::json* value,
                       std::string pointer)
    : doc_(std::move(doc)), value_(value), pointer_(std::move(pointer)) {}

void ConfigNode::fail(const std::string& message) const {
  const std::string label = pointer_.empty() ? std::string("/") : pointer_;
  throw ConfigError(where() + ": " + label + ": " + message);
}

bool ConfigNode::has(const std::string& key) const {
  return value_->is_object() && value_->contains(key);
}

std::optional<ConfigNode> ConfigNode::find(const std::string& key) const {
  if (!value_->is_object()) fail("expected an object");
  const auto it = value_->find(key);
  if (it == value_->end()) return std::nullopt;
  return ConfigNode(doc_, &*it, pointer_ + "/" + escape_pointer_token(key));
}

ConfigNode ConfigNode::at(const std::string& key) const {
  auto node = find(key);
  if (!node) fail("missing required key \"" + key + "\"");
  return *node;
}

std::vector<ConfigNode> ConfigNode::elements() const {
  if (!value_->is_array()) fail("expected an array");
  std::vector<ConfigNode> out;
  for (std::size_t i = 0; i < value_->size(); ++i) {
    out.emplace_back(doc_, &(*value_)[i], pointer_ + "/" + std::to_string(i));
  }
  return out;
}

void ConfigNode::expect_keys(std::initializer_list<const char*> allowed) const {
  if (!value_->is_object()) fail("expected an object");
  for (const auto& [key, child] : value_->items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) {
      ConfigNode(doc_, &child, pointer_ + "/" + escape_pointer_token(key)).fail("unknown key");
    }
  }
}

double ConfigNode::as_number() const {
  if (!value_->is_number()) fail("expected a number");
  const double v = value_->get<double>();
  if (!std::isfinite(v)) fail("expected a finite number");
  return v;
}

long long ConfigNode::as_integer() const {
  if (value_->is_number_integer()) return value_->get<long long>();
  if (value_->is_number_float()) {
    const double v = value_->get<double>();
    if (std::isfinite(v) && v == std::floor(v)) return static_cast<long long>(v);
  }
  fail("expected an integer");
}

std::string ConfigNode::as_string() const {
  if (!value_->is_string()) fail("expected a string");
  return value_->get<std::string>();
}

bool ConfigNode::as_bool() const {
  if (!value_->is_boolean()) fail("expected true or false");
  return value_->get<bool>();
}

std::vector<double> ConfigNode::as_numbers() const {
  std::vector<double> out;
  for (const auto& e : elements()) out.push_back(e.as_number());
  return out;
}

double ConfigNode::number(const std::string& key, double fallback) const {
  auto n = find(key);
  return n ? n->as_number() : fallback;
}

double ConfigNode::number(const std::string& key) const { return at(key).as_number(); }

long long ConfigNode::integer(const std::string& key, long long fallback) const {
  auto n = find(key);
  return n ? n->as_integer() : fallback;
}

std::string ConfigNode::string(const std::string& key, const std::string& fallback) const {
  auto n = find(key);
  return n ? n->as_string() : fallback;
}

bool ConfigNode::boolean(const std::string& key, bool fallback) const {
  auto n = find(key);
  return n ? n->as_bool() : fallback;
}

std::vector<double> ConfigNode::numbers(const std::string& key) const {
  return at(key).as_numbers();
}

std::vector<double> ConfigNode::numbers(const std::string& key, std::vector<double> fallback) const {
  auto n = find(key);
  return n ? n->as_numbers() : fallback;
}

namespace {

template <typename T, typename Fn>
std::optional<T> angle_lookup(const ConfigNode& node, const std::string& name, Fn convert) {
  auto deg = node.find(name + "_deg");
  auto rad = node.find(name + "_rad");
  if (deg && rad) rad->fail("give either " + name + "_deg or " + name + "_rad, not both");
  if (deg) return convert(*deg, true);
  if (rad) return convert(*rad, false);
  if (node.has(name)) node.at(name).fail("angles need a _deg or _rad suffix");
  return std::nullopt;
}

}  // namespace

std::optional<double> ConfigNode::angle(const std::string& name) const {
  return angle_lookup<double>(*this, name, [](const ConfigNode& n, bool deg) {
    const double v = n.as_number();
    return deg ? deg2rad(v) : v;
  });
}

double ConfigNode::angle(const std::string& name, double fallback_rad) const {
  return angle(name).value_or(fallback_rad);
}

std::optional<Vector> ConfigNode::angles(const std::string& name) const {
  return angle_lookup<Vector>(*this, name, [](const ConfigNode& n, bool deg) {
    const auto values = n.as_numbers();
    Vector v(static_cast<Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
      v(static_cast<Index>(i)) = deg ? deg2rad(values[i]) : values[i];
    }
    return v;
  });
}

Vector ConfigNode::angles(const std::string& name, const Vector& fallback_rad) const {
  return angles(name).value_or(fallback_rad);
}

OptimizerConfig optimizer_from_config(const ConfigNode& node, const OptimizerConfig& defaults) {
  node.expect_keys({"restarts", "max_iters", "objective_tol", "param_tol", "initial_step",
                    "init_spread", "record_history"});
  OptimizerConfig cfg = defaults;
  cfg.restarts = static_cast<int>(node.integer("restarts", cfg.restarts));
  cfg.max_iters = static_cast<int>(node.integer("max_iters", cfg.max_iters));
  cfg.objective_tol = node.number("objective_tol", cfg.objective_tol);
  cfg.param_tol = node.number("param_tol", cfg.param_tol);
  cfg.initial_step = node.number("initial_step", cfg.initial_step);
  cfg.init_spread = node.number("init_spread", cfg.init_spread);
  cfg.record_history = node.boolean("record_history", cfg.record_history);
  try {
    cfg.validate();
  } catch (const Error& e) {
    node.fail(e.what());
  }
  return cfg;
}

PlanarArm arm_from_config(const ConfigNode& node) {
  node.expect_keys({"links"});
  try {
    return PlanarArm(node.numbers("links"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    node.at("links").fail(e.what());
  }
}

PolicySpec policy_from_config(const ConfigNode& node, const PolicyContext& ctx) {
  const std::string type = node.at("type").as_string();
  if (type == "linear") {
    node.expect_keys({"type", "gain"});
    if (!node.has("gain")) return default_linear_policy();
    const auto rows = node.at("gain").elements();
    if (rows.empty()) node.at("gain").fail("empty gain matrix");
    Matrix g;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto vals = rows[r].as_numbers();
      if (r == 0) g.resize(static_cast<Index>(rows.size()), static_cast<Index>(vals.size()));
      if (static_cast<Index>(vals.size()) != g.cols()) rows[r].fail("ragged gain matrix");
      for (std::size_t c = 0; c < vals.size(); ++c) {
        g(static_cast<Index>(r), static_cast<Index>(c)) = vals[c];
      }
    }
    if (g.cols() != g.rows() + 1) node.at("gain").fail("gain must be n x (n + 1)");
    return LinearPolicy{g};
  }
  if (type == "limit_cycle") {
    node.expect_keys({"type", "rho0", "omega"});
    LimitCyclePolicy p;
    p.rho0 = node.number("rho0", p.rho0);
    p.omega = node.number("omega", p.omega);
    if (!(p.rho0 > 0.0)) node.at("rho0").fail("must be positive");
    return p;
  }
  if (type == "sinusoidal") {
    node.expect_keys({"type"});
    return SinusoidalPolicy{};
  }
  if (type == "point_attractor") {
    node.expect_keys({"type", "beta", "target_deg", "target_rad"});
    PointAttractor p;
    p.beta = node.number("beta", 1.0);
    auto target = node.angles("target");
    if (!target) node.fail("point_attractor needs target_deg or target_rad");
    p.target = *target;
    return p;
  }
  if (type == "task_attractor") {
    node.expect_keys({"type", "gain", "target", "target_theta_deg", "target_theta_rad"});
    if (!ctx.arm) node.fail("task_attractor needs an arm in this context");
    TaskPointAttractor p{*ctx.arm, Eigen::Vector3d::Zero(), node.number("gain", 1.0)};
    const auto xy = node.numbers("target", {0.0, 0.0});
    if (xy.size() != 2) node.at("target").fail("expected [x, y]");
    p.target << xy[0], xy[1], node.angle("target_theta", 0.0);
    return p;
  }
  if (type == "manipulability_gradient") {
    node.expect_keys({"type", "gain", "step"});
    if (!ctx.model) node.fail("manipulability_gradient needs a constraint model in this context");
    ManipulabilityGradient p{*ctx.model, node.number("step", kDefaultGradientStep),
                             node.number("gain", 1.0)};
    if (!(p.step > 0.0)) node.at("step").fail("must be positive");
    return p;
  }
  node.at("type").fail("unknown policy type \"" + type + "\"");
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

}  // namespace ccl
