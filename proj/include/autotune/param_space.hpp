#pragma once

// Mixed real/integer/categorical/boolean configuration spaces.
//
// A ConfigurationSpace is an ordered list of ParameterSpec. A Configuration
// is a positionally aligned list of typed values. Search code works in the
// "encoded" space: reals and integers pass through as numbers, categorical
// and boolean values become their category index.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "autotune/error.hpp"

namespace autotune {

enum class ParamKind { Real, Integer, Categorical, Boolean };

inline const char* to_string(ParamKind k) {
  switch (k) {
    case ParamKind::Real: return "real";
    case ParamKind::Integer: return "integer";
    case ParamKind::Categorical: return "categorical";
    case ParamKind::Boolean: return "boolean";
  }
  return "?";
}

inline ParamKind parse_kind(const std::string& s) {
  if (s == "real") return ParamKind::Real;
  if (s == "integer") return ParamKind::Integer;
  if (s == "categorical") return ParamKind::Categorical;
  if (s == "boolean") return ParamKind::Boolean;
  throw SpaceError("unknown parameter kind '" + s + "'");
}

/// One typed parameter value. The alternative in use must match the kind:
/// Real -> double, Integer -> int64, Boolean -> bool, Categorical -> label.
using Value = std::variant<double, std::int64_t, bool, std::string>;

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string to_string(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return x;
        } else if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(x);
        } else {
          return std::to_string(x);
        }
      },
      v);
}

/// Rounds half away from zero (std::round semantics), as integer
/// parameters are materialized from continuous samples.
inline std::int64_t round_half_away(double x) {
  return static_cast<std::int64_t>(std::round(x));
}

struct ParameterSpec {
  std::string name;
  ParamKind kind = ParamKind::Real;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::string> categories;
  Value default_value;

  static ParameterSpec real(std::string name, double lower, double upper,
                            double def) {
    ParameterSpec p{std::move(name), ParamKind::Real, lower, upper, {}, def};
    p.check();
    return p;
  }

  static ParameterSpec integer(std::string name, std::int64_t lower,
                               std::int64_t upper, std::int64_t def) {
    ParameterSpec p{std::move(name), ParamKind::Integer,
                    static_cast<double>(lower), static_cast<double>(upper),
                    {}, def};
    p.check();
    return p;
  }

  static ParameterSpec categorical(std::string name,
                                   std::vector<std::string> categories,
                                   std::string def) {
    ParameterSpec p{std::move(name), ParamKind::Categorical, 0, 0,
                    std::move(categories), std::move(def)};
    p.check();
    return p;
  }

  static ParameterSpec boolean(std::string name, bool def) {
    ParameterSpec p{std::move(name), ParamKind::Boolean, 0, 0,
                    {"false", "true"}, def};
    p.check();
    return p;
  }

  bool is_numeric() const {
    return kind == ParamKind::Real || kind == ParamKind::Integer;
  }

  std::size_t cardinality() const { return categories.size(); }

  /// Inclusive bounds of this parameter in encoded space.
  double code_lower() const { return is_numeric() ? lower : 0.0; }
  double code_upper() const {
    return is_numeric() ? upper : static_cast<double>(categories.size() - 1);
  }

  std::optional<std::size_t> category_index(const std::string& label) const {
    auto it = std::find(categories.begin(), categories.end(), label);
    if (it == categories.end()) return std::nullopt;
    return static_cast<std::size_t>(it - categories.begin());
  }

  /// Empty string when `v` is admissible, otherwise a description of the
  /// bound it breaks.
  std::string check_value(const Value& v) const {
    switch (kind) {
      case ParamKind::Real: {
        const double* x = std::get_if<double>(&v);
        if (!x) return "expected real";
        if (!(*x >= lower && *x <= upper)) return range_string();
        return {};
      }
      case ParamKind::Integer: {
        const std::int64_t* x = std::get_if<std::int64_t>(&v);
        if (!x) return "expected integer";
        if (static_cast<double>(*x) < lower || static_cast<double>(*x) > upper)
          return range_string();
        return {};
      }
      case ParamKind::Boolean:
        return std::holds_alternative<bool>(v) ? "" : "expected boolean";
      case ParamKind::Categorical: {
        const std::string* s = std::get_if<std::string>(&v);
        if (!s) return "expected category label";
        if (!category_index(*s)) return category_string();
        return {};
      }
    }
    return "unknown kind";
  }

  std::string range_string() const {
    return "[" + format_double(lower) + ", " + format_double(upper) + "]";
  }

  std::string category_string() const {
    std::string s = "{";
    for (std::size_t i = 0; i < categories.size(); ++i) {
      if (i) s += ", ";
      s += categories[i];
    }
    return s + "}";
  }

  void check() const {
    if (name.empty()) throw SpaceError("parameter with empty name");
    if (is_numeric()) {
      if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper))
        throw SpaceError("parameter '" + name + "': need lower < upper");
      if (kind == ParamKind::Integer &&
          (lower != std::floor(lower) || upper != std::floor(upper)))
        throw SpaceError("parameter '" + name + "': integer bounds required");
    } else {
      std::set<std::string> distinct(categories.begin(), categories.end());
      if (categories.size() < 2 || distinct.size() != categories.size())
        throw SpaceError("parameter '" + name +
                         "': need at least 2 distinct categories");
      if (kind == ParamKind::Boolean &&
          categories != std::vector<std::string>{"false", "true"})
        throw SpaceError("parameter '" + name + "': boolean must be {false, true}");
    }
    if (auto msg = check_value(default_value); !msg.empty())
      throw SpaceError("parameter '" + name + "': default " +
                       to_string(default_value) + " violates " + msg);
  }
};

struct Configuration {
  std::vector<Value> values;

  std::size_t size() const { return values.size(); }
  const Value& operator[](std::size_t i) const { return values[i]; }
  Value& operator[](std::size_t i) { return values[i]; }

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

struct Violation {
  std::string param;
  std::string value;
  std::string bound;
};

/// Outcome of validate(). A structural error (wrong dimension) is reported
/// separately from per-parameter bound violations.
struct ValidationReport {
  std::optional<std::string> structural_error;
  std::vector<Violation> violations;

  bool ok() const { return !structural_error && violations.empty(); }
};

class ConfigurationSpace {
 public:
  ConfigurationSpace() = default;

  ConfigurationSpace(std::string name, std::vector<ParameterSpec> params)
      : name_(std::move(name)), params_(std::move(params)) {
    if (params_.empty()) throw SpaceError("space '" + name_ + "' has no parameters");
    std::set<std::string> seen;
    for (const auto& p : params_) {
      p.check();
      if (!seen.insert(p.name).second)
        throw SpaceError("duplicate parameter name '" + p.name + "'");
    }
  }

  const std::string& name() const { return name_; }
  std::size_t dimension() const { return params_.size(); }
  const std::vector<ParameterSpec>& params() const { return params_; }
  const ParameterSpec& operator[](std::size_t i) const { return params_[i]; }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return i;
    return std::nullopt;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& p : params_) out.push_back(p.name);
    return out;
  }

 private:
  std::string name_;
  std::vector<ParameterSpec> params_;
};

inline ValidationReport validate(const ConfigurationSpace& space,
                                 const Configuration& config) {
  ValidationReport report;
  if (config.size() != space.dimension()) {
    report.structural_error = "dimension mismatch: configuration has " +
                              std::to_string(config.size()) +
                              " values, space has " +
                              std::to_string(space.dimension());
    return report;
  }
  for (std::size_t i = 0; i < space.dimension(); ++i) {
    const auto& p = space[i];
    if (auto bound = p.check_value(config[i]); !bound.empty())
      report.violations.push_back({p.name, to_string(config[i]), bound});
  }
  return report;
}

inline Configuration default_configuration(const ConfigurationSpace& space) {
  Configuration c;
  for (const auto& p : space.params()) c.values.push_back(p.default_value);
  return c;
}

inline double encode_value(const ParameterSpec& p, const Value& v) {
  switch (p.kind) {
    case ParamKind::Real: return std::get<double>(v);
    case ParamKind::Integer: return static_cast<double>(std::get<std::int64_t>(v));
    case ParamKind::Boolean: return std::get<bool>(v) ? 1.0 : 0.0;
    case ParamKind::Categorical:
      return static_cast<double>(*p.category_index(std::get<std::string>(v)));
  }
  return 0.0;
}

/// Numeric vector for a valid configuration; categoricals become indices.
inline std::vector<double> encode(const ConfigurationSpace& space,
                                  const Configuration& config) {
  if (config.size() != space.dimension())
    throw SpaceError("encode: dimension mismatch");
  std::vector<double> out(space.dimension());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = encode_value(space[i], config[i]);
  return out;
}

/// Converts one coordinate in encoded space to a typed value. Out-of-range
/// inputs are clamped, integers round half away from zero, category codes
/// round to the nearest index.
inline Value decode_value(const ParameterSpec& p, double x) {
  const double c = std::clamp(x, p.code_lower(), p.code_upper());
  switch (p.kind) {
    case ParamKind::Real: return c;
    case ParamKind::Integer: return round_half_away(c);
    case ParamKind::Boolean: return round_half_away(c) != 0;
    case ParamKind::Categorical:
      return p.categories[static_cast<std::size_t>(round_half_away(c))];
  }
  return c;
}

inline Configuration decode(const ConfigurationSpace& space,
                            const std::vector<double>& encoded) {
  if (encoded.size() != space.dimension())
    throw SpaceError("decode: dimension mismatch");
  Configuration c;
  c.values.reserve(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i)
    c.values.push_back(decode_value(space[i], encoded[i]));
  return c;
}

/// Materializes a continuous sampling coordinate. For categorical and
/// boolean dimensions the sampler works on [lo, hi + 1) and the code is
/// the floor; numeric dimensions behave as in decode_value.
inline Value materialize_value(const ParameterSpec& p, double x) {
  if (p.is_numeric()) return decode_value(p, x);
  const double code = std::clamp(std::floor(x), 0.0, p.code_upper());
  if (p.kind == ParamKind::Boolean) return code != 0.0;
  return p.categories[static_cast<std::size_t>(code)];
}

// ---------------------------------------------------------------------------
// JSON conversion

inline nlohmann::json value_to_json(const Value& v) {
  return std::visit([](const auto& x) { return nlohmann::json(x); }, v);
}

inline Value value_from_json(const ParameterSpec& p, const nlohmann::json& j) {
  switch (p.kind) {
    case ParamKind::Real:
      if (!j.is_number()) throw SpaceError(p.name + ": expected number");
      return j.get<double>();
    case ParamKind::Integer:
      if (j.is_number_integer()) return j.get<std::int64_t>();
      if (j.is_number_float() && j.get<double>() == std::floor(j.get<double>()))
        return static_cast<std::int64_t>(j.get<double>());
      throw SpaceError(p.name + ": expected integer");
    case ParamKind::Boolean:
      if (!j.is_boolean()) throw SpaceError(p.name + ": expected boolean");
      return j.get<bool>();
    case ParamKind::Categorical:
      if (!j.is_string()) throw SpaceError(p.name + ": expected string label");
      return j.get<std::string>();
  }
  return 0.0;
}

inline nlohmann::json config_to_json(const Configuration& c) {
  auto arr = nlohmann::json::array();
  for (const auto& v : c.values) arr.push_back(value_to_json(v));
  return arr;
}

inline Configuration config_from_json(const ConfigurationSpace& space,
                                      const nlohmann::json& j) {
  if (!j.is_array() || j.size() != space.dimension())
    throw SpaceError("configuration must be an array of " +
                     std::to_string(space.dimension()) + " values");
  Configuration c;
  for (std::size_t i = 0; i < space.dimension(); ++i)
    c.values.push_back(value_from_json(space[i], j[i]));
  return c;
}

/// Named-field object form, used for human-facing output.
inline nlohmann::json config_to_object(const ConfigurationSpace& space,
                                       const Configuration& c) {
  nlohmann::json obj = nlohmann::json::object();
  for (std::size_t i = 0; i < space.dimension(); ++i)
    obj[space[i].name] = value_to_json(c[i]);
  return obj;
}

inline ParameterSpec parameter_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"name", "kind", "lower", "upper",
                                              "categories", "default"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw SpaceError("unknown field '" + key + "'");
  if (!j.contains("name") || !j.contains("kind") || !j.contains("default"))
    throw SpaceError("parameter needs name, kind and default");
  const auto name = j.at("name").get<std::string>();
  const auto kind = parse_kind(j.at("kind").get<std::string>());
  const auto& def = j.at("default");
  try {
    switch (kind) {
      case ParamKind::Real:
        return ParameterSpec::real(name, j.at("lower").get<double>(),
                                   j.at("upper").get<double>(),
                                   def.get<double>());
      case ParamKind::Integer:
        return ParameterSpec::integer(name, j.at("lower").get<std::int64_t>(),
                                      j.at("upper").get<std::int64_t>(),
                                      def.get<std::int64_t>());
      case ParamKind::Boolean:
        return ParameterSpec::boolean(name, def.get<bool>());
      case ParamKind::Categorical:
        return ParameterSpec::categorical(
            name, j.at("categories").get<std::vector<std::string>>(),
            def.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpaceError("parameter '" + name + "': " + e.what());
  }
  throw SpaceError("unreachable");
}

inline nlohmann::json parameter_to_json(const ParameterSpec& p) {
  nlohmann::json j;
  j["name"] = p.name;
  j["kind"] = to_string(p.kind);
  if (p.kind == ParamKind::Integer) {
    j["lower"] = static_cast<std::int64_t>(p.lower);
    j["upper"] = static_cast<std::int64_t>(p.upper);
  } else if (p.kind == ParamKind::Real) {
    j["lower"] = p.lower;
    j["upper"] = p.upper;
  } else if (p.kind == ParamKind::Categorical) {
    j["categories"] = p.categories;
  }
  j["default"] = value_to_json(p.default_value);
  return j;
}

inline ConfigurationSpace space_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("parameters") || !j["parameters"].is_array())
    throw SpaceError("space definition needs a 'parameters' array");
  std::vector<ParameterSpec> params;
  for (const auto& pj : j["parameters"]) params.push_back(parameter_from_json(pj));
  return ConfigurationSpace(j.value("name", std::string("space")), std::move(params));
}

inline nlohmann::json space_to_json(const ConfigurationSpace& space) {
  nlohmann::json j;
  j["name"] = space.name();
  j["parameters"] = nlohmann::json::array();
  for (const auto& p : space.params()) j["parameters"].push_back(parameter_to_json(p));
  return j;
}

inline ConfigurationSpace load_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpaceError("cannot open space file '" + path + "'");
  try {
    return space_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw SpaceError("space file '" + path + "': " + e.what());
  }
}

}  // namespace autotune
