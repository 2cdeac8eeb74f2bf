#include "fsigal/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace fsigal {

namespace {

const char* rate_form_name(RateForm r) {
  switch (r) {
    case RateForm::midpoint:
      return "midpoint";
    case RateForm::secant:
      return "secant";
    default:
      return "averaged";
  }
}

using json = nlohmann::json;
using Path = std::vector<std::string>;

std::string join(const Path& path) {
  std::string out;
  for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
  return out.empty() ? "<root>" : out;
}

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

/// Finds the line of the last key in `path` by walking the quoted keys in
/// order. nlohmann::json keeps no source positions, so this is a textual
/// search; it returns 0 when the key cannot be found.
int locate(const std::string& text, const Path& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    const std::string quoted = "\"" + key + "\"";
    std::size_t hit = pos;
    while (true) {
      hit = text.find(quoted, hit);
      if (hit == std::string::npos) return path.empty() ? 0 : line_of_offset(text, pos);
      std::size_t after = hit + quoted.size();
      while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
      if (after < text.size() && text[after] == ':') break;
      hit += quoted.size();
    }
    pos = hit;
  }
  return line_of_offset(text, pos);
}

class Reader {
 public:
  Reader(const std::string& text, std::string origin) : text_(text), origin_(std::move(origin)) {}

  [[noreturn]] void fail(const Path& path, const std::string& message) const {
    const int line = locate(text_, path);
    std::ostringstream os;
    os << origin_;
    if (line > 0) os << ":" << line;
    os << ": " << join(path) << ": " << message;
    throw ConfigError(os.str(), line);
  }

  const json& object(const json& parent, const Path& path, const std::set<std::string>& allowed) const {
    const json& obj = path.empty() ? parent : parent.at(path.back());
    if (!obj.is_object()) fail(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!allowed.count(it.key())) {
        Path p = path;
        p.push_back(it.key());
        fail(p, "unknown key '" + it.key() + "'");
      }
    }
    return obj;
  }

  double number(const json& obj, const Path& path, double fallback, bool required = false) const {
    const auto& key = path.back();
    if (!obj.contains(key)) {
      if (required) fail(path, "missing required number");
      return fallback;
    }
    const auto& v = obj.at(key);
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "must be finite");
    return x;
  }

  double positive(const json& obj, const Path& path, double fallback, bool required = false) const {
    const double x = number(obj, path, fallback, required);
    if (!(x > 0.0)) fail(path, "must be strictly positive");
    return x;
  }

  int count(const json& obj, const Path& path, int fallback) const {
    const auto& key = path.back();
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) fail(path, "expected an integer");
    const long long x = v.get<long long>();
    if (x < 1 || x > 1'000'000) fail(path, "must be a positive integer");
    return static_cast<int>(x);
  }

  bool flag(const json& obj, const Path& path, bool fallback) const {
    const auto& key = path.back();
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_boolean()) fail(path, "expected true or false");
    return obj.at(key).get<bool>();
  }

  std::string string(const json& obj, const Path& path, const std::string& fallback, bool required = false) const {
    const auto& key = path.back();
    if (!obj.contains(key)) {
      if (required) fail(path, "missing required string");
      return fallback;
    }
    if (!obj.at(key).is_string()) fail(path, "expected a string");
    return obj.at(key).get<std::string>();
  }

  std::vector<double> numbers(const json& obj, const Path& path, std::size_t size) const {
    const auto& v = obj.at(path.back());
    if (!v.is_array() || (size && v.size() != size))
      fail(path, size ? "expected an array of " + std::to_string(size) + " numbers" : "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) fail(path, "expected an array of numbers");
      out.push_back(x.get<double>());
      if (!std::isfinite(out.back())) fail(path, "entries must be finite");
    }
    return out;
  }

  Rect rect(const json& obj, const Path& path, const Rect& fallback) const {
    if (!obj.contains(path.back())) return fallback;
    const auto v = numbers(obj, path, 4);
    Rect r{v[0], v[1], v[2], v[3]};
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) fail(path, "expected [x0, y0, x1, y1] with x1 > x0 and y1 > y0");
    return r;
  }

 private:
  const std::string& text_;
  std::string origin_;
};

json canonical_json(const Scenario& s) {
  json j;
  j["schema"] = kScenarioSchema;
  j["name"] = s.name;
  const auto& g = s.geometry;
  j["geometry"] = {{"omega", {g.omega.x0, g.omega.y0, g.omega.x1, g.omega.y1}},
                   {"solid", {g.solid.x0, g.solid.y0, g.solid.x1, g.solid.y1}},
                   {"nx", g.nx},
                   {"ny", g.ny},
                   {"solid_nx", g.solid_nx},
                   {"solid_ny", g.solid_ny}};
  json motion = {{"kind", to_string(s.motion.kind)}, {"final_time", s.motion.final_time}};
  switch (s.motion.kind) {
    case MotionKind::identity:
      break;
    case MotionKind::translation:
      motion["velocity"] = {s.motion.velocity.x(), s.motion.velocity.y()};
      break;
    case MotionKind::rotation:
      motion["center"] = {s.motion.center.x(), s.motion.center.y()};
      motion["angular_velocity"] = s.motion.angular_velocity;
      break;
    case MotionKind::shear:
      motion["rate"] = s.motion.shear_rate;
      break;
  }
  j["motion"] = motion;
  j["params"] = {{"rho_f", s.params.rho_f}, {"rho_s", s.params.rho_s}, {"nu_f", s.params.nu_f},
                 {"nu_s", s.params.nu_s},   {"kappa", s.params.kappa}};
  j["discretization"] = {{"m", s.m},
                         {"R", s.R},
                         {"dt", s.time.dt},
                         {"dt_out", s.time.dt_out},
                         {"split_at_breakpoints", s.step.split_at_breakpoints},
                         {"rate_form", rate_form_name(s.step.rate)}};
  json init = {{"kind", s.initial.kind == InitialKind::zero               ? "zero"
                        : s.initial.kind == InitialKind::first_fluid_mode ? "first_fluid_mode"
                                                                          : "custom"}};
  if (s.initial.kind == InitialKind::first_fluid_mode) init["amplitude"] = s.initial.amplitude;
  if (s.initial.kind == InitialKind::custom) init["coefficients"] = s.initial.coefficients;
  j["initial"] = init;
  return j;
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string Scenario::hash_hex() const {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash;
  return os.str();
}

PrescribedMotion make_motion(const MotionSpec& spec) {
  switch (spec.kind) {
    case MotionKind::identity:
      return PrescribedMotion::identity(spec.final_time);
    case MotionKind::translation:
      return PrescribedMotion::translation(spec.final_time, spec.velocity);
    case MotionKind::rotation:
      return PrescribedMotion::rotation(spec.final_time, spec.center, spec.angular_velocity);
    case MotionKind::shear:
      return PrescribedMotion::shear(spec.final_time, spec.shear_rate);
  }
  throw ConfigError("unknown motion kind");
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const int line = line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError(origin + ":" + std::to_string(line) + ": malformed JSON: " + e.what(), line);
  }
  const Reader rd(text, origin);
  rd.object(root, {}, {"schema", "name", "geometry", "motion", "params", "discretization", "initial", "output"});

  Scenario s;
  const auto schema = rd.string(root, {"schema"}, "", true);
  if (schema != kScenarioSchema) rd.fail({"schema"}, "unsupported schema '" + schema + "' (expected '" + kScenarioSchema + "')");
  s.name = rd.string(root, {"name"}, "scenario");
  s.output_dir = rd.string(root, {"output"}, "");

  if (root.contains("geometry")) {
    const auto& g = rd.object(root, {"geometry"}, {"omega", "solid", "nx", "ny", "solid_nx", "solid_ny"});
    s.geometry.omega = rd.rect(g, {"geometry", "omega"}, s.geometry.omega);
    s.geometry.solid = rd.rect(g, {"geometry", "solid"}, s.geometry.solid);
    s.geometry.nx = rd.count(g, {"geometry", "nx"}, s.geometry.nx);
    s.geometry.ny = rd.count(g, {"geometry", "ny"}, s.geometry.ny);
    s.geometry.solid_nx = rd.count(g, {"geometry", "solid_nx"}, s.geometry.solid_nx);
    s.geometry.solid_ny = rd.count(g, {"geometry", "solid_ny"}, s.geometry.solid_ny);
  }

  if (!root.contains("motion")) rd.fail({"motion"}, "missing required object");
  {
    const auto& mo = rd.object(root, {"motion"}, {"kind", "final_time", "velocity", "center", "angular_velocity", "rate"});
    const auto kind = rd.string(mo, {"motion", "kind"}, "", true);
    try {
      s.motion.kind = motion_kind_from_string(kind);
    } catch (const std::exception&) {
      rd.fail({"motion", "kind"}, "unknown motion kind '" + kind + "' (identity, translation, rotation, shear)");
    }
    s.motion.final_time = rd.positive(mo, {"motion", "final_time"}, 0.0, true);
    auto reject = [&](const char* key) {
      if (mo.contains(key)) rd.fail({"motion", key}, "not a parameter of a " + kind + " motion");
    };
    switch (s.motion.kind) {
      case MotionKind::identity:
        for (const char* k : {"velocity", "center", "angular_velocity", "rate"}) reject(k);
        break;
      case MotionKind::translation: {
        for (const char* k : {"center", "angular_velocity", "rate"}) reject(k);
        if (!mo.contains("velocity")) rd.fail({"motion", "velocity"}, "translation needs a velocity [vx, vy]");
        const auto v = rd.numbers(mo, {"motion", "velocity"}, 2);
        s.motion.velocity = Point(v[0], v[1]);
        break;
      }
      case MotionKind::rotation: {
        for (const char* k : {"velocity", "rate"}) reject(k);
        if (mo.contains("center")) {
          const auto c = rd.numbers(mo, {"motion", "center"}, 2);
          s.motion.center = Point(c[0], c[1]);
        }
        s.motion.angular_velocity = rd.number(mo, {"motion", "angular_velocity"}, 0.0, true);
        break;
      }
      case MotionKind::shear:
        for (const char* k : {"velocity", "center", "angular_velocity"}) reject(k);
        s.motion.shear_rate = rd.number(mo, {"motion", "rate"}, 0.0, true);
        break;
    }
  }

  if (root.contains("params")) {
    const auto& p = rd.object(root, {"params"}, {"rho_f", "rho_s", "nu_f", "nu_s", "kappa"});
    s.params.rho_f = rd.positive(p, {"params", "rho_f"}, s.params.rho_f);
    s.params.rho_s = rd.positive(p, {"params", "rho_s"}, s.params.rho_s);
    s.params.nu_f = rd.positive(p, {"params", "nu_f"}, s.params.nu_f);
    s.params.nu_s = rd.positive(p, {"params", "nu_s"}, s.params.nu_s);
    s.params.kappa = rd.positive(p, {"params", "kappa"}, s.params.kappa);
  }

  const double T = s.motion.final_time;
  s.time.final_time = T;
  s.time.dt = 1e-3 * T;
  s.time.dt_out = T / 50.0;
  bool explicit_R = false;
  if (root.contains("discretization")) {
    const auto& d = rd.object(root, {"discretization"}, {"m", "R", "dt", "dt_out", "split_at_breakpoints", "rate_form"});
    s.m = rd.count(d, {"discretization", "m"}, s.m);
    explicit_R = d.contains("R");
    s.R = rd.count(d, {"discretization", "R"}, 4 * s.m);
    s.time.dt = rd.positive(d, {"discretization", "dt"}, s.time.dt);
    s.time.dt_out = rd.positive(d, {"discretization", "dt_out"}, s.time.dt_out);
    s.step.split_at_breakpoints = rd.flag(d, {"discretization", "split_at_breakpoints"}, true);
    const auto form = rd.string(d, {"discretization", "rate_form"}, "averaged");
    if (form == "averaged")
      s.step.rate = RateForm::averaged;
    else if (form == "midpoint")
      s.step.rate = RateForm::midpoint;
    else if (form == "secant")
      s.step.rate = RateForm::secant;
    else
      rd.fail({"discretization", "rate_form"}, "expected 'averaged', 'midpoint' or 'secant'");
    if (s.R < s.m) rd.fail({"discretization", explicit_R ? "R" : "m"}, "need R >= m");
    try {
      (void)s.time.steps_per_output();
    } catch (const EvolutionError& e) {
      rd.fail({"discretization", "dt"}, e.what());
    }
  } else {
    s.R = 4 * s.m;
    (void)s.time.steps_per_output();
  }

  if (root.contains("initial")) {
    const auto& in = rd.object(root, {"initial"}, {"kind", "amplitude", "coefficients"});
    const auto kind = rd.string(in, {"initial", "kind"}, "zero");
    if (kind == "zero") {
      s.initial.kind = InitialKind::zero;
    } else if (kind == "first_fluid_mode") {
      s.initial.kind = InitialKind::first_fluid_mode;
      s.initial.amplitude = rd.number(in, {"initial", "amplitude"}, 1.0);
    } else if (kind == "custom") {
      s.initial.kind = InitialKind::custom;
      if (!in.contains("coefficients")) rd.fail({"initial", "coefficients"}, "custom initial data needs coefficients");
      s.initial.coefficients = rd.numbers(in, {"initial", "coefficients"}, 0);
      if (s.initial.coefficients.empty() || static_cast<int>(s.initial.coefficients.size()) > s.m)
        rd.fail({"initial", "coefficients"}, "needs between 1 and m entries");
    } else {
      rd.fail({"initial", "kind"}, "expected 'zero', 'first_fluid_mode' or 'custom'");
    }
    if (kind != "first_fluid_mode" && in.contains("amplitude"))
      rd.fail({"initial", "amplitude"}, "only used with first_fluid_mode");
    if (kind != "custom" && in.contains("coefficients"))
      rd.fail({"initial", "coefficients"}, "only used with custom initial data");
  }

  // Containment at load time: one fluid cell plus the largest displacement.
  try {
    const auto motion = make_motion(s.motion);
    (void)build_grids(s.geometry, motion.max_displacement(s.geometry.solid));
  } catch (const GeometryError& e) {
    rd.fail({"geometry"}, e.what());
  }

  s.canonical = canonical_json(s).dump();
  s.hash = fnv1a(s.canonical);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

Eigen::VectorXd initial_velocity(const InitialSpec& spec, const FluidEigenBasis& fluid) {
  const Eigen::Index n = fluid.modes.rows();
  switch (spec.kind) {
    case InitialKind::zero:
      return Eigen::VectorXd::Zero(n);
    case InitialKind::first_fluid_mode:
      return spec.amplitude * fluid.modes.col(0);
    case InitialKind::custom: {
      if (static_cast<int>(spec.coefficients.size()) > fluid.size())
        throw ConfigError("custom initial data has more coefficients than fluid modes");
      const Eigen::Map<const Eigen::VectorXd> c(spec.coefficients.data(),
                                                static_cast<Eigen::Index>(spec.coefficients.size()));
      return fluid.modes.leftCols(c.size()) * c;
    }
  }
  return Eigen::VectorXd::Zero(n);
}

Simulation build_simulation(const Scenario& scenario, std::optional<int> m_override) {
  const auto motion = make_motion(scenario.motion);
  auto [fluid_grid, solid_grid] = build_grids(scenario.geometry, motion.max_displacement(scenario.geometry.solid));

  const int m = m_override.value_or(scenario.m);
  const int R = std::max(scenario.R, m);
  const ViscosityField nu{scenario.params.nu_f, scenario.params.nu_s, scenario.geometry.solid};
  auto fluid = solve_fluid_eigenproblem(fluid_grid, nu, m);
  auto solid = solve_solid_eigenproblem(solid_grid, R);

  std::vector<double> times;
  const int samples = 64;
  for (int k = 0; k <= samples; ++k) times.push_back(scenario.motion.final_time * k / samples);
  const auto assumption = verify_assumption(motion, solid_grid, scenario.geometry.omega, times, 1e-10);

  CouplingContext ctx(std::move(fluid_grid), std::move(solid_grid), std::move(fluid), std::move(solid), motion);
  auto data = compatible_initial_data(ctx, initial_velocity(scenario.initial, ctx.fluid()));
  auto initial = project_initial_data(data, ctx);
  return Simulation{scenario, std::move(ctx), std::move(data), std::move(initial), assumption};
}

}  // namespace fsigal
