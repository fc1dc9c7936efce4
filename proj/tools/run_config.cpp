#include "run_config.hpp"

#include <cmath>
#include <set>

namespace torifano::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::ConfigError, path + ": " + what);
}

std::string at(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string idx(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void only_keys(const json& j, const std::string& path, std::set<std::string> allowed) {
  if (!j.is_object()) fail(path.empty() ? "config" : path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) fail(at(path, it.key()), "unknown field");
  }
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

int integer(const json& j, const std::string& path) {
  if (j.is_number_integer() || j.is_number_unsigned()) {
    const long long v = j.get<long long>();
    if (v < -1000000000LL || v > 1000000000LL) fail(path, "integer out of range");
    return static_cast<int>(v);
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::round(v) && std::abs(v) < 1e9) return static_cast<int>(v);
  }
  fail(path, "expected an integer");
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> number_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], idx(path, i)));
  return out;
}

std::vector<int> integer_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(integer(j[i], idx(path, i)));
  return out;
}

std::vector<std::vector<double>> matrix(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected a matrix (array of rows)");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < j.size(); ++i) rows.push_back(number_list(j[i], idx(path, i)));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) fail(idx(path, i), "matrix must be square");
  }
  return rows;
}

// Skew matrix: explicit rows, "zero", or {"beta": b} (m = 2 only).
std::vector<std::vector<double>> skew_spec(const json& j, const std::string& path) {
  if (j.is_string()) {
    if (string(j, path) == "zero") return {};
    fail(path, "expected \"zero\", {\"beta\": x} or a matrix");
  }
  if (j.is_object()) {
    only_keys(j, path, {"beta"});
    if (!j.contains("beta")) fail(at(path, "beta"), "missing");
    const double b = number(j["beta"], at(path, "beta"));
    return {{0.0, b}, {-b, 0.0}};
  }
  return matrix(j, path);
}

void parse_polytope(const json& j, RunConfig& c) {
  const std::string path = "polytope";
  if (j.is_string()) {
    c.preset = j.get<std::string>();
    return;
  }
  only_keys(j, path, {"preset", "labels"});
  if (j.contains("preset") == j.contains("labels")) {
    fail(path, "give exactly one of \"preset\" or \"labels\"");
  }
  if (j.contains("preset")) {
    c.preset = string(j["preset"], at(path, "preset"));
    return;
  }
  const json& ls = j["labels"];
  const std::string lp = at(path, "labels");
  if (!ls.is_array() || ls.empty()) fail(lp, "expected a non-empty array");
  for (std::size_t k = 0; k < ls.size(); ++k) {
    const std::string p = idx(lp, k);
    only_keys(ls[k], p, {"normal", "offset"});
    if (!ls[k].contains("normal")) fail(at(p, "normal"), "missing");
    Label l;
    l.normal = integer_list(ls[k]["normal"], at(p, "normal"));
    if (ls[k].contains("offset")) l.offset = number(ls[k]["offset"], at(p, "offset"));
    c.labels.push_back(std::move(l));
  }
}

void parse_initial(const json& j, RunConfig& c) {
  const std::string path = "initial";
  PerturbationSpec& v = c.v0;
  if (j.is_string()) {
    if (j.get<std::string>() != "zero") fail(path, "expected \"zero\" or an object");
    v.kind = PerturbationSpec::Kind::Zero;
    return;
  }
  if (!j.is_object() || !j.contains("type")) fail(at(path, "type"), "missing");
  const std::string type = string(j["type"], at(path, "type"));
  if (type == "zero") {
    only_keys(j, path, {"type"});
    v.kind = PerturbationSpec::Kind::Zero;
  } else if (type == "bump") {
    only_keys(j, path, {"type", "center", "amplitude", "width"});
    v.kind = PerturbationSpec::Kind::Bump;
    if (j.contains("center")) v.center = number_list(j["center"], at(path, "center"));
    if (!j.contains("amplitude")) fail(at(path, "amplitude"), "missing");
    v.amplitude = number(j["amplitude"], at(path, "amplitude"));
    if (j.contains("width")) v.width = number(j["width"], at(path, "width"));
    if (!(v.width > 0.0)) fail(at(path, "width"), "must be positive");
  } else if (type == "polynomial") {
    only_keys(j, path, {"type", "terms"});
    v.kind = PerturbationSpec::Kind::Polynomial;
    const std::string tp = at(path, "terms");
    if (!j.contains("terms") || !j["terms"].is_array()) fail(tp, "expected an array");
    for (std::size_t k = 0; k < j["terms"].size(); ++k) {
      const json& t = j["terms"][k];
      const std::string p = idx(tp, k);
      only_keys(t, p, {"exponents", "coefficient"});
      if (!t.contains("exponents")) fail(at(p, "exponents"), "missing");
      if (!t.contains("coefficient")) fail(at(p, "coefficient"), "missing");
      auto e = integer_list(t["exponents"], at(p, "exponents"));
      for (int x : e) {
        if (x < 0) fail(at(p, "exponents"), "exponents must be >= 0");
      }
      v.coefficients[e] += number(t["coefficient"], at(p, "coefficient"));
    }
  } else {
    fail(at(path, "type"), "unknown perturbation type \"" + type + "\"");
  }
}

void parse_flow(const json& j, RunConfig& c) {
  const std::string path = "flow";
  only_keys(j, path,
            {"dt", "t_end", "scheme", "normalization", "cadence", "safeguard", "cfl",
             "dt_refresh", "quadrature_resolution", "snapshot_cadence"});
  FlowConfig& f = c.flow;
  if (j.contains("dt")) {
    if (j["dt"].is_string()) {
      if (j["dt"].get<std::string>() != "auto") fail(at(path, "dt"), "expected a number or \"auto\"");
      f.dt.reset();
    } else {
      f.dt = number(j["dt"], at(path, "dt"));
    }
  }
  if (j.contains("t_end")) f.t_end = number(j["t_end"], at(path, "t_end"));
  if (j.contains("scheme")) {
    const std::string s = string(j["scheme"], at(path, "scheme"));
    if (s == "heun") f.scheme = Scheme::Heun;
    else if (s == "explicit-euler") f.scheme = Scheme::ExplicitEuler;
    else fail(at(path, "scheme"), "expected \"heun\" or \"explicit-euler\"");
  }
  if (j.contains("normalization")) {
    const std::string s = string(j["normalization"], at(path, "normalization"));
    if (s == "affine-at-barycenter") f.normalization = Normalization::AffineAtBarycenter;
    else if (s == "none") f.normalization = Normalization::None;
    else fail(at(path, "normalization"), "expected \"affine-at-barycenter\" or \"none\"");
  }
  if (j.contains("cadence")) f.cadence = number(j["cadence"], at(path, "cadence"));
  if (j.contains("safeguard")) f.safeguard = number(j["safeguard"], at(path, "safeguard"));
  if (j.contains("cfl")) f.cfl = number(j["cfl"], at(path, "cfl"));
  if (j.contains("dt_refresh")) f.dt_refresh = integer(j["dt_refresh"], at(path, "dt_refresh"));
  if (j.contains("quadrature_resolution")) {
    f.quadrature_resolution = integer(j["quadrature_resolution"], at(path, "quadrature_resolution"));
  }
  if (j.contains("snapshot_cadence")) {
    c.snapshot_cadence = number(j["snapshot_cadence"], at(path, "snapshot_cadence"));
    if (c.snapshot_cadence < 0.0) fail(at(path, "snapshot_cadence"), "must be >= 0");
  }
}

json matrix_json(const std::vector<std::vector<double>>& m) {
  if (m.empty()) return "zero";
  return m;
}

}  // namespace

SmoothPart PerturbationSpec::build(int m) const {
  switch (kind) {
    case Kind::Zero:
      return zero_smooth_part(m);
    case Kind::Bump: {
      if (!center.empty() && static_cast<int>(center.size()) != m) {
        fail("initial.center", "length does not match the polytope dimension");
      }
      const Vec c = center.empty() ? Vec(Vec::Zero(m)) : to_vec(center);
      return bump_smooth_part(c, amplitude, width);
    }
    case Kind::Polynomial:
      for (const auto& [e, coef] : coefficients) {
        if (static_cast<int>(e.size()) != m) {
          fail("initial.terms", "exponent length does not match the polytope dimension");
        }
      }
      return polynomial_smooth_part(coefficients);
  }
  return zero_smooth_part(m);
}

json PerturbationSpec::to_json() const {
  switch (kind) {
    case Kind::Zero:
      return "zero";
    case Kind::Bump: {
      json j = {{"type", "bump"}, {"amplitude", amplitude}, {"width", width}};
      if (!center.empty()) j["center"] = center;
      return j;
    }
    case Kind::Polynomial: {
      json terms = json::array();
      for (const auto& [e, coef] : coefficients) {
        terms.push_back({{"exponents", e}, {"coefficient", coef}});
      }
      return {{"type", "polynomial"}, {"terms", terms}};
    }
  }
  return "zero";
}

FlowConfig RunConfig::flow_config() const {
  FlowConfig f = flow;
  f.resolution = resolution;
  f.margin = margin;
  return f;
}

json RunConfig::to_json() const {
  json j;
  if (preset) {
    j["polytope"] = {{"preset", *preset}};
  } else {
    json ls = json::array();
    for (const auto& l : labels) ls.push_back({{"normal", l.normal}, {"offset", l.offset}});
    j["polytope"] = {{"labels", ls}};
  }
  j["deformation"] = {{"A", matrix_json(A)}, {"B", matrix_json(B)}};
  j["initial"] = v0.to_json();
  j["grid"] = {{"resolution", resolution}, {"margin", margin}};
  json f;
  if (flow.dt) f["dt"] = *flow.dt;
  else f["dt"] = "auto";
  f["t_end"] = flow.t_end;
  f["scheme"] = flow.scheme == Scheme::Heun ? "heun" : "explicit-euler";
  f["normalization"] =
      flow.normalization == Normalization::AffineAtBarycenter ? "affine-at-barycenter" : "none";
  f["cadence"] = flow.cadence;
  f["safeguard"] = flow.safeguard;
  f["cfl"] = flow.cfl;
  f["dt_refresh"] = flow.dt_refresh;
  f["quadrature_resolution"] = flow.quadrature_resolution;
  f["snapshot_cadence"] = snapshot_cadence;
  j["flow"] = f;
  j["functionals"] = {{"quadrature_resolution", functionals_quadrature}};
  j["transform"] = {{"y", transform_y}};
  j["output"] = {{"dir", out_dir}};
  return j;
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  only_keys(j, "", {"polytope", "deformation", "initial", "grid", "flow", "functionals",
                    "transform", "output"});
  if (j.contains("polytope")) parse_polytope(j["polytope"], c);
  if (j.contains("deformation")) {
    const json& d = j["deformation"];
    only_keys(d, "deformation", {"A", "B"});
    if (d.contains("A")) c.A = skew_spec(d["A"], "deformation.A");
    if (d.contains("B")) c.B = skew_spec(d["B"], "deformation.B");
  }
  if (j.contains("initial")) parse_initial(j["initial"], c);
  if (j.contains("grid")) {
    const json& g = j["grid"];
    only_keys(g, "grid", {"resolution", "margin"});
    if (g.contains("resolution")) c.resolution = integer(g["resolution"], "grid.resolution");
    if (g.contains("margin")) c.margin = number(g["margin"], "grid.margin");
  }
  if (j.contains("flow")) parse_flow(j["flow"], c);
  if (j.contains("functionals")) {
    const json& f = j["functionals"];
    only_keys(f, "functionals", {"quadrature_resolution"});
    if (f.contains("quadrature_resolution")) {
      c.functionals_quadrature =
          integer(f["quadrature_resolution"], "functionals.quadrature_resolution");
      if (c.functionals_quadrature < 8) fail("functionals.quadrature_resolution", "must be >= 8");
    }
  }
  if (j.contains("transform")) {
    const json& t = j["transform"];
    only_keys(t, "transform", {"y"});
    if (t.contains("y")) {
      if (!t["y"].is_array()) fail("transform.y", "expected an array of points");
      for (std::size_t i = 0; i < t["y"].size(); ++i) {
        c.transform_y.push_back(number_list(t["y"][i], idx("transform.y", i)));
      }
    }
  }
  if (j.contains("output")) {
    only_keys(j["output"], "output", {"dir"});
    if (j["output"].contains("dir")) c.out_dir = string(j["output"]["dir"], "output.dir");
  }
  return c;
}

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

std::shared_ptr<const DelzantPolytope> build_polytope(const RunConfig& c) {
  if (c.preset) {
    try {
      return std::make_shared<const DelzantPolytope>(preset(*c.preset));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InvalidArgument) fail("polytope.preset", e.detail());
      throw;
    }
  }
  if (c.labels.empty()) fail("polytope", "missing (give a preset or labels)");
  for (std::size_t k = 0; k < c.labels.size(); ++k) {
    if (c.labels[k].normal.size() != c.labels[0].normal.size() || c.labels[k].normal.empty() ||
        c.labels[k].normal.size() > static_cast<std::size_t>(kMaxDim)) {
      fail(at(idx("polytope.labels", k), "normal"), "inconsistent or unsupported dimension");
    }
  }
  return std::make_shared<const DelzantPolytope>(DelzantPolytope::build(c.labels, true));
}

DeformationPair build_deformation(const RunConfig& c, int m) {
  auto to_mat = [m](const std::vector<std::vector<double>>& rows, const char* name) {
    if (rows.empty()) return Mat(Mat::Zero(m, m));
    if (static_cast<int>(rows.size()) != m) {
      fail(std::string("deformation.") + name, "must be " + std::to_string(m) + " x " + std::to_string(m));
    }
    Mat out(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return out;
  };
  const Mat a = to_mat(c.A, "A");
  const Mat b = to_mat(c.B, "B");
  if (!(a.transpose() == -a)) fail("deformation.A", "must be skew-symmetric");
  if (!(b.transpose() == -b)) fail("deformation.B", "must be skew-symmetric");
  return DeformationPair::make(a, b);
}

}  // namespace torifano::cli
