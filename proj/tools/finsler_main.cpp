#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "finsler/verify.hpp"

// Command-line front end.  All output is deterministic: numbers are
// printed with fixed printf formats, JSON with fixed key order, and every
// random draw flows from --seed through the library's splitmix64
// generator.  Exit codes: 0 success, 1 usage or unusable input, 2 numeric
// non-convergence, 3 verification failure.

namespace {

using finsler::IntegrationOptions;
using finsler::Mat;
using finsler::Metric;
using finsler::ShootOptions;
using finsler::Vec;

std::string format_g(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
  return buf;
}

// keep a decimal point so whole numbers still read as floating values
std::string human(double v) {
  std::string s = format_g(v, 10);
  if (s.find_first_of(".eE") == std::string::npos &&
      s.find_first_not_of("-0123456789") == std::string::npos)
    s += ".0";
  return s;
}

std::string join(const Vec& v, int prec) {
  std::string s;
  for (size_t i = 0; i < v.size(); i++) {
    if (i) s += ",";
    s += format_g(v[i], prec);
  }
  return s;
}

Vec parse_vector(const std::string& text, const char* flag) {
  Vec out;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t comma = text.find(',', pos);
    size_t end = comma == std::string::npos ? text.size() : comma;
    size_t a = pos, b = end;
    while (a < b && std::isspace(static_cast<unsigned char>(text[a]))) a++;
    while (b > a && std::isspace(static_cast<unsigned char>(text[b - 1]))) b--;
    double v = 0;
    auto [p, ec] = std::from_chars(text.data() + a, text.data() + b, v);
    if (ec != std::errc() || p != text.data() + b)
      throw finsler::InputError(std::string(flag) + ": bad vector component '" +
                                text.substr(pos, end - pos) + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw finsler::InputError(std::string(flag) + ": empty vector");
  return out;
}

Metric load_metric_arg(const std::string& src) {
  nlohmann::json j;
  size_t i = src.find_first_not_of(" \t\r\n");
  try {
    if (i != std::string::npos && src[i] == '{') {
      j = nlohmann::json::parse(src);
    } else {
      std::ifstream f(src);
      if (!f) throw finsler::InputError("cannot open metric file '" + src + "'");
      j = nlohmann::json::parse(f);
    }
  } catch (const nlohmann::json::parse_error& e) {
    throw finsler::InputError(std::string("metric JSON parse error: ") + e.what());
  }
  return finsler::load_metric(j);
}

void require_dim(const Metric& m, const Vec& v, const char* flag) {
  if (int(v.size()) != m.dim())
    throw finsler::InputError(std::string(flag) + " has dimension " +
                              std::to_string(v.size()) + ", metric expects " +
                              std::to_string(m.dim()));
}

double clamp_tol(double t) { return std::max(t, 1e-14); }

nlohmann::ordered_json mat_rows(const Mat& a) {
  auto rows = nlohmann::ordered_json::array();
  for (int i = 0; i < a.rows(); i++) {
    auto row = nlohmann::ordered_json::array();
    for (int j = 0; j < a.cols(); j++) row.push_back(a(i, j));
    rows.push_back(row);
  }
  return rows;
}

void emit_json(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << "\n"; }

void print_error(const std::string& type, const std::string& message) {
  nlohmann::ordered_json e{{"error", type}, {"message", message}};
  std::cerr << e.dump() << "\n";
}

const char* status_name(finsler::GeodesicStatus s) {
  switch (s) {
    case finsler::GeodesicStatus::ok: return "ok";
    case finsler::GeodesicStatus::domain_exit: return "domain_exit";
    default: return "quality_failure";
  }
}

// -- subcommand bodies ------------------------------------------------------

struct EvalArgs {
  std::string metric, x, y;
  bool json = false;
};

int run_eval(const EvalArgs& a) {
  Metric m = load_metric_arg(a.metric);
  Vec x = parse_vector(a.x, "--x"), y = parse_vector(a.y, "--y");
  require_dim(m, x, "--x");
  require_dim(m, y, "--y");
  double F = m.eval_F(x, y);
  if (a.json)
    emit_json({{"F", F}});
  else
    std::cout << human(F) << "\n";
  return 0;
}

int run_tensor(const EvalArgs& a) {
  Metric m = load_metric_arg(a.metric);
  Vec x = parse_vector(a.x, "--x"), y = parse_vector(a.y, "--y");
  require_dim(m, x, "--x");
  require_dim(m, y, "--y");
  finsler::FundamentalTensor t = finsler::fundamental_tensor(m, {x, y});
  emit_json({{"x", x},
             {"y", y},
             {"F", m.eval_F(x, y)},
             {"g", mat_rows(t.g)},
             {"g_inverse", mat_rows(t.g_inv)},
             {"condition", t.condition}});
  return 0;
}

int run_connection(const EvalArgs& a) {
  Metric m = load_metric_arg(a.metric);
  Vec x = parse_vector(a.x, "--x"), y = parse_vector(a.y, "--y");
  require_dim(m, x, "--x");
  require_dim(m, y, "--y");
  finsler::SprayData sd = finsler::spray_with_connection(m, {x, y});
  finsler::ConnectionCoefficients cc = finsler::chern_coefficients(m, {x, y});
  auto gamma = nlohmann::ordered_json::array();
  for (const Mat& gi : cc.gamma) gamma.push_back(mat_rows(gi));
  emit_json({{"x", x},
             {"y", y},
             {"G", sd.G},
             {"P", mat_rows(sd.P)},
             {"gamma1", gamma},
             {"symmetry_defect", cc.symmetry_defect}});
  return 0;
}

struct TraceArgs {
  std::string metric, x, v;
  double t_end = 1.0, step = 1e-2, drift_tol = 1e-6;
  bool json = false;
};

int run_trace(const TraceArgs& a) {
  Metric m = load_metric_arg(a.metric);
  Vec x = parse_vector(a.x, "--x"), v = parse_vector(a.v, "--v");
  require_dim(m, x, "--x");
  require_dim(m, v, "--v");
  IntegrationOptions io;
  io.step = a.step;
  io.drift_tol = clamp_tol(a.drift_tol);
  finsler::GeodesicSolution sol = finsler::integrate_geodesic(m, {x, v}, a.t_end, io);
  const int n = m.dim();
  if (a.json) {
    auto xs = nlohmann::ordered_json::array();
    auto vs = nlohmann::ordered_json::array();
    for (size_t k = 0; k < sol.t.size(); k++) {
      xs.push_back(sol.x[k]);
      vs.push_back(sol.v[k]);
    }
    emit_json({{"t", sol.t},
               {"x", xs},
               {"v", vs},
               {"F", sol.F},
               {"status", status_name(sol.status)},
               {"max_drift", sol.max_drift}});
  } else {
    std::string header = "t";
    for (int i = 1; i <= n; i++) header += ",x" + std::to_string(i);
    for (int i = 1; i <= n; i++) header += ",v" + std::to_string(i);
    std::cout << header << ",F\n";
    for (size_t k = 0; k < sol.t.size(); k++) {
      std::string row = format_g(sol.t[k], 17);
      for (int i = 0; i < n; i++) row += "," + format_g(sol.x[k][i], 17);
      for (int i = 0; i < n; i++) row += "," + format_g(sol.v[k][i], 17);
      row += "," + format_g(sol.F[k], 17);
      std::cout << row << "\n";
    }
  }
  if (sol.status != finsler::GeodesicStatus::ok) {
    print_error(status_name(sol.status), sol.status_detail);
    return 2;
  }
  return 0;
}

struct ExpArgs {
  std::string metric, x, v;
  double step = 1e-2;
  bool json = false;
};

int run_exp(const ExpArgs& a) {
  Metric m = load_metric_arg(a.metric);
  Vec x = parse_vector(a.x, "--x"), X = parse_vector(a.v, "--v");
  require_dim(m, x, "--x");
  require_dim(m, X, "--v");
  IntegrationOptions io;
  io.step = a.step;
  Vec end = finsler::exp_map(m, x, X, io);
  if (a.json)
    emit_json({{"end_x", end}});
  else
    std::cout << join(end, 17) << "\n";
  return 0;
}

struct ConnectArgs {
  std::string metric, from, to;
  uint64_t seed = 0;
  double shoot_tol = 1e-9, step = 5e-3;
  int multistart = 8;
  bool json = false;
};

ShootOptions shoot_options(const ConnectArgs& a) {
  ShootOptions so;
  so.shoot_tol = clamp_tol(a.shoot_tol);
  so.step = a.step;
  so.multistart = a.multistart;
  so.seed = a.seed;
  return so;
}

int run_connect(const ConnectArgs& a) {
  Metric m = load_metric_arg(a.metric);
  Vec from = parse_vector(a.from, "--from"), to = parse_vector(a.to, "--to");
  require_dim(m, from, "--from");
  require_dim(m, to, "--to");
  finsler::ShootingResult r = finsler::connect(m, from, to, shoot_options(a));
  if (a.json) {
    emit_json({{"X", r.X},
               {"length", r.length},
               {"iterations", r.iterations},
               {"residual", r.residual},
               {"converged", r.converged}});
  } else {
    std::cout << "X = " << join(r.X, 17) << "\n"
              << "length = " << human(r.length) << "\n"
              << "iterations = " << r.iterations << "\n"
              << "residual = " << format_g(r.residual, 3) << "\n";
  }
  return 0;
}

int run_distance(const ConnectArgs& a) {
  Metric m = load_metric_arg(a.metric);
  Vec from = parse_vector(a.from, "--from"), to = parse_vector(a.to, "--to");
  require_dim(m, from, "--from");
  require_dim(m, to, "--to");
  double d = finsler::distance(m, from, to, shoot_options(a));
  if (a.json)
    emit_json({{"distance", d}});
  else
    std::cout << human(d) << "\n";
  return 0;
}

struct ConvexityArgs {
  std::string metric, at, grid;
  int samples = 32;
  uint64_t seed = 0;
  double shoot_tol = 1e-9;
};

int run_convexity(const ConvexityArgs& a) {
  Metric m = load_metric_arg(a.metric);
  Vec at = parse_vector(a.at, "--at");
  require_dim(m, at, "--at");
  std::vector<double> grid = finsler::parse_radius_grid(a.grid);
  finsler::ConvexityOptions co;
  co.seed = a.seed;
  co.shoot.shoot_tol = clamp_tol(a.shoot_tol);
  finsler::ConvexityReport rep = finsler::estimate_convexity_radii(m, at, grid, a.samples, co);
  emit_json(rep.to_json());
  return 0;
}

struct VerifyArgs {
  std::string metric_set = "zoo";
  uint64_t seed = 0;
  std::string json_path;
};

int run_verify(const VerifyArgs& a) {
  if (a.metric_set != "zoo")
    throw finsler::InputError("unknown metric set '" + a.metric_set + "' (available: zoo)");
  finsler::SuiteReport rep = finsler::run_all(finsler::verification_set(), a.seed);
  std::string out = rep.to_json().dump(2) + "\n";
  std::cout << out;
  if (!a.json_path.empty()) {
    std::ofstream f(a.json_path);
    if (!f) throw finsler::InputError("cannot write report to '" + a.json_path + "'");
    f << out;
  }
  return rep.all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "finsler: numerical Finsler geometry toolkit.\n"
      "Metrics are JSON, given inline (first character '{') or as a file path.\n"
      "Vectors on the command line are comma-separated decimals.\n"
      "All randomness flows from --seed through a splitmix64 generator;\n"
      "identical invocations produce byte-identical output.\n"
      "Exit codes: 0 success, 1 usage, 2 numeric non-convergence, 3 verification failure."};
  app.require_subcommand(1);
  int rc = 0;

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate F(x, y)");
  eval->add_option("--metric", ev.metric, "metric JSON (inline or file)")->required();
  eval->add_option("--x", ev.x, "base point")->required();
  eval->add_option("--y", ev.y, "tangent vector")->required();
  eval->add_flag("--json", ev.json, "emit JSON instead of a bare number");
  eval->callback([&] { rc = run_eval(ev); });

  EvalArgs te;
  CLI::App* tensor = app.add_subcommand("tensor", "Fundamental tensor g at a flag");
  tensor->add_option("--metric", te.metric, "metric JSON (inline or file)")->required();
  tensor->add_option("--x", te.x, "base point")->required();
  tensor->add_option("--y", te.y, "flag vector")->required();
  tensor->add_flag("--json", te.json, "always JSON; accepted for symmetry");
  tensor->callback([&] { rc = run_tensor(te); });

  EvalArgs co;
  CLI::App* conn = app.add_subcommand("connection", "Spray G, Berwald P, and symbols at a flag");
  conn->add_option("--metric", co.metric, "metric JSON (inline or file)")->required();
  conn->add_option("--x", co.x, "base point")->required();
  conn->add_option("--y", co.y, "flag vector")->required();
  conn->add_flag("--json", co.json, "always JSON; accepted for symmetry");
  conn->callback([&] { rc = run_connection(co); });

  TraceArgs tr;
  CLI::App* trace = app.add_subcommand("trace", "Integrate a geodesic and emit samples as CSV");
  trace->add_option("--metric", tr.metric, "metric JSON (inline or file)")->required();
  trace->add_option("--x", tr.x, "initial point")->required();
  trace->add_option("--v", tr.v, "initial velocity")->required();
  trace->add_option("--t-end", tr.t_end, "integration time, may be negative (default 1)");
  trace->add_option("--step", tr.step, "RK4 step size (default 0.01)");
  trace->add_option("--drift-tol", tr.drift_tol, "relative F-drift tolerance (default 1e-6)");
  trace->add_flag("--json", tr.json, "emit JSON arrays instead of CSV");
  trace->callback([&] { rc = run_trace(tr); });

  ExpArgs ex;
  CLI::App* expc = app.add_subcommand("exp", "Exponential map: endpoint of the unit-time geodesic");
  expc->add_option("--metric", ex.metric, "metric JSON (inline or file)")->required();
  expc->add_option("--x", ex.x, "base point")->required();
  expc->add_option("--v", ex.v, "tangent vector")->required();
  expc->add_option("--step", ex.step, "RK4 step size (default 0.01)");
  expc->add_flag("--json", ex.json, "emit JSON");
  expc->callback([&] { rc = run_exp(ex); });

  ConnectArgs cn;
  CLI::App* connect = app.add_subcommand("connect", "Shoot a geodesic from one point to another");
  connect->add_option("--metric", cn.metric, "metric JSON (inline or file)")->required();
  connect->add_option("--from", cn.from, "start point")->required();
  connect->add_option("--to", cn.to, "target point")->required();
  connect->add_option("--seed", cn.seed, "multistart seed (default 0)");
  connect->add_option("--multistart", cn.multistart, "number of restart attempts (default 8)");
  connect->add_option("--shoot-tol", cn.shoot_tol, "endpoint tolerance (default 1e-9)");
  connect->add_option("--step", cn.step, "RK4 step size (default 0.005)");
  connect->add_flag("--json", cn.json, "emit JSON");
  connect->callback([&] { rc = run_connect(cn); });

  ConnectArgs di;
  CLI::App* dist = app.add_subcommand("distance", "Directed geodesic distance between points");
  dist->add_option("--metric", di.metric, "metric JSON (inline or file)")->required();
  dist->add_option("--from", di.from, "start point")->required();
  dist->add_option("--to", di.to, "target point")->required();
  dist->add_option("--seed", di.seed, "multistart seed (default 0)");
  dist->add_option("--multistart", di.multistart, "number of restart attempts (default 8)");
  dist->add_option("--shoot-tol", di.shoot_tol, "endpoint tolerance (default 1e-9)");
  dist->add_option("--step", di.step, "RK4 step size (default 0.005)");
  dist->add_flag("--json", di.json, "emit JSON");
  dist->callback([&] { rc = run_distance(di); });

  ConvexityArgs cv;
  CLI::App* conv = app.add_subcommand("convexity", "Estimate convexity radii at a point");
  conv->add_option("--metric", cv.metric, "metric JSON (inline or file)")->required();
  conv->add_option("--at", cv.at, "center point")->required();
  conv->add_option("--grid", cv.grid, "radius grid 'start:stop:step' or a single value")
      ->required();
  conv->add_option("--samples", cv.samples, "pair samples per radius (default 32)");
  conv->add_option("--seed", cv.seed, "sampling seed (default 0)");
  conv->add_option("--shoot-tol", cv.shoot_tol, "endpoint tolerance (default 1e-9)");
  conv->callback([&] { rc = run_convexity(cv); });

  VerifyArgs vf;
  CLI::App* verify = app.add_subcommand("verify", "Run the proposition check suite");
  verify->add_option("--metric-set", vf.metric_set, "metric set to check (default zoo)");
  verify->add_option("--seed", vf.seed, "master seed (default 0)");
  verify->add_option("--json", vf.json_path, "also write the JSON report to this file");
  verify->callback([&] { rc = run_verify(vf); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const finsler::InputError& e) {
    print_error("input", e.what());
    return 1;
  } catch (const finsler::ParseError& e) {
    print_error("parse", e.what());
    return 1;
  } catch (const finsler::ConvexityError& e) {
    print_error("metric_rejected", e.what());
    return 1;
  } catch (const finsler::NoGeodesicError& e) {
    print_error("no_geodesic", e.what());
    return 2;
  } catch (const finsler::DomainExitError& e) {
    print_error("domain_exit", e.what());
    return 2;
  } catch (const finsler::Error& e) {
    print_error("numeric", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 2;
  }
  return rc;
}
