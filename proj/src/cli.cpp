#include "rieszlat/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rieszlat/energy.hpp"
#include "rieszlat/error.hpp"
#include "rieszlat/green.hpp"
#include "rieszlat/jellium.hpp"
#include "rieszlat/kernels.hpp"
#include "rieszlat/lattice.hpp"
#include "rieszlat/numeric.hpp"
#include "rieszlat/theta.hpp"

namespace rieszlat::cli {
namespace {

using json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string name;
  std::string file;
  int d = 0;
  std::optional<double> s;
  int n = 1;
  std::vector<int> n_list;
  std::vector<double> x;
  std::vector<double> t_list{0.25, 1.0};
  std::vector<double> R_list{2.0};
  std::vector<double> r_list{0.5, 1.0, 2.0};
  std::uint64_t seed = 0;
  double tol = 0.0;  // 0 picks the operation's default
  double budget = kDefaultListBudget;
  std::string format = "json";
  int threads = 1;
  int restarts = 0;
  int trials = 500;
  double max_norm = 10.0;
  std::string route = "all";
  std::string method = "auto";
  bool info = false;
  bool general_s = false;
  bool compare = false;
  double radius = 200.0;
  std::string points_file;
  std::string init = "lattice";
  int count = 0;
  double grad_tol = 1e-7;
  int max_iters = 5000;
};

json count_json(const Count& c) {
  if (c <= Count(std::uint64_t{1} << 53)) return static_cast<std::uint64_t>(c);
  return to_string(c);
}

json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

// Named lattice, "Z" plus --d, or a lattice file.
Lattice resolve_lattice(Options& o) {
  if (!o.file.empty()) {
    std::ifstream in(o.file);
    if (!in) throw UsageError("cannot open lattice file " + o.file);
    Lattice l = read_lattice(in);
    if (o.d != 0 && o.d != l.dim()) throw UsageError("--d does not match the lattice file");
    o.d = l.dim();
    return l;
  }
  if (o.name.empty()) throw UsageError("a lattice is required (--name or --file)");
  std::string name = o.name;
  if ((name == "Z" || name == "z") && o.d > 0) name = "Z" + std::to_string(o.d);
  Lattice l = named_lattice(name);
  if (o.d != 0 && o.d != l.dim()) throw UsageError("--d does not match the lattice dimension");
  o.d = l.dim();
  o.name = name;
  return l;
}

RieszParams resolve_params(Options& o) {
  if (o.d <= 0) throw UsageError("the dimension is required (--d)");
  if (!o.s) o.s = static_cast<double>(o.d - 2);
  return make_riesz_params(o.d, *o.s);
}

Vec resolve_x(const Options& o, int d, bool required) {
  if (o.x.empty()) {
    if (required) throw UsageError("--x is required");
    return Vec::Zero(d);
  }
  if (static_cast<int>(o.x.size()) != d) throw UsageError("--x needs one coordinate per dimension");
  return Eigen::Map<const Vec>(o.x.data(), d);
}

std::vector<Vec> read_points(const std::string& path, int d) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open points file " + path);
  std::vector<Vec> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Vec p(d);
    for (int k = 0; k < d; ++k) {
      if (!(ls >> p[k])) throw UsageError("points file: expected " + std::to_string(d) + " numbers per line");
    }
    pts.push_back(p);
  }
  return pts;
}

struct Report {
  json result = json::object();
  // Filled by sweeps that support --format csv.
  std::vector<std::string> csv_header;
  std::vector<std::vector<json>> csv_rows;
  int exit_code = kOk;
};

// ---- commands ------------------------------------------------------------

Report cmd_lattice(Options& o) {
  Lattice l = resolve_lattice(o);
  Report r;
  r.result["dimension"] = l.dim();
  if (!l.name().empty()) r.result["name"] = l.name();
  r.result["covolume"] = num(l.covolume());
  json basis = json::array();
  for (int i = 0; i < l.dim(); ++i) basis.push_back(vec_json(l.basis().row(i).transpose()));
  r.result["basis"] = basis;
  if (o.info) {
    double m0 = l.gram().diagonal().minCoeff();
    ShellSeries sh = lattice_shells(l, m0 * (1.0 + 1e-9));
    for (const Shell& s : sh.entries) {
      if (s.norm > 1e-12) {
        r.result["minimal_norm"] = num(s.norm);
        r.result["kissing_number"] = count_json(s.count);
        break;
      }
    }
  }
  return r;
}

Report cmd_theta(Options& o) {
  Lattice l = resolve_lattice(o);
  Report r;
  auto shells_json = [&](const ShellSeries& sh) {
    json a = json::array();
    for (const Shell& s : sh.entries) a.push_back({{"norm", num(s.norm)}, {"count", count_json(s.count)}});
    return a;
  };
  r.csv_header = {"norm", "count"};
  auto fill_csv = [&](const ShellSeries& sh) {
    for (const Shell& s : sh.entries) r.csv_rows.push_back({num(s.norm), count_json(s.count)});
  };
  if (o.method == "auto") {
    ShellSeries sh = lattice_shells(l, o.max_norm);
    r.result["method"] = has_modular_theta(l) ? "modular" : "enumerated";
    r.result["shells"] = shells_json(sh);
    fill_csv(sh);
  } else if (o.method == "enumerated") {
    ShellSeries sh = theta_enumerated(l, o.max_norm);
    r.result["method"] = "enumerated";
    r.result["shells"] = shells_json(sh);
    fill_csv(sh);
  } else if (o.method == "modular" || o.method == "both") {
    if (!has_modular_theta(l)) throw UsageError("no modular theta series for this lattice");
    ShellSeries mod = lattice_shells(l, o.max_norm);
    r.result["method"] = o.method;
    r.result["shells"] = shells_json(mod);
    fill_csv(mod);
    if (o.method == "both") {
      ShellSeries en = theta_enumerated(l, o.max_norm);
      bool agree = mod.entries.size() == en.entries.size();
      for (std::size_t i = 0; agree && i < mod.entries.size(); ++i) {
        agree = std::fabs(mod.entries[i].norm - en.entries[i].norm) <= 1e-9 * std::max(1.0, mod.entries[i].norm) &&
                mod.entries[i].count == en.entries[i].count;
      }
      r.result["enumerated"] = shells_json(en);
      r.result["agree"] = agree;
    }
  } else {
    throw UsageError("--method must be auto, modular, enumerated or both");
  }
  return r;
}

Report cmd_zeta(Options& o) {
  Lattice l = resolve_lattice(o);
  if (!o.s) throw UsageError("--s is required");
  const double s = *o.s;
  Report r;
  SeriesValue v;
  std::string used;
  if (o.x.empty()) {
    r.result["origin_excluded"] = true;
    if (o.method == "direct") {
      v = epstein_zeta_direct(l, s, Vec::Zero(l.dim()), o.radius, true);
      used = "direct";
    } else if (o.method == "auto" || o.method == "continued") {
      v = epstein_zeta_origin_excluded(l, s);
      used = "continued";
    } else {
      throw UsageError("--method must be auto, direct or continued");
    }
  } else {
    const Vec x = resolve_x(o, l.dim(), true);
    if (o.method == "direct") {
      v = epstein_zeta_direct(l, s, x, o.radius);
      used = "direct";
    } else if (o.method == "continued") {
      v = epstein_zeta_continued(l, s, x);
      used = "continued";
    } else if (o.method == "auto") {
      v = epstein_zeta(l, s, x);
      used = s > l.dim() ? "direct" : "continued";
    } else {
      throw UsageError("--method must be auto, direct or continued");
    }
  }
  r.result["method"] = used;
  r.result["value"] = num(v.value);
  r.result["error"] = num(v.error);
  return r;
}

Report cmd_green(Options& o) {
  Lattice l = resolve_lattice(o);
  RieszParams p = resolve_params(o);
  const Vec x = resolve_x(o, l.dim(), true);
  Report r;
  std::vector<GreenRoute> routes;
  if (o.route == "all") {
    routes = {GreenRoute::fourier, GreenRoute::mellin, GreenRoute::ewald};
  } else if (o.route == "fourier") {
    routes = {GreenRoute::fourier};
  } else if (o.route == "mellin") {
    routes = {GreenRoute::mellin};
  } else if (o.route == "ewald") {
    routes = {GreenRoute::ewald};
  } else {
    throw UsageError("--route must be fourier, mellin, ewald or all");
  }
  json out = json::object();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (GreenRoute route : routes) {
    GreenEvaluation e;
    switch (route) {
      case GreenRoute::fourier:
        e = green_fourier(l, o.n, p, x, o.tol > 0 ? o.tol : 1e-8);
        break;
      case GreenRoute::mellin:
        e = green_mellin(l, o.n, p, x, o.tol > 0 ? o.tol : 1e-10);
        break;
      case GreenRoute::ewald:
        e = EwaldGreen(l, o.n, p, 0.0, o.budget).value(x);
        break;
    }
    out[std::string(to_string(route))] = {
        {"value", num(e.value)}, {"error", num(e.abs_error_estimate)}, {"terms", e.terms_used}};
    lo = std::min(lo, e.value);
    hi = std::max(hi, e.value);
  }
  r.result["routes"] = out;
  if (routes.size() > 1) r.result["max_discrepancy"] = num(hi - lo);
  return r;
}

Report cmd_madelung(Options& o) {
  Lattice l = resolve_lattice(o);
  RieszParams p = resolve_params(o);
  const GreenEvaluation m = madelung(l, o.n, p);
  Report r;
  r.result["value"] = num(m.value);
  r.result["error"] = num(m.abs_error_estimate);
  r.result["c"] = num(p.c);
  r.result["c_times_value"] = num(p.c * m.value);
  return r;
}

TorusConfiguration resolve_configuration(Options& o, const Lattice& l) {
  if (!o.points_file.empty()) return make_configuration(l, o.n, read_points(o.points_file, l.dim()));
  if (o.init == "lattice") return lattice_config(l, o.n);
  if (o.init == "random") {
    const auto count = o.count > 0 ? static_cast<std::size_t>(o.count)
                                   : static_cast<std::size_t>(std::llround(std::pow(o.n, l.dim())));
    std::seed_seq seq{o.seed};
    std::mt19937_64 rng(seq);
    return random_configuration(l, o.n, count, rng);
  }
  throw UsageError("--init must be lattice or random");
}

Report cmd_energy(Options& o) {
  Lattice l = resolve_lattice(o);
  RieszParams p = resolve_params(o);
  TorusConfiguration cfg = resolve_configuration(o, l);
  PeriodicEnergy pe(l, o.n, p);
  const EnergyReport e = pe.evaluate(cfg, true);
  double gmax = 0.0;
  for (const Vec& g : e.gradient) gmax = std::max(gmax, g.cwiseAbs().maxCoeff());
  Report r;
  r.result["points"] = static_cast<long long>(cfg.size());
  r.result["value"] = num(e.value);
  r.result["pair_error"] = num(e.per_pair_error);
  r.result["madelung"] = num(e.madelung);
  r.result["gradient_max_abs"] = num(gmax);
  return r;
}

Report cmd_optimize(Options& o) {
  Lattice l = resolve_lattice(o);
  RieszParams p = resolve_params(o);
  MinimizeOptions mo;
  mo.grad_tol = o.grad_tol;
  mo.max_iters = o.max_iters;
  mo.seed = o.seed;
  const int restarts = o.restarts > 0 ? o.restarts : 20;
  const RestartReport rep = minimize_with_restarts(l, o.n, p, restarts, mo);
  const double lattice_value = PeriodicEnergy(l, o.n, p).evaluate(lattice_config(l, o.n)).value;
  int below = 0, near = 0;
  json runs = json::array();
  for (std::size_t i = 0; i < rep.finals.size(); ++i) {
    const double f = rep.finals[i];
    below += f < lattice_value - 1e-9;
    near += std::fabs(f - lattice_value) <= 1e-6;
    runs.push_back({{"final", num(f)}, {"status", std::string(to_string(rep.statuses[i]))}});
  }
  Report r;
  r.result["lattice_energy"] = num(lattice_value);
  r.result["best"] = num(rep.best.report.value);
  r.result["runs"] = runs;
  r.result["below_lattice"] = below;
  r.result["within_1e-6"] = near;
  r.result["conjecture-counterexample-candidate"] = below > 0;
  return r;
}

Report cmd_probe_ck(Options& o) {
  Lattice l = resolve_lattice(o);
  if (o.n < 1) throw UsageError("--n must be positive");
  const CkProbeReport rep = ck_probe(l, o.n, o.t_list, o.trials, o.seed);
  Report r;
  json entries = json::array();
  r.csv_header = {"t", "baseline", "trials", "violations", "min_gap"};
  for (const CkProbeEntry& e : rep.entries) {
    entries.push_back({{"t", num(e.t)},
                       {"baseline", num(e.baseline)},
                       {"trials", e.trials},
                       {"violations", e.violations},
                       {"min_gap", num(e.min_gap)}});
    r.csv_rows.push_back({num(e.t), num(e.baseline), e.trials, e.violations, num(e.min_gap)});
  }
  const int total = rep.total_violations();
  const bool theorem = l.dim() == 8 || l.dim() == 24;
  r.result["entries"] = entries;
  r.result["violations"] = total;
  if (theorem) {
    r.result["theorem-violation"] = total > 0;
    if (total > 0) r.exit_code = kTheoremViolation;
  } else {
    r.result["conjecture-counterexample-candidate"] = total > 0;
  }
  return r;
}

Report cmd_jellium(Options& o) {
  RieszParams p = resolve_params(o);
  JelliumOptions jo;
  jo.restarts = o.restarts > 0 ? o.restarts : 8;
  jo.seed = o.seed;
  jo.allow_general_s = o.general_s;
  if (o.tol > 0) jo.tol = o.tol;
  Report r;
  r.csv_header = {"R", "N", "value", "per_volume"};
  json rows = json::array();
  for (double R : o.R_list) {
    const JelliumResult res = jellium_minimize(o.d, p, R, jo);
    const double vol = std::pow(R, o.d);
    json best = json::array();
    for (double b : res.best_by_restart) best.push_back(num(b));
    rows.push_back({{"R", num(R)},
                    {"N", std::llround(vol)},
                    {"value", num(res.value)},
                    {"per_volume", num(res.value / vol)},
                    {"best_by_restart", best}});
    r.csv_rows.push_back({num(R), std::llround(vol), num(res.value), num(res.value / vol)});
  }
  r.result["rows"] = rows;
  if (o.compare) {
    if (o.n_list.empty()) throw UsageError("--compare needs --n-list");
    Lattice l = resolve_lattice(o);
    JelliumComparison c = jellium_vs_periodic(p, o.R_list, l, o.n_list, jo);
    json periodic = json::array();
    for (std::size_t i = 0; i < c.n_list.size(); ++i) {
      periodic.push_back({{"n", c.n_list[i]}, {"min_energy", num(c.periodic[i])}});
    }
    json residuals = json::array();
    for (double v : c.residuals) residuals.push_back(num(v));
    r.result["comparison"] = {{"periodic", periodic},
                              {"intercept", num(c.intercept)},
                              {"slope", num(c.slope)},
                              {"degenerate_fit", c.degenerate_fit},
                              {"residuals", residuals},
                              {"spread", num(c.spread)},
                              {"max_residual_fraction", num(c.max_residual_fraction)}};
  }
  return r;
}

Report cmd_kernel_check(Options& o) {
  RieszParams p = resolve_params(o);
  Report r;
  r.result["c"] = num(p.c);
  r.result["alpha"] = num(p.alpha);
  r.csv_header = {"r", "kernel", "superposition", "relative_difference"};
  json rows = json::array();
  double worst = 0.0;
  for (double rr : o.r_list) {
    if (!(rr > 0.0)) throw UsageError("--r values must be positive");
    const double k = riesz_kernel(p, rr);
    json row = {{"r", num(rr)}, {"kernel", num(k)}};
    if (!p.log && p.s > 0.0) {
      const double g = gaussian_superposition(rr, p.s, o.tol > 0 ? o.tol : 1e-10);
      const double rel = std::fabs(g - k) / std::fabs(k);
      worst = std::max(worst, rel);
      row["superposition"] = num(g);
      row["relative_difference"] = num(rel);
      r.csv_rows.push_back({num(rr), num(k), num(g), num(rel)});
    } else {
      r.csv_rows.push_back({num(rr), num(k), nullptr, nullptr});
    }
    rows.push_back(row);
  }
  r.result["rows"] = rows;
  if (!p.log && p.s > 0.0) r.result["max_relative_difference"] = num(worst);
  return r;
}

// ---- plumbing --------------------------------------------------------------

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

json resolved_config(const std::string& command, const Options& o, const CLI::App& sub) {
  json c;
  c["command"] = command;
  if (!o.name.empty()) c["name"] = o.name;
  if (!o.file.empty()) c["file"] = o.file;
  if (o.d) c["d"] = o.d;
  if (o.s) c["s"] = num(*o.s);
  c["n"] = o.n;
  if (!o.n_list.empty()) c["n_list"] = o.n_list;
  if (!o.x.empty()) c["x"] = o.x;
  if (command == "probe-ck") c["t"] = o.t_list;
  if (command == "jellium") c["R"] = o.R_list;
  if (command == "kernel-check") c["r"] = o.r_list;
  c["seed"] = o.seed;
  c["tol"] = num(o.tol);
  c["budget"] = num(o.budget);
  c["format"] = o.format;
  c["restarts"] = o.restarts;
  c["trials"] = o.trials;
  c["max_norm"] = num(o.max_norm);
  c["route"] = o.route;
  c["method"] = o.method;
  c["info"] = o.info;
  c["general_s"] = o.general_s;
  c["compare"] = o.compare;
  c["radius"] = num(o.radius);
  if (!o.points_file.empty()) c["points"] = o.points_file;
  c["init"] = o.init;
  c["count"] = o.count;
  c["grad_tol"] = num(o.grad_tol);
  c["max_iters"] = o.max_iters;
  // Keep what the command accepts; "t" is stored as --t and "n_list" as --n-list.
  json kept;
  kept["command"] = command;
  for (const auto& [key, value] : c.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (sub.get_option_no_throw(flag) != nullptr) kept[key] = value;
  }
  return kept;
}

// key=value lines; command-line flags take precedence.
std::vector<std::string> merge_config_file(const std::vector<std::string>& args, std::ostream& err, bool& ok) {
  ok = true;
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return rest;
  std::ifstream in(path);
  if (!in) {
    err << "error: cannot open config file " << path << "\n";
    ok = false;
    return rest;
  }
  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(rest.begin(), rest.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::string line;
  std::vector<std::string> extra;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || given(key)) continue;
    if (value == "true") {
      extra.push_back("--" + key);
    } else if (value != "false") {
      extra.push_back("--" + key);
      extra.push_back(value);
    }
  }
  rest.insert(rest.end(), extra.begin(), extra.end());
  return rest;
}

void add_lattice_options(CLI::App* sub, Options& o) {
  sub->add_option("--name", o.name, "Named lattice: Z<d>, A2, D4, E8, Leech (or Z with --d)");
  sub->add_option("--file", o.file, "Lattice file: d, then d basis rows");
  sub->add_option("--d", o.d, "Dimension");
}

void add_kernel_options(CLI::App* sub, Options& o) {
  sub->add_option("--s", o.s, "Riesz exponent (default d - 2; 0 in d = 2 is the log kernel)");
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  bool config_ok = true;
  std::vector<std::string> args = merge_config_file(raw_args, err, config_ok);
  if (!config_ok) return kUsage;

  Options o;
  CLI::App app{"Periodic Riesz and Coulomb lattice energies"};
  app.name("rieszlat");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--config", "Key=value file with default flags (command line wins)");
  auto global = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--tol", o.tol, "Tolerance (0 = operation default)");
    sub->add_option("--budget", o.budget, "Largest vector list");
    sub->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  std::map<CLI::App*, std::function<Report(Options&)>> handlers;
  auto make = [&](const std::string& name, const std::string& desc, auto&& fn) {
    CLI::App* sub = app.add_subcommand(name, desc);
    global(sub);
    handlers[sub] = fn;
    return sub;
  };

  CLI::App* lat = make("lattice", "Lattice data", cmd_lattice);
  add_lattice_options(lat, o);
  lat->add_flag("--info", o.info, "Minimal norm and kissing number");

  CLI::App* th = make("theta", "Theta series shells", cmd_theta);
  add_lattice_options(th, o);
  th->add_option("--max-norm", o.max_norm, "Largest squared norm");
  th->add_option("--method", o.method, "auto, modular, enumerated or both");

  CLI::App* ze = make("zeta", "Epstein zeta function", cmd_zeta);
  add_lattice_options(ze, o);
  add_kernel_options(ze, o);
  ze->add_option("--x", o.x, "Shift vector (omit for the origin-excluded sum)")->delimiter(',');
  ze->add_option("--method", o.method, "auto, direct or continued");
  ze->add_option("--radius", o.radius, "Direct-sum radius");

  CLI::App* gr = make("green", "Periodic Green function", cmd_green);
  add_lattice_options(gr, o);
  add_kernel_options(gr, o);
  gr->add_option("--n", o.n, "Torus scale n")->check(CLI::PositiveNumber);
  gr->add_option("--x", o.x, "Evaluation point")->delimiter(',');
  gr->add_option("--route", o.route, "fourier, mellin, ewald or all");

  CLI::App* ma = make("madelung", "Madelung constant", cmd_madelung);
  add_lattice_options(ma, o);
  add_kernel_options(ma, o);
  ma->add_option("--n", o.n, "Torus scale n")->check(CLI::PositiveNumber);

  CLI::App* en = make("energy", "Periodic energy of a configuration", cmd_energy);
  add_lattice_options(en, o);
  add_kernel_options(en, o);
  en->add_option("--n", o.n, "Torus scale n")->check(CLI::PositiveNumber);
  en->add_option("--points", o.points_file, "Points file, one point per line");
  en->add_option("--init", o.init, "lattice or random");
  en->add_option("--count", o.count, "Number of random points (default n^d)");

  CLI::App* op = make("optimize", "Multi-restart energy minimization", cmd_optimize);
  add_lattice_options(op, o);
  add_kernel_options(op, o);
  op->add_option("--n", o.n, "Torus scale n")->check(CLI::PositiveNumber);
  op->add_option("--restarts", o.restarts, "Random restarts (default 20)");
  op->add_option("--grad-tol", o.grad_tol, "Gradient tolerance");
  op->add_option("--max-iters", o.max_iters, "Iteration cap per restart");

  CLI::App* ck = make("probe-ck", "Gaussian energy probe against random configurations", cmd_probe_ck);
  add_lattice_options(ck, o);
  ck->add_option("--n", o.n, "Torus scale n")->check(CLI::PositiveNumber);
  ck->add_option("--t", o.t_list, "Gaussian parameters")->delimiter(',');
  ck->add_option("--trials", o.trials, "Random configurations per t");

  CLI::App* je = make("jellium", "Finite-volume jellium minimization", cmd_jellium);
  add_lattice_options(je, o);
  add_kernel_options(je, o);
  je->add_option("--R", o.R_list, "Box sizes")->delimiter(',');
  je->add_option("--restarts", o.restarts, "Random restarts (default 8)");
  je->add_flag("--general-s", o.general_s, "Allow non-Coulomb kernels");
  je->add_flag("--compare", o.compare, "Fit against the periodic minimum of --name");
  je->add_option("--n-list", o.n_list, "Torus scales for --compare")->delimiter(',');

  CLI::App* kc = make("kernel-check", "Kernel against its Gaussian superposition", cmd_kernel_check);
  kc->add_option("--d", o.d, "Dimension");
  add_kernel_options(kc, o);
  kc->add_option("--r", o.r_list, "Radii")->delimiter(',');

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  const int previous_threads = thread_count();
  set_thread_count(o.threads);
  struct Restore {
    int t;
    ~Restore() { set_thread_count(t); }
  } restore{previous_threads};

  Report report;
  try {
    report = handlers.at(chosen)(o);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << chosen->help();
    return kUsage;
  } catch (const DomainError& e) {  // includes unknown lattice names
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const BudgetExceededError& e) {
    err << "error: " << e.what() << "\n";
    return kBudget;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  }

  const json config = resolved_config(command, o, *chosen);
  if (o.format == "csv") {
    if (report.csv_header.empty()) {
      err << "error: csv output is only available for sweeps (theta, probe-ck, jellium, kernel-check)\n";
      return kUsage;
    }
    out << "# schema=1\n";
    for (const auto& [k, v] : config.items()) out << "# " << k << "=" << csv_cell(v) << "\n";
    for (std::size_t i = 0; i < report.csv_header.size(); ++i) out << (i ? "," : "") << report.csv_header[i];
    out << "\n";
    for (const auto& row : report.csv_rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(row[i]);
      out << "\n";
    }
  } else {
    json doc;
    doc["schema"] = 1;
    doc["command"] = command;
    doc["config"] = config;
    doc["result"] = report.result;
    out << doc.dump(2) << "\n";
  }
  return report.exit_code;
}

}  // namespace rieszlat::cli
