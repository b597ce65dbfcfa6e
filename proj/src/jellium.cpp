#include "rieszlat/jellium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <unistd.h>

#include "rieszlat/error.hpp"
#include "rieszlat/numeric.hpp"

namespace rieszlat {
namespace {

// Kernel as a function of the squared distance.
double kernel_sq(const RieszParams& p, double r2) {
  if (p.log) return -0.5 * std::log(r2);
  return std::pow(r2, -0.5 * p.s);
}

struct Panel {
  double a, b;
};

// [0, ext] cut at h, 2h, 4h, ... so that a near-singularity at distance h
// from the origin corner is resolved geometrically.
std::vector<Panel> graded_panels(double h, double ext) {
  std::vector<Panel> out;
  if (ext <= 0.0) return out;
  double a = 0.0;
  double b = std::max(h, 1e-13 * ext);
  while (b < ext) {
    out.push_back({a, b});
    a = b;
    b *= 2.0;
  }
  out.push_back({a, ext});
  return out;
}

// Nodes and weights of the composite rule on the graded panels.
void composite_rule(double h, double ext, int order, std::vector<double>& x, std::vector<double>& w) {
  const auto& gl = gauss_legendre(order);
  x.clear();
  w.clear();
  for (const Panel& pn : graded_panels(h, ext)) {
    const double mid = 0.5 * (pn.a + pn.b), half = 0.5 * (pn.b - pn.a);
    for (int i = 0; i < order; ++i) {
      x.push_back(mid + half * gl.nodes[i]);
      w.push_back(half * gl.weights[i]);
    }
  }
}

// Tensor-product sum of f over prod_j [0, ext_j] with the given 1D rules.
// abs_sum, when given, receives the sum of |weight * f| as a rounding scale.
template <class F>
double tensor_sum(const std::vector<std::vector<double>>& xs, const std::vector<std::vector<double>>& ws, F&& f,
                  double* abs_sum = nullptr) {
  const std::size_t m = xs.size();
  if (abs_sum) *abs_sum = 0.0;
  if (m == 0) {
    const double v = f(std::vector<double>{});
    if (abs_sum) *abs_sum = std::fabs(v);
    return v;
  }
  for (const auto& v : xs) {
    if (v.empty()) return 0.0;
  }
  double mag = 0.0;
  std::vector<std::size_t> idx(m, 0);
  std::vector<double> pt(m);
  CompensatedSum acc;
  for (;;) {
    double wt = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      pt[j] = xs[j][idx[j]];
      wt *= ws[j][idx[j]];
    }
    const double term = wt * f(pt);
    acc += term;
    mag += std::fabs(term);
    std::size_t j = 0;
    while (j < m && ++idx[j] == xs[j].size()) idx[j++] = 0;
    if (j == m) break;
  }
  if (abs_sum) *abs_sum = mag;
  return acc.value();
}

double corner_box(const RieszParams& params, const std::vector<double>& e, double tol);

// int over prod_j [0, ext_j] of k(h^2 + |p|^2) dp, refining the order until two
// successive values agree to tol (or to rounding level).
double offset_box_integral(const RieszParams& params, double h, const std::vector<double>& ext, double tol) {
  double widest = 0.0;
  for (double e : ext) {
    if (e <= 0.0) return 0.0;
    widest = std::max(widest, e);
  }
  // Singularity on the box corner: one dimension down, same pyramid reduction.
  if (!ext.empty() && h <= 1e-13 * widest) {
    if (!params.log && params.s >= static_cast<double>(ext.size())) return std::numeric_limits<double>::infinity();
    return corner_box(params, ext, tol);
  }
  const std::size_t m = ext.size();
  auto f = [&](const std::vector<double>& p) {
    double r2 = h * h;
    for (double v : p) r2 += v * v;
    return kernel_sq(params, r2);
  };
  std::optional<double> prev;
  for (int order = 4; order <= 64; order *= 2) {
    std::vector<std::vector<double>> xs(m), ws(m);
    for (std::size_t j = 0; j < m; ++j) composite_rule(h, ext[j], order, xs[j], ws[j]);
    double mag = 0.0;
    const double cur = tensor_sum(xs, ws, f, &mag);
    if (prev && std::fabs(cur - *prev) <= std::max(tol, 1e-14 * mag)) return cur;
    prev = cur;
  }
  throw NonconvergenceError("background quadrature did not reach the requested tolerance");
}

// int over the box prod_k [0, e_k] of g(|u|) du. Each face u_k = e_k is the base
// of a pyramid with apex at the origin; the radial integral is done in closed form.
double corner_box(const RieszParams& params, const std::vector<double>& e, double tol) {
  const int d = static_cast<int>(e.size());
  CompensatedSum acc;
  for (int k = 0; k < d; ++k) {
    if (e[k] <= 0.0) continue;
    std::vector<double> rest;
    double area = 1.0;
    for (int j = 0; j < d; ++j) {
      if (j == k) continue;
      rest.push_back(e[j]);
      area *= e[j];
    }
    if (area <= 0.0) continue;
    const double face = offset_box_integral(params, e[k], rest, tol / d);
    // d here is the box dimension, which is one less than the ambient one for faces.
    if (params.log) {
      acc += e[k] * (area / (d * static_cast<double>(d)) + face / d);
    } else {
      acc += e[k] * face / (d - params.s);
    }
  }
  return acc.value();
}

void check_point(double R, const Vec& x) {
  const double slack = 1e-12 * std::max(1.0, R);
  for (int k = 0; k < x.size(); ++k) {
    if (!(std::fabs(x[k]) <= 0.5 * R + slack)) throw DomainError("point outside the cube K_R");
  }
}

void check_kernel(const RieszParams& params, bool allow_general_s) {
  if (params.d != 2 && params.d != 3) throw DomainError("jellium needs d = 2 or 3");
  if (!params.coulomb() && !allow_general_s) {
    throw DomainError("jellium supports the Coulomb and log kernels unless general s is enabled");
  }
}

// 2^d int_{[0,1]^d} g(z) prod_j (1 - z_j) dz, the double integral over K_1.
// Same pyramid reduction with the polynomial weight integrated radially in closed form.
double unit_self_energy(const RieszParams& params, double tol) {
  const int d = params.d;
  const int m = d - 1;
  auto face = [&](const std::vector<double>& w) {
    // (1 - xi) prod_j (1 - xi w_j) as coefficients in xi
    std::vector<double> poly{1.0, -1.0};
    double r2 = 1.0;
    for (double wj : w) {
      r2 += wj * wj;
      std::vector<double> next(poly.size() + 1, 0.0);
      for (std::size_t i = 0; i < poly.size(); ++i) {
        next[i] += poly[i];
        next[i + 1] -= wj * poly[i];
      }
      poly.swap(next);
    }
    double acc = 0.0;
    if (params.log) {
      const double lr = 0.5 * std::log(r2);
      for (std::size_t i = 0; i < poly.size(); ++i) {
        const double q = d + static_cast<double>(i);
        acc += poly[i] * (1.0 / (q * q) - lr / q);
      }
    } else {
      for (std::size_t i = 0; i < poly.size(); ++i) acc += poly[i] / (d - params.s + static_cast<double>(i));
      acc *= std::pow(r2, -0.5 * params.s);
    }
    return acc;
  };
  std::optional<double> prev;
  for (int order = 4; order <= 128; order *= 2) {
    const auto& gl = gauss_legendre(order);
    std::vector<double> x(order), w(order);
    for (int i = 0; i < order; ++i) {
      x[i] = 0.5 * (1.0 + gl.nodes[i]);
      w[i] = 0.5 * gl.weights[i];
    }
    std::vector<std::vector<double>> xs(m, x), ws(m, w);
    double mag = 0.0;
    const double cur = std::ldexp(static_cast<double>(d) * tensor_sum(xs, ws, face, &mag), d);
    if (prev && std::fabs(cur - *prev) <= std::max(tol, 1e-14 * std::ldexp(d * mag, d))) return cur;
    prev = cur;
  }
  throw NonconvergenceError("self-energy quadrature did not converge");
}

std::string cache_key(const RieszParams& params, double R) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "jellium_d%d_s%.17g_log%d_R%.17g", params.d, params.s, params.log ? 1 : 0, R);
  return buf;
}

std::optional<double> read_disk_cache(const std::string& key) {
  const char* dir = std::getenv("RIESZLAT_CACHE_DIR");
  if (!dir || !*dir) return std::nullopt;
  std::ifstream in(std::filesystem::path(dir) / (key + ".txt"));
  double v = 0.0;
  if (in >> v && std::isfinite(v)) return v;
  return std::nullopt;
}

void write_disk_cache(const std::string& key, double value) {
  const char* dir = std::getenv("RIESZLAT_CACHE_DIR");
  if (!dir || !*dir) return;
  std::error_code ec;
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root, ec);
  const auto final_path = root / (key + ".txt");
  const auto tmp = root / (key + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp);
    if (!out) return;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g\n", value);
    out << buf;
    if (!out) return;
  }
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) std::filesystem::remove(tmp, ec);
}

}  // namespace

JelliumInstance make_jellium_instance(const RieszParams& params, double R, std::vector<Vec> points,
                                      bool allow_general_s) {
  check_kernel(params, allow_general_s);
  if (!(R > 0.0) || !std::isfinite(R)) throw DomainError("R must be positive");
  const double nd = std::pow(R, params.d);
  if (static_cast<double>(points.size()) != std::round(nd) || points.empty()) {
    throw DomainError("jellium needs N = round(R^d) >= 1 points");
  }
  for (const Vec& p : points) {
    if (p.size() != params.d) throw DomainError("point dimension mismatch");
    check_point(R, p);
  }
  return {params.d, params, R, std::move(points)};
}

double background_potential(const RieszParams& params, double R, const Vec& x, double tol) {
  const int d = params.d;
  if (x.size() != d) throw DomainError("point dimension mismatch");
  check_point(R, x);
  const int boxes = 1 << d;
  std::vector<double> parts(boxes);
  parallel_for(boxes, [&](std::size_t b) {
    std::vector<double> e(d);
    for (int k = 0; k < d; ++k) {
      e[k] = std::max(0.0, (b >> k) & 1 ? 0.5 * R - x[k] : 0.5 * R + x[k]);
    }
    parts[b] = corner_box(params, e, tol / boxes);
  });
  CompensatedSum acc;
  for (double v : parts) acc += v;
  return acc.value();
}

Vec background_gradient(const RieszParams& params, double R, const Vec& x, double tol) {
  const int d = params.d;
  if (x.size() != d) throw DomainError("point dimension mismatch");
  check_point(R, x);
  // dV/dx_k = (face at y_k = -R/2) - (face at y_k = +R/2)
  auto face = [&](int k, double yk) {
    const double h = std::fabs(x[k] - yk);
    const int subs = 1 << (d - 1);
    CompensatedSum acc;
    for (int b = 0; b < subs; ++b) {
      std::vector<double> ext;
      int bit = 0;
      for (int j = 0; j < d; ++j) {
        if (j == k) continue;
        ext.push_back(std::max(0.0, (b >> bit) & 1 ? 0.5 * R - x[j] : 0.5 * R + x[j]));
        ++bit;
      }
      acc += offset_box_integral(params, h, ext, tol / (2 * subs));
    }
    return acc.value();
  };
  Vec g(d);
  for (int k = 0; k < d; ++k) g[k] = face(k, -0.5 * R) - face(k, 0.5 * R);
  return g;
}

double background_self_energy(const RieszParams& params, double R, double tol) {
  check_kernel(params, true);
  if (!(R > 0.0)) throw DomainError("R must be positive");
  static std::mutex mu;
  static std::map<std::string, double> memo;
  const std::string key = cache_key(params, R);
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
  }
  double value;
  if (auto disk = read_disk_cache(key)) {
    value = *disk;
  } else {
    const int d = params.d;
    if (params.log) {
      const double r2d = std::pow(R, 2 * d);
      value = r2d * (unit_self_energy(params, tol / std::max(1.0, r2d)) - std::log(R));
    } else {
      const double scale = std::pow(R, 2 * d - params.s);
      value = scale * unit_self_energy(params, tol / std::max(1.0, scale));
    }
    write_disk_cache(key, value);
  }
  std::lock_guard<std::mutex> lock(mu);
  memo.emplace(key, value);
  return value;
}

namespace {

double pair_term(const JelliumInstance& inst, std::vector<Vec>* grad) {
  const auto& pts = inst.points;
  const std::size_t n = pts.size();
  CompensatedSum acc;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec diff = pts[i] - pts[j];
      const double r = diff.norm();
      if (r < 1e-7 * std::max(1.0, inst.R)) throw CoincidentPointsError("coincident jellium points");
      acc += 2.0 * riesz_kernel(inst.params, r);
      if (grad) {
        const Vec gv = (2.0 * riesz_kernel_derivative(inst.params, r) / r) * diff;
        (*grad)[i] += gv;
        (*grad)[j] -= gv;
      }
    }
  }
  return acc.value();
}

double evaluate(const JelliumInstance& inst, std::vector<Vec>* grad, double tol) {
  const std::size_t n = inst.points.size();
  for (const Vec& p : inst.points) check_point(inst.R, p);
  if (grad) grad->assign(n, Vec::Zero(inst.d));
  const double pairs = pair_term(inst, grad);
  std::vector<double> pot(n);
  std::vector<Vec> pot_grad(grad ? n : 0);
  parallel_for(n, [&](std::size_t i) {
    pot[i] = background_potential(inst.params, inst.R, inst.points[i], tol / n);
    if (grad) pot_grad[i] = background_gradient(inst.params, inst.R, inst.points[i], tol / n);
  });
  CompensatedSum acc;
  acc += pairs;
  for (std::size_t i = 0; i < n; ++i) {
    acc += -2.0 * pot[i];
    if (grad) (*grad)[i] -= 2.0 * pot_grad[i];
  }
  acc += background_self_energy(inst.params, inst.R);
  return acc.value();
}

}  // namespace

double jellium_energy(const JelliumInstance& inst, double tol) { return evaluate(inst, nullptr, tol); }

double jellium_energy_gradient(const JelliumInstance& inst, std::vector<Vec>& grad, double tol) {
  return evaluate(inst, &grad, tol);
}

namespace {

struct RunResult {
  std::vector<Vec> points;
  double value = std::numeric_limits<double>::infinity();
};

void clamp_to_cube(Vec& x, double R) {
  for (int k = 0; k < x.size(); ++k) x[k] = std::clamp(x[k], -0.5 * R, 0.5 * R);
}

// Gradient with the components that push a boundary point outward removed.
double projected_norm(const std::vector<Vec>& pts, const std::vector<Vec>& grad, double R) {
  double worst = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int k = 0; k < pts[i].size(); ++k) {
      const double g = grad[i][k];
      if (pts[i][k] >= 0.5 * R && g < 0.0) continue;
      if (pts[i][k] <= -0.5 * R && g > 0.0) continue;
      worst = std::max(worst, std::fabs(g));
    }
  }
  return worst;
}

RunResult projected_descent(JelliumInstance inst, const JelliumOptions& opts) {
  std::vector<Vec> grad;
  double value = jellium_energy_gradient(inst, grad, opts.tol);
  const double spacing = 1.0;  // mean interparticle distance when N = R^d
  double step = 0.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    const double gmax = projected_norm(inst.points, grad, inst.R);
    if (gmax <= opts.grad_tol) break;
    if (step <= 0.0) step = 0.1 * spacing / gmax;
    step = std::min(step, 0.25 * spacing / gmax);
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries, step *= 0.5) {
      JelliumInstance trial = inst;
      double decrease = 0.0;
      for (std::size_t i = 0; i < trial.points.size(); ++i) {
        trial.points[i] -= step * grad[i];
        clamp_to_cube(trial.points[i], inst.R);
        decrease += grad[i].dot(trial.points[i] - inst.points[i]);
      }
      std::vector<Vec> tgrad;
      double tvalue;
      try {
        tvalue = jellium_energy_gradient(trial, tgrad, opts.tol);
      } catch (const CoincidentPointsError&) {
        continue;
      }
      if (tvalue <= value + 1e-4 * decrease) {
        inst = std::move(trial);
        grad = std::move(tgrad);
        value = tvalue;
        accepted = true;
        step *= 2.0;
        break;
      }
    }
    if (!accepted) break;
  }
  return {std::move(inst.points), value};
}

}  // namespace

JelliumResult jellium_minimize(int d, const RieszParams& params, double R, const JelliumOptions& opts) {
  if (params.d != d) throw DomainError("kernel dimension does not match d");
  check_kernel(params, opts.allow_general_s);
  const double nd = std::round(std::pow(R, d));
  if (!(R > 0.0) || nd < 1.0 || std::fabs(nd - std::pow(R, d)) > 1e-9 * nd) {
    throw DomainError("jellium needs R^d to be an integer >= 1");
  }
  if (opts.restarts < 1) throw DomainError("restarts must be positive");
  const auto count = static_cast<std::size_t>(nd);

  // Starting points drawn serially so the result does not depend on the thread count.
  std::vector<std::vector<Vec>> starts(opts.restarts);
  for (int r = 0; r < opts.restarts; ++r) {
    std::seed_seq seq{static_cast<std::uint64_t>(opts.seed), static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(-0.5 * R, 0.5 * R);
    auto& pts = starts[r];
    while (pts.size() < count) {
      Vec p(d);
      for (int k = 0; k < d; ++k) p[k] = u(rng);
      bool far = true;
      for (const Vec& q : pts) far = far && (p - q).norm() >= 1e-3;
      if (far) pts.push_back(p);
    }
  }

  std::vector<std::optional<RunResult>> runs(opts.restarts);
  parallel_for(static_cast<std::size_t>(opts.restarts), [&](std::size_t r) {
    try {
      runs[r] = projected_descent(JelliumInstance{d, params, R, starts[r]}, opts);
    } catch (const Error&) {
      runs[r].reset();
    }
  });

  JelliumResult out;
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opts.restarts; ++r) {
    const double v = runs[r] ? runs[r]->value : std::numeric_limits<double>::infinity();
    out.finals.push_back(v);
    if (v < best) {
      best = v;
      out.points = runs[r]->points;
    }
    out.best_by_restart.push_back(best);
  }
  if (!std::isfinite(best)) throw NonconvergenceError("jellium optimizer failed on every restart");
  out.value = best;
  return out;
}

void fit_affine_halves(JelliumComparison& cmp) {
  const std::size_t k = std::min(cmp.jellium.size(), cmp.periodic.size());
  cmp.residuals.clear();
  cmp.intercept = cmp.slope = 0.0;
  cmp.degenerate_fit = false;
  cmp.spread = 0.0;
  cmp.max_residual_fraction = 0.0;
  if (k == 0) return;
  const std::size_t fit = (k + 1) / 2;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < fit; ++i) {
    mx += cmp.periodic[i];
    my += cmp.jellium[i];
  }
  mx /= fit;
  my /= fit;
  double sxx = 0.0, sxy = 0.0, xscale = 0.0;
  for (std::size_t i = 0; i < fit; ++i) {
    sxx += (cmp.periodic[i] - mx) * (cmp.periodic[i] - mx);
    sxy += (cmp.periodic[i] - mx) * (cmp.jellium[i] - my);
    xscale = std::max(xscale, std::fabs(cmp.periodic[i]));
  }
  // Without spread in the periodic column the slope is undetermined; take the
  // minimum-norm solution.
  if (std::sqrt(sxx) <= 1e-9 * std::max(1.0, xscale)) {
    cmp.degenerate_fit = true;
    cmp.slope = 0.0;
  } else {
    cmp.slope = sxy / sxx;
  }
  cmp.intercept = my - cmp.slope * mx;
  const auto [lo, hi] = std::minmax_element(cmp.jellium.begin(), cmp.jellium.begin() + k);
  cmp.spread = *hi - *lo;
  double worst = 0.0;
  for (std::size_t i = fit; i < k; ++i) {
    const double r = cmp.jellium[i] - (cmp.intercept + cmp.slope * cmp.periodic[i]);
    cmp.residuals.push_back(r);
    worst = std::max(worst, std::fabs(r));
  }
  if (worst == 0.0) {
    cmp.max_residual_fraction = 0.0;
  } else {
    cmp.max_residual_fraction = cmp.spread > 0.0 ? worst / cmp.spread : std::numeric_limits<double>::infinity();
  }
}

JelliumComparison jellium_vs_periodic(const RieszParams& params, const std::vector<double>& R_list,
                                      const Lattice& lattice, const std::vector<int>& n_list,
                                      const JelliumOptions& opts, int periodic_restarts) {
  if (R_list.empty() || n_list.empty()) throw DomainError("jellium_vs_periodic needs nonempty lists");
  if (lattice.dim() != params.d) throw DomainError("lattice dimension does not match the kernel");
  JelliumComparison cmp;
  cmp.R_list = R_list;
  cmp.n_list = n_list;
  std::map<double, double> jel_memo;
  for (double R : R_list) {
    auto it = jel_memo.find(R);
    if (it == jel_memo.end()) {
      const JelliumResult res = jellium_minimize(params.d, params, R, opts);
      it = jel_memo.emplace(R, res.value / std::pow(R, params.d)).first;
    }
    cmp.jellium.push_back(it->second);
  }
  std::map<int, double> per_memo;
  for (int n : n_list) {
    auto it = per_memo.find(n);
    if (it == per_memo.end()) {
      MinimizeOptions mo;
      mo.seed = opts.seed;
      const RestartReport rep = minimize_with_restarts(lattice, n, params, periodic_restarts, mo);
      it = per_memo.emplace(n, rep.best.report.value).first;
    }
    cmp.periodic.push_back(it->second);
  }
  fit_affine_halves(cmp);
  return cmp;
}

}  // namespace rieszlat
