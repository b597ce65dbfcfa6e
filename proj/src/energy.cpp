#include "rieszlat/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "rieszlat/error.hpp"
#include "rieszlat/numeric.hpp"

namespace rieszlat {

namespace {

constexpr double kCoincidence = 1e-7;

double cell_scale(const Lattice& lattice) { return std::pow(lattice.covolume(), 1.0 / lattice.dim()); }

Lattice torus_of(const TorusConfiguration& c) {
  return c.n == 1 ? c.lattice : c.lattice.scaled(static_cast<double>(c.n));
}

// sum_{v in n Lambda, v != 0} Psi_t(v) from the shell series.
double self_image_sum(const Lattice& lattice, int n, double t) {
  const int d = lattice.dim();
  const double n2 = static_cast<double>(n) * n;
  const double beta = 1.0 / (4.0 * t);
  double m = std::max(4.0 * std::pow(lattice.covolume(), 2.0 / d) * n2, 4.0 * t * 40.0);
  for (int attempt = 0; attempt < 8; ++attempt) {
    const ShellSeries shells = lattice_shells(lattice, m / n2).scaled(n2);
    try {
      const SeriesValue s = gaussian_lattice_sum(shells, beta, 1e-15);
      return std::pow(4.0 * std::numbers::pi * t, -0.5 * d) * (s.value - 1.0);
    } catch (const InsufficientShellsError& e) {
      m = std::max(e.required_max_norm(), 1.5 * m);
    }
  }
  throw NonconvergenceError("self-image sum: shell series did not reach the required norm");
}

}  // namespace

TorusConfiguration make_configuration(const Lattice& lattice, int n, std::vector<Vec> points) {
  if (n < 1) throw DomainError("torus multiple n must be >= 1");
  for (auto& p : points) {
    if (p.size() != lattice.dim()) throw DomainError("point dimension does not match the lattice");
    p = reduce_to_cell(lattice, p, n);
  }
  return {lattice, n, std::move(points)};
}

TorusConfiguration lattice_config(const Lattice& lattice, int n) {
  if (n < 1) throw DomainError("torus multiple n must be >= 1");
  const int d = lattice.dim();
  std::vector<Vec> points;
  std::vector<int> c(d, 0);
  for (;;) {
    Vec coeff(d);
    for (int i = 0; i < d; ++i) coeff[i] = c[i];
    points.push_back(lattice.point(coeff));
    int k = 0;
    while (k < d && ++c[k] == n) c[k++] = 0;
    if (k == d) break;
  }
  return make_configuration(lattice, n, std::move(points));
}

TorusConfiguration random_configuration(const Lattice& lattice, int n, std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, static_cast<double>(n));
  std::vector<Vec> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vec c(lattice.dim());
    for (int k = 0; k < lattice.dim(); ++k) c[k] = u(rng);
    points.push_back(lattice.point(c));
  }
  return make_configuration(lattice, n, std::move(points));
}

double min_pair_distance(const TorusConfiguration& config) {
  const Lattice torus = torus_of(config);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < config.size(); ++i)
    for (std::size_t j = i + 1; j < config.size(); ++j)
      best = std::min(best, distance_to_lattice(torus, config.points[i] - config.points[j]));
  return best;
}

// ---------------------------------------------------------------------------

PeriodicEnergy::PeriodicEnergy(const Lattice& lattice, int n, const RieszParams& params)
    : lattice_(lattice), n_(n), params_(params), green_(std::make_unique<EwaldGreen>(lattice, n, params)) {
  const GreenEvaluation m = rieszlat::madelung(lattice, n, params);
  madelung_ = m.value;
  madelung_error_ = m.abs_error_estimate;
}

double PeriodicEnergy::unscaled(const TorusConfiguration& config) const {
  return evaluate(config).value / (params_.c * params_.c);
}

EnergyReport PeriodicEnergy::evaluate(const TorusConfiguration& config, bool with_gradient) const {
  if (config.n != n_ || config.lattice.dim() != lattice_.dim()) throw DomainError("configuration lives on a different torus");
  const std::size_t count = config.size();
  if (count == 0) throw DomainError("empty configuration");
  const int d = lattice_.dim();
  const double threshold = kCoincidence * cell_scale(lattice_);
  const Lattice& torus = green_->torus();

  // One slot per unordered pair, reduced serially afterwards for bit-stable sums.
  const std::size_t pairs = count * (count - 1) / 2;
  std::vector<double> values(pairs);
  std::vector<Vec> grads(with_gradient ? pairs : 0);
  std::vector<std::size_t> row_start(count, 0);
  for (std::size_t i = 1; i < count; ++i) row_start[i] = row_start[i - 1] + (count - i);
  parallel_for(count, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < count; ++j) {
      const Vec diff = config.points[i] - config.points[j];
      if (distance_to_lattice(torus, diff) < threshold) {
        throw CoincidentPointsError("points " + std::to_string(i) + " and " + std::to_string(j) +
                                    " coincide on the torus");
      }
      const std::size_t slot = row_start[i] + (j - i - 1);
      if (with_gradient) {
        values[slot] = green_->value_and_gradient(diff, grads[slot]);
      } else {
        values[slot] = green_->value(diff).value;
      }
    }
  });

  CompensatedSum pair_sum;
  for (double v : values) pair_sum += v;
  const double c2 = params_.c * params_.c;
  const double inv_n = 1.0 / static_cast<double>(count);

  EnergyReport out;
  out.value = c2 * (2.0 * inv_n * pair_sum.value() + madelung_);
  out.madelung = madelung_;
  out.route = GreenRoute::ewald;
  out.per_pair_error = c2 * (1e-16 + 4e-16 * std::fabs(madelung_) + madelung_error_);
  if (with_gradient) {
    out.gradient.assign(count, Vec::Zero(d));
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t j = i + 1; j < count; ++j) {
        const Vec& g = grads[row_start[i] + (j - i - 1)];
        out.gradient[i] += g;
        out.gradient[j] -= g;
      }
    }
    for (auto& g : out.gradient) g *= 2.0 * c2 * inv_n;
  }
  return out;
}

EnergyReport periodic_energy(const TorusConfiguration& config, const RieszParams& params, bool with_gradient) {
  return PeriodicEnergy(config.lattice, config.n, params).evaluate(config, with_gradient);
}

std::vector<Vec> energy_gradient(const TorusConfiguration& config, const RieszParams& params) {
  return periodic_energy(config, params, true).gradient;
}

// ---------------------------------------------------------------------------

double gaussian_pair_sum(const TorusConfiguration& config, double t, const TorusHeatKernel& heat) {
  CompensatedSum sum;
  for (std::size_t j = 0; j < config.size(); ++j)
    for (std::size_t k = j + 1; k < config.size(); ++k) sum += heat.value(config.points[j] - config.points[k], t).value;
  return 2.0 * sum.value() / static_cast<double>(config.size());
}

double gaussian_p_energy(const TorusConfiguration& config, double t) {
  if (!(t > 0.0)) throw DomainError("gaussian_p_energy: t must be positive");
  const std::size_t count = config.size();
  if (count == 0) throw DomainError("empty configuration");
  const double self = self_image_sum(config.lattice, config.n, t);
  if (count == 1) return self;
  const TorusHeatKernel heat(config.lattice, config.n);
  const double ordered_pairs = static_cast<double>(count) * static_cast<double>(count - 1);
  // Phi_t + 1/V restores the full image sum for every ordered pair j != k.
  return gaussian_pair_sum(config, t, heat) + ordered_pairs / (static_cast<double>(count) * heat.volume()) + self;
}

SeriesValue gaussian_chain_difference(const TorusConfiguration& a, const TorusConfiguration& b,
                                      const RieszParams& params, double tol) {
  if (a.n != b.n || a.size() != b.size() || a.dim() != b.dim()) {
    throw DomainError("chain difference needs configurations of equal size on the same torus");
  }
  const TorusHeatKernel heat(a.lattice, a.n);
  std::vector<TorusHeatKernel::Bound> pa, pb;
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < a.size(); ++j) {
    for (std::size_t k = j + 1; k < a.size(); ++k) {
      pa.push_back(heat.bind(a.points[j] - a.points[k]));
      pb.push_back(heat.bind(b.points[j] - b.points[k]));
      nearest = std::min({nearest, pa.back().nearest_distance(), pb.back().nearest_distance()});
    }
  }
  const double alpha = params.alpha;
  const double inv_n = 2.0 / static_cast<double>(a.size());
  auto integrand = [&](double t) {
    CompensatedSum s;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      s += pa[i](t);
      s += -pb[i](t);
    }
    return inv_n * s.value() * std::pow(t, alpha - 1.0);
  };
  std::vector<double> cuts = {0.0, 1.0, heat.switch_time()};
  const double peak = nearest * nearest / (2.0 * params.s + 4.0);
  for (double f : {1.0 / 16, 1.0, 16.0}) cuts.push_back(peak * f);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [](double c) { return c > 1.0; }), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const double g = std::tgamma(alpha);
  const double piece = tol * g / static_cast<double>(cuts.size() + 1);
  CompensatedSum total;
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const QuadResult r = integrate(integrand, cuts[i], cuts[i + 1], piece);
    if (!r.converged) throw NonconvergenceError("chain difference: quadrature failed");
    total += r.value;
    err += r.error;
  }
  const QuadResult r = integrate_to_infinity(integrand, 1.0, piece);
  if (!r.converged) throw NonconvergenceError("chain difference: quadrature failed on the tail");
  total += r.value;
  err += r.error;
  return {total.value() / g, err / g};
}

// ---------------------------------------------------------------------------

std::string_view to_string(MinimizeStatus status) {
  switch (status) {
    case MinimizeStatus::converged: return "converged";
    case MinimizeStatus::max_iterations: return "max-iterations";
    case MinimizeStatus::line_search_failure: return "line-search-failure";
  }
  return "unknown";
}

MinimizeResult local_minimize(const TorusConfiguration& init, const RieszParams& params, const MinimizeOptions& opts) {
  const PeriodicEnergy energy(init.lattice, init.n, params);
  const double scale = cell_scale(init.lattice);
  MinimizeResult res{init, energy.evaluate(init, true), {}, 0, MinimizeStatus::max_iterations};
  res.trace.push_back(res.report.value);
  double step = -1.0;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    double gmax = 0.0;
    double g2 = 0.0;
    for (const auto& g : res.report.gradient) {
      gmax = std::max(gmax, g.lpNorm<Eigen::Infinity>());
      g2 += g.squaredNorm();
    }
    if (gmax <= opts.grad_tol) {
      res.status = MinimizeStatus::converged;
      break;
    }
    if (step < 0.0) step = 0.1 * scale / gmax;
    step = std::min(step, 0.25 * scale / gmax);
    bool accepted = false;
    for (int k = 0; k < 80 && !accepted; ++k, step *= 0.5) {
      std::vector<Vec> moved(res.config.points);
      for (std::size_t i = 0; i < moved.size(); ++i) moved[i] -= step * res.report.gradient[i];
      TorusConfiguration trial = make_configuration(init.lattice, init.n, std::move(moved));
      EnergyReport rep;
      try {
        rep = energy.evaluate(trial, true);
      } catch (const CoincidentPointsError&) {
        continue;
      }
      if (rep.value <= res.report.value - 1e-4 * step * g2) {
        res.config = std::move(trial);
        res.report = std::move(rep);
        res.trace.push_back(res.report.value);
        accepted = true;
        step *= 4.0;  // undo the loop's halving, then grow
      }
    }
    if (!accepted) {
      res.status = MinimizeStatus::line_search_failure;
      break;
    }
  }
  res.iterations = it;
  if (it == opts.max_iters) res.status = MinimizeStatus::max_iterations;
  return res;
}

RestartReport minimize_with_restarts(const Lattice& lattice, int n, const RieszParams& params, int restarts,
                                     const MinimizeOptions& opts) {
  if (restarts < 1) throw DomainError("at least one restart is required");
  std::size_t count = 1;
  for (int k = 0; k < lattice.dim(); ++k) count *= static_cast<std::size_t>(n);
  std::vector<std::optional<MinimizeResult>> runs(restarts);
  parallel_for(static_cast<std::size_t>(restarts), [&](std::size_t r) {
    std::seed_seq seq{static_cast<std::uint64_t>(opts.seed), static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(seq);
    TorusConfiguration init = random_configuration(lattice, n, count, rng);
    while (count > 1 && min_pair_distance(init) < 1e-3 * cell_scale(lattice)) {
      init = random_configuration(lattice, n, count, rng);
    }
    runs[r] = local_minimize(init, params, opts);
  });
  std::vector<double> finals;
  std::vector<MinimizeStatus> statuses;
  std::size_t best = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    finals.push_back(runs[r]->report.value);
    statuses.push_back(runs[r]->status);
    if (runs[r]->report.value < runs[best]->report.value) best = r;
  }
  return {std::move(finals), std::move(statuses), std::move(*runs[best])};
}

// ---------------------------------------------------------------------------

int CkProbeReport::total_violations() const {
  int total = 0;
  for (const auto& e : entries) total += e.violations;
  return total;
}

CkProbeReport ck_probe(const Lattice& lattice, int n, const std::vector<double>& t_list, int trials,
                       std::uint64_t seed) {
  if (trials < 0) throw DomainError("trials must be nonnegative");
  CkProbeReport report;
  report.dim = lattice.dim();
  report.n = n;
  if (trials == 0) return report;
  std::size_t count = 1;
  for (int k = 0; k < lattice.dim(); ++k) count *= static_cast<std::size_t>(n);
  const TorusConfiguration base = lattice_config(lattice, n);
  std::mt19937_64 rng(seed);
  std::vector<TorusConfiguration> samples;
  samples.reserve(trials);
  for (int i = 0; i < trials; ++i) samples.push_back(random_configuration(lattice, n, count, rng));
  for (double t : t_list) {
    CkProbeEntry e;
    e.t = t;
    e.trials = trials;
    e.baseline = gaussian_p_energy(base, t);
    std::vector<double> values(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) { values[i] = gaussian_p_energy(samples[i], t); });
    e.min_gap = std::numeric_limits<double>::infinity();
    for (double v : values) {
      const double gap = v - e.baseline;
      e.min_gap = std::min(e.min_gap, gap);
      if (gap < -1e-12 * std::fabs(e.baseline)) ++e.violations;
    }
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace rieszlat
