#include "rieszlat/green.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "rieszlat/error.hpp"
#include "rieszlat/numeric.hpp"

namespace rieszlat {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTailEps = 1e-17;
// Heat-kernel truncation: exp(-45) ~ 3e-20 at the switch time.
constexpr double kHeatCut = 45.0;

Lattice torus_lattice(const Lattice& base, int n) {
  if (n < 1) throw DomainError("torus multiple n must be >= 1");
  return n == 1 ? base : base.scaled(static_cast<double>(n));
}

// Unimodular named lattices are their own duals; reuse the reduced basis.
Lattice dual_points(const Lattice& base) {
  const std::string& name = base.name();
  if (name == "E8" || name == "Leech" || (!name.empty() && name[0] == 'Z')) return base;
  return dual(base);
}

Lattice torus_dual(const Lattice& base, int n) {
  Lattice d = dual_points(base);
  return n == 1 ? d : d.scaled(1.0 / static_cast<double>(n));
}

// Smallest q on a geometric grid where |term(q)| times a generous point count
// drops below eps; terms are decreasing in q.
double find_cutoff(const std::function<double(double)>& term, const Lattice& lattice, double q0, double eps) {
  double q = q0;
  for (int i = 0; i < 4000; ++i) {
    if (std::fabs(term(q)) * estimate_point_count(lattice, 2.0 * q) <= eps) return q;
    q *= 1.05;
  }
  throw NonconvergenceError("lattice sum cutoff search did not terminate");
}

// First nonzero coefficient positive: one representative of each pair +-w.
bool positive_half(std::span<const long long> c) {
  for (long long v : c) {
    if (v != 0) return v > 0;
  }
  return false;
}

double dot(std::span<const double> a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[static_cast<Eigen::Index>(i)];
  return acc;
}

double dist_sq(std::span<const double> v, const Vec& y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double diff = y[static_cast<Eigen::Index>(i)] - v[i];
    acc += diff * diff;
  }
  return acc;
}

double norm_sq(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

double length_scale(double volume, int d) { return std::pow(volume, 1.0 / d); }

VectorList ball_list(const Lattice& lattice, double radius_sq, double budget) {
  EnumerationOptions opts;
  opts.budget = budget;
  return enumerate_vectors(lattice, Vec::Zero(lattice.dim()), radius_sq, opts);
}

VectorList half_ball_list(const Lattice& lattice, double radius_sq, double budget) {
  EnumerationOptions opts;
  opts.budget = 2.0 * budget;
  VectorList out(lattice.dim());
  for_each_vector(
      lattice, Vec::Zero(lattice.dim()), radius_sq,
      [&](std::span<const long long> c, std::span<const double> v) {
        if (positive_half(c)) out.push_back(v);
      },
      opts);
  return out;
}

}  // namespace

std::string_view to_string(GreenRoute route) {
  switch (route) {
    case GreenRoute::fourier: return "fourier";
    case GreenRoute::mellin: return "mellin";
    case GreenRoute::ewald: return "ewald";
  }
  return "unknown";
}

double distance_to_lattice(const Lattice& torus, const Vec& x) {
  const Vec y = reduce_to_centered_cell(torus, x, 1);
  const double r2 = y.squaredNorm() * (1.0 + 1e-9) + 1e-300;
  double best = y.squaredNorm();
  for_each_vector(torus, y, r2, [&](std::span<const long long>, std::span<const double> v) {
    best = std::min(best, dist_sq(v, y));
  });
  return std::sqrt(best);
}

// ---------------------------------------------------------------------------
// Torus heat kernel

TorusHeatKernel::TorusHeatKernel(const Lattice& base, int n, double list_budget)
    : torus_(torus_lattice(base, n)),
      dual_(torus_dual(base, n)),
      d_(base.dim()),
      volume_(torus_.covolume()),
      t_switch_(std::pow(volume_, 2.0 / d_) / (4.0 * kPi)),
      direct_radius_sq_(4.0 * t_switch_ * kHeatCut),
      dual_radius_sq_(kHeatCut / (4.0 * kPi * kPi * t_switch_)),
      list_budget_(list_budget) {}

const VectorList& TorusHeatKernel::direct_list() const {
  std::call_once(direct_once_, [&] {
    const double r = std::sqrt(direct_radius_sq_) + torus_.centered_cell_radius();
    direct_ = ball_list(torus_, r * r, list_budget_);
  });
  return direct_;
}

const VectorList& TorusHeatKernel::dual_list() const {
  std::call_once(dual_once_, [&] { dual_half_ = half_ball_list(dual_, dual_radius_sq_, list_budget_); });
  return dual_half_;
}

double TorusHeatKernel::direct(const Vec& x, double t) const {
  if (!(t > 0.0)) throw DomainError("heat kernel time must be positive");
  const Vec y = reduce_to_centered_cell(torus_, x, 1);
  const VectorList& list = direct_list();
  const double pre = std::pow(4.0 * kPi * t, -0.5 * d_);
  CompensatedSum sum;
  for (std::size_t i = 0; i < list.size(); ++i) sum += pre * std::exp(-dist_sq(list[i], y) / (4.0 * t));
  return sum.value() - 1.0 / volume_;
}

double TorusHeatKernel::dual(const Vec& x, double t) const {
  if (!(t > 0.0)) throw DomainError("heat kernel time must be positive");
  const Vec y = reduce_to_centered_cell(torus_, x, 1);
  const VectorList& list = dual_list();
  CompensatedSum sum;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto w = list[i];
    sum += 2.0 * std::cos(2.0 * kPi * dot(w, y)) * std::exp(-4.0 * kPi * kPi * norm_sq(w) * t);
  }
  return sum.value() / volume_;
}

SeriesValue TorusHeatKernel::value(const Vec& x, double t) const {
  SeriesValue out;
  if (t <= t_switch_) {
    out.value = direct(x, t);
    out.error = std::pow(4.0 * kPi * t, -0.5 * d_) * std::exp(-direct_radius_sq_ / (4.0 * t)) *
                estimate_point_count(torus_, 4.0 * direct_radius_sq_);
  } else {
    out.value = dual(x, t);
    out.error = 2.0 / volume_ * std::exp(-4.0 * kPi * kPi * dual_radius_sq_ * t) *
                estimate_point_count(dual_, 4.0 * dual_radius_sq_);
  }
  return out;
}

TorusHeatKernel::Bound TorusHeatKernel::bind(const Vec& x) const {
  Bound b;
  b.d_ = d_;
  b.t_switch_ = t_switch_;
  b.inv_volume_ = 1.0 / volume_;
  const Vec y = reduce_to_centered_cell(torus_, x, 1);
  const VectorList& direct = direct_list();
  b.r2_.reserve(direct.size());
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < direct.size(); ++i) {
    const double q = dist_sq(direct[i], y);
    nearest = std::min(nearest, q);
    b.r2_.push_back(q);
  }
  std::sort(b.r2_.begin(), b.r2_.end());
  b.nearest_ = std::sqrt(nearest);
  const VectorList& dual = dual_list();
  for (std::size_t i = 0; i < dual.size(); ++i) {
    b.w2_.push_back(norm_sq(dual[i]));
    b.cosines_.push_back(2.0 * std::cos(2.0 * kPi * dot(dual[i], y)));
  }
  return b;
}

double TorusHeatKernel::Bound::operator()(double t) const {
  if (!(t > 0.0)) throw DomainError("heat kernel time must be positive");
  CompensatedSum sum;
  if (t <= t_switch_) {
    const double pre = std::pow(4.0 * kPi * t, -0.5 * d_);
    for (double q : r2_) {
      const double e = std::exp(-q / (4.0 * t));
      if (e == 0.0) break;  // r2_ is sorted
      sum += pre * e;
    }
    return sum.value() - inv_volume_;
  }
  for (std::size_t i = 0; i < w2_.size(); ++i) sum += cosines_[i] * std::exp(-4.0 * kPi * kPi * w2_[i] * t);
  return sum.value() * inv_volume_;
}

// ---------------------------------------------------------------------------
// Fourier route

GreenEvaluation green_fourier(const Lattice& base, int n, const RieszParams& params, const Vec& x, double tol) {
  if (params.d != base.dim()) throw DomainError("dimension mismatch between lattice and kernel");
  const Lattice torus = torus_lattice(base, n);
  const Lattice dual_torus = torus_dual(base, n);
  const double volume = torus.covolume();
  const double delta = distance_to_lattice(torus, x);
  if (delta < 1e-8 * length_scale(volume, params.d)) {
    throw CoincidentPointsError("green_fourier: x lies on the lattice");
  }
  const Vec y = reduce_to_centered_cell(torus, x, 1);

  // Calibrated so that the extrapolation reaches ~1e-10 for 1/3 <= alpha <= 1 in d <= 3.
  const double factor = params.d <= 2 ? 100.0 : 60.0;
  const int levels = params.d <= 2 ? (params.log ? 5 : 6) : 4;
  const double tau0 = delta * delta / factor;
  const double tau_min = tau0 / std::pow(2.0, levels - 1);
  const double w2_max = 40.0 / (4.0 * kPi * kPi * tau_min);

  std::vector<CompensatedSum> sums(levels);
  long long terms = 0;
  EnumerationOptions opts;
  opts.budget = 1e8;
  for_each_vector(
      dual_torus, Vec::Zero(params.d), w2_max,
      [&](std::span<const long long> c, std::span<const double> w) {
        if (!positive_half(c)) return;
        const double q = norm_sq(w);
        const double coef =
            2.0 * std::cos(2.0 * kPi * dot(w, y)) * std::pow(4.0 * kPi * kPi * q, -params.alpha) / volume;
        // exp(-4 pi^2 q tau_j) with tau_j = tau_min 2^(levels-1-j): repeated squaring.
        double e = std::exp(-4.0 * kPi * kPi * q * tau_min);
        for (int j = levels - 1; j >= 0; --j) {
          sums[j] += coef * e;
          e *= e;
        }
        ++terms;
      },
      opts);

  std::vector<double> row(levels);
  for (int j = 0; j < levels; ++j) row[j] = sums[j].value();
  std::vector<double> prev_row = row;
  for (int k = 1; k < levels; ++k) {
    prev_row = row;
    const double f = std::pow(2.0, k);
    std::vector<double> next(row.size() - 1);
    for (std::size_t i = 0; i + 1 < row.size(); ++i) next[i] = (f * row[i + 1] - row[i]) / (f - 1.0);
    row = std::move(next);
  }
  GreenEvaluation out;
  out.route = GreenRoute::fourier;
  out.value = row[0];
  out.abs_error_estimate = std::fabs(row[0] - prev_row.back());
  out.terms_used = terms;
  if (!(out.abs_error_estimate <= tol)) {
    throw NonconvergenceError("green_fourier: extrapolation residual " + std::to_string(out.abs_error_estimate) +
                              " exceeds tolerance " + std::to_string(tol));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mellin route

GreenEvaluation green_mellin(const Lattice& base, int n, const RieszParams& params, const Vec& x, double tol) {
  if (params.d != base.dim()) throw DomainError("dimension mismatch between lattice and kernel");
  const TorusHeatKernel heat(base, n);
  const auto bound = heat.bind(x);
  const double volume = heat.volume();
  const double delta = bound.nearest_distance();
  if (delta < 1e-8 * length_scale(volume, params.d)) {
    throw CoincidentPointsError("green_mellin: x lies on the lattice");
  }
  const double alpha = params.alpha;
  const double gamma_alpha = std::tgamma(alpha);

  // Breakpoints around the peak of Psi_t(delta) t^(alpha - 1) and at the route switch.
  const double peak = delta * delta / (2.0 * params.s + 4.0);
  std::vector<double> cuts = {0.0, 1.0, heat.switch_time()};
  for (double f : {1.0 / 64, 1.0 / 8, 1.0, 8.0, 64.0}) cuts.push_back(peak * f);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [](double c) { return c < 0.0 || c > 1.0; }), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double piece_tol = tol * gamma_alpha / static_cast<double>(cuts.size() + 1);
  auto inner = [&](double t) { return bound.image_sum(t) * std::pow(t, alpha - 1.0); };
  auto outer = [&](double t) { return bound(t) * std::pow(t, alpha - 1.0); };

  CompensatedSum total;
  double error = 0.0;
  long long evals = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const QuadResult r = integrate(inner, cuts[i], cuts[i + 1], piece_tol);
    if (!r.converged) throw NonconvergenceError("green_mellin: quadrature failed on the short-time range");
    total += r.value;
    error += r.error;
    evals += r.evaluations;
  }
  // -(1/V) int_0^1 t^(alpha-1) dt
  total += -1.0 / (volume * alpha);
  const QuadResult r = integrate_to_infinity(outer, 1.0, piece_tol);
  if (!r.converged) throw NonconvergenceError("green_mellin: quadrature failed on the long-time range");
  total += r.value;
  error += r.error;
  evals += r.evaluations;

  GreenEvaluation out;
  out.route = GreenRoute::mellin;
  out.value = total.value() / gamma_alpha;
  out.abs_error_estimate = error / gamma_alpha;
  out.terms_used = evals * static_cast<long long>(bound.terms());
  return out;
}

// ---------------------------------------------------------------------------
// Ewald route

EwaldGreen::EwaldGreen(const Lattice& base, int n, const RieszParams& params, double split_time,
                       double list_budget)
    : torus_(torus_lattice(base, n)),
      dual_(torus_dual(base, n)),
      params_(params),
      d_(base.dim()),
      volume_(torus_.covolume()),
      split_(split_time > 0.0 ? split_time : std::pow(volume_, 2.0 / d_) / (4.0 * kPi)),
      a_coef_(std::pow(kPi, -0.5 * d_) * std::pow(4.0, -params.alpha) / std::tgamma(params.alpha)),
      list_budget_(list_budget) {
  if (params.d != d_) throw DomainError("dimension mismatch between lattice and kernel");
  direct_cut_ = find_cutoff([this](double q) { return direct_term(q); }, torus_, split_, kTailEps);
  dual_cut_ = find_cutoff([this](double q) { return dual_term(q); }, dual_, 1.0 / (4.0 * kPi * kPi * split_),
                          kTailEps);
}

double EwaldGreen::direct_term(double q) const {
  const double u = q / (4.0 * split_);
  if (params_.log) return a_coef_ * exponential_integral_e1(u);
  return a_coef_ * std::pow(q, -0.5 * params_.s) * upper_incomplete_gamma(0.5 * params_.s, u);
}

double EwaldGreen::direct_term_derivative(double q) const {
  const double u = q / (4.0 * split_);
  if (params_.log) return -a_coef_ * std::exp(-u) / q;
  const double a = 0.5 * params_.s;
  return a_coef_ * (-a * std::pow(q, -a - 1.0) * upper_incomplete_gamma(a, u) -
                    std::pow(q, -a) * std::exp((a - 1.0) * std::log(u) - u) / (4.0 * split_));
}

double EwaldGreen::dual_term(double q) const {
  const double k2 = 4.0 * kPi * kPi * q;
  return std::pow(k2, -params_.alpha) * upper_incomplete_gamma(params_.alpha, k2 * split_) /
         (volume_ * std::tgamma(params_.alpha));
}

double EwaldGreen::constant_term() const {
  return -std::pow(split_, params_.alpha) / (params_.alpha * volume_ * std::tgamma(params_.alpha));
}

double EwaldGreen::regularized_origin_term() const {
  if (params_.log) return a_coef_ * (-std::numbers::egamma + std::log(4.0 * split_));
  return -a_coef_ * std::pow(4.0 * split_, -0.5 * params_.s) * (2.0 / params_.s);
}

double EwaldGreen::kappa_mult() const {
  if (params_.log) throw DomainError("the Ewald function F is not defined for the log kernel");
  return 1.0 / params_.c;
}

double EwaldGreen::kappa_add() const {
  if (params_.log) throw DomainError("the Ewald function F is not defined for the log kernel");
  return -std::pow(4.0, -params_.alpha) / (volume_ * std::tgamma(params_.alpha + 1.0));
}

const VectorList& EwaldGreen::direct_list() const {
  std::call_once(direct_once_, [&] {
    const double r = std::sqrt(direct_cut_) + torus_.centered_cell_radius();
    direct_ = ball_list(torus_, r * r, list_budget_);
  });
  return direct_;
}

const VectorList& EwaldGreen::dual_list() const {
  std::call_once(dual_once_, [&] {
    dual_half_ = half_ball_list(dual_, dual_cut_, list_budget_);
    dual_coef_.resize(dual_half_.size());
    for (std::size_t i = 0; i < dual_half_.size(); ++i) dual_coef_[i] = dual_term(norm_sq(dual_half_[i]));
  });
  return dual_half_;
}

EwaldParts EwaldGreen::parts(const Vec& x) const {
  const Vec y = reduce_to_centered_cell(torus_, x, 1);
  const double tiny = 1e-20 * std::pow(volume_, 2.0 / d_);
  const VectorList& direct = direct_list();
  CompensatedSum ds;
  for (std::size_t i = 0; i < direct.size(); ++i) {
    const double q = dist_sq(direct[i], y);
    if (q > direct_cut_) continue;
    if (q <= tiny) throw CoincidentPointsError("Green function evaluated on the lattice");
    ds += direct_term(q);
  }
  const VectorList& dual = dual_list();
  CompensatedSum fs;
  for (std::size_t i = 0; i < dual.size(); ++i) fs += 2.0 * dual_coef_[i] * std::cos(2.0 * kPi * dot(dual[i], y));
  return {ds.value(), constant_term(), fs.value()};
}

GreenEvaluation EwaldGreen::value(const Vec& x) const {
  const EwaldParts p = parts(x);
  GreenEvaluation out;
  out.route = GreenRoute::ewald;
  out.value = p.total();
  out.abs_error_estimate =
      2.0 * kTailEps + 4e-16 * (std::fabs(p.direct) + std::fabs(p.constant) + std::fabs(p.dual) + 1.0);
  out.terms_used = static_cast<long long>(direct_list().size() + dual_list().size());
  return out;
}

double EwaldGreen::value_and_gradient(const Vec& x, Vec& grad) const {
  const Vec y = reduce_to_centered_cell(torus_, x, 1);
  const double tiny = 1e-20 * std::pow(volume_, 2.0 / d_);
  grad = Vec::Zero(d_);
  const VectorList& direct = direct_list();
  CompensatedSum val;
  for (std::size_t i = 0; i < direct.size(); ++i) {
    const auto v = direct[i];
    const double q = dist_sq(v, y);
    if (q > direct_cut_) continue;
    if (q <= tiny) throw CoincidentPointsError("Green function evaluated on the lattice");
    val += direct_term(q);
    const double fp = 2.0 * direct_term_derivative(q);
    for (int k = 0; k < d_; ++k) grad[k] += fp * (y[k] - v[k]);
  }
  val += constant_term();
  const VectorList& dual = dual_list();
  for (std::size_t i = 0; i < dual.size(); ++i) {
    const auto w = dual[i];
    const double phase = 2.0 * kPi * dot(w, y);
    val += 2.0 * dual_coef_[i] * std::cos(phase);
    const double sc = -2.0 * dual_coef_[i] * 2.0 * kPi * std::sin(phase);
    for (int k = 0; k < d_; ++k) grad[k] += sc * w[k];
  }
  return val.value();
}

Vec EwaldGreen::gradient(const Vec& x) const {
  Vec g;
  value_and_gradient(x, g);
  return g;
}

GreenEvaluation green_ewald(const Lattice& base, int n, const RieszParams& params, const Vec& x) {
  return EwaldGreen(base, n, params).value(x);
}

// ---------------------------------------------------------------------------
// Ewald function F and Epstein zeta

namespace {

struct FTerms {
  int d;
  double s;
  double volume;
  double gamma_half_s;

  double direct(double q) const { return std::pow(q, -0.5 * s) * upper_incomplete_gamma(0.5 * s, q) / gamma_half_s; }
  double dual(double q) const {
    const double p2 = kPi * kPi * q;
    return std::pow(kPi, 0.5 * d) * std::pow(p2, 0.5 * (s - d)) * upper_incomplete_gamma(0.5 * (d - s), p2) /
           (gamma_half_s * volume);
  }
  // Continuation constant 2 pi^(d/2) / (V Gamma(s/2) (d - s)).
  double pole() const { return 2.0 * std::pow(kPi, 0.5 * d) / (volume * gamma_half_s * (d - s)); }
};

FTerms f_terms(const Lattice& lattice, double s) {
  const int d = lattice.dim();
  if (!(s > 0.0)) throw DomainError("Ewald function needs s > 0");
  if (s == static_cast<double>(d)) throw DomainError("Epstein zeta has a pole at s = d");
  if (0.5 * (d - s) < -50.0) throw DomainError("s too large for the continuation formula");
  return {d, s, lattice.covolume(), std::tgamma(0.5 * s)};
}

}  // namespace

SeriesValue ewald_F(const Lattice& lattice, double s, const Vec& x) {
  const FTerms f = f_terms(lattice, s);
  const Lattice dl = dual_points(lattice);
  const double dcut = find_cutoff([&](double q) { return f.direct(q); }, lattice, 1.0, kTailEps);
  const double wcut = find_cutoff([&](double q) { return f.dual(q); }, dl, 1.0 / (kPi * kPi), kTailEps);
  const Vec y = reduce_to_centered_cell(lattice, x, 1);
  const double tiny = 1e-20 * std::pow(f.volume, 2.0 / f.d);
  CompensatedSum sum;
  double magnitude = 0.0;
  for_each_vector(lattice, -y, dcut, [&](std::span<const long long>, std::span<const double> v) {
    double q = 0.0;
    for (int k = 0; k < f.d; ++k) q += (y[k] + v[k]) * (y[k] + v[k]);
    if (q <= tiny) throw CoincidentPointsError("ewald_F: x lies on the lattice");
    const double t = f.direct(q);
    sum += t;
    magnitude += std::fabs(t);
  });
  for_each_vector(dl, Vec::Zero(f.d), wcut, [&](std::span<const long long> c, std::span<const double> w) {
    if (!positive_half(c)) return;
    const double t = 2.0 * std::cos(2.0 * kPi * dot(w, y)) * f.dual(norm_sq(w));
    sum += t;
    magnitude += std::fabs(t);
  });
  return {sum.value(), 2.0 * kTailEps + 4e-16 * magnitude};
}

SeriesValue epstein_zeta_continued(const Lattice& lattice, double s, const Vec& x) {
  const FTerms f = f_terms(lattice, s);
  SeriesValue v = ewald_F(lattice, s, x);
  v.value -= f.pole();
  return v;
}

SeriesValue epstein_zeta_origin_excluded(const Lattice& lattice, double s) {
  const FTerms f = f_terms(lattice, s);
  const Lattice dl = dual_points(lattice);
  const double dcut = find_cutoff([&](double q) { return f.direct(q); }, lattice, 1.0, kTailEps);
  const double wcut = find_cutoff([&](double q) { return f.dual(q); }, dl, 1.0 / (kPi * kPi), kTailEps);
  const ShellSeries direct = lattice_shells(lattice, dcut);
  const ShellSeries dual_shells = lattice_shells(dl, wcut);
  CompensatedSum sum;
  double magnitude = 0.0;
  for (const auto& sh : direct.entries) {
    if (sh.norm == 0.0) continue;
    const double t = static_cast<double>(sh.count) * f.direct(sh.norm);
    sum += t;
    magnitude += std::fabs(t);
  }
  for (const auto& sh : dual_shells.entries) {
    if (sh.norm == 0.0) continue;
    const double t = static_cast<double>(sh.count) * f.dual(sh.norm);
    sum += t;
    magnitude += std::fabs(t);
  }
  // v = 0: lim (|x|^-s Gamma(s/2, |x|^2) - |x|^-s) / Gamma(s/2) = -2 / (s Gamma(s/2)).
  sum += -2.0 / (s * f.gamma_half_s);
  sum += -f.pole();
  return {sum.value(), 2.0 * kTailEps + 4e-16 * magnitude};
}

SeriesValue epstein_zeta_direct(const Lattice& lattice, double s, const Vec& x, double radius, bool exclude_origin) {
  const int d = lattice.dim();
  if (!(s > d)) throw DomainError("direct Epstein summation needs s > d");
  if (!(radius > 0.0)) throw DomainError("summation radius must be positive");
  const double volume = lattice.covolume();
  const double sphere = 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
  const double tiny = 1e-20 * std::pow(volume, 2.0 / d);
  // Inside the ball q^(-s/2) is replaced by q^(-s/2) - P(q), P its Taylor
  // polynomial of degree kOrder at q = R^2; the piecewise function P / q^(-s/2)
  // is then C^kOrder across the sphere and its lattice sum is close to its integral.
  constexpr int kOrder = 4;
  struct Cut {
    double Q;
    double c[kOrder + 1];
    double tail;
  };
  auto make_cut = [&](double R) {
    Cut cut{R * R, {}, 0.0};
    double binom = 1.0;
    double integral = std::pow(R, d - s) / (s - d);
    for (int j = 0; j <= kOrder; ++j) {
      if (j > 0) binom *= (-0.5 * s - (j - 1)) / j;
      cut.c[j] = binom * std::pow(cut.Q, -0.5 * s - j);
      // int_0^R (r^2 - R^2)^j r^(d-1) dr
      const double moment = (j % 2 ? -1.0 : 1.0) * std::pow(R, 2 * j + d) * std::tgamma(j + 1.0) *
                            std::tgamma(0.5 * d) / (2.0 * std::tgamma(j + 1.0 + 0.5 * d));
      integral += cut.c[j] * moment;
    }
    cut.tail = sphere * integral / volume;
    return cut;
  };
  auto poly = [](const Cut& cut, double q) {
    const double u = q - cut.Q;
    double p = 0.0;
    for (int j = kOrder; j >= 0; --j) p = p * u + cut.c[j];
    return p;
  };
  // Two radii from one pass: the difference estimates the truncation error.
  const Cut cuts[2] = {make_cut(radius), make_cut(0.7 * radius)};
  CompensatedSum sums[2];
  const Vec center = -x;
  for_each_vector(lattice, center, radius * radius, [&](std::span<const long long>, std::span<const double> v) {
    const double q = dist_sq(v, center);
    const bool origin = exclude_origin && norm_sq(v) == 0.0;
    if (!origin && q <= tiny) throw CoincidentPointsError("epstein_zeta: x lies on the lattice");
    for (int k = 0; k < 2; ++k) {
      if (q > cuts[k].Q) continue;
      if (!origin) sums[k] += std::pow(q, -0.5 * s);
      sums[k] += -poly(cuts[k], q);
    }
  });
  double value[2];
  for (int k = 0; k < 2; ++k) value[k] = sums[k].value() + cuts[k].tail;
  return {value[0], std::fabs(value[0] - value[1]) + 1e-15 * std::fabs(value[0])};
}

SeriesValue epstein_zeta(const Lattice& lattice, double s, const Vec& x) {
  const int d = lattice.dim();
  if (s == static_cast<double>(d)) throw DomainError("Epstein zeta has a pole at s = d");
  if (s > d) {
    const double scale = std::pow(lattice.covolume(), 1.0 / d);
    const double radius = scale * (d <= 2 ? 200.0 : d == 3 ? 60.0 : 12.0);
    return epstein_zeta_direct(lattice, s, x, radius);
  }
  return epstein_zeta_continued(lattice, s, x);
}

// ---------------------------------------------------------------------------
// Madelung constants

GreenEvaluation madelung(const Lattice& base, int n, const RieszParams& params) {
  const EwaldGreen ewald(base, n, params);
  const double n2 = static_cast<double>(n) * n;
  const ShellSeries direct = lattice_shells(base, ewald.direct_cutoff() / n2).scaled(n2);
  const ShellSeries dual_shells = lattice_shells(dual_points(base), ewald.dual_cutoff() * n2).scaled(1.0 / n2);
  CompensatedSum sum;
  double magnitude = 0.0;
  long long terms = 0;
  for (const auto& sh : direct.entries) {
    if (sh.norm == 0.0) continue;
    const double t = static_cast<double>(sh.count) * ewald.direct_term(sh.norm);
    sum += t;
    magnitude += std::fabs(t);
    ++terms;
  }
  for (const auto& sh : dual_shells.entries) {
    if (sh.norm == 0.0) continue;
    const double t = static_cast<double>(sh.count) * ewald.dual_term(sh.norm);
    sum += t;
    magnitude += std::fabs(t);
    ++terms;
  }
  const double reg = ewald.regularized_origin_term();
  const double cst = ewald.constant_term();
  sum += reg;
  sum += cst;
  magnitude += std::fabs(reg) + std::fabs(cst);
  GreenEvaluation out;
  out.route = GreenRoute::ewald;
  out.value = sum.value();
  out.abs_error_estimate = 2.0 * kTailEps + 4e-16 * magnitude;
  out.terms_used = terms;
  return out;
}

GreenEvaluation madelung_scaled(const Lattice& base, int n, const RieszParams& params) {
  GreenEvaluation m = madelung(base, n, params);
  m.value *= params.c;
  m.abs_error_estimate *= params.c;
  return m;
}

}  // namespace rieszlat
