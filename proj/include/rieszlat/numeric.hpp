#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace rieszlat {

/// Neumaier (improved Kahan) compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Globally adaptive Gauss-Kronrod (7/15) on [a, b] with an absolute tolerance.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol, int max_intervals = 4000);

/// Same on [a, inf) through t = a + u / (1 - u).
QuadResult integrate_to_infinity(const std::function<double(double)>& f, double a,
                                 double abs_tol, int max_intervals = 4000);

/// Like integrate() but throws NonconvergenceError when the tolerance is not met.
double integrate_or_throw(const std::function<double(double)>& f, double a, double b,
                          double abs_tol, double* error = nullptr);

/// Gauss-Legendre rule with n nodes on [-1, 1]; cached per n.
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussLegendreRule& gauss_legendre(int n);

/// Worker count used by the parallel helpers (>= 1). Defaults to 1.
void set_thread_count(int threads);
int thread_count() noexcept;

/// Runs body(i) for i in [0, count) on up to thread_count() threads. Each index
/// is processed exactly once; callers store results by index so the outcome
/// does not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace rieszlat
