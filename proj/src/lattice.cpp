#include "rieszlat/lattice.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "rieszlat/error.hpp"

namespace rieszlat {

namespace {

constexpr std::array<std::uint32_t, 12> kGolayRows = {
    0x800c75, 0x8018ea, 0x8031d4, 0x8063a8, 0x80c750, 0x818ea0,
    0x831d40, 0x863a80, 0x8c7500, 0x98ea00, 0xb1d400, 0xe3a800};

double ball_volume(int d, double radius) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0) * std::pow(radius, d);
}

using IntRow = std::vector<long long>;

// Row-style Hermite reduction; returns the nonzero rows (a basis of the
// integer span of `rows`).
std::vector<IntRow> integer_row_basis(std::vector<IntRow> rows, int cols) {
  std::size_t pivot = 0;
  for (int col = 0; col < cols && pivot < rows.size(); ++col) {
    for (;;) {
      std::size_t best = rows.size();
      for (std::size_t r = pivot; r < rows.size(); ++r) {
        if (rows[r][col] != 0 &&
            (best == rows.size() || std::llabs(rows[r][col]) < std::llabs(rows[best][col]))) {
          best = r;
        }
      }
      if (best == rows.size()) break;
      std::swap(rows[pivot], rows[best]);
      bool done = true;
      for (std::size_t r = pivot + 1; r < rows.size(); ++r) {
        if (rows[r][col] == 0) continue;
        const long long q = rows[r][col] / rows[pivot][col];
        for (int k = 0; k < cols; ++k) rows[r][k] -= q * rows[pivot][k];
        if (rows[r][col] != 0) done = false;
      }
      if (done) break;
    }
    if (rows[pivot][col] == 0) continue;
    if (rows[pivot][col] < 0) {
      for (auto& v : rows[pivot]) v = -v;
    }
    for (std::size_t r = 0; r < pivot; ++r) {
      long long q = rows[r][col] / rows[pivot][col];
      if (rows[r][col] - q * rows[pivot][col] < 0) --q;
      for (int k = 0; k < cols; ++k) rows[r][k] -= q * rows[pivot][k];
    }
    ++pivot;
  }
  rows.resize(pivot);
  return rows;
}

Mat leech_basis() {
  // sqrt(8) * Leech = 2Y + Z u, with Y = {y : y mod 2 in Golay, sum y = 0 mod 4}
  // and u = (-3, 1^23).
  constexpr int d = 24;
  std::vector<IntRow> gens;
  for (std::uint32_t word : kGolayRows) {
    IntRow r(d, 0);
    for (int i = 0; i < d; ++i) r[i] = ((word >> i) & 1u) ? 2 : 0;
    gens.push_back(r);
  }
  for (int j = 1; j < d; ++j) {
    IntRow r(d, 0);
    r[j] = 4;
    r[0] = -4;
    gens.push_back(r);
  }
  {
    IntRow r(d, 0);
    r[0] = 8;
    gens.push_back(r);
  }
  {
    IntRow r(d, 1);
    r[0] = -3;
    gens.push_back(r);
  }
  const auto rows = integer_row_basis(gens, d);
  if (static_cast<int>(rows.size()) != d) throw Error("Leech construction lost rank");
  Mat basis(d, d);
  const double scale = 1.0 / std::sqrt(8.0);
  // Reverse so the enumeration visits the long Gram-Schmidt directions first.
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) basis(i, k) = scale * static_cast<double>(rows[d - 1 - i][k]);
  return basis;
}

struct Enumerator {
  int d;
  Mat mu;                   // mu(k, j) = R(k, j) / R(k, k), j > k
  std::vector<double> q;    // R(k, k)^2
  std::vector<double> center;
  double radius_sq;
  double slack;
  std::vector<long long> c;

  Enumerator(const Lattice& lattice, const Vec& center_coords, double r2)
      : d(lattice.dim()), mu(Mat::Zero(d, d)), q(d), center(d), radius_sq(r2), c(d, 0) {
    Eigen::LLT<Mat> llt(lattice.gram());
    const Mat R = llt.matrixU();
    for (int k = 0; k < d; ++k) {
      q[k] = R(k, k) * R(k, k);
      for (int j = k + 1; j < d; ++j) mu(k, j) = R(k, j) / R(k, k);
      center[k] = center_coords[k];
    }
    slack = 1e-10 * std::max(1.0, r2);
  }

  template <class Visit>
  void run(Visit&& visit) {
    recurse(d - 1, 0.0, visit);
  }

  template <class Visit>
  void recurse(int k, double partial, Visit& visit) {
    double ctr = center[k];
    for (int j = k + 1; j < d; ++j) ctr -= mu(k, j) * (static_cast<double>(c[j]) - center[j]);
    const double rem = radius_sq + slack - partial;
    if (rem < 0) return;
    const double half = std::sqrt(rem / q[k]);
    const long long lo = static_cast<long long>(std::ceil(ctr - half));
    const long long hi = static_cast<long long>(std::floor(ctr + half));
    for (long long v = lo; v <= hi; ++v) {
      const double diff = static_cast<double>(v) - ctr;
      const double next = partial + q[k] * diff * diff;
      if (next > radius_sq + slack) continue;
      c[k] = v;
      if (k == 0) {
        visit(c, next);
      } else {
        recurse(k - 1, next, visit);
      }
    }
    c[k] = 0;
  }
};

void check_budget(const Lattice& lattice, double radius_sq, double budget) {
  const double estimate = estimate_point_count(lattice, radius_sq);
  if (estimate > budget) throw BudgetExceededError(estimate, budget);
}

}  // namespace

Lattice::Lattice(Mat basis, std::string name) : basis_(std::move(basis)), name_(std::move(name)) {
  const int d = static_cast<int>(basis_.rows());
  if (d == 0 || basis_.cols() != d) throw DomainError("lattice basis must be a nonempty square matrix");
  // Scale-free test on the singular values; skewed but valid bases (the dual
  // of the Leech basis) have tiny Hadamard ratios, so |det| alone misleads.
  const double det = basis_.determinant();
  const Vec sv = Eigen::JacobiSVD<Mat>(basis_).singularValues();
  if (!std::isfinite(det) || !(sv[0] > 0.0) || sv[d - 1] <= 1e-12 * sv[0]) {
    throw SingularBasisError("lattice basis is singular (|det| = " + std::to_string(std::fabs(det)) + ")");
  }
  covolume_ = std::fabs(det);
  gram_ = basis_ * basis_.transpose();
  dual_basis_ = basis_.inverse().transpose();
  if (d <= 12) {
    for (long mask = 0; mask < (1L << d); ++mask) {
      Vec v = Vec::Zero(d);
      for (int i = 0; i < d; ++i) v += ((mask >> i) & 1 ? 0.5 : -0.5) * basis_.row(i).transpose();
      cell_radius_ = std::max(cell_radius_, v.norm());
    }
  } else {
    for (int i = 0; i < d; ++i) cell_radius_ += 0.5 * basis_.row(i).norm();
  }
}

Lattice Lattice::scaled(double factor) const { return Lattice(basis_ * factor); }

Count ShellSeries::cumulative(double m) const {
  Count total = 0;
  for (const auto& s : entries) {
    if (s.norm > m * (1 + 1e-12) + 1e-300) break;
    total += s.count;
  }
  return total;
}

ShellSeries ShellSeries::scaled(double norm_factor) const {
  ShellSeries out = *this;
  for (auto& s : out.entries) s.norm *= norm_factor;
  out.max_norm *= norm_factor;
  return out;
}

Lattice make_lattice(const Mat& basis) { return Lattice(basis); }

Lattice named_lattice(std::string_view name) {
  const std::string key(name);
  if (key.size() >= 2 && (key[0] == 'Z' || key[0] == 'z')) {
    int d = 0;
    try {
      std::size_t used = 0;
      d = std::stoi(key.substr(1), &used);
      if (used != key.size() - 1) d = 0;
    } catch (...) {
      d = 0;
    }
    if (d < 1 || d > 24) throw UnknownLatticeError("unknown lattice '" + key + "' (Zd needs 1 <= d <= 24)");
    return Lattice(Mat::Identity(d, d), "Z" + std::to_string(d));
  }
  if (key == "A2") {
    const double a = std::sqrt(2.0 / std::sqrt(3.0));
    Mat b(2, 2);
    b << a, 0.0, 0.5 * a, 0.5 * std::sqrt(3.0) * a;
    return Lattice(b, "A2");
  }
  if (key == "D4") {
    Mat b(4, 4);
    b << 1, -1, 0, 0,
         0, 1, -1, 0,
         0, 0, 1, -1,
         0, 0, 1, 1;
    return Lattice(b * std::pow(2.0, -0.25), "D4");
  }
  if (key == "E8") {
    Mat b = Mat::Zero(8, 8);
    b(0, 0) = 2.0;
    for (int i = 1; i < 7; ++i) {
      b(i, i - 1) = -1.0;
      b(i, i) = 1.0;
    }
    b.row(7).setConstant(0.5);
    return Lattice(b, "E8");
  }
  if (key == "Leech" || key == "leech" || key == "LEECH") {
    return Lattice(leech_basis(), "Leech");
  }
  throw UnknownLatticeError("unknown lattice '" + key + "' (expected Z1..Z24, A2, D4, E8, Leech)");
}

Lattice dual(const Lattice& lattice) {
  // Z^d, E8 and Leech are unimodular: the dual is the same point set.
  const std::string& n = lattice.name();
  const bool self_dual = n == "E8" || n == "Leech" || (!n.empty() && n[0] == 'Z');
  return Lattice(lattice.dual_basis(), self_dual ? n : std::string{});
}

double estimate_point_count(const Lattice& lattice, double radius_sq) {
  return ball_volume(lattice.dim(), std::sqrt(std::max(radius_sq, 0.0))) / lattice.covolume() + 1.0;
}

ShellSeries enumerate_shells(const Lattice& lattice, double max_norm, const EnumerationOptions& opts) {
  if (!(max_norm >= 0.0)) throw DomainError("max_norm must be nonnegative");
  check_budget(lattice, max_norm, opts.budget);
  const int d = lattice.dim();
  std::vector<double> norms;
  Enumerator e(lattice, Vec::Zero(d), max_norm);
  e.run([&](const std::vector<long long>& c, double) {
    // Recompute the norm from the Gram matrix for stable grouping.
    long double acc = 0.0L;
    const Mat& g = lattice.gram();
    for (int i = 0; i < d; ++i) {
      if (c[i] == 0) continue;
      long double row = 0.0L;
      for (int j = 0; j < d; ++j) row += static_cast<long double>(g(i, j)) * c[j];
      acc += row * c[i];
    }
    const double norm = static_cast<double>(acc);
    if (norm <= max_norm * (1.0 + 1e-12) + 1e-12) norms.push_back(std::max(norm, 0.0));
  });
  std::sort(norms.begin(), norms.end());
  ShellSeries out;
  out.dim = d;
  out.max_norm = max_norm;
  for (double n : norms) {
    if (!out.entries.empty()) {
      Shell& last = out.entries.back();
      if (n - last.norm <= opts.norm_tolerance * std::max(1.0, last.norm)) {
        last.count += 1;
        continue;
      }
    }
    out.entries.push_back({n, 1});
  }
  // Snap the origin shell to an exact zero.
  if (!out.entries.empty() && out.entries.front().norm < 1e-12) out.entries.front().norm = 0.0;
  return out;
}

void for_each_vector(const Lattice& lattice, const Vec& center, double radius_sq, const VectorVisitor& visit,
                     const EnumerationOptions& opts) {
  check_budget(lattice, radius_sq, opts.budget);
  const int d = lattice.dim();
  Enumerator e(lattice, lattice.coords(center), radius_sq);
  std::vector<double> v(d);
  const Mat& b = lattice.basis();
  e.run([&](const std::vector<long long>& c, double) {
    double dist = 0.0;
    for (int k = 0; k < d; ++k) {
      double acc = 0.0;
      for (int i = 0; i < d; ++i) acc += static_cast<double>(c[i]) * b(i, k);
      v[k] = acc;
      const double diff = acc - center[k];
      dist += diff * diff;
    }
    if (dist <= radius_sq * (1.0 + 1e-12) + 1e-12) visit(c, v);
  });
}

VectorList enumerate_vectors(const Lattice& lattice, const Vec& center, double radius_sq,
                             const EnumerationOptions& opts) {
  VectorList out(lattice.dim());
  for_each_vector(
      lattice, center, radius_sq, [&](std::span<const long long>, std::span<const double> v) { out.push_back(v); },
      opts);
  return out;
}

Vec reduce_to_cell(const Lattice& lattice, const Vec& x, int n) {
  if (n < 1) throw DomainError("torus multiple n must be >= 1");
  Vec c = lattice.coords(x) / static_cast<double>(n);
  for (int i = 0; i < c.size(); ++i) {
    double f = c[i] - std::floor(c[i]);
    if (f >= 1.0 - 1e-13 || f < 1e-13) f = 0.0;
    c[i] = f;
  }
  return lattice.point(c) * static_cast<double>(n);
}

Vec reduce_to_centered_cell(const Lattice& lattice, const Vec& x, int n) {
  if (n < 1) throw DomainError("torus multiple n must be >= 1");
  Vec c = lattice.coords(x) / static_cast<double>(n);
  for (int i = 0; i < c.size(); ++i) c[i] -= std::floor(c[i] + 0.5);
  return lattice.point(c) * static_cast<double>(n);
}

Lattice read_lattice(std::istream& in) {
  int d = 0;
  if (!(in >> d) || d < 1 || d > 64) throw DomainError("lattice file: first token must be the dimension");
  Mat b(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (!(in >> b(i, j))) throw DomainError("lattice file: expected " + std::to_string(d * d) + " basis entries");
    }
  }
  return Lattice(b);
}

void write_lattice(std::ostream& out, const Lattice& lattice) {
  const int d = lattice.dim();
  out << d << '\n';
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (j) out << ' ';
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", lattice.basis()(i, j));
      out << buf;
    }
    out << '\n';
  }
}

std::span<const std::uint32_t, 12> golay_generator() { return std::span<const std::uint32_t, 12>(kGolayRows); }

std::string to_string(const Count& c) { return c.str(); }

}  // namespace rieszlat
