#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

namespace rieszlat {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Exact vector count of one shell. Leech-lattice theta coefficients
/// overflow 64 bits past norm ~74.
using Count = boost::multiprecision::uint128_t;

inline constexpr double kDefaultEnumerationBudget = 1e8;

/// Full-rank lattice in R^d, generated by the rows of `basis`.
class Lattice {
 public:
  /// Throws SingularBasisError when sigma_min <= 1e-12 * sigma_max.
  explicit Lattice(Mat basis, std::string name = {});

  int dim() const noexcept { return static_cast<int>(basis_.rows()); }
  const Mat& basis() const noexcept { return basis_; }
  const Mat& gram() const noexcept { return gram_; }
  /// Rows of the dual basis D, with basis * D^T = I.
  const Mat& dual_basis() const noexcept { return dual_basis_; }
  double covolume() const noexcept { return covolume_; }
  /// Name of a named lattice ("E8", "Z3", ...), empty otherwise. Names are
  /// only kept while the point set is unchanged.
  const std::string& name() const noexcept { return name_; }

  /// Basis coordinates c of x, i.e. x = basis^T c.
  Vec coords(const Vec& x) const { return dual_basis_ * x; }
  Vec point(const Vec& c) const { return basis_.transpose() * c; }

  Lattice scaled(double factor) const;
  /// Upper bound on |x| for x in the centered cell {basis^T c : c in [-1/2, 1/2)^d}.
  double centered_cell_radius() const noexcept { return cell_radius_; }

 private:
  Mat basis_;
  Mat gram_;
  Mat dual_basis_;
  double covolume_ = 0.0;
  double cell_radius_ = 0.0;
  std::string name_;
};

struct Shell {
  double norm = 0.0;  // squared length
  Count count = 0;
};

/// Theta-series coefficients: vector counts grouped by squared norm.
struct ShellSeries {
  int dim = 0;
  std::vector<Shell> entries;  // strictly increasing norms
  double max_norm = 0.0;       // complete up to this squared norm

  /// Number of vectors with squared norm <= m (m <= max_norm).
  Count cumulative(double m) const;
  ShellSeries scaled(double norm_factor) const;
};

/// Flat list of lattice vectors, row-major.
class VectorList {
 public:
  VectorList() = default;
  explicit VectorList(int dim) : dim_(dim) {}
  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::span<const double> operator[](std::size_t i) const {
    return {data_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  void push_back(std::span<const double> v) { data_.insert(data_.end(), v.begin(), v.end()); }
  const std::vector<double>& data() const noexcept { return data_; }

 private:
  int dim_ = 0;
  std::vector<double> data_;
};

struct EnumerationOptions {
  double budget = kDefaultEnumerationBudget;
  /// Relative tolerance used when grouping norms into shells.
  double norm_tolerance = 1e-9;
};

Lattice make_lattice(const Mat& basis);

/// "Z<d>" (1 <= d <= 24), "A2", "D4", "E8", "Leech"; all of covolume 1.
Lattice named_lattice(std::string_view name);

Lattice dual(const Lattice& lattice);

/// Gaussian-heuristic estimate of #{v : |v - center|^2 <= radius_sq}.
double estimate_point_count(const Lattice& lattice, double radius_sq);

/// Complete shell list up to max_norm via Fincke-Pohst enumeration.
ShellSeries enumerate_shells(const Lattice& lattice, double max_norm, const EnumerationOptions& opts = {});

/// All lattice vectors v with |v - center|^2 <= radius_sq.
VectorList enumerate_vectors(const Lattice& lattice, const Vec& center, double radius_sq,
                             const EnumerationOptions& opts = {});

/// Streaming form of enumerate_vectors: visit(coefficients, vector).
using VectorVisitor = std::function<void(std::span<const long long>, std::span<const double>)>;
void for_each_vector(const Lattice& lattice, const Vec& center, double radius_sq, const VectorVisitor& visit,
                     const EnumerationOptions& opts = {});

/// Representative of x modulo n*lattice in the half-open parallelepiped
/// {n basis^T c : c in [0, 1)^d}.
Vec reduce_to_cell(const Lattice& lattice, const Vec& x, int n);

/// Representative of x modulo n*lattice in the centered cell c in [-1/2, 1/2)^d.
Vec reduce_to_centered_cell(const Lattice& lattice, const Vec& x, int n);

/// Plain-text format: first line d, then d rows of d numbers.
Lattice read_lattice(std::istream& in);
void write_lattice(std::ostream& out, const Lattice& lattice);

/// Binary Golay code generator rows (bit i = coordinate i), 12 rows of 24 bits.
std::span<const std::uint32_t, 12> golay_generator();

std::string to_string(const Count& c);

}  // namespace rieszlat
