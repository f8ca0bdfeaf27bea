#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace imask {

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

/// Inner product accumulated strictly left to right.
double dot(ConstSpan a, ConstSpan b);
double norm(ConstSpan a);
/// y += a * x
void axpy(double a, ConstSpan x, MutSpan y);
/// Seeded i.i.d. N(0,1) vector.
Vec standard_normal(std::size_t n, std::uint64_t seed);

/// Matrix-free linear map between R^domain_dim and R^range_dim.
///
/// Kernels receive an input span and a pre-sized output span which they must
/// overwrite completely. LinOp is cheap to copy: kernels are shared and the
/// captured state is treated as immutable.
class LinOp {
 public:
  using Kernel = std::function<void(ConstSpan, MutSpan)>;

  LinOp(std::size_t domain_dim, std::size_t range_dim, Kernel forward,
        Kernel adjoint, std::string name = {});

  std::size_t domain_dim() const noexcept { return domain_dim_; }
  std::size_t range_dim() const noexcept { return range_dim_; }
  const std::string& name() const noexcept { return name_; }

  Vec apply(ConstSpan x) const;
  void apply(ConstSpan x, MutSpan out) const;
  Vec adjoint_apply(ConstSpan y) const;
  void adjoint_apply(ConstSpan y, MutSpan out) const;

  LinOp adjoint() const;

  static LinOp identity(std::size_t n);
  static LinOp zero(std::size_t domain_dim, std::size_t range_dim);

 private:
  std::size_t domain_dim_;
  std::size_t range_dim_;
  Kernel forward_;
  Kernel adjoint_;
  std::string name_;
};

/// Row-major dense matrix, used for oracles and small explicit operators.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
};

LinOp dense_op(DenseMatrix m);
/// outer ∘ inner
LinOp compose(const LinOp& outer, const LinOp& inner);
LinOp scaled(const LinOp& op, double alpha);
/// x ↦ (B_1 x, ..., B_n x); all blocks share the domain.
LinOp stacked(std::vector<LinOp> blocks);

/// Column j is apply(e_j). Refuses operators with more than max_entries entries.
DenseMatrix densify(const LinOp& op, std::size_t max_entries = 10'000'000);

/// max over trials of |<Ax,y> - <x,A^T y>| / (|Ax| |y| + eps) on seeded Gaussian x, y.
double adjoint_test(const LinOp& op, std::size_t trials, std::uint64_t seed);

struct PowerOptions {
  double tol = 1e-6;
  std::size_t max_iter = 500;
  std::uint64_t seed = 0;
};

struct PowerResult {
  double norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Estimates ||op|| as sqrt of the top eigenvalue of op^T op.
PowerResult power_method(const LinOp& op, const PowerOptions& opts = {});

/// Element of X × Y with the product inner product.
struct JointVec {
  Vec x;
  Vec y;
};

double joint_pairing(const JointVec& a, const JointVec& b);
Vec concat(const JointVec& z);
JointVec split(ConstSpan z, std::size_t x_dim);

/// Skew block operators B_i = [[0, A_i^T], [-A_i, 0]] acting on z = (x, y),
/// built from blocks A_i : X -> Y. Operators act on concatenated (x, y).
class JointOperator {
 public:
  explicit JointOperator(std::vector<LinOp> blocks);

  std::size_t block_count() const noexcept { return blocks_.size(); }
  std::size_t x_dim() const noexcept { return x_dim_; }
  std::size_t y_dim() const noexcept { return y_dim_; }
  std::size_t dim() const noexcept { return x_dim_ + y_dim_; }

  LinOp block(std::size_t i) const;
  /// B = sum_i B_i
  LinOp total() const;
  /// z ↦ (w_i B_i z)_i
  LinOp stacked(ConstSpan weights) const;

  JointVec apply(const JointVec& z) const;

 private:
  std::vector<LinOp> blocks_;
  std::size_t x_dim_;
  std::size_t y_dim_;
};

}  // namespace imask
