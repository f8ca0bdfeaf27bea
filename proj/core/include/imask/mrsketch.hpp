#pragma once

#include <functional>
#include <vector>

#include "imask/linops.hpp"

namespace imask {

/// Block-average an s×s image by factor×factor blocks. Output is (s/factor)².
Vec decimate(ConstSpan x, std::size_t side, std::size_t factor);
/// Replicate each pixel of a low_side×low_side image into a factor×factor block.
Vec upsample(ConstSpan xl, std::size_t low_side, std::size_t factor);

/// Block averaging as an operator; its adjoint is replication scaled by 1/factor².
LinOp decimator(std::size_t side, std::size_t factor);
/// Replication as an operator; its adjoint is block summation.
LinOp upsampler(std::size_t low_side, std::size_t factor);

enum class SketchMode { exact, coarse_projector };

/// Multiresolution sketches S_1..S_r with sum_i p_i S_i = I.
///
/// Levels are 1-based; level r is full resolution. Level i < r projects onto
/// images constant on 2^(r-i) blocks; S_r compensates so the family is unbiased.
class SketchFamily {
 public:
  SketchFamily(std::size_t levels, std::size_t side, Vec probs,
               SketchMode mode = SketchMode::exact);

  static SketchFamily uniform(std::size_t levels, std::size_t side,
                              SketchMode mode = SketchMode::exact);

  std::size_t levels() const noexcept { return probs_.size(); }
  std::size_t side() const noexcept { return side_; }
  std::size_t dim() const noexcept { return side_ * side_; }
  const Vec& probs() const noexcept { return probs_; }
  double prob(std::size_t level) const;
  double min_prob() const;
  SketchMode mode() const noexcept { return mode_; }

  /// 2^(r - level)
  std::size_t factor(std::size_t level) const;
  /// Cost of one level-`level` apply in full-resolution apply units: 1/2^(r-level).
  double cost_fraction(std::size_t level) const;
  /// sum_i p_i cost_fraction(i)
  double expected_cost() const;

  /// S_level x
  Vec apply(std::size_t level, ConstSpan x) const;
  LinOp sketch_op(std::size_t level) const;

 private:
  void check_level(std::size_t level) const;

  std::size_t side_;
  Vec probs_;
  SketchMode mode_;
};

double cost_fraction(const SketchFamily& family, std::size_t level);

/// Builds the native projector on a grid coarsened by `factor`.
using CoarseProjectorFactory = std::function<LinOp(std::size_t factor)>;

/// K_level. Exact mode returns K ∘ S_level. Coarse-projector mode returns
/// R_level ∘ decimate for level < r (R from `coarse`) and K ∘ S_r for level r.
LinOp sketch_forward(const SketchFamily& family, const LinOp& full, std::size_t level,
                     const CoarseProjectorFactory& coarse = {});

/// K_1..K_r in level order.
std::vector<LinOp> sketch_forward_all(const SketchFamily& family, const LinOp& full,
                                      const CoarseProjectorFactory& coarse = {});

}  // namespace imask
