#include "imask/mrsketch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "imask/errors.hpp"

namespace imask {

namespace {

bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

void check_grid(const char* what, std::size_t side, std::size_t factor) {
  if (!is_pow2(factor) || side == 0 || side % factor != 0) {
    throw ConfigError(std::string(what) + ": side " + std::to_string(side) +
                      " is not divisible by power-of-two factor " + std::to_string(factor));
  }
}

// Repeated pairwise 2×2 averaging: ((a+b)+(c+d))/4 is exact on constant blocks.
void decimate_into(ConstSpan x, std::size_t side, std::size_t factor, MutSpan out) {
  if (factor == 1) {
    std::copy(x.begin(), x.end(), out.begin());
    return;
  }
  Vec cur(x.begin(), x.end());
  std::size_t n = side;
  while (n > side / factor) {
    const std::size_t h = n / 2;
    Vec next(h * h);
    for (std::size_t r = 0; r < h; ++r) {
      const double* top = cur.data() + (2 * r) * n;
      const double* bot = top + n;
      for (std::size_t c = 0; c < h; ++c) {
        next[r * h + c] = ((top[2 * c] + top[2 * c + 1]) + (bot[2 * c] + bot[2 * c + 1])) * 0.25;
      }
    }
    cur = std::move(next);
    n = h;
  }
  std::copy(cur.begin(), cur.end(), out.begin());
}

void upsample_into(ConstSpan xl, std::size_t low_side, std::size_t factor, MutSpan out) {
  const std::size_t side = low_side * factor;
  for (std::size_t row = 0; row < side; ++row) {
    const std::size_t lr = row / factor;
    for (std::size_t col = 0; col < side; ++col) out[row * side + col] = xl[lr * low_side + col / factor];
  }
}

}  // namespace

Vec decimate(ConstSpan x, std::size_t side, std::size_t factor) {
  check_grid("decimate", side, factor);
  if (x.size() != side * side) throw DimensionError("decimate", side * side, x.size());
  Vec out((side / factor) * (side / factor));
  decimate_into(x, side, factor, out);
  return out;
}

Vec upsample(ConstSpan xl, std::size_t low_side, std::size_t factor) {
  if (factor == 0) throw ConfigError("upsample: factor must be positive");
  if (xl.size() != low_side * low_side) throw DimensionError("upsample", low_side * low_side, xl.size());
  Vec out(low_side * factor * low_side * factor);
  upsample_into(xl, low_side, factor, out);
  return out;
}

LinOp decimator(std::size_t side, std::size_t factor) {
  check_grid("decimator", side, factor);
  const std::size_t low = side / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  return LinOp(
      side * side, low * low,
      [side, factor](ConstSpan x, MutSpan out) { decimate_into(x, side, factor, out); },
      [low, factor, inv](ConstSpan y, MutSpan out) {
        upsample_into(y, low, factor, out);
        for (auto& v : out) v *= inv;
      },
      "T" + std::to_string(factor));
}

LinOp upsampler(std::size_t low_side, std::size_t factor) {
  if (factor == 0) throw ConfigError("upsampler: factor must be positive");
  const std::size_t side = low_side * factor;
  const double sq = static_cast<double>(factor * factor);
  return LinOp(
      low_side * low_side, side * side,
      [low_side, factor](ConstSpan x, MutSpan out) { upsample_into(x, low_side, factor, out); },
      [side, factor, sq](ConstSpan y, MutSpan out) {
        decimate_into(y, side, factor, out);
        for (auto& v : out) v *= sq;
      },
      "U" + std::to_string(factor));
}

// ---------------------------------------------------------------------------

SketchFamily::SketchFamily(std::size_t levels, std::size_t side, Vec probs, SketchMode mode)
    : side_(side), probs_(std::move(probs)), mode_(mode) {
  if (levels == 0) throw ConfigError("SketchFamily: need at least one level");
  if (probs_.size() != levels) throw DimensionError("SketchFamily probabilities", levels, probs_.size());
  if (levels > 63) throw ConfigError("SketchFamily: too many levels");
  const std::size_t coarsest = std::size_t{1} << (levels - 1);
  if (side == 0 || side % coarsest != 0) {
    throw ConfigError("SketchFamily: side " + std::to_string(side) + " not divisible by 2^(r-1) = " +
                      std::to_string(coarsest));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < levels; ++i) {
    if (!(probs_[i] > 0.0) || probs_[i] > 1.0) {
      throw ConfigError("SketchFamily: p_" + std::to_string(i + 1) + " = " + std::to_string(probs_[i]) +
                        " outside (0, 1]");
    }
    total += probs_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("SketchFamily: probabilities sum to " + std::to_string(total) + ", not 1");
  }
}

SketchFamily SketchFamily::uniform(std::size_t levels, std::size_t side, SketchMode mode) {
  if (levels == 0) throw ConfigError("SketchFamily: need at least one level");
  return SketchFamily(levels, side, Vec(levels, 1.0 / static_cast<double>(levels)), mode);
}

void SketchFamily::check_level(std::size_t level) const {
  if (level < 1 || level > levels()) {
    throw ConfigError("sketch level " + std::to_string(level) + " outside [1, " + std::to_string(levels()) + "]");
  }
}

double SketchFamily::prob(std::size_t level) const {
  check_level(level);
  return probs_[level - 1];
}

double SketchFamily::min_prob() const { return *std::min_element(probs_.begin(), probs_.end()); }

std::size_t SketchFamily::factor(std::size_t level) const {
  check_level(level);
  return std::size_t{1} << (levels() - level);
}

double SketchFamily::cost_fraction(std::size_t level) const {
  return 1.0 / static_cast<double>(factor(level));
}

double SketchFamily::expected_cost() const {
  double s = 0.0;
  for (std::size_t i = 1; i <= levels(); ++i) s += probs_[i - 1] * cost_fraction(i);
  return s;
}

Vec SketchFamily::apply(std::size_t level, ConstSpan x) const {
  check_level(level);
  if (x.size() != dim()) throw DimensionError("SketchFamily::apply", dim(), x.size());
  const std::size_t r = levels();
  if (level < r) {
    const std::size_t f = factor(level);
    return upsample(decimate(x, side_, f), side_ / f, f);
  }
  // S_r = p_r^{-1} (I - sum_{i<r} p_i S_i)
  Vec out(x.begin(), x.end());
  for (std::size_t i = 1; i < r; ++i) {
    const Vec si = apply(i, x);
    axpy(-probs_[i - 1], si, out);
  }
  const double inv = 1.0 / probs_[r - 1];
  for (auto& v : out) v *= inv;
  return out;
}

LinOp SketchFamily::sketch_op(std::size_t level) const {
  check_level(level);
  const SketchFamily self = *this;
  // S_i is symmetric for every level.
  auto k = [self, level](ConstSpan x, MutSpan out) {
    const Vec s = self.apply(level, x);
    std::copy(s.begin(), s.end(), out.begin());
  };
  return LinOp(dim(), dim(), k, k, "S" + std::to_string(level));
}

double cost_fraction(const SketchFamily& family, std::size_t level) {
  return family.cost_fraction(level);
}

LinOp sketch_forward(const SketchFamily& family, const LinOp& full, std::size_t level,
                     const CoarseProjectorFactory& coarse) {
  if (full.domain_dim() != family.dim()) {
    throw DimensionError("sketch_forward: operator domain", family.dim(), full.domain_dim());
  }
  const std::size_t r = family.levels();
  if (level < 1 || level > r) {
    throw ConfigError("sketch_forward: level " + std::to_string(level) + " outside [1, " + std::to_string(r) + "]");
  }
  if (family.mode() == SketchMode::exact || level == r) {
    LinOp op = compose(full, family.sketch_op(level));
    return LinOp(op.domain_dim(), op.range_dim(),
                 [op](ConstSpan x, MutSpan out) { op.apply(x, out); },
                 [op](ConstSpan y, MutSpan out) { op.adjoint_apply(y, out); },
                 "K" + std::to_string(level));
  }
  if (!coarse) throw ConfigError("sketch_forward: coarse-projector mode needs a coarse projector factory");
  const std::size_t f = family.factor(level);
  const LinOp reduced = coarse(f);
  const LinOp op = compose(reduced, decimator(family.side(), f));
  if (op.range_dim() != full.range_dim()) {
    throw DimensionError("sketch_forward: coarse projector range", full.range_dim(), op.range_dim());
  }
  return LinOp(op.domain_dim(), op.range_dim(),
               [op](ConstSpan x, MutSpan out) { op.apply(x, out); },
               [op](ConstSpan y, MutSpan out) { op.adjoint_apply(y, out); },
               "K" + std::to_string(level));
}

std::vector<LinOp> sketch_forward_all(const SketchFamily& family, const LinOp& full,
                                      const CoarseProjectorFactory& coarse) {
  std::vector<LinOp> ops;
  ops.reserve(family.levels());
  for (std::size_t i = 1; i <= family.levels(); ++i) ops.push_back(sketch_forward(family, full, i, coarse));
  return ops;
}

}  // namespace imask
