#pragma once

#include "imask/linops.hpp"

namespace imask {

inline constexpr double kPsnrCap = 300.0;

/// 10 log10(peak² d / |x - ref|²), capped at kPsnrCap for identical images.
double psnr(ConstSpan x, ConstSpan ref, double peak = 1.0);

/// |x - ref|² / |ref|²
double rel_dist(ConstSpan x, ConstSpan ref);

}  // namespace imask
