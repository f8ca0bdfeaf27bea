#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "imask/linops.hpp"

namespace imask {

/// 2-D parallel-beam acquisition geometry.
///
/// Coordinates are measured in full-resolution pixel widths with the image
/// centred at the origin. Detectors are spaced one pixel width apart; the
/// array is shifted by at most half a pixel so that at angle 0 every detector
/// ray runs through a column of pixel centres. Line integrals are reported in
/// physical units: chord length times `pixel_size`.
struct Geometry {
  std::size_t side = 0;
  std::size_t n_angles = 100;
  std::size_t n_detectors = 0;
  double pixel_size = 1.0;

  /// n_detectors = ceil(sqrt(2 side^2)); angles uniform on [0, pi).
  static Geometry make(std::size_t side, std::size_t n_angles = 100, double pixel_size = 1.0);

  std::size_t image_dim() const noexcept { return side * side; }
  std::size_t sinogram_dim() const noexcept { return n_angles * n_detectors; }
  double angle(std::size_t k) const;
  /// Signed distance of detector j from the rotation centre.
  double detector_offset(std::size_t j) const;
};

/// Exact Siddon projector on the grid coarsened by `factor` (pixel width `factor`).
///
/// Ray weights are traced once at construction and cached when they fit in
/// `cache_limit_bytes`; otherwise every apply re-traces the rays.
class Projector {
 public:
  explicit Projector(const Geometry& geom, std::size_t factor = 1,
                     std::size_t cache_limit_bytes = std::size_t{512} << 20);

  const Geometry& geometry() const noexcept { return geom_; }
  std::size_t factor() const noexcept { return factor_; }
  std::size_t grid_side() const noexcept { return geom_.side / factor_; }
  bool cached() const noexcept { return table_ != nullptr; }

  void forward(ConstSpan image, MutSpan sino) const;
  void backward(ConstSpan sino, MutSpan image) const;

  LinOp as_linop() const;

 private:
  struct RayTable;

  Geometry geom_;
  std::size_t factor_;
  std::shared_ptr<const RayTable> table_;
};

/// Line integrals of an image on the grid coarsened by `factor` (full resolution when 1).
Vec project(const Geometry& geom, ConstSpan x, std::size_t factor = 1);
/// Exact adjoint of project.
Vec backproject(const Geometry& geom, ConstSpan y, std::size_t factor = 1);

/// Full-resolution forward operator K.
LinOp projector(const Geometry& geom);
/// Native projector R on the (side/factor)² grid; R ∘ T equals K ∘ S for the matching sketch.
LinOp coarse_projector(const Geometry& geom, std::size_t factor);

enum class PhantomKind { shepp_logan, square_insert, flat };

PhantomKind parse_phantom_kind(std::string_view name);
std::string to_string(PhantomKind kind);

struct Phantom {
  PhantomKind kind = PhantomKind::flat;
  std::size_t side = 0;
  Vec values;
};

/// Deterministic phantom with values in [0, 1].
///
/// `alignment` only affects square_insert: the square's edges are placed on
/// multiples of it (0 selects side/4).
Phantom make_phantom(PhantomKind kind, std::size_t side, std::size_t alignment = 0);

enum class NoiseModel { none, gaussian, poisson };

NoiseModel parse_noise_model(std::string_view name);
std::string to_string(NoiseModel model);

/// Transmission noise at `photons` incident counts per ray.
///
/// poisson:  b' = -log(max(1, Pois(I0 e^-b)) / I0)
/// gaussian: b' = b + N(0, e^b / I0)
Vec add_noise(ConstSpan sino, NoiseModel model, double photons, std::uint64_t seed);

}  // namespace imask
