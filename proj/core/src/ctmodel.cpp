#include "imask/ctmodel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "imask/errors.hpp"

namespace imask {

Geometry Geometry::make(std::size_t side, std::size_t n_angles, double pixel_size) {
  if (side == 0) throw ConfigError("Geometry: side must be positive");
  if (n_angles == 0) throw ConfigError("Geometry: n_angles must be positive");
  if (!(pixel_size > 0.0)) throw ConfigError("Geometry: pixel_size must be positive");
  const std::size_t d2 = 2 * side * side;
  auto nd = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d2))));
  while (nd > 0 && (nd - 1) * (nd - 1) >= d2) --nd;
  while (nd * nd < d2) ++nd;
  return Geometry{side, n_angles, nd, pixel_size};
}

double Geometry::angle(std::size_t k) const {
  return std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_angles);
}

double Geometry::detector_offset(std::size_t j) const {
  double base = 0.5 * static_cast<double>(n_detectors - 1);
  if ((n_detectors + side) % 2 == 1) base += 0.5;
  return static_cast<double>(j) - base;
}

// ---------------------------------------------------------------------------
// Siddon ray tracing

namespace {

struct Segment {
  std::uint32_t pixel;
  double length;
};

// Ray P(l) = t e + l u with e = (cos a, sin a), u = (-sin a, cos a), through an
// n×n grid of cells of width w centred at the origin. Pixel (row, col) has
// row 0 at the top. Appends exact intersection lengths in traversal order.
void trace_ray(double cos_a, double sin_a, double t, std::size_t n, double w, std::vector<Segment>& out) {
  out.clear();
  const double half = 0.5 * static_cast<double>(n) * w;
  const double px = t * cos_a;
  const double py = t * sin_a;
  const double ux = -sin_a;
  const double uy = cos_a;

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  auto clip = [&](double p, double u) {
    if (u == 0.0) return p >= -half && p < half;
    double a = (-half - p) / u;
    double b = (half - p) / u;
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
    return true;
  };
  if (!clip(px, ux) || !clip(py, uy)) return;
  if (!(hi - lo > 1e-12 * half)) return;

  // Plane crossings strictly inside (lo, hi), each list monotone in l.
  auto crossings = [&](double p, double u, std::vector<double>& ls) {
    ls.clear();
    if (u == 0.0) return;
    const double c0 = p + lo * u;
    const double c1 = p + hi * u;
    const double cmin = std::min(c0, c1) + half;
    const double cmax = std::max(c0, c1) + half;
    auto k0 = static_cast<long>(std::floor(cmin / w)) + 1;
    auto k1 = static_cast<long>(std::ceil(cmax / w)) - 1;
    for (long k = k0; k <= k1; ++k) {
      const double l = (static_cast<double>(k) * w - half - p) / u;
      if (l > lo && l < hi) ls.push_back(l);
    }
    if (u < 0.0) std::reverse(ls.begin(), ls.end());
  };
  thread_local std::vector<double> lx, ly;
  crossings(px, ux, lx);
  crossings(py, uy, ly);

  const long last = static_cast<long>(n) - 1;
  double prev = lo;
  auto emit = [&](double next) {
    const double len = next - prev;
    if (len > 0.0) {
      const double mid = 0.5 * (prev + next);
      const double cx = px + mid * ux + half;
      const double cy = half - (py + mid * uy);
      const long col = std::clamp(static_cast<long>(std::floor(cx / w)), 0L, last);
      const long row = std::clamp(static_cast<long>(std::floor(cy / w)), 0L, last);
      out.push_back({static_cast<std::uint32_t>(row * static_cast<long>(n) + col), len});
    }
    prev = next;
  };
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < lx.size() || j < ly.size()) {
    if (j == ly.size() || (i < lx.size() && lx[i] <= ly[j])) {
      emit(lx[i++]);
    } else {
      emit(ly[j++]);
    }
  }
  emit(hi);
}

template <typename Fn>
void for_each_ray(const Geometry& g, std::size_t factor, Fn&& fn) {
  const std::size_t n = g.side / factor;
  const double w = static_cast<double>(factor);
  std::vector<Segment> segs;
  for (std::size_t a = 0; a < g.n_angles; ++a) {
    const double ang = g.angle(a);
    const double ca = std::cos(ang);
    const double sa = std::sin(ang);
    for (std::size_t j = 0; j < g.n_detectors; ++j) {
      trace_ray(ca, sa, g.detector_offset(j), n, w, segs);
      fn(a * g.n_detectors + j, segs);
    }
  }
}

}  // namespace

struct Projector::RayTable {
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> pixel;
  std::vector<double> weight;
};

Projector::Projector(const Geometry& geom, std::size_t factor, std::size_t cache_limit_bytes)
    : geom_(geom), factor_(factor) {
  if (geom.side == 0 || geom.n_detectors == 0) throw ConfigError("Projector: empty geometry");
  if (factor == 0 || geom.side % factor != 0) {
    throw ConfigError("Projector: side " + std::to_string(geom.side) + " not divisible by factor " +
                      std::to_string(factor));
  }
  // Upper bound on stored entries: every ray crosses at most 2n cells.
  const std::size_t n = grid_side();
  const std::size_t bound = geom.sinogram_dim() * (2 * n + 1);
  if (bound * (sizeof(double) + sizeof(std::uint32_t)) > cache_limit_bytes) return;

  auto table = std::make_shared<RayTable>();
  table->row_ptr.reserve(geom.sinogram_dim() + 1);
  table->row_ptr.push_back(0);
  const double scale = geom.pixel_size;
  for_each_ray(geom_, factor_, [&](std::size_t, const std::vector<Segment>& segs) {
    for (const auto& s : segs) {
      table->pixel.push_back(s.pixel);
      table->weight.push_back(s.length * scale);
    }
    table->row_ptr.push_back(table->pixel.size());
  });
  table->pixel.shrink_to_fit();
  table->weight.shrink_to_fit();
  table_ = std::move(table);
}

void Projector::forward(ConstSpan image, MutSpan sino) const {
  const std::size_t n = grid_side();
  if (image.size() != n * n) throw DimensionError("project (image)", n * n, image.size());
  if (sino.size() != geom_.sinogram_dim()) throw DimensionError("project (sinogram)", geom_.sinogram_dim(), sino.size());
  if (table_) {
    const auto& t = *table_;
    for (std::size_t ray = 0; ray < sino.size(); ++ray) {
      double s = 0.0;
      for (std::size_t e = t.row_ptr[ray]; e < t.row_ptr[ray + 1]; ++e) s += t.weight[e] * image[t.pixel[e]];
      sino[ray] = s;
    }
    return;
  }
  const double scale = geom_.pixel_size;
  for_each_ray(geom_, factor_, [&](std::size_t ray, const std::vector<Segment>& segs) {
    double s = 0.0;
    for (const auto& seg : segs) s += (seg.length * scale) * image[seg.pixel];
    sino[ray] = s;
  });
}

void Projector::backward(ConstSpan sino, MutSpan image) const {
  const std::size_t n = grid_side();
  if (sino.size() != geom_.sinogram_dim()) throw DimensionError("backproject (sinogram)", geom_.sinogram_dim(), sino.size());
  if (image.size() != n * n) throw DimensionError("backproject (image)", n * n, image.size());
  std::fill(image.begin(), image.end(), 0.0);
  if (table_) {
    const auto& t = *table_;
    for (std::size_t ray = 0; ray < sino.size(); ++ray) {
      const double v = sino[ray];
      for (std::size_t e = t.row_ptr[ray]; e < t.row_ptr[ray + 1]; ++e) image[t.pixel[e]] += t.weight[e] * v;
    }
    return;
  }
  const double scale = geom_.pixel_size;
  for_each_ray(geom_, factor_, [&](std::size_t ray, const std::vector<Segment>& segs) {
    const double v = sino[ray];
    for (const auto& seg : segs) image[seg.pixel] += (seg.length * scale) * v;
  });
}

LinOp Projector::as_linop() const {
  auto self = std::make_shared<const Projector>(*this);
  const std::size_t n = grid_side();
  return LinOp(
      n * n, geom_.sinogram_dim(), [self](ConstSpan x, MutSpan out) { self->forward(x, out); },
      [self](ConstSpan y, MutSpan out) { self->backward(y, out); },
      factor_ == 1 ? "K" : "R" + std::to_string(factor_));
}

Vec project(const Geometry& geom, ConstSpan x, std::size_t factor) {
  const Projector p(geom, factor, 0);
  Vec out(geom.sinogram_dim());
  p.forward(x, out);
  return out;
}

Vec backproject(const Geometry& geom, ConstSpan y, std::size_t factor) {
  const Projector p(geom, factor, 0);
  const std::size_t n = p.grid_side();
  Vec out(n * n);
  p.backward(y, out);
  return out;
}

LinOp projector(const Geometry& geom) { return Projector(geom, 1).as_linop(); }

LinOp coarse_projector(const Geometry& geom, std::size_t factor) { return Projector(geom, factor).as_linop(); }

// ---------------------------------------------------------------------------
// Phantoms

PhantomKind parse_phantom_kind(std::string_view name) {
  if (name == "shepp-logan") return PhantomKind::shepp_logan;
  if (name == "square-insert") return PhantomKind::square_insert;
  if (name == "flat") return PhantomKind::flat;
  throw ConfigError("unknown phantom kind '" + std::string(name) + "'");
}

std::string to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::shepp_logan: return "shepp-logan";
    case PhantomKind::square_insert: return "square-insert";
    case PhantomKind::flat: return "flat";
  }
  return "?";
}

namespace {

struct Ellipse {
  double value, a, b, x0, y0, phi_deg;
};

// Modified Shepp-Logan (Toft) table: higher contrast, values in [0, 1].
constexpr std::array<Ellipse, 10> kSheppLogan{{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
}};

}  // namespace

Phantom make_phantom(PhantomKind kind, std::size_t side, std::size_t alignment) {
  if (side == 0 || (side & (side - 1)) != 0) {
    throw ConfigError("make_phantom: side " + std::to_string(side) + " is not a power of two");
  }
  Phantom ph{kind, side, Vec(side * side, 0.0)};
  switch (kind) {
    case PhantomKind::flat:
      std::fill(ph.values.begin(), ph.values.end(), 0.5);
      break;
    case PhantomKind::shepp_logan: {
      const double s = static_cast<double>(side);
      for (std::size_t row = 0; row < side; ++row) {
        const double y = 1.0 - (2.0 * static_cast<double>(row) + 1.0) / s;
        for (std::size_t col = 0; col < side; ++col) {
          const double x = (2.0 * static_cast<double>(col) + 1.0) / s - 1.0;
          double v = 0.0;
          for (const auto& e : kSheppLogan) {
            const double phi = e.phi_deg * std::numbers::pi / 180.0;
            const double dx = x - e.x0;
            const double dy = y - e.y0;
            const double xr = dx * std::cos(phi) + dy * std::sin(phi);
            const double yr = -dx * std::sin(phi) + dy * std::cos(phi);
            if ((xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0) v += e.value;
          }
          ph.values[row * side + col] = std::clamp(v, 0.0, 1.0);
        }
      }
      break;
    }
    case PhantomKind::square_insert: {
      const std::size_t block = alignment == 0 ? std::max<std::size_t>(side / 4, 1) : alignment;
      if (side % block != 0) {
        throw ConfigError("make_phantom: alignment " + std::to_string(block) + " does not divide side " +
                          std::to_string(side));
      }
      const std::size_t lo = block * std::max<std::size_t>(1, side / (4 * block));
      const std::size_t hi = std::min(side, lo + block * std::max<std::size_t>(1, side / (2 * block)));
      if (lo >= hi) throw ConfigError("make_phantom: square insert does not fit the grid");
      for (std::size_t row = lo; row < hi; ++row) {
        for (std::size_t col = lo; col < hi; ++col) ph.values[row * side + col] = 1.0;
      }
      break;
    }
  }
  return ph;
}

// ---------------------------------------------------------------------------
// Noise

NoiseModel parse_noise_model(std::string_view name) {
  if (name == "none") return NoiseModel::none;
  if (name == "gaussian") return NoiseModel::gaussian;
  if (name == "poisson") return NoiseModel::poisson;
  throw ConfigError("unknown noise model '" + std::string(name) + "'");
}

std::string to_string(NoiseModel model) {
  switch (model) {
    case NoiseModel::none: return "none";
    case NoiseModel::gaussian: return "gaussian";
    case NoiseModel::poisson: return "poisson";
  }
  return "?";
}

Vec add_noise(ConstSpan sino, NoiseModel model, double photons, std::uint64_t seed) {
  if (!(photons > 0.0)) throw ConfigError("add_noise: photons must be positive");
  Vec out(sino.begin(), sino.end());
  std::mt19937_64 gen(seed);
  switch (model) {
    case NoiseModel::none:
      break;
    case NoiseModel::gaussian: {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (auto& v : out) v += std::sqrt(std::exp(v) / photons) * normal(gen);
      break;
    }
    case NoiseModel::poisson: {
      for (auto& v : out) {
        if (v < 0.0) throw ConfigError("add_noise: poisson model needs nonnegative line integrals");
        std::poisson_distribution<long long> pois(photons * std::exp(-v));
        const auto counts = static_cast<double>(std::max<long long>(1, pois(gen)));
        v = -std::log(counts / photons);
      }
      break;
    }
  }
  return out;
}

}  // namespace imask
