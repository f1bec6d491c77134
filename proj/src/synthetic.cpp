#include "tpgan/synthetic.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "tpgan/image_io.hpp"

namespace tpgan {

namespace {

struct Point {
  double x, y;
};
using Quad = std::array<Point, 4>;

bool inside(const Quad& q, Point p) {
  bool in = false;
  for (std::size_t i = 0, j = q.size() - 1; i < q.size(); j = i++) {
    if ((q[i].y > p.y) != (q[j].y > p.y) &&
        p.x < (q[j].x - q[i].x) * (p.y - q[i].y) / (q[j].y - q[i].y) + q[i].x) {
      in = !in;
    }
  }
  return in;
}

struct Garment {
  std::vector<Quad> parts;
  Point neck_center{0.5, 0.0};
  double neck_radius = 0.0;
  double intensity = 0.8;
  double stripe_period = 0.0;
  double stripe_depth = 0.0;
};

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

Garment make_garment(int cls, Rng& rng) {
  Garment g;
  const double top = uniform(rng, 0.12, 0.2);
  const double shoulder = uniform(rng, 0.2, 0.27);
  double bottom, hem;
  if (cls == 2) {
    bottom = uniform(rng, 0.8, 0.92);
    hem = shoulder + uniform(rng, 0.03, 0.2);
  } else {
    bottom = uniform(rng, 0.72, 0.88);
    hem = shoulder + uniform(rng, -0.02, 0.06);
  }
  const double cx = 0.5 + uniform(rng, -0.03, 0.03);
  g.parts.push_back({Point{cx - shoulder, top}, Point{cx + shoulder, top}, Point{cx + hem, bottom}, Point{cx - hem, bottom}});

  // Sleeve length as a fraction of body height; ranges overlap between classes.
  double sleeve = 0.0;
  if (cls == 0) sleeve = uniform(rng, 0.12, 0.42);
  if (cls == 1) sleeve = uniform(rng, 0.32, 0.75);
  if (cls == 2) sleeve = rng.uniform() < 0.35 ? uniform(rng, 0.08, 0.3) : 0.0;
  if (sleeve > 0.0) {
    const double height = (bottom - top) * sleeve;
    const double width = uniform(rng, 0.07, 0.12);
    const double spread = uniform(rng, 0.25, 0.7);
    for (int side : {-1, 1}) {
      const Point a{cx + side * shoulder, top};
      const Point b{cx + side * shoulder, top + width * 1.6};
      const Point c{b.x + side * height * spread, b.y + height};
      const Point d{a.x + side * (height * spread + width), a.y + height};
      g.parts.push_back({a, b, c, d});
    }
  }
  g.neck_center = {cx, top};
  g.neck_radius = uniform(rng, 0.04, 0.09);
  g.intensity = uniform(rng, 0.35, 1.0);
  if (rng.uniform() < 0.4) {
    g.stripe_period = uniform(rng, 0.06, 0.16);
    g.stripe_depth = uniform(rng, 0.1, 0.4);
  }
  return g;
}

std::vector<float> render(const Garment& g, int size, double angle, double scale, double noise, Rng& rng) {
  constexpr int kSuper = 3;
  const double ca = std::cos(angle), sa = std::sin(angle);
  std::vector<float> out(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double u = (x + (sx + 0.5) / kSuper) / size - 0.5;
          const double v = (y + (sy + 0.5) / kSuper) / size - 0.5;
          const Point p{(ca * u + sa * v) / scale + 0.5, (-sa * u + ca * v) / scale + 0.5};
          const double dx = p.x - g.neck_center.x, dy = p.y - g.neck_center.y;
          if (dx * dx + dy * dy < g.neck_radius * g.neck_radius) continue;
          bool hit = false;
          for (const auto& q : g.parts) hit = hit || inside(q, p);
          if (!hit) continue;
          double shade = g.intensity;
          if (g.stripe_period > 0.0) {
            shade *= 1.0 - g.stripe_depth * 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * p.y / g.stripe_period));
          }
          acc += shade;
        }
      }
      const double value = acc / (kSuper * kSuper) + noise * rng.normal();
      out[static_cast<std::size_t>(y) * size + x] = static_cast<float>(std::clamp(value, 0.0, 1.0) * 2.0 - 1.0);
    }
  }
  return out;
}

}  // namespace

Dataset synthesize_fashion(const SyntheticOptions& options) {
  if (options.per_class < 1 || options.size < 8) fail(Errc::InvalidArgument, "synthetic dataset too small");
  Dataset ds;
  ds.height = ds.width = options.size;
  ds.channels = 1;
  ds.class_ids = {0, 1, 2};
  Rng rng(options.seed);
  for (int i = 0; i < 3 * options.per_class; ++i) {
    const int cls = i % 3;
    const Garment g = make_garment(cls, rng);
    const double angle = uniform(rng, -0.12, 0.12);
    const double scale = uniform(rng, 0.85, 1.1);
    Sample s;
    s.image = render(g, options.size, angle, scale, options.noise, rng);
    s.label = cls;
    s.id = i;
    s.path = "images/" + std::to_string(i) + ".png";
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset resize_dataset(const Dataset& dataset, int size) {
  Dataset out = dataset;
  out.height = out.width = size;
  for (auto& s : out.samples) {
    s.image = resize_bilinear(s.image, dataset.height, dataset.width, dataset.channels, size, size);
    for (auto& v : s.image) v = std::clamp(v, -1.0f, 1.0f);
  }
  return out;
}

std::filesystem::path write_dataset(const std::filesystem::path& directory, const Dataset& dataset) {
  std::filesystem::create_directories(directory / "images");
  Dataset written = dataset;
  for (auto& s : written.samples) {
    const auto file = directory / "images" / (std::to_string(s.id) + ".png");
    write_png(file, denormalize_pixels(s.image.data(), dataset.height, dataset.width, dataset.channels));
    s.path = file.string();
  }
  const auto manifest = directory / "dataset.manifest";
  write_manifest(manifest, written);
  return manifest;
}

}  // namespace tpgan
