#pragma once

// Procedural generators for the four benchmark content classes and the
// structural-density metric that drives the semantic cache signal.
// Generators are deterministic per (class, aspect, seed); the metric is
// tuned so class means order as crypto-noise < document < nature < x-ray.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sidechan/anyres.hpp"
#include "sidechan/common.hpp"

namespace sidechan::imagegen {

enum class ContentClass { Document, XRay, CryptoNoise, Nature };

inline std::string to_string(ContentClass c) {
  switch (c) {
    case ContentClass::Document: return "document";
    case ContentClass::XRay: return "xray";
    case ContentClass::CryptoNoise: return "crypto-noise";
    case ContentClass::Nature: return "nature";
  }
  throw Error("unhandled ContentClass");
}

inline ContentClass content_class_from(const std::string& text) {
  if (text == "document") return ContentClass::Document;
  if (text == "xray") return ContentClass::XRay;
  if (text == "crypto-noise") return ContentClass::CryptoNoise;
  if (text == "nature") return ContentClass::Nature;
  throw ConfigError("unknown content class: " + text);
}

struct PixelBuffer {
  int width_px = 0;
  int height_px = 0;
  std::vector<float> pixels;  // row-major grayscale, each in [0,1]

  PixelBuffer() = default;
  PixelBuffer(int w, int h)
      : width_px(w), height_px(h),
        pixels(static_cast<std::size_t>(w) * h, 0.0f) {}

  double at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width_px + x];
  }
  void set(int x, int y, double v) {
    pixels[static_cast<std::size_t>(y) * width_px + x] =
        static_cast<float>(std::clamp(v, 0.0, 1.0));
  }

  double mean_intensity() const {
    double s = 0.0;
    for (float p : pixels) s += p;
    return pixels.empty() ? 0.0 : s / static_cast<double>(pixels.size());
  }
};

struct ImageSpec {
  ContentClass content = ContentClass::Document;
  anyres::AspectRatio aspect;
  std::uint64_t seed = 0;
};

struct DensityReport {
  double edge_density = 0.0;
  double orientation_coherence = 0.0;
  double density = 0.0;
};

// Gradient magnitude above this fraction of the intensity range marks an
// edge pixel. Frozen once the class ordering held.
inline constexpr double kEdgeThreshold = 0.1;
inline constexpr int kMinGenerateDim = 64;
inline constexpr int kCoherenceBlock = 16;

namespace detail {

// Square wave with period 1 in t, range {-1,+1}. With a 4 px period every
// central-difference window straddles a transition, so banding built on this
// profile registers on the gradient at essentially every pixel.
inline double square_wave(double t) {
  return (t - std::floor(t)) < 0.5 ? 1.0 : -1.0;
}

// Ruled text page. Horizontal ink strokes (two-on/two-off row ruling) fill
// each text line; word gaps break the strokes into word-like runs. Layouts
// come in a sparse and a dense variant chosen by the seed value so that a
// dataset with consecutive seeds interleaves both kinds of page.
inline void fill_document(PixelBuffer& img, Rng& rng, std::uint64_t seed) {
  const int w = img.width_px, h = img.height_px;
  const double paper = 0.95;
  const double ink = 0.55;
  const bool dense_page = (seed % 5) >= 2;

  const double margin_frac = dense_page ? 0.013 : rng.uniform(0.055, 0.068);
  const int band_rows = dense_page ? 16 : 11;
  const int leading_rows = dense_page ? 0 : 5;
  const double gap_lo = dense_page ? 4.0 : 5.0;
  const double gap_hi = dense_page ? 6.0 : 11.0;
  const double word_lo = dense_page ? 48.0 : 20.0;
  const double word_hi = dense_page ? 64.0 : 44.0;

  const int mx = static_cast<int>(margin_frac * w);
  const int my = static_cast<int>(margin_frac * h);
  const int phase = static_cast<int>(rng.below(4));

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.set(x, y, paper);
  }

  const int line_period = band_rows + leading_rows;
  for (int line_top = my; line_top + band_rows <= h - my;
       line_top += line_period) {
    // Word layout is shared by all rows of one text line.
    std::vector<std::pair<int, int>> gaps;  // [start, end) in x
    int x = mx;
    while (x < w - mx) {
      x += static_cast<int>(rng.uniform(word_lo, word_hi));
      const int gap = static_cast<int>(rng.uniform(gap_lo, gap_hi));
      if (x >= w - mx) break;
      gaps.emplace_back(x, std::min(x + gap, w - mx));
      x += gap;
    }
    for (int row = 0; row < band_rows; ++row) {
      const int y = line_top + row;
      if (((row + phase) % 4) >= 2) continue;  // light ruling row stays paper
      std::size_t g = 0;
      for (int xx = mx; xx < w - mx; ++xx) {
        while (g < gaps.size() && xx >= gaps[g].second) ++g;
        const bool in_gap = g < gaps.size() && xx >= gaps[g].first;
        if (!in_gap) img.set(xx, y, ink);
      }
    }
  }
}

// Radiograph-like field: dark base, two bright elliptical lobes, arc-shaped
// rib banding and a radial vignette that also fades the band contrast out
// toward the corners.
inline void fill_xray(PixelBuffer& img, Rng& rng) {
  const int w = img.width_px, h = img.height_px;
  const double cx1 = (0.33 + rng.uniform(-0.02, 0.02)) * w;
  const double cx2 = (0.67 + rng.uniform(-0.02, 0.02)) * w;
  const double cy12 = (0.45 + rng.uniform(-0.02, 0.02)) * h;
  const double ax = 0.21 * w, ay = 0.30 * h;

  // Rib banding rides on a parabolic arc offset so the stripes bow like a
  // ribcage while staying near-horizontal; keeping them aligned with the
  // pixel rows is what makes the band gradient register at every pixel.
  const double rib_period = 4.0;
  const double rib_amp = 0.13;
  const double phi1 = rng.uniform(0.0, 1.0);
  const double arc_cx = (0.5 + rng.uniform(-0.04, 0.04)) * w;
  const double arc_depth = rng.uniform(0.040, 0.055) * w;
  const double lambda2 = 23.0;
  const double amp2 = 0.04;
  const double phi2 = rng.uniform(0.0, 1.0);
  const double arc2_cy = (-0.65 + rng.uniform(-0.05, 0.05)) * h;

  const double icx = 0.5 * w, icy = 0.5 * h;
  const double rnorm = std::sqrt(icx * icx + icy * icy);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d1x = (x - cx1) / ax, d1y = (y - cy12) / ay;
      const double d2x = (x - cx2) / ax, d2y = (y - cy12) / ay;
      const double lobes = 0.40 * std::exp(-(d1x * d1x + d1y * d1y)) +
                           0.40 * std::exp(-(d2x * d2x + d2y * d2y));
      const double rr = std::hypot(x - icx, y - icy) / rnorm;
      const double vignette = 1.0 - 0.45 * rr * rr;
      const double band_fade = std::clamp(8.0 * (1.0 - rr), 0.0, 1.0);
      const double xn = (x - arc_cx) / (0.5 * w);
      const double arc = arc_depth * xn * xn;
      const double r2 = std::hypot(x - icx, y - arc2_cy);
      const double ribs =
          rib_amp * band_fade * square_wave((y + arc) / rib_period + phi1) +
          amp2 * std::sin(2.0 * std::numbers::pi * (r2 / lambda2 + phi2));
      img.set(x, y, vignette * (0.22 + lobes) + ribs + 0.05);
    }
  }
}

// Independent uniform intensity per pixel.
inline void fill_noise(PixelBuffer& img, Rng& rng) {
  for (float& p : img.pixels) p = static_cast<float>(rng.uniform01());
}

// Landscape-like scene: smooth sky gradient, one or two sinusoidal
// silhouette boundaries, rippled terrain with fine speckle below.
inline void fill_nature(PixelBuffer& img, Rng& rng) {
  const int w = img.width_px, h = img.height_px;
  const double horizon = rng.uniform(0.10, 0.14);
  const double wobble_amp = rng.uniform(0.02, 0.035);
  const double wobble_freq = rng.uniform(2.0, 3.5);
  const double wobble_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const bool second_ridge = rng.below(2) == 0;
  const double ridge2_at = rng.uniform(0.30, 0.40);
  const double ridge2_amp = rng.uniform(0.015, 0.03);
  const double ridge2_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  const double ripple_period = 4.0;
  const double ripple_amp = 0.13;
  const double ripple_phase = rng.uniform(0.0, 1.0);
  const double sway_freq = rng.uniform(2.0, 4.0);
  const double sway_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  // Row-order speckle so the result is identical for any traversal.
  std::vector<float> speckle(img.pixels.size());
  for (float& s : speckle) {
    s = static_cast<float>(rng.uniform(-0.02, 0.02));
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double xf = static_cast<double>(x) / w;
      const double boundary =
          h * (horizon + wobble_amp * std::sin(2.0 * std::numbers::pi *
                                                   wobble_freq * xf +
                                               wobble_phase));
      double v;
      if (y < boundary) {
        v = 0.85 - 0.30 * (y / boundary);  // sky
      } else {
        const double sway =
            0.9 * std::sin(2.0 * std::numbers::pi * sway_freq * xf +
                           sway_phase);
        double terrain =
            0.45 + ripple_amp * square_wave((y + sway) / ripple_period +
                                            ripple_phase);
        if (second_ridge) {
          const double ridge2 =
              h * (ridge2_at + ridge2_amp * std::sin(2.0 * std::numbers::pi *
                                                         2.0 * xf +
                                                     ridge2_phase));
          if (y < ridge2) terrain -= 0.10;  // distant band sits darker
        }
        v = terrain + speckle[static_cast<std::size_t>(y) * w + x];
      }
      img.set(x, y, v);
    }
  }
}

}  // namespace detail

inline PixelBuffer generate(const ImageSpec& spec) {
  if (!spec.aspect.valid() || spec.aspect.width_px < kMinGenerateDim ||
      spec.aspect.height_px < kMinGenerateDim) {
    throw ConfigError("generate: image sides must be >= " +
                      std::to_string(kMinGenerateDim) + " px");
  }
  PixelBuffer img(spec.aspect.width_px, spec.aspect.height_px);
  // Decorrelate the stream across classes sharing a numeric seed.
  Rng rng(spec.seed * 4ull + static_cast<std::uint64_t>(spec.content) + 1ull);
  switch (spec.content) {
    case ContentClass::Document:
      detail::fill_document(img, rng, spec.seed);
      break;
    case ContentClass::XRay:
      detail::fill_xray(img, rng);
      break;
    case ContentClass::CryptoNoise:
      detail::fill_noise(img, rng);
      break;
    case ContentClass::Nature:
      detail::fill_nature(img, rng);
      break;
  }
  return img;
}

// Edge fraction times mean orientation coherence. Gradients use central
// differences; orientation statistics use doubled angles so the two
// anti-parallel flanks of a stroke reinforce instead of cancelling.
// Coherence averages per-block resultant lengths over all 16x16 blocks,
// counting edge-free blocks as zero.
inline DensityReport structural_density(const PixelBuffer& img,
                                        double edge_threshold = kEdgeThreshold) {
  const int w = img.width_px, h = img.height_px;
  if (w < 3 || h < 3) throw ConfigError("structural_density: degenerate size");

  const int bx = (w + kCoherenceBlock - 1) / kCoherenceBlock;
  const int by = (h + kCoherenceBlock - 1) / kCoherenceBlock;
  std::vector<double> sum_cos(static_cast<std::size_t>(bx) * by, 0.0);
  std::vector<double> sum_sin(static_cast<std::size_t>(bx) * by, 0.0);
  std::vector<int> count(static_cast<std::size_t>(bx) * by, 0);

  std::int64_t edges = 0;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double gx = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
      const double gy = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
      const double m2 = gx * gx + gy * gy;
      if (m2 <= edge_threshold * edge_threshold) continue;
      ++edges;
      const std::size_t b = static_cast<std::size_t>(y / kCoherenceBlock) * bx +
                            static_cast<std::size_t>(x / kCoherenceBlock);
      // Doubled-angle unit vector, computed without trig calls.
      sum_cos[b] += (gx * gx - gy * gy) / m2;
      sum_sin[b] += 2.0 * gx * gy / m2;
      count[b] += 1;
    }
  }

  const double interior =
      static_cast<double>(w - 2) * static_cast<double>(h - 2);
  DensityReport rep;
  rep.edge_density = static_cast<double>(edges) / interior;

  double coh = 0.0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] > 0) {
      coh += std::hypot(sum_cos[b], sum_sin[b]) / count[b];
    }
  }
  rep.orientation_coherence = coh / static_cast<double>(count.size());
  rep.density = std::clamp(rep.edge_density * rep.orientation_coherence, 0.0, 1.0);
  return rep;
}

// per_class specs per (class, aspect) entry, seeds running consecutively
// from `seed` in entry order. Deterministic.
inline std::vector<std::pair<ImageSpec, DensityReport>> build_dataset(
    const std::vector<std::pair<ContentClass, anyres::AspectRatio>>& classes,
    int per_class, std::uint64_t seed, double edge_threshold = kEdgeThreshold) {
  if (per_class < 1) throw ConfigError("build_dataset: per_class must be >= 1");
  std::vector<std::pair<ImageSpec, DensityReport>> out;
  out.reserve(classes.size() * static_cast<std::size_t>(per_class));
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    for (int i = 0; i < per_class; ++i) {
      ImageSpec spec{classes[ci].first, classes[ci].second,
                     seed + ci * static_cast<std::uint64_t>(per_class) +
                         static_cast<std::uint64_t>(i)};
      out.emplace_back(spec, structural_density(generate(spec), edge_threshold));
    }
  }
  return out;
}

// Binary PGM (P5, maxval 255) for visual inspection.
inline void write_pgm(const PixelBuffer& img, std::ostream& os) {
  os << "P5\n" << img.width_px << " " << img.height_px << "\n255\n";
  for (float p : img.pixels) {
    os.put(static_cast<char>(
        static_cast<unsigned char>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f))));
  }
}

}  // namespace sidechan::imagegen
