#pragma once

// Dynamic high-resolution preprocessing model: aspect-ratio-driven grid
// selection, the (m*n)+1 patch-count rule, and the two hardened
// preprocessing modes (constant-work padding, static single-patch).

#include <cstdint>
#include <string>
#include <vector>

#include "sidechan/common.hpp"

namespace sidechan::anyres {

struct AspectRatio {
  int width_px = 1;
  int height_px = 1;

  bool valid() const { return width_px >= 1 && height_px >= 1; }

  AspectRatio transposed() const { return {height_px, width_px}; }

  // Exact rational comparison; no float equality.
  friend bool same_ratio(const AspectRatio& a, const AspectRatio& b) {
    return static_cast<std::int64_t>(a.width_px) * b.height_px ==
           static_cast<std::int64_t>(b.width_px) * a.height_px;
  }

  friend bool operator==(const AspectRatio&, const AspectRatio&) = default;
};

struct GridConfig {
  int m = 1;  // columns
  int n = 1;  // rows

  bool valid() const { return m >= 1 && n >= 1; }
  int total_patches() const { return m * n + 1; }  // local tiles + global view
  GridConfig transposed() const { return {n, m}; }

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

enum class PreprocessMode { Dynamic, ConstantPad, StaticPrivacy };

inline std::string to_string(PreprocessMode mode) {
  switch (mode) {
    case PreprocessMode::Dynamic: return "dynamic";
    case PreprocessMode::ConstantPad: return "constant-pad";
    case PreprocessMode::StaticPrivacy: return "static";
  }
  throw Error("unhandled PreprocessMode");
}

inline PreprocessMode preprocess_mode_from(const std::string& text) {
  if (text == "dynamic") return PreprocessMode::Dynamic;
  if (text == "constant-pad") return PreprocessMode::ConstantPad;
  if (text == "static") return PreprocessMode::StaticPrivacy;
  throw ConfigError("unknown preprocess mode: " + text);
}

struct PreprocessPlan {
  PreprocessMode mode = PreprocessMode::Dynamic;
  GridConfig grid;
  int patch_count = 2;
  double distortion = 0.0;
};

struct GridCandidateSet {
  std::vector<GridConfig> candidates;
  int max_total_patches = 7;

  void validate() const {
    if (candidates.empty()) throw ConfigError("empty grid candidate set");
    for (const GridConfig& g : candidates) {
      if (!g.valid()) throw ConfigError("grid candidate with m or n < 1");
      if (g.total_patches() > max_total_patches) {
        throw ConfigError("grid candidate exceeds max_total_patches");
      }
    }
  }
};

// Grids a dynamic-resolution pipeline actually tiles with. (1,1) is not a
// dynamic candidate: single-patch processing is what StaticPrivacy falls
// back to, never an outcome of grid search.
inline GridCandidateSet default_candidates() {
  return {{{1, 2}, {2, 1}, {2, 2}, {1, 3}, {3, 1}}, 7};
}

// Aspect-ratio mismatch in log space: |ln(m/n) - ln(w/h)|. Zero iff the
// ratios agree exactly; symmetric under transposing both image and grid.
inline double distortion(const AspectRatio& image, const GridConfig& grid) {
  if (!image.valid()) throw ConfigError("aspect ratio with nonpositive side");
  if (!grid.valid()) throw ConfigError("grid with nonpositive side");
  const double g = static_cast<double>(grid.m) / static_cast<double>(grid.n);
  const double a = static_cast<double>(image.width_px) /
                   static_cast<double>(image.height_px);
  return std::abs(std::log(g) - std::log(a));
}

// Minimal-distortion candidate. Ties go to the higher patch count (the
// pipeline keeps as much resolution as the tie allows), then to candidate
// list order. Deterministic.
inline GridConfig select_grid(const AspectRatio& image,
                              const GridCandidateSet& set) {
  set.validate();
  const GridConfig* best = nullptr;
  double best_d = 0.0;
  for (const GridConfig& g : set.candidates) {
    const double d = distortion(image, g);
    if (best == nullptr || d < best_d ||
        (d == best_d && g.total_patches() > best->total_patches())) {
      best = &g;
      best_d = d;
    }
  }
  return *best;
}

inline PreprocessPlan plan_preprocess(const AspectRatio& image,
                                      PreprocessMode mode,
                                      const GridCandidateSet& set) {
  switch (mode) {
    case PreprocessMode::Dynamic: {
      const GridConfig g = select_grid(image, set);
      return {mode, g, g.total_patches(), distortion(image, g)};
    }
    case PreprocessMode::ConstantPad: {
      set.validate();
      // Worst-case grid regardless of the input; first maximal wins.
      const GridConfig* worst = &set.candidates.front();
      for (const GridConfig& g : set.candidates) {
        if (g.total_patches() > worst->total_patches()) worst = &g;
      }
      return {mode, *worst, worst->total_patches(), distortion(image, *worst)};
    }
    case PreprocessMode::StaticPrivacy: {
      // Single resized view; no global+local decomposition.
      const GridConfig g{1, 1};
      return {mode, g, 1, distortion(image, g)};
    }
  }
  throw Error("unhandled PreprocessMode");
}

}  // namespace sidechan::anyres
