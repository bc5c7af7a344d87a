#pragma once

// Parameterized leakage model: maps (patch count, structural density,
// cache/load conditions) to execution time and LLC miss expectations,
// plus a seeded stochastic observation generator. Built-in profiles are
// calibrated against published per-platform measurements.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sidechan/anyres.hpp"
#include "sidechan/common.hpp"

namespace sidechan::hwmodel {

struct HardwareProfile {
  std::string name;
  std::uint64_t llc_bytes = 0;
  double time_slope_s_per_patch = 0.0;  // a: seconds per patch
  double time_intercept_s = 0.0;        // b
  double density_time_coeff_s = 0.0;    // gamma: seconds per density*patch
  double llc_base = 0.0;                // c0: misses
  double llc_sensitivity = 0.0;         // s: misses per density*patch
  double time_noise_rel = 0.0;          // sigma_t, relative
  double llc_noise_abs = 0.0;           // sigma_c, misses
  double warm_factor = 1.0;

  void validate(int max_total_patches = 7) const {
    if (llc_base <= 0.0) throw ConfigError(name + ": llc_base must be > 0");
    if (llc_sensitivity < 0.0) {
      throw ConfigError(name + ": llc_sensitivity must be >= 0");
    }
    if (time_noise_rel < 0.0 || llc_noise_abs < 0.0) {
      throw ConfigError(name + ": noise parameters must be >= 0");
    }
    if (!(warm_factor > 0.0 && warm_factor <= 1.0)) {
      throw ConfigError(name + ": warm_factor must be in (0,1]");
    }
    for (int patches = 2; patches <= max_total_patches; ++patches) {
      if (time_slope_s_per_patch * patches + time_intercept_s <= 0.0) {
        throw ConfigError(name + ": nonpositive expected time at " +
                          std::to_string(patches) + " patches");
      }
    }
  }
};

enum class CacheState { Cold, Warm };

inline std::string to_string(CacheState cache) {
  return cache == CacheState::Cold ? "cold" : "warm";
}

inline CacheState cache_state_from(const std::string& text) {
  if (text == "cold") return CacheState::Cold;
  if (text == "warm") return CacheState::Warm;
  throw ConfigError("unknown cache state: " + text);
}

struct LoadCondition {
  enum class Kind { Idle, Stressed };
  Kind kind = Kind::Idle;
  double llc_offset = 0.0;  // misses added while Stressed

  static LoadCondition idle() { return {Kind::Idle, 0.0}; }
  static LoadCondition stressed(double offset = kDefaultStressOffset) {
    return {Kind::Stressed, offset};
  }

  void validate() const {
    if (kind == Kind::Idle && llc_offset != 0.0) {
      throw ConfigError("idle load must carry a zero llc offset");
    }
    if (llc_offset < 0.0) throw ConfigError("negative load llc offset");
  }

  // Background cache pressure lifts the miss floor by about this much.
  static constexpr double kDefaultStressOffset = 0.2e9;
};

inline std::string to_string(LoadCondition::Kind kind) {
  return kind == LoadCondition::Kind::Idle ? "idle" : "stressed";
}

// The attacker's leakage vector: (execution time, LLC miss count).
struct Observation {
  double time_s = 0.0;
  double llc_misses = 0.0;
};

// Fits t = a*N + b exactly through two (patches, seconds) anchors.
inline std::pair<double, double> calibrate_time(
    std::pair<int, double> anchor_lo, std::pair<int, double> anchor_hi) {
  if (anchor_lo.first == anchor_hi.first) {
    throw ConfigError("calibrate_time: anchors share a patch count");
  }
  const double a = (anchor_hi.second - anchor_lo.second) /
                   static_cast<double>(anchor_hi.first - anchor_lo.first);
  const double b = anchor_lo.second - a * anchor_lo.first;
  return {a, b};
}

// Expected wall time. The affine patch term is calibrated for N >= 2; N == 1
// only occurs in static privacy mode and is handled as an extrapolation of
// the model (max(a+b, a/2), floored at a small positive constant).
inline double expected_time(const HardwareProfile& p, int patches,
                            double density, CacheState cache) {
  if (patches < 1) throw ConfigError("expected_time: patches must be >= 1");
  if (density < 0.0 || density > 1.0) {
    throw ConfigError("expected_time: density outside [0,1]");
  }
  double base = p.time_slope_s_per_patch * patches + p.time_intercept_s;
  if (patches == 1) {
    base = std::max(p.time_slope_s_per_patch + p.time_intercept_s,
                    0.5 * p.time_slope_s_per_patch);
    base = std::max(base, 0.01);
  }
  const double f = cache == CacheState::Cold ? 1.0 : p.warm_factor;
  const double t = f * base + p.density_time_coeff_s * density * patches;
  if (!std::isfinite(t)) throw Error("expected_time: non-finite result");
  return t;
}

inline double expected_llc(const HardwareProfile& p, int patches,
                           double density, const LoadCondition& load) {
  if (density < 0.0 || density > 1.0) {
    throw ConfigError("expected_llc: density outside [0,1]");
  }
  load.validate();
  return p.llc_base + p.llc_sensitivity * density * patches + load.llc_offset;
}

// One simulated trial. Noise is zero-mean normal: relative on time, absolute
// on misses; both outputs clamped positive. Identical seeds replay exactly.
inline Observation simulate(const anyres::PreprocessPlan& plan, double density,
                            const HardwareProfile& profile, CacheState cache,
                            const LoadCondition& load, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  const double eps_t = rng.normal() * profile.time_noise_rel;
  const double eps_c = rng.normal() * profile.llc_noise_abs;
  const double t =
      expected_time(profile, plan.patch_count, density, cache) * (1.0 + eps_t);
  const double c =
      expected_llc(profile, plan.patch_count, density, load) + eps_c;
  return {std::max(t, 1e-9), std::max(c, 0.0)};
}

// Reference platforms. Time coefficients come straight from the published
// low/high anchors (3 patches -> 49 s, 5 -> 111 s on the Intel box; 18/29 s
// on the AMD box). The Intel LLC pair (base, sensitivity) reproduces the
// published per-class miss means; the AMD part saw no content signal at all,
// so its sensitivity and density-time coupling are zero and only the noise
// floor remains. sigma_c on the Intel profile is the calibrated value frozen
// by the noise sweep (see docs/calibration.md).
inline const std::vector<HardwareProfile>& builtin_profiles() {
  static const std::vector<HardwareProfile> profiles = [] {
    std::vector<HardwareProfile> out;
    HardwareProfile intel;
    intel.name = "intel-i7-13700";
    intel.llc_bytes = 30ull * 1024 * 1024;
    intel.time_slope_s_per_patch = 31.0;
    intel.time_intercept_s = -44.0;
    intel.density_time_coeff_s = 0.70;
    intel.llc_base = 16.84e9;
    intel.llc_sensitivity = 0.235e9;
    intel.time_noise_rel = 0.015;
    intel.llc_noise_abs = 0.10e9;  // calibrated; see docs/calibration.md
    intel.warm_factor = 0.97;
    out.push_back(intel);

    HardwareProfile amd;
    amd.name = "amd-7950x";
    amd.llc_bytes = 64ull * 1024 * 1024;
    amd.time_slope_s_per_patch = 5.5;
    amd.time_intercept_s = 1.5;
    amd.density_time_coeff_s = 0.0;
    amd.llc_base = 4.6e9;
    amd.llc_sensitivity = 0.0;
    amd.time_noise_rel = 0.015;
    amd.llc_noise_abs = 0.10e9;
    amd.warm_factor = 0.97;
    out.push_back(amd);
    return out;
  }();
  return profiles;
}

inline const HardwareProfile& find_profile(const std::string& name) {
  for (const HardwareProfile& p : builtin_profiles()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown hardware profile: " + name);
}

}  // namespace sidechan::hwmodel
