// Dev-only scratch: measure per-class density stats at 672x672.
#include <cstdio>
#include <vector>

#include "sidechan/imagegen.hpp"

using namespace sidechan;
using namespace sidechan::imagegen;

static void run(int W, int H) {
  std::printf("=== %dx%d ===\n", W, H);
  const int n = 250;
  for (ContentClass c : {ContentClass::CryptoNoise, ContentClass::Document,
                         ContentClass::Nature, ContentClass::XRay}) {
    std::vector<double> d, e, coh, mi;
    std::vector<double> d_sparse, d_dense;
    for (int i = 0; i < n; ++i) {
      ImageSpec spec{c, {W, H}, static_cast<std::uint64_t>(i)};
      PixelBuffer img = generate(spec);
      DensityReport r = structural_density(img);
      d.push_back(r.density);
      e.push_back(r.edge_density);
      coh.push_back(r.orientation_coherence);
      mi.push_back(img.mean_intensity());
      if (c == ContentClass::Document) {
        ((spec.seed % 5) >= 2 ? d_dense : d_sparse).push_back(r.density);
      }
    }
    std::printf("%-13s density mean=%.4f sd=%.4f min=%.4f max=%.4f | edge=%.4f coh=%.4f | intensity=%.3f\n",
                to_string(c).c_str(), mean_of(d), stddev_of(d), min_of(d),
                max_of(d), mean_of(e), mean_of(coh), mean_of(mi));
    if (c == ContentClass::Document) {
      std::printf("    sparse mean=%.4f min=%.4f max=%.4f | dense mean=%.4f min=%.4f max=%.4f\n",
                  mean_of(d_sparse), min_of(d_sparse), max_of(d_sparse),
                  mean_of(d_dense), min_of(d_dense), max_of(d_dense));
    }
  }
}

int main() {
  run(672, 672);
  run(336, 672);
}
