#pragma once

#include <string>
#include <vector>

#include "greedvmaf/greed_features.hpp"
#include "greedvmaf/vmaf_spatial.hpp"

namespace greedvmaf {

struct FeatureConfig {
  GreedConfig greed;
  VmafConfig vmaf;
};

/// The fused feature set for one (reference, distorted) pair, in the order
/// vif_s0..vif_s3, dlm, tgreed_s4_k1..k7, tgreed_s5_k1..k7, sgreed_s4, sgreed_s5.
struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;
};

inline std::vector<std::string> feature_names(const std::vector<int>& scales = {4, 5}) {
  auto names = VmafSpatialFeatures::names();
  const auto greed = GreedFeatures::names(scales);
  names.insert(names.end(), greed.begin(), greed.end());
  return names;
}

inline FeatureVector extract_features(const VideoSequence& ref, const VideoSequence& dist,
                                      const FeatureConfig& cfg = {}) {
  const auto aligned = align_for_comparison(ref, dist);
  const auto vmaf = extract_vmaf_spatial(aligned.pr, aligned.dist, cfg.vmaf);
  const auto greed = extract_greed_features(ref, dist, cfg.greed);
  FeatureVector fv{feature_names(cfg.greed.scales), vmaf.values()};
  const auto g = greed.values();
  fv.values.insert(fv.values.end(), g.begin(), g.end());
  return fv;
}

}  // namespace greedvmaf
