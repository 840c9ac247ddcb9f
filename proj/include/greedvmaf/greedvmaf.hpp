#pragma once

#include "greedvmaf/bandpass.hpp"
#include "greedvmaf/error.hpp"
#include "greedvmaf/eval.hpp"
#include "greedvmaf/features.hpp"
#include "greedvmaf/ggd.hpp"
#include "greedvmaf/greed_features.hpp"
#include "greedvmaf/manifest.hpp"
#include "greedvmaf/media_io.hpp"
#include "greedvmaf/parallel.hpp"
#include "greedvmaf/stats.hpp"
#include "greedvmaf/svr.hpp"
#include "greedvmaf/vmaf_spatial.hpp"
