#pragma once

#include "fuma/classifier.hpp"
#include "fuma/cluster_model.hpp"
#include "fuma/clustering.hpp"
#include "fuma/distributions.hpp"
#include "fuma/error.hpp"
#include "fuma/evaluation.hpp"
#include "fuma/event_ingest.hpp"
#include "fuma/feature_extraction.hpp"
#include "fuma/features.hpp"
#include "fuma/matrix.hpp"
#include "fuma/parallel.hpp"
#include "fuma/pipeline.hpp"
#include "fuma/rng.hpp"
#include "fuma/rule_mining.hpp"
#include "fuma/sessionizer.hpp"
#include "fuma/statistics.hpp"
#include "fuma/synth.hpp"

namespace fuma {
inline constexpr const char* kVersion = "0.1.0";
}
