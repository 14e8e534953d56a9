#pragma once

#include <string>

#include "plab/collapse.hpp"
#include "plab/matrix.hpp"

namespace plab {
namespace featdump {

// Everything a full collapse report needs, captured from one model state.
struct FeatureDump {
    collapse::FeatureBatch batch; // features + labels + num_classes
    Matrix logits;                // N x C
    Matrix classifier;            // C x d
};

// Plain-text format, LF endings, %.17g numerics:
//   plab-features 1
//   <N> <D> <C>
//   N lines: <label> <D features> <C logits>
//   C lines: <D classifier weights>
void write_feature_dump(const FeatureDump& dump, const std::string& path);
FeatureDump read_feature_dump(const std::string& path);

} // namespace featdump
} // namespace plab
