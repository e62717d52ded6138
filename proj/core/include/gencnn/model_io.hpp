#pragma once

#include <cstdint>
#include <string>

#include "gencnn/model.hpp"

namespace gencnn {

inline constexpr const char kModelMagic[7] = {'G', 'E', 'N', 'C', 'N', 'N', '1'};
inline constexpr uint32_t kModelFormatVersion = 1;

/// Binary model container: magic + version, the full ModelConfig, the
/// vocabulary (embedded verbatim in its text format), then every parameter
/// tensor and its AdaGrad accumulator as named little-endian float32 payloads.
void save_model(const std::string& path, const ParameterSet& ps, const Vocabulary& vocab);

struct LoadedModel {
  ParameterSet params;
  Vocabulary vocab;
};

/// Rejects unknown magic or version before reading any tensor payload.
LoadedModel load_model(const std::string& path);

}  // namespace gencnn
