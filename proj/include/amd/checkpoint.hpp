#pragma once

#include "amd/model.hpp"

#include <string>

namespace amd {

// Single-file archive: "AMDC" magic, format version, JSON model-config
// header, then named float32 tensors. include_aux=false drops the
// auxiliary-head tensors (APE pooling/classifier, VAA, DBM); everything the
// inference path touches is always written.
void save_checkpoint(const Model<float>& model, const std::string& path,
                     bool include_aux = true);

// Rebuilds a model from the archive. Unknown tensor names and shape
// mismatches are rejected; missing tensors are tolerated only for auxiliary
// heads (left at deterministic init). When expected is given, any config
// field difference is a validation error naming the field.
Model<float> load_checkpoint(const std::string& path,
                             const ModelConfig* expected = nullptr);

}  // namespace amd
