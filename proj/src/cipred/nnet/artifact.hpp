#pragma once

#include <string>

#include "cipred/nnet/train.hpp"

namespace cipred::nnet {

// Model container: "CIMA1" magic line, a length-prefixed canonical JSON
// header (config, fingerprint, standardizer, history), then named tensors as
// (u32 name length, name, u32 rank, u32 dims..., float32 payload), little
// endian throughout. Loading validates tensor shapes against the
// architecture in the header.
void save_artifact(const ModelArtifact& artifact, const std::string& path);
ModelArtifact load_artifact(const std::string& path);

// Backbone-only container (pretraining output) in the same format.
void save_backbone(const ParamSet& backbone, const ArchConfig& arch,
                   const TrainHistory& history, const std::string& path);
struct BackboneFile {
    ParamSet backbone;
    ArchConfig arch;
    TrainHistory history;
};
BackboneFile load_backbone(const std::string& path);

}  // namespace cipred::nnet
