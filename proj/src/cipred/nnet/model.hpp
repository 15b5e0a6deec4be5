#pragma once

#include <array>
#include <string>

#include "cipred/nnet/attention.hpp"
#include "cipred/nnet/layers.hpp"
#include "cipred/nnet/tensor.hpp"

namespace cipred::nnet {

// Compact 4-block convolutional backbone (3 -> 16 -> 32 -> 64 -> 128, each
// block conv3x3 + relu + 2x2 max pool; a 128x128 input ends as an 8x8 grid of
// 128-dim region vectors) plus the clinical encoder and the bilinear
// attention fusion head.
struct ArchConfig {
    bool depthwise = false;  // blocks 2..4 as depthwise separable convolutions
    std::array<int, 5> channels{3, 16, 32, 64, 128};
    int clin_features = 7;
    int clin_dim = 32;
    int rank = 32;
    int fused_dim = 64;

    int region_dim() const { return channels[4]; }
};

ParamSet make_backbone_params(const ArchConfig& arch, std::uint64_t seed);
void append_fusion_params(ParamSet& p, const ArchConfig& arch, std::uint64_t seed);
void append_source_head(ParamSet& p, const ArchConfig& arch, int n_classes,
                        std::uint64_t seed);

// SHA-256 over name/shape/payload of every tensor whose name starts with the
// prefix (freeze verification).
std::string hash_params(const ParamSet& p, const std::string& prefix);

struct BackboneStageCache {
    std::vector<float> dw_pre;    // depthwise output (depthwise variant only)
    std::vector<float> conv_pre;  // pre-activation conv output
    std::vector<float> relu_out;
    std::vector<float> pool_out;
    std::vector<unsigned char> argmax;
    int h = 0, w = 0;  // input resolution of this stage
};

struct ModelWork {
    // Backbone caches.
    std::vector<float> input;  // 3 x h x w
    std::array<BackboneStageCache, 4> stages;
    std::vector<float> regions;  // K x region_dim
    int k_regions = 0;

    // Fusion caches.
    std::vector<float> z;         // standardized clinical features
    std::vector<float> enc_pre;   // clinical encoder pre-activation
    std::vector<float> q;         // encoded clinical vector
    AttentionCache<float> attn;
    std::vector<float> alpha;
    std::vector<float> fused;
    std::vector<float> drop_mask;
    std::vector<float> fused_do;

    // Scratch for backward.
    std::vector<float> scratch_a, scratch_b, scratch_c;
};

// Runs the backbone on a c0 x h x w image (h, w divisible by 16); fills
// work.regions as K x region_dim with K = (h/16) * (w/16). Returns K.
int backbone_forward(const ArchConfig& arch, const ParamSet& p, const float* img,
                     int h, int w, ModelWork& work);

// Backpropagates d(regions) through the backbone, accumulating parameter
// gradients (pretraining path).
void backbone_backward(const ArchConfig& arch, const ParamSet& p,
                       const float* dregions, ModelWork& work, Grads& grads);

// Clinical encoder + attention + dropout + head. train enables dropout with
// the given rng. Returns the logit.
float fusion_forward(const ArchConfig& arch, const ParamSet& p, const float* z,
                     bool train, float dropout_rate, Rng* rng, ModelWork& work);

// Backward from dlogit; accumulates fusion gradients. When dregions is
// non-null, the gradient w.r.t. the backbone regions is written there
// (K x region_dim, overwritten).
void fusion_backward(const ArchConfig& arch, const ParamSet& p, float dlogit,
                     ModelWork& work, Grads& grads, float* dregions);

// Source-task head for pretraining: global average pool over regions then an
// affine map to class logits.
void source_head_forward(const ArchConfig& arch, const ParamSet& p, ModelWork& work,
                         std::vector<float>& logits);
void source_head_backward(const ArchConfig& arch, const ParamSet& p,
                          const std::vector<float>& dlogits, ModelWork& work,
                          Grads& grads, std::vector<float>& dregions);

}  // namespace cipred::nnet
