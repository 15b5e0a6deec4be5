#include "cipred/nnet/model.hpp"

#include <cmath>
#include <cstring>

#include "cipred/core/sha256.hpp"

namespace cipred::nnet {

ParamSet make_backbone_params(const ArchConfig& arch, std::uint64_t seed) {
    ParamSet p;
    Rng rng(derive_seed(seed, 0xbb));
    for (int i = 0; i < 4; ++i) {
        const int c_in = arch.channels[i], c_out = arch.channels[i + 1];
        const std::string base = "backbone.conv" + std::to_string(i + 1);
        if (arch.depthwise && i > 0) {
            auto& dw = p.add(base + ".dw.w", {c_in, 3, 3});
            he_init(dw, 9, rng);
            p.add(base + ".dw.b", {c_in});
            auto& pw = p.add(base + ".pw.w", {c_out, c_in});
            he_init(pw, static_cast<std::size_t>(c_in), rng);
            p.add(base + ".pw.b", {c_out});
        } else {
            auto& w = p.add(base + ".w", {c_out, c_in, 3, 3});
            he_init(w, static_cast<std::size_t>(c_in) * 9, rng);
            p.add(base + ".b", {c_out});
        }
    }
    return p;
}

void append_fusion_params(ParamSet& p, const ArchConfig& arch, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xf0));
    auto& enc_w = p.add("fusion.enc.w", {arch.clin_dim, arch.clin_features});
    xavier_init(enc_w, static_cast<std::size_t>(arch.clin_features), rng);
    // The clinical gate multiplies every image path; it must start alive
    // (positive) for all inputs, including the zeroed-clinical ablation.
    // Positive encoder bias plus a positive gate projection keep the initial
    // gate near-constant, so early training is driven by the image branch.
    auto& enc_b = p.add("fusion.enc.b", {arch.clin_dim});
    std::fill(enc_b.data.begin(), enc_b.data.end(), 0.5f);
    auto& u = p.add("fusion.att.img_proj", {arch.region_dim(), arch.rank});
    xavier_init(u, static_cast<std::size_t>(arch.region_dim()), rng);
    auto& w = p.add("fusion.att.clin_proj", {arch.clin_dim, arch.rank});
    {
        const double scale = 0.7 / std::sqrt(static_cast<double>(arch.clin_dim));
        for (auto& x : w.data)
            x = static_cast<float>(scale * std::fabs(rng.normal()));
    }
    auto& logit = p.add("fusion.att.logit", {arch.rank});
    xavier_init(logit, static_cast<std::size_t>(arch.rank), rng);
    auto& pool = p.add("fusion.att.pool_proj", {arch.rank, arch.fused_dim});
    xavier_init(pool, static_cast<std::size_t>(arch.rank), rng);
    auto& head_w = p.add("fusion.head.w", {1, arch.fused_dim});
    xavier_init(head_w, static_cast<std::size_t>(arch.fused_dim), rng);
    p.add("fusion.head.b", {1});
}

void append_source_head(ParamSet& p, const ArchConfig& arch, int n_classes,
                        std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x50));
    auto& w = p.add("src_head.w", {n_classes, arch.region_dim()});
    xavier_init(w, static_cast<std::size_t>(arch.region_dim()), rng);
    p.add("src_head.b", {n_classes});
}

std::string hash_params(const ParamSet& p, const std::string& prefix) {
    Sha256 h;
    for (const auto& t : p.tensors) {
        if (t.name.rfind(prefix, 0) != 0) continue;
        h.update(t.name.data(), t.name.size());
        const std::uint32_t rank = static_cast<std::uint32_t>(t.shape.size());
        h.update(&rank, sizeof(rank));
        for (int d : t.shape) {
            const std::uint32_t dim = static_cast<std::uint32_t>(d);
            h.update(&dim, sizeof(dim));
        }
        h.update(t.data.data(), t.data.size() * sizeof(float));
    }
    return h.hex_digest();
}

int backbone_forward(const ArchConfig& arch, const ParamSet& p, const float* img,
                     int h, int w, ModelWork& work) {
    if (h % 16 != 0 || w % 16 != 0)
        throw ValidationError("backbone input dims must be divisible by 16");
    work.input.assign(img, img + static_cast<std::size_t>(arch.channels[0]) * h * w);

    const float* x = work.input.data();
    int ch = h, cw = w;
    for (int i = 0; i < 4; ++i) {
        const int c_in = arch.channels[i], c_out = arch.channels[i + 1];
        auto& st = work.stages[i];
        st.h = ch;
        st.w = cw;
        const std::size_t hw = static_cast<std::size_t>(ch) * cw;
        st.conv_pre.resize(static_cast<std::size_t>(c_out) * hw);
        const std::string base = "backbone.conv" + std::to_string(i + 1);
        if (arch.depthwise && i > 0) {
            st.dw_pre.resize(static_cast<std::size_t>(c_in) * hw);
            dwconv3x3_forward(x, c_in, ch, cw, p.at(base + ".dw.w").data.data(),
                              p.at(base + ".dw.b").data.data(), st.dw_pre.data());
            conv1x1_forward(st.dw_pre.data(), c_in, ch, cw,
                            p.at(base + ".pw.w").data.data(),
                            p.at(base + ".pw.b").data.data(), c_out, st.conv_pre.data());
        } else {
            conv3x3_forward(x, c_in, ch, cw, p.at(base + ".w").data.data(),
                            p.at(base + ".b").data.data(), c_out, st.conv_pre.data());
        }
        st.relu_out.resize(st.conv_pre.size());
        relu_forward(st.conv_pre.data(), st.conv_pre.size(), st.relu_out.data());
        st.pool_out.resize(static_cast<std::size_t>(c_out) * (hw / 4));
        st.argmax.resize(st.pool_out.size());
        maxpool2x2_forward(st.relu_out.data(), c_out, ch, cw, st.pool_out.data(),
                           st.argmax.data());
        x = st.pool_out.data();
        ch /= 2;
        cw /= 2;
    }

    const int K = ch * cw;
    const int d = arch.region_dim();
    work.k_regions = K;
    work.regions.resize(static_cast<std::size_t>(K) * d);
    // Feature map (d x K grid) transposed to region-major layout.
    const float* feat = work.stages[3].pool_out.data();
    for (int dd = 0; dd < d; ++dd)
        for (int k = 0; k < K; ++k)
            work.regions[static_cast<std::size_t>(k) * d + dd] =
                feat[static_cast<std::size_t>(dd) * K + k];
    return K;
}

void backbone_backward(const ArchConfig& arch, const ParamSet& p,
                       const float* dregions, ModelWork& work, Grads& grads) {
    const int d = arch.region_dim();
    const int K = work.k_regions;

    // Region-major gradient back to the feature-map layout.
    std::vector<float>& dfeat = work.scratch_a;
    dfeat.assign(static_cast<std::size_t>(d) * K, 0.0f);
    for (int k = 0; k < K; ++k)
        for (int dd = 0; dd < d; ++dd)
            dfeat[static_cast<std::size_t>(dd) * K + k] =
                dregions[static_cast<std::size_t>(k) * d + dd];

    std::vector<float> dcur = dfeat;  // gradient w.r.t. pool_out of stage i
    for (int i = 3; i >= 0; --i) {
        auto& st = work.stages[i];
        const int c_in = arch.channels[i], c_out = arch.channels[i + 1];
        const std::string base = "backbone.conv" + std::to_string(i + 1);

        std::vector<float>& drelu = work.scratch_b;
        drelu.resize(static_cast<std::size_t>(c_out) * st.h * st.w);
        maxpool2x2_backward(dcur.data(), c_out, st.h, st.w, st.argmax.data(),
                            drelu.data());
        // In-place through the rectifier.
        relu_backward(st.conv_pre.data(), drelu.data(), drelu.size(), drelu.data());

        const float* stage_input =
            i == 0 ? work.input.data() : work.stages[i - 1].pool_out.data();
        std::vector<float>& dx = work.scratch_c;
        const bool need_dx = i > 0;
        if (need_dx) dx.assign(static_cast<std::size_t>(c_in) * st.h * st.w, 0.0f);

        if (arch.depthwise && i > 0) {
            std::vector<float> ddw(static_cast<std::size_t>(c_in) * st.h * st.w, 0.0f);
            conv1x1_backward(st.dw_pre.data(), c_in, st.h, st.w,
                             p.at(base + ".pw.w").data.data(), c_out, drelu.data(),
                             ddw.data(), grads.g[p.find(base + ".pw.w")].data(),
                             grads.g[p.find(base + ".pw.b")].data());
            dwconv3x3_backward(stage_input, c_in, st.h, st.w,
                               p.at(base + ".dw.w").data.data(), ddw.data(),
                               need_dx ? dx.data() : nullptr,
                               grads.g[p.find(base + ".dw.w")].data(),
                               grads.g[p.find(base + ".dw.b")].data());
        } else {
            conv3x3_backward(stage_input, c_in, st.h, st.w,
                             p.at(base + ".w").data.data(), c_out, drelu.data(),
                             need_dx ? dx.data() : nullptr,
                             grads.g[p.find(base + ".w")].data(),
                             grads.g[p.find(base + ".b")].data());
        }
        if (need_dx) dcur = dx;
    }
}

float fusion_forward(const ArchConfig& arch, const ParamSet& p, const float* z,
                     bool train, float dropout_rate, Rng* rng, ModelWork& work) {
    work.z.assign(z, z + arch.clin_features);
    work.enc_pre.resize(arch.clin_dim);
    work.q.resize(arch.clin_dim);
    affine_forward(z, arch.clin_features, p.at("fusion.enc.w").data.data(),
                   p.at("fusion.enc.b").data.data(), arch.clin_dim, work.enc_pre.data());
    relu_forward(work.enc_pre.data(), work.enc_pre.size(), work.q.data());

    AttentionDims<float> dm;
    dm.k_regions = work.k_regions;
    dm.d_v = arch.region_dim();
    dm.d_q = arch.clin_dim;
    dm.rank = arch.rank;
    dm.d_out = arch.fused_dim;
    work.alpha.resize(work.k_regions);
    work.fused.resize(arch.fused_dim);
    attention_forward(dm, work.regions.data(), work.q.data(),
                      p.at("fusion.att.img_proj").data.data(),
                      p.at("fusion.att.clin_proj").data.data(),
                      p.at("fusion.att.logit").data.data(),
                      p.at("fusion.att.pool_proj").data.data(), work.attn,
                      work.alpha.data(), work.fused.data());

    work.drop_mask.resize(arch.fused_dim);
    work.fused_do.resize(arch.fused_dim);
    if (train && dropout_rate > 0.0f) {
        if (!rng) throw ValidationError("dropout in train mode needs an rng");
        dropout_forward(work.fused.data(), work.fused.size(),
                        static_cast<double>(dropout_rate), *rng, work.drop_mask.data(),
                        work.fused_do.data());
    } else {
        std::fill(work.drop_mask.begin(), work.drop_mask.end(), 1.0f);
        work.fused_do = work.fused;
    }

    float logit = 0.0f;
    affine_forward(work.fused_do.data(), arch.fused_dim,
                   p.at("fusion.head.w").data.data(), p.at("fusion.head.b").data.data(),
                   1, &logit);
    return logit;
}

void fusion_backward(const ArchConfig& arch, const ParamSet& p, float dlogit,
                     ModelWork& work, Grads& grads, float* dregions) {
    std::vector<float>& dfused_do = work.scratch_a;
    dfused_do.resize(arch.fused_dim);
    affine_backward(work.fused_do.data(), arch.fused_dim,
                    p.at("fusion.head.w").data.data(), 1, &dlogit, dfused_do.data(),
                    grads.g[p.find("fusion.head.w")].data(),
                    grads.g[p.find("fusion.head.b")].data());

    std::vector<float>& dfused = work.scratch_b;
    dfused.resize(arch.fused_dim);
    dropout_backward(work.drop_mask.data(), dfused_do.data(), dfused.size(),
                     dfused.data());

    AttentionDims<float> dm;
    dm.k_regions = work.k_regions;
    dm.d_v = arch.region_dim();
    dm.d_q = arch.clin_dim;
    dm.rank = arch.rank;
    dm.d_out = arch.fused_dim;
    std::vector<float>& dq = work.scratch_c;
    dq.assign(arch.clin_dim, 0.0f);
    if (dregions)
        std::memset(dregions, 0,
                    sizeof(float) * static_cast<std::size_t>(work.k_regions) *
                        arch.region_dim());
    attention_backward(dm, p.at("fusion.att.img_proj").data.data(),
                       p.at("fusion.att.clin_proj").data.data(),
                       p.at("fusion.att.logit").data.data(),
                       p.at("fusion.att.pool_proj").data.data(), work.attn,
                       dfused.data(), dregions, dq.data(),
                       grads.g[p.find("fusion.att.img_proj")].data(),
                       grads.g[p.find("fusion.att.clin_proj")].data(),
                       grads.g[p.find("fusion.att.logit")].data(),
                       grads.g[p.find("fusion.att.pool_proj")].data());

    std::vector<float> denc(arch.clin_dim);
    relu_backward(work.enc_pre.data(), dq.data(), denc.size(), denc.data());
    affine_backward(work.z.data(), arch.clin_features, p.at("fusion.enc.w").data.data(),
                    arch.clin_dim, denc.data(), static_cast<float*>(nullptr),
                    grads.g[p.find("fusion.enc.w")].data(),
                    grads.g[p.find("fusion.enc.b")].data());
}

void source_head_forward(const ArchConfig& arch, const ParamSet& p, ModelWork& work,
                         std::vector<float>& logits) {
    const int d = arch.region_dim();
    const int K = work.k_regions;
    std::vector<float>& feat = work.scratch_a;
    feat.assign(d, 0.0f);
    for (int k = 0; k < K; ++k)
        for (int dd = 0; dd < d; ++dd)
            feat[dd] += work.regions[static_cast<std::size_t>(k) * d + dd];
    const float inv = 1.0f / static_cast<float>(K);
    for (float& f : feat) f *= inv;

    const auto& w = p.at("src_head.w");
    const int n_cls = w.shape[0];
    logits.resize(n_cls);
    affine_forward(feat.data(), d, w.data.data(), p.at("src_head.b").data.data(), n_cls,
                   logits.data());
}

void source_head_backward(const ArchConfig& arch, const ParamSet& p,
                          const std::vector<float>& dlogits, ModelWork& work,
                          Grads& grads, std::vector<float>& dregions) {
    const int d = arch.region_dim();
    const int K = work.k_regions;
    // Recompute the pooled feature (cheap) for the weight gradient.
    std::vector<float> feat(d, 0.0f);
    for (int k = 0; k < K; ++k)
        for (int dd = 0; dd < d; ++dd)
            feat[dd] += work.regions[static_cast<std::size_t>(k) * d + dd];
    const float inv = 1.0f / static_cast<float>(K);
    for (float& f : feat) f *= inv;

    const auto& w = p.at("src_head.w");
    const int n_cls = w.shape[0];
    std::vector<float> dfeat(d, 0.0f);
    affine_backward(feat.data(), d, w.data.data(), n_cls, dlogits.data(), dfeat.data(),
                    grads.g[p.find("src_head.w")].data(),
                    grads.g[p.find("src_head.b")].data());

    dregions.assign(static_cast<std::size_t>(K) * d, 0.0f);
    for (int k = 0; k < K; ++k)
        for (int dd = 0; dd < d; ++dd)
            dregions[static_cast<std::size_t>(k) * d + dd] = dfeat[dd] * inv;
}

}  // namespace cipred::nnet
