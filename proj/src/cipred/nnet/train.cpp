#include "cipred/nnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cipred/core/threading.hpp"

namespace cipred::nnet {

namespace {

// Replicate a scaled single-channel image into the fixed 3-channel affine
// normalization at arbitrary resolution (the 128x128 path lives in preproc).
std::vector<float> normalize_any(const preproc::Image2d& scaled) {
    const std::size_t hw = scaled.v.size();
    std::vector<float> out(3 * hw);
    for (int c = 0; c < 3; ++c) {
        const float m = preproc::NormalizationConstants::mean[c];
        const float inv = 1.0f / preproc::NormalizationConstants::std[c];
        for (std::size_t i = 0; i < hw; ++i) out[c * hw + i] = (scaled.v[i] - m) * inv;
    }
    return out;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct WorkerPool {
    std::vector<ModelWork> work;
    std::vector<Grads> grads;
    std::vector<double> loss;
    std::vector<double> correct;

    WorkerPool(int n, const ParamSet& params)
        : work(n), loss(n, 0.0), correct(n, 0.0) {
        grads.reserve(n);
        for (int i = 0; i < n; ++i) grads.emplace_back(params);
    }
    void reset() {
        for (auto& g : grads) g.zero();
        std::fill(loss.begin(), loss.end(), 0.0);
        std::fill(correct.begin(), correct.end(), 0.0);
    }
};

}  // namespace

void Standardizer::fit(const std::vector<const ClinicalRecord*>& train_records) {
    if (train_records.empty())
        throw ValidationError("standardizer fit needs at least one record");
    per_center.clear();
    std::map<Center, std::vector<const ClinicalRecord*>> by_center;
    for (const auto* r : train_records) by_center[r->center].push_back(r);

    auto fit_stats = [](const std::vector<const ClinicalRecord*>& recs) {
        Stats s;
        for (const auto* r : recs) {
            const auto f = r->features();
            for (int i = 0; i < 7; ++i) s.mean[i] += f[i];
        }
        for (int i = 0; i < 7; ++i) s.mean[i] /= static_cast<double>(recs.size());
        for (const auto* r : recs) {
            const auto f = r->features();
            for (int i = 0; i < 7; ++i)
                s.sd[i] += (f[i] - s.mean[i]) * (f[i] - s.mean[i]);
        }
        for (int i = 0; i < 7; ++i) {
            s.sd[i] = recs.size() > 1
                          ? std::sqrt(s.sd[i] / static_cast<double>(recs.size() - 1))
                          : 0.0;
            if (s.sd[i] < 1e-12) s.sd[i] = 1.0;
        }
        return s;
    };
    for (const auto& [c, recs] : by_center) per_center[c] = fit_stats(recs);
    pooled = fit_stats(train_records);
    fitted = true;
}

std::array<float, 7> Standardizer::transform(const ClinicalRecord& r,
                                             bool* used_pooled) const {
    if (!fitted) throw ValidationError("standardizer used before fit");
    const auto it = per_center.find(r.center);
    const Stats& s = it != per_center.end() ? it->second : pooled;
    if (used_pooled) *used_pooled = it == per_center.end();
    const auto f = r.features();
    std::array<float, 7> out;
    for (int i = 0; i < 7; ++i)
        out[i] = static_cast<float>((f[i] - s.mean[i]) / s.sd[i]);
    return out;
}

std::string PreprocFingerprint::canonical() const {
    std::ostringstream ss;
    ss << "window=" << window << ";target_mm=" << target_mm << ";img=" << image_size
       << ";norm=0.485,0.456,0.406/0.229,0.224,0.225"
       << ";arch=" << (arch.depthwise ? "dwsep" : "std");
    for (int c : arch.channels) ss << "," << c;
    ss << ";clin=" << arch.clin_features << ":" << arch.clin_dim
       << ";rank=" << arch.rank << ";fused=" << arch.fused_dim;
    return ss.str();
}

PreprocFingerprint ModelArtifact::fingerprint() const {
    PreprocFingerprint fp;
    fp.window = window.describe();
    fp.target_mm = target_mm;
    fp.arch = arch;
    return fp;
}

// ------------------------------------------------------------- pretraining

namespace {

// Smooth class-specific bump layouts on a soft disc, the 2-D sibling of the
// cohort volume patterns.
preproc::Image2d source_image(int cls, int size, double noise_sd, Rng& rng) {
    preproc::Image2d img;
    img.h = img.w = size;
    img.v.assign(static_cast<std::size_t>(size) * size, 0.0f);
    const double c0 = (size - 1) / 2.0;
    const double disc_r = size * 0.42;
    const double jx = rng.uniform(-size * 0.06, size * 0.06);
    const double jy = rng.uniform(-size * 0.06, size * 0.06);
    const double sigma = size * 0.075;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

    // Four bumps at quadrant midpoints; the class picks the sign pattern.
    const double off = size * 0.22;
    const double px[4] = {c0 - off, c0 + off, c0 - off, c0 + off};
    const double py[4] = {c0 - off, c0 - off, c0 + off, c0 + off};
    double sign[4];
    for (int b = 0; b < 4; ++b) sign[b] = ((cls >> (b % 2)) & 1) ? 1.0 : -1.0;
    // Make all four classes distinct: flip the last two bumps on classes 2,3.
    if (cls >= 2)
        for (int b = 2; b < 4; ++b) sign[b] = -sign[b];

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dy = y - c0, dx = x - c0;
            double val = std::exp(-1.4 * (dx * dx + dy * dy) / (disc_r * disc_r));
            for (int b = 0; b < 4; ++b) {
                const double bx = px[b] + jx, by = py[b] + jy;
                const double g =
                    std::exp(-((x - bx) * (x - bx) + (y - by) * (y - by)) * inv2s2);
                val += 0.9 * sign[b] * g;
            }
            val += noise_sd * rng.normal();
            img.v[static_cast<std::size_t>(y) * size + x] = static_cast<float>(val);
        }
    }
    // Min-max to [0,1] like the cohort slices.
    float lo = img.v[0], hi = img.v[0];
    for (float v : img.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const float inv = hi > lo ? 1.0f / (hi - lo) : 0.0f;
    for (float& v : img.v) v = (v - lo) * inv;
    return img;
}

}  // namespace

PretrainResult pretrain_backbone(const ArchConfig& arch, const SourceTaskSpec& task,
                                 const TrainConfig& cfg) {
    cfg.validate();
    if (task.image_size % 16 != 0)
        throw ValidationError("source task image size must be divisible by 16");
    if (task.n_classes < 2) throw ValidationError("source task needs >= 2 classes");

    ParamSet params = make_backbone_params(arch, cfg.seed);
    append_source_head(params, arch, task.n_classes, cfg.seed);
    AdamState adam(params);

    // Deterministic datasets; class labels cycle.
    auto make_set = [&](int n, std::uint64_t tag) {
        std::vector<std::vector<float>> imgs;
        std::vector<int> labels;
        imgs.reserve(n);
        for (int i = 0; i < n; ++i) {
            Rng rng(derive_seed(task.seed, tag, static_cast<std::uint64_t>(i)));
            const int cls = i % task.n_classes;
            imgs.push_back(normalize_any(source_image(cls, task.image_size, task.noise_sd, rng)));
            labels.push_back(cls);
        }
        return std::make_pair(std::move(imgs), std::move(labels));
    };
    auto [train_x, train_y] = make_set(task.n_train, 0x7a);
    auto [val_x, val_y] = make_set(task.n_val, 0x7b);

    const int workers = max_threads();
    WorkerPool pool(workers, params);
    Grads total(params);

    ParamSet best_params = params;
    double best_val = std::numeric_limits<double>::infinity();
    TrainHistory hist;

    std::vector<int> order(task.n_train);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 0x51, static_cast<std::uint64_t>(epoch)));
        for (int i = task.n_train - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_u64(
                                    static_cast<std::uint64_t>(i) + 1)]);

        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < task.n_train; start += cfg.batch_size) {
            const int end = std::min(task.n_train, start + cfg.batch_size);
            pool.reset();
            parallel_for(workers, workers, [&](std::int64_t w0, std::int64_t) {
                const int w = static_cast<int>(w0);
                const int lo = start + (end - start) * w / workers;
                const int hi = start + (end - start) * (w + 1) / workers;
                for (int s = lo; s < hi; ++s) {
                    const int idx = order[s];
                    ModelWork& work = pool.work[w];
                    backbone_forward(arch, params, train_x[idx].data(), task.image_size,
                                     task.image_size, work);
                    std::vector<float> logits, dlogits;
                    source_head_forward(arch, params, work, logits);
                    dlogits.resize(logits.size());
                    pool.loss[w] += softmax_ce(logits.data(),
                                               static_cast<int>(logits.size()),
                                               train_y[idx], dlogits.data());
                    std::vector<float> dregions;
                    source_head_backward(arch, params, dlogits, work, pool.grads[w],
                                         dregions);
                    backbone_backward(arch, params, dregions.data(), work, pool.grads[w]);
                }
            });
            total.zero();
            const float inv_batch = 1.0f / static_cast<float>(end - start);
            for (int w = 0; w < workers; ++w) total.add_scaled(pool.grads[w], inv_batch);
            double batch_loss = 0.0;
            for (int w = 0; w < workers; ++w) batch_loss += pool.loss[w];
            epoch_loss += batch_loss / (end - start);
            ++batches;
            adam_step(params, total, adam, cfg);
        }

        // Validation loss + accuracy.
        pool.reset();
        parallel_for(workers, workers, [&](std::int64_t w0, std::int64_t) {
            const int w = static_cast<int>(w0);
            const int lo = task.n_val * w / workers;
            const int hi = task.n_val * (w + 1) / workers;
            for (int s = lo; s < hi; ++s) {
                ModelWork& work = pool.work[w];
                backbone_forward(arch, params, val_x[s].data(), task.image_size,
                                 task.image_size, work);
                std::vector<float> logits;
                source_head_forward(arch, params, work, logits);
                pool.loss[w] += softmax_ce(logits.data(), static_cast<int>(logits.size()),
                                           val_y[s], static_cast<float*>(nullptr));
                const int pred = static_cast<int>(
                    std::max_element(logits.begin(), logits.end()) - logits.begin());
                if (pred == val_y[s]) pool.correct[w] += 1.0;
            }
        });
        double val_loss = 0.0, correct = 0.0;
        for (int w = 0; w < workers; ++w) {
            val_loss += pool.loss[w];
            correct += pool.correct[w];
        }
        val_loss /= task.n_val;
        const double val_acc = correct / task.n_val;

        hist.train_loss.push_back(epoch_loss / std::max(1, batches));
        hist.val_loss.push_back(val_loss);
        hist.val_accuracy.push_back(val_acc);
        if (val_loss < best_val) {
            best_val = val_loss;
            hist.best_epoch = epoch;
            best_params = params;
        }
        if (epoch - hist.best_epoch >= cfg.early_stop_patience) break;
    }

    PretrainResult res;
    res.history = hist;
    res.val_accuracy = hist.val_accuracy[hist.best_epoch];
    res.reached_target = res.val_accuracy >= task.target_accuracy;
    // Keep only the backbone; the source head is scaffolding.
    for (auto& t : best_params.tensors)
        if (t.name.rfind("backbone.", 0) == 0) res.backbone.tensors.push_back(t);
    return res;
}

// --------------------------------------------------------------- fine-tune

namespace {

struct SliceRefs {
    std::vector<const preproc::SliceSample*> slices;
    std::vector<float> labels;
    std::vector<std::array<float, 7>> z;
};

SliceRefs build_refs(const CohortDataset& cohort,
                     const std::vector<preproc::SliceSample>& samples,
                     const Standardizer& standardizer) {
    SliceRefs refs;
    refs.slices.reserve(samples.size());
    for (const auto& s : samples) {
        const auto& subj = cohort.subjects.at(static_cast<std::size_t>(s.subject));
        if (!subj.label)
            throw ValidationError("unlabeled subject " + subj.record.subject_id +
                                  " in training slices");
        refs.slices.push_back(&s);
        refs.labels.push_back(subj.label == cohort::Label::high ? 1.0f : 0.0f);
        refs.z.push_back(standardizer.transform(subj.record));
    }
    return refs;
}

}  // namespace

ModelArtifact finetune(const ArchConfig& arch, const ParamSet& backbone,
                       const CohortDataset& cohort,
                       const std::vector<preproc::SliceSample>& train_slices,
                       const std::vector<preproc::SliceSample>& val_slices,
                       const preproc::SliceWindow& window, double target_mm,
                       const TrainConfig& cfg, const std::string& split_fingerprint,
                       int fixed_epochs, bool zero_clinical) {
    cfg.validate();
    if (train_slices.empty() || (val_slices.empty() && fixed_epochs <= 0))
        throw ValidationError("fine-tuning needs non-empty train and validation splits");

    // Standardizer on training subjects only.
    std::vector<const ClinicalRecord*> train_records;
    {
        std::vector<char> seen(cohort.subjects.size(), 0);
        for (const auto& s : train_slices) seen.at(static_cast<std::size_t>(s.subject)) = 1;
        for (std::size_t i = 0; i < cohort.subjects.size(); ++i)
            if (seen[i]) train_records.push_back(&cohort.subjects[i].record);
    }
    Standardizer standardizer;
    standardizer.fit(train_records);

    SliceRefs train = build_refs(cohort, train_slices, standardizer);
    SliceRefs val = build_refs(cohort, val_slices, standardizer);
    if (zero_clinical) {
        for (auto& z : train.z) z.fill(0.0f);
        for (auto& z : val.z) z.fill(0.0f);
    }

    {
        double sum = 0.0;
        for (float l : train.labels) sum += l;
        if (sum == 0.0 || sum == static_cast<double>(train.labels.size()))
            throw ValidationError("training split has a single class");
    }

    ParamSet params;
    for (const auto& t : backbone.tensors) {
        if (t.name.rfind("backbone.", 0) != 0) continue;
        params.tensors.push_back(t);
        params.tensors.back().frozen = true;
    }
    if (params.tensors.empty()) throw ValidationError("backbone parameter set is empty");
    append_fusion_params(params, arch, cfg.seed);
    AdamState adam(params);

    const int n_train = static_cast<int>(train.slices.size());
    const int n_val = static_cast<int>(val.slices.size());
    const int workers = max_threads();
    WorkerPool pool(workers, params);
    Grads total(params);

    ParamSet best_params = params;
    double best_val = std::numeric_limits<double>::infinity();
    TrainHistory hist;

    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    const int epoch_budget = fixed_epochs > 0 ? fixed_epochs : cfg.max_epochs;
    for (int epoch = 0; epoch < epoch_budget; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 0x52, static_cast<std::uint64_t>(epoch)));
        for (int i = n_train - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_u64(
                                    static_cast<std::uint64_t>(i) + 1)]);

        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n_train; start += cfg.batch_size) {
            const int end = std::min(n_train, start + cfg.batch_size);
            pool.reset();
            parallel_for(workers, workers, [&](std::int64_t w0, std::int64_t) {
                const int w = static_cast<int>(w0);
                const int lo = start + (end - start) * w / workers;
                const int hi = start + (end - start) * (w + 1) / workers;
                for (int s = lo; s < hi; ++s) {
                    const int idx = order[s];
                    ModelWork& work = pool.work[w];
                    const auto& sample = *train.slices[idx];
                    Rng aug_rng(derive_seed(cfg.seed, 0x53,
                                            static_cast<std::uint64_t>(epoch),
                                            static_cast<std::uint64_t>(idx)));
                    const preproc::NormalizedImage img = preproc::augment(
                        preproc::normalize_channels(sample.scaled), aug_rng);
                    backbone_forward(arch, params, img.v.data(), preproc::kTargetSize,
                                     preproc::kTargetSize, work);
                    Rng drop_rng(derive_seed(cfg.seed, 0x54,
                                             static_cast<std::uint64_t>(epoch),
                                             static_cast<std::uint64_t>(idx)));
                    const float logit = fusion_forward(
                        arch, params, train.z[idx].data(), true,
                        static_cast<float>(cfg.dropout_rate), &drop_rng, work);
                    pool.loss[w] += bce_with_logits(logit, train.labels[idx]);
                    const float dlogit = bce_with_logits_grad(logit, train.labels[idx]);
                    fusion_backward(arch, params, dlogit, work, pool.grads[w], nullptr);
                }
            });
            total.zero();
            const float inv_batch = 1.0f / static_cast<float>(end - start);
            for (int w = 0; w < workers; ++w) total.add_scaled(pool.grads[w], inv_batch);
            double batch_loss = 0.0;
            for (int w = 0; w < workers; ++w) batch_loss += pool.loss[w];
            epoch_loss += batch_loss / (end - start);
            ++batches;
            adam_step(params, total, adam, cfg);
        }

        hist.train_loss.push_back(epoch_loss / std::max(1, batches));
        if (fixed_epochs > 0) {
            hist.best_epoch = epoch;
            continue;
        }

        pool.reset();
        parallel_for(workers, workers, [&](std::int64_t w0, std::int64_t) {
            const int w = static_cast<int>(w0);
            const int lo = n_val * w / workers;
            const int hi = n_val * (w + 1) / workers;
            for (int s = lo; s < hi; ++s) {
                ModelWork& work = pool.work[w];
                const preproc::NormalizedImage img =
                    preproc::normalize_channels(val.slices[s]->scaled);
                backbone_forward(arch, params, img.v.data(), preproc::kTargetSize,
                                 preproc::kTargetSize, work);
                const float logit = fusion_forward(arch, params, val.z[s].data(), false,
                                                   0.0f, nullptr, work);
                pool.loss[w] += bce_with_logits(logit, val.labels[s]);
            }
        });
        double val_loss = 0.0;
        for (int w = 0; w < workers; ++w) val_loss += pool.loss[w];
        val_loss /= n_val;

        hist.val_loss.push_back(val_loss);
        if (val_loss < best_val) {
            best_val = val_loss;
            hist.best_epoch = epoch;
            best_params = params;
        }
        if (epoch - hist.best_epoch >= cfg.early_stop_patience) break;
    }
    if (fixed_epochs > 0) best_params = params;

    ModelArtifact art;
    art.arch = arch;
    art.params = std::move(best_params);
    art.config = cfg;
    art.standardizer = standardizer;
    art.window = window;
    art.target_mm = target_mm;
    art.history = hist;
    art.split_fingerprint = split_fingerprint;
    return art;
}

// --------------------------------------------------------------- inference

namespace {

Prediction predict_impl(const ModelArtifact& artifact,
                        const std::vector<preproc::SliceSample>& slices,
                        const ClinicalRecord& record, bool zero_clinical) {
    if (slices.empty()) throw ValidationError("prediction needs at least one slice");
    Prediction out;
    std::array<float, 7> z{};
    if (!zero_clinical) {
        z = artifact.standardizer.transform(record, &out.used_pooled_standardizer);
    }
    ModelWork work;
    double sum = 0.0;
    for (const auto& s : slices) {
        const preproc::NormalizedImage img = preproc::normalize_channels(s.scaled);
        backbone_forward(artifact.arch, artifact.params, img.v.data(),
                         preproc::kTargetSize, preproc::kTargetSize, work);
        const float logit = fusion_forward(artifact.arch, artifact.params, z.data(),
                                           false, 0.0f, nullptr, work);
        const double prob = sigmoid(logit);
        out.slice_probs.push_back(prob);
        out.slice_z.push_back(s.z);
        sum += prob;
    }
    out.subject_prob = sum / static_cast<double>(out.slice_probs.size());
    return out;
}

}  // namespace

Prediction predict(const ModelArtifact& artifact, const cohort::Volume& volume,
                   const ClinicalRecord& record, bool zero_clinical) {
    const auto slices =
        preproc::preprocess_volume(volume, artifact.window, 0, artifact.target_mm);
    return predict_impl(artifact, slices, record, zero_clinical);
}

Prediction predict_slices(const ModelArtifact& artifact,
                          const std::vector<preproc::SliceSample>& slices,
                          const ClinicalRecord& record, const std::string& window_descr,
                          bool zero_clinical) {
    if (window_descr != artifact.window.describe())
        throw ValidationError("preprocessing fingerprint mismatch: slices were cut with '" +
                              window_descr + "' but the artifact expects '" +
                              artifact.window.describe() + "'");
    return predict_impl(artifact, slices, record, zero_clinical);
}

double mean_bce(const ModelArtifact& artifact, const CohortDataset& cohort,
                const std::vector<preproc::SliceSample>& slices) {
    if (slices.empty()) throw ValidationError("empty slice set");
    ModelWork work;
    double sum = 0.0;
    for (const auto& s : slices) {
        const auto& subj = cohort.subjects.at(static_cast<std::size_t>(s.subject));
        const auto z = artifact.standardizer.transform(subj.record);
        const preproc::NormalizedImage img = preproc::normalize_channels(s.scaled);
        backbone_forward(artifact.arch, artifact.params, img.v.data(),
                         preproc::kTargetSize, preproc::kTargetSize, work);
        const float logit = fusion_forward(artifact.arch, artifact.params, z.data(),
                                           false, 0.0f, nullptr, work);
        const float y = subj.label == cohort::Label::high ? 1.0f : 0.0f;
        sum += bce_with_logits(logit, y);
    }
    return sum / static_cast<double>(slices.size());
}

}  // namespace cipred::nnet
