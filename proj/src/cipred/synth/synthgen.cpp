#include "cipred/synth/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "cipred/core/csv.hpp"

namespace cipred::synth {

namespace {

CenterParams default_params(Center c) {
    CenterParams p;
    switch (c) {
        case Center::A:  // hierarchical battery, wide native range
            p.score_scale = 10.0;
            p.score_offset = 75.0;
            p.image_shift = 0.0;
            p.image_scale = 1.0;
            p.age_mri_mean = 24.0;
            p.age_ha_mean = 12.0;
            p.pta_mean = 95.0;
            break;
        case Center::B:  // norm-referenced standard scores
            p.score_scale = 1.2;
            p.score_offset = 100.0;
            p.image_shift = 0.35;
            p.image_scale = 0.85;
            p.age_mri_mean = 12.0;
            p.age_ha_mean = 4.0;
            p.pta_mean = 98.0;
            break;
        case Center::C:  // questionnaire, narrow range
            p.score_scale = 0.9;
            p.score_offset = 17.0;
            p.image_shift = -0.25;
            p.image_scale = 1.15;
            p.age_mri_mean = 24.0;
            p.age_ha_mean = 17.0;
            p.pta_mean = 102.0;
            break;
    }
    return p;
}

struct Bump {
    double u, v;   // in-plane position in [0,1] x [0,1]
    double sign;   // +- amplitude
};

// Distinct layouts per class: partially overlapping positions with
// different sign patterns, so no single flattened-voxel direction separates
// the classes once per-subject jitter is applied.
const std::vector<Bump>& layout(Label cls) {
    static const std::vector<Bump> high = {
        {0.30, 0.30, +1.0}, {0.70, 0.30, -1.0}, {0.50, 0.55, +1.0},
        {0.32, 0.72, -1.0}, {0.70, 0.70, +1.0}, {0.50, 0.22, -1.0},
    };
    static const std::vector<Bump> low = {
        {0.30, 0.30, -1.0}, {0.62, 0.38, +1.0}, {0.50, 0.55, -1.0},
        {0.40, 0.68, +1.0}, {0.70, 0.70, -1.0}, {0.28, 0.50, +1.0},
    };
    return cls == Label::high ? high : low;
}

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Smooth synthetic anatomy: a soft head-like envelope with an interior shell.
void fill_base_volume(Volume& v, const CenterParams& cp, double voxel_noise_sd,
                      Rng& rng) {
    const double cx = (v.nx - 1) / 2.0, cy = (v.ny - 1) / 2.0, cz = (v.nz - 1) / 2.0;
    const double rx = v.nx * 0.42, ry = v.ny * 0.42, rz = v.nz * 0.46;
    std::size_t idx = 0;
    for (int z = 0; z < v.nz; ++z) {
        for (int y = 0; y < v.ny; ++y) {
            for (int x = 0; x < v.nx; ++x, ++idx) {
                const double dx = (x - cx) / rx, dy = (y - cy) / ry, dz = (z - cz) / rz;
                const double r2 = dx * dx + dy * dy + dz * dz;
                const double head = std::exp(-1.6 * r2);
                const double shell = 0.35 * std::exp(-28.0 * (r2 - 0.45) * (r2 - 0.45));
                double val = cp.image_scale * (head + shell) + cp.image_shift;
                val += voxel_noise_sd * rng.normal();
                v.voxels[idx] = static_cast<float>(val);
            }
        }
    }
}

}  // namespace

void SynthSpec::validate() const {
    if (centers.empty()) throw ValidationError("synth spec has no centers");
    int total = 0;
    for (const auto& c : centers) {
        if (c.n_subjects <= 0)
            throw ValidationError("center " + cohort::center_name(c.center) +
                                  " has zero subjects");
        if (c.times.size() < 2)
            throw ValidationError("assessment schedule needs at least 2 times");
        for (std::size_t i = 1; i < c.times.size(); ++i)
            if (!(c.times[i] > c.times[i - 1]))
                throw ValidationError("assessment schedule must be strictly increasing");
        int lang_total = 0;
        for (const auto& [lang, cnt] : c.languages) lang_total += cnt;
        if (!c.languages.empty() && lang_total != c.n_subjects)
            throw ValidationError("language counts do not sum to center size");
        total += c.n_subjects;
    }
    if (total == 0) throw ValidationError("synth spec generates zero subjects");
    if (kappa_img < 0 || kappa_clin < 0)
        throw ValidationError("signal strengths must be >= 0");
    if (score_noise_sd < 0) throw ValidationError("negative score noise sd");
    if (nx <= 0 || ny <= 0 || nz <= 0) throw ValidationError("bad volume dims");
    signal_region.resolve(nz);  // throws if the slab does not fit
}

SynthSpec SynthSpec::small_default(int per_center, std::uint64_t seed) {
    SynthSpec s;
    s.centers = {
        {Center::A, per_center,
         {{Language::english, per_center - per_center / 3},
          {Language::spanish, per_center / 3}},
         {0, 6, 12, 18, 24, 36}},
        {Center::B, per_center, {{Language::english, per_center}}, {0, 12, 24, 36}},
        {Center::C, per_center, {{Language::cantonese, per_center}}, {0, 6, 12, 24}},
    };
    s.seed = seed;
    return s;
}

const SubjectTruth& OracleTruth::of(const std::string& subject_id) const {
    for (const auto& s : subjects)
        if (s.subject_id == subject_id) return s;
    throw ValidationError("no truth entry for subject " + subject_id);
}

void inject_signal(Volume& v, Label cls, double kappa_img,
                   const preproc::SliceWindow& region, double jitter_vox,
                   Rng& jitter_rng) {
    const auto [z_lo, z_hi] = region.resolve(v.nz);
    // Jitter and per-bump amplitude wobble are drawn regardless of kappa so
    // that kappa only scales amplitudes.
    const double dx = jitter_rng.uniform(-jitter_vox, jitter_vox);
    const double dy = jitter_rng.uniform(-jitter_vox, jitter_vox);
    const auto& bumps = layout(cls);
    std::vector<double> amp(bumps.size());
    for (auto& a : amp) a = jitter_rng.uniform(0.8, 1.2);
    if (kappa_img == 0.0) return;

    const double sigma = 0.055 * std::min(v.nx, v.ny);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const int slab = z_hi - z_lo + 1;
    for (int z = z_lo; z <= z_hi; ++z) {
        // Flat-top z envelope with a short taper at the slab edges.
        const int edge = std::min(z - z_lo, z_hi - z);
        const double env = std::min(1.0, (edge + 1.0) / 3.0);
        (void)slab;
        for (std::size_t b = 0; b < bumps.size(); ++b) {
            const double bx = bumps[b].u * (v.nx - 1) + dx;
            const double by = bumps[b].v * (v.ny - 1) + dy;
            const double a = kappa_img * bumps[b].sign * amp[b] * env;
            const int x_lo = std::max(0, static_cast<int>(bx - 4 * sigma));
            const int x_hi = std::min(v.nx - 1, static_cast<int>(bx + 4 * sigma) + 1);
            const int y_lo = std::max(0, static_cast<int>(by - 4 * sigma));
            const int y_hi = std::min(v.ny - 1, static_cast<int>(by + 4 * sigma) + 1);
            for (int y = y_lo; y <= y_hi; ++y) {
                const double ddy = y - by;
                for (int x = x_lo; x <= x_hi; ++x) {
                    const double ddx = x - bx;
                    const double g = std::exp(-(ddx * ddx + ddy * ddy) * inv2s2);
                    v.at(x, y, z) += static_cast<float>(a * g);
                }
            }
        }
    }
}

LongitudinalSeries simulate_scores(const std::string& subject_id, double intercept,
                                   double slope, const std::vector<double>& times,
                                   double noise_sd, Rng& rng) {
    if (times.size() < 2) throw ValidationError("need at least 2 assessment times");
    if (noise_sd < 0) throw ValidationError("negative noise sd");
    LongitudinalSeries s;
    s.subject_id = subject_id;
    for (double t : times) {
        cohort::Observation obs;
        obs.time_months = t;
        obs.score = intercept + slope * t + (noise_sd > 0 ? noise_sd * rng.normal() : 0.0);
        s.observations.push_back(obs);
    }
    return s;
}

std::pair<CohortDataset, OracleTruth> generate_cohort(const SynthSpec& spec) {
    spec.validate();

    CohortDataset cohort;
    OracleTruth truth;
    for (const auto& cs : spec.centers) truth.center_params[cs.center] = default_params(cs.center);

    int global_index = 0;
    for (const auto& cs : spec.centers) {
        const CenterParams cp = truth.center_params[cs.center];
        const int n = cs.n_subjects;
        const auto center_tag = static_cast<std::uint64_t>(cs.center);

        // Mixture draws (alternating components), then the class itself is
        // defined by the realized per-center median.
        std::vector<double> slopes(n), intercepts(n);
        for (int i = 0; i < n; ++i) {
            Rng rng(derive_seed(spec.seed, 11, center_tag, static_cast<std::uint64_t>(i)));
            const double comp_mean = (i % 2 == 0) ? spec.slope_mean_high : spec.slope_mean_low;
            slopes[i] = cp.score_scale * (comp_mean + spec.slope_sd * rng.normal());
            intercepts[i] = cp.score_offset +
                            cp.score_scale * (spec.intercept_mean +
                                              spec.intercept_sd * rng.normal());
        }
        std::vector<double> sorted = slopes;
        std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
        double median;
        if (n % 2 == 1) {
            median = sorted[n / 2];
        } else {
            const double upper = sorted[n / 2];
            const double lower = *std::max_element(sorted.begin(), sorted.begin() + n / 2);
            median = 0.5 * (lower + upper);
        }

        // Expand the language mix into a per-subject assignment.
        std::vector<Language> langs;
        if (cs.languages.empty()) {
            langs.assign(n, Language::english);
        } else {
            for (const auto& [lang, cnt] : cs.languages)
                for (int i = 0; i < cnt; ++i) langs.push_back(lang);
        }

        for (int i = 0; i < n; ++i, ++global_index) {
            const Label cls = slopes[i] > median ? Label::high : Label::low;
            char id_buf[16];
            std::snprintf(id_buf, sizeof(id_buf), "%s%03d",
                          cohort::center_name(cs.center).c_str(), i + 1);

            cohort::Subject subj;
            subj.record.subject_id = id_buf;
            subj.record.center = cs.center;
            subj.record.language = langs[i];

            Rng clin_rng(derive_seed(spec.seed, 22, center_tag, static_cast<std::uint64_t>(i)));
            const double s_eff = (cls == Label::high) ? -1.0 : 1.0;
            subj.record.sex = clin_rng.bernoulli(0.5) ? 1 : 0;
            const double age_mri =
                std::max(3.0, cp.age_mri_mean + 8.0 * clin_rng.normal() +
                                  s_eff * spec.kappa_clin * 8.0);
            const double gap = std::max(0.5, cp.age_gap_ci + 1.5 * clin_rng.normal());
            subj.record.age_at_mri = age_mri;
            subj.record.age_at_ci = age_mri + gap;
            subj.record.age_at_ha =
                std::max(1.0, cp.age_ha_mean + 5.0 * clin_rng.normal() +
                                  s_eff * spec.kappa_clin * 5.0);
            subj.record.pta_left = clamp(
                cp.pta_mean + 9.0 * clin_rng.normal() + s_eff * spec.kappa_clin * 9.0, 0.0,
                130.0);
            subj.record.pta_right = clamp(
                cp.pta_mean + 9.0 * clin_rng.normal() + s_eff * spec.kappa_clin * 9.0, 0.0,
                130.0);
            // Correlated with the intercept, not the slope: clinical-only
            // prediction of the improvement class stays weak.
            subj.record.preop_score =
                intercepts[i] + 0.3 * cp.score_scale * clin_rng.normal();

            Rng score_rng(derive_seed(spec.seed, 33, center_tag, static_cast<std::uint64_t>(i)));
            subj.series = simulate_scores(subj.record.subject_id, intercepts[i], slopes[i],
                                          cs.times, spec.score_noise_sd * cp.score_scale,
                                          score_rng);

            Rng vox_rng(derive_seed(spec.seed, 44, center_tag, static_cast<std::uint64_t>(i)));
            subj.volume.nx = spec.nx;
            subj.volume.ny = spec.ny;
            subj.volume.nz = spec.nz;
            subj.volume.sx = spec.sx;
            subj.volume.sy = spec.sy;
            subj.volume.sz = spec.sz;
            subj.volume.voxels.resize(static_cast<std::size_t>(spec.nx) * spec.ny * spec.nz);
            fill_base_volume(subj.volume, cp, spec.voxel_noise_sd, vox_rng);
            Rng jit_rng(derive_seed(spec.seed, 55, center_tag, static_cast<std::uint64_t>(i)));
            inject_signal(subj.volume, cls, spec.kappa_img, spec.signal_region,
                          spec.signal_jitter_vox, jit_rng);

            SubjectTruth st;
            st.subject_id = subj.record.subject_id;
            st.center = cs.center;
            st.true_class = cls;
            st.true_slope = slopes[i];
            st.true_intercept = intercepts[i];
            truth.subjects.push_back(st);
            cohort.subjects.push_back(std::move(subj));
        }
    }
    return {std::move(cohort), std::move(truth)};
}

void label_from_truth(CohortDataset& cohort, const OracleTruth& truth) {
    for (auto& s : cohort.subjects) s.label = truth.of(s.record.subject_id).true_class;
}

void write_truth_csv(const OracleTruth& truth, const std::string& path) {
    csv::Table t;
    t.header = {"subject_id", "true_class", "true_slope", "true_intercept"};
    for (const auto& s : truth.subjects)
        t.rows.push_back({s.subject_id, cohort::label_name(s.true_class),
                          csv::format_double(s.true_slope),
                          csv::format_double(s.true_intercept)});
    csv::write_file(path, t);
}

}  // namespace cipred::synth
