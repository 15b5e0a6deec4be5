#include "cipred/eval/splits.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cipred/core/rng.hpp"
#include "cipred/core/sha256.hpp"

namespace cipred::eval {

std::vector<int> SplitPlan::train_subjects(int val_fold) const {
    std::vector<int> out;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        if (static_cast<int>(f) == val_fold) continue;
        out.insert(out.end(), folds[f].begin(), folds[f].end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> SplitPlan::all_train_val() const {
    std::vector<int> out;
    for (const auto& f : folds) out.insert(out.end(), f.begin(), f.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::string SplitPlan::fingerprint() const {
    Sha256 h;
    h.update(&seed, sizeof(seed));
    auto feed = [&h](const std::vector<int>& v, char tag) {
        h.update(&tag, 1);
        std::vector<int> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        for (int x : sorted) h.update(&x, sizeof(x));
    };
    feed(test, 'T');
    for (std::size_t f = 0; f < folds.size(); ++f)
        feed(folds[f], static_cast<char>('0' + f));
    return h.hex_digest();
}

void SplitPlan::validate_disjoint(int n_subjects) const {
    std::set<int> seen;
    auto check = [&](const std::vector<int>& v) {
        for (int s : v) {
            if (s < 0 || s >= n_subjects)
                throw ValidationError("split plan references unknown subject");
            if (!seen.insert(s).second)
                throw ValidationError("split plan assigns a subject twice");
        }
    };
    check(test);
    for (const auto& f : folds) check(f);
}

SplitPlan make_splits(const cohort::CohortDataset& cohort, std::uint64_t seed,
                      int n_folds, double test_fraction) {
    const int n = static_cast<int>(cohort.subjects.size());
    if (n < 10) throw ValidationError("split planning needs at least 10 subjects");
    if (n_folds < 2) throw ValidationError("need at least 2 folds");

    std::vector<int> by_label[2];
    for (int i = 0; i < n; ++i) {
        const auto& subj = cohort.subjects[static_cast<std::size_t>(i)];
        if (!subj.label)
            throw ValidationError("unlabeled subject " + subj.record.subject_id);
        by_label[subj.label == cohort::Label::high ? 1 : 0].push_back(i);
    }
    if (by_label[0].empty() || by_label[1].empty())
        throw ValidationError("both classes required for a stratified split");

    SplitPlan plan;
    plan.seed = seed;
    plan.folds.assign(static_cast<std::size_t>(n_folds), {});
    int rr = 0;  // fold round-robin cursor shared across strata
    for (int lab = 0; lab < 2; ++lab) {
        auto& group = by_label[lab];
        Rng rng(derive_seed(seed, 0x5b1172, static_cast<std::uint64_t>(lab)));
        for (int i = static_cast<int>(group.size()) - 1; i > 0; --i)
            std::swap(group[static_cast<std::size_t>(i)],
                      group[rng.uniform_u64(static_cast<std::uint64_t>(i) + 1)]);
        const int n_test =
            static_cast<int>(std::lround(test_fraction * static_cast<double>(group.size())));
        for (int i = 0; i < n_test; ++i) plan.test.push_back(group[static_cast<std::size_t>(i)]);
        for (std::size_t i = static_cast<std::size_t>(n_test); i < group.size(); ++i) {
            plan.folds[static_cast<std::size_t>(rr % n_folds)].push_back(group[i]);
            ++rr;
        }
    }
    for (const auto& f : plan.folds)
        if (f.empty()) throw ValidationError("a fold ended up empty; cohort too small");
    plan.validate_disjoint(n);
    return plan;
}

}  // namespace cipred::eval
