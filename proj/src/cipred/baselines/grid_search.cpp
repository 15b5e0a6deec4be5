#include "cipred/baselines/grid_search.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "cipred/core/rng.hpp"
#include "cipred/eval/metrics.hpp"

namespace cipred::baselines {

std::vector<int> grouped_stratified_folds(const FeatureMatrix& X,
                                          const std::vector<int>& y, int n_folds,
                                          std::uint64_t seed) {
    // Subject ids with their class (slices inherit the subject label).
    std::map<int, int> subject_label;
    for (int i = 0; i < X.n; ++i) subject_label[X.keys[static_cast<std::size_t>(i)].subject] =
        y[static_cast<std::size_t>(i)];

    std::vector<int> subjects[2];
    for (const auto& [s, lab] : subject_label) subjects[lab ? 1 : 0].push_back(s);
    std::map<int, int> fold_of_subject;
    int rr = 0;
    for (int lab = 0; lab < 2; ++lab) {
        auto& group = subjects[lab];
        Rng rng(derive_seed(seed, 0x1f01d, static_cast<std::uint64_t>(lab)));
        for (int i = static_cast<int>(group.size()) - 1; i > 0; --i)
            std::swap(group[static_cast<std::size_t>(i)],
                      group[rng.uniform_u64(static_cast<std::uint64_t>(i) + 1)]);
        for (int s : group) {
            fold_of_subject[s] = rr % n_folds;
            ++rr;
        }
    }
    std::vector<int> fold(static_cast<std::size_t>(X.n));
    for (int i = 0; i < X.n; ++i)
        fold[static_cast<std::size_t>(i)] =
            fold_of_subject[X.keys[static_cast<std::size_t>(i)].subject];
    return fold;
}

GridSearchResult grid_search(BaselineKind kind, const Grid& grid,
                             const FeatureMatrix& X, const std::vector<int>& y,
                             int inner_folds, int n_draws, std::uint64_t seed) {
    if (grid.empty()) throw ValidationError("empty hyperparameter grid");
    if (n_draws < 1) throw ValidationError("grid search needs at least one draw");

    // Uniform draws over the cartesian grid, duplicates collapsed in draw
    // order. A draw count covering the whole grid degenerates to exhaustive
    // search.
    std::vector<std::string> names;
    std::vector<const std::vector<double>*> axes;
    std::size_t grid_size = 1;
    for (const auto& [name, vals] : grid) {
        if (vals.empty()) throw ValidationError("empty grid axis '" + name + "'");
        names.push_back(name);
        axes.push_back(&vals);
        grid_size *= vals.size();
    }
    Rng draw_rng(derive_seed(seed, 0xd7a3));
    std::vector<HyperParams> configs;
    std::set<std::string> seen;
    const int effective_draws =
        grid_size <= static_cast<std::size_t>(n_draws) ? static_cast<int>(grid_size)
                                                       : n_draws;
    int guard = 0;
    while (static_cast<int>(configs.size()) < effective_draws && guard < n_draws * 64) {
        ++guard;
        HyperParams hp;
        for (std::size_t a = 0; a < axes.size(); ++a)
            hp.values[names[a]] = (*axes[a])[draw_rng.uniform_u64(axes[a]->size())];
        if (seen.insert(hp.canonical()).second) configs.push_back(std::move(hp));
    }

    const std::vector<int> fold = grouped_stratified_folds(X, y, inner_folds, seed);

    GridSearchResult res;
    for (std::size_t c = 0; c < configs.size(); ++c) {
        GridSearchRow row;
        row.hp = configs[c];
        double sum = 0.0;
        int counted = 0;
        for (int f = 0; f < inner_folds; ++f) {
            std::vector<int> train_rows, val_rows;
            for (int i = 0; i < X.n; ++i)
                (fold[static_cast<std::size_t>(i)] == f ? val_rows : train_rows).push_back(i);
            if (train_rows.empty() || val_rows.empty()) continue;
            const FeatureMatrix xtr = take_rows(X, train_rows);
            const FeatureMatrix xva = take_rows(X, val_rows);
            std::vector<int> ytr, yva;
            for (int i : train_rows) ytr.push_back(y[static_cast<std::size_t>(i)]);
            for (int i : val_rows) yva.push_back(y[static_cast<std::size_t>(i)]);
            bool both = false;
            {
                int s = 0;
                for (int v : yva) s += v;
                both = s > 0 && s < static_cast<int>(yva.size());
            }
            if (!both) continue;
            const FittedBaseline model = fit_baseline(
                kind, configs[c], xtr, ytr,
                derive_seed(seed, 0xf17, static_cast<std::uint64_t>(c),
                            static_cast<std::uint64_t>(f)));
            const std::vector<double> scores = predict_baseline(model, xva);
            row.fold_auc.push_back(eval::auc(scores, yva));
            sum += row.fold_auc.back();
            ++counted;
        }
        if (counted == 0)
            throw ValidationError("grid search had no scorable inner folds");
        row.mean_auc = sum / counted;
        res.table.push_back(row);
        if (c == 0 || row.mean_auc > res.best_mean_auc) {
            res.best_mean_auc = row.mean_auc;
            res.best = row.hp;
        }
    }
    return res;
}

}  // namespace cipred::baselines
