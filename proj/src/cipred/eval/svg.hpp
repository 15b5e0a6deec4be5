#pragma once

#include <string>
#include <vector>

#include "cipred/cohort/types.hpp"

namespace cipred::eval {

// Minimal static SVG line charts for the report bundle.
struct SvgSeries {
    std::string color;
    double opacity = 1.0;
    double width = 1.5;
    std::vector<std::pair<double, double>> points;
};

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series);

void plot_training_curves(const std::vector<double>& train_loss,
                          const std::vector<double>& val_loss,
                          const std::string& path);

void plot_roc(const std::vector<double>& scores, const std::vector<int>& labels,
              const std::string& path);

// Longitudinal trajectories, one polyline per subject, colored by label
// (labeled cohorts only); per-center file.
void plot_spaghetti(const cohort::CohortDataset& cohort, cohort::Center center,
                    const std::string& path);

}  // namespace cipred::eval
