#include "cipred/eval/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cipred/core/csv.hpp"
#include "cipred/core/errors.hpp"

namespace cipred::eval {

namespace {

constexpr double kW = 640, kH = 420;
constexpr double kMargin = 56;

struct Range {
    double lo = 0, hi = 1;
    double map(double v, double out_lo, double out_hi) const {
        const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        return out_lo + t * (out_hi - out_lo);
    }
};

}  // namespace

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series) {
    Range xr, yr;
    bool first = true;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (first) {
                xr.lo = xr.hi = x;
                yr.lo = yr.hi = y;
                first = false;
            }
            xr.lo = std::min(xr.lo, x);
            xr.hi = std::max(xr.hi, x);
            yr.lo = std::min(yr.lo, y);
            yr.hi = std::max(yr.hi, y);
        }
    }
    if (first) {
        xr = {0, 1};
        yr = {0, 1};
    }
    if (xr.hi == xr.lo) xr.hi = xr.lo + 1;
    if (yr.hi == yr.lo) yr.hi = yr.lo + 1;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write svg: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\""
        << kH << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    // Axes.
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kH - kMargin << "\" x2=\""
        << kW - kMargin << "\" y2=\"" << kH - kMargin
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kH - kMargin << "\" x2=\"" << kMargin
        << "\" y2=\"" << kMargin << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << x_label << "</text>\n";
    out << "<text x=\"16\" y=\"" << kH / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 16 " << kH / 2 << ")\">" << y_label << "</text>\n";
    // Axis extremes.
    out << "<text x=\"" << kMargin << "\" y=\"" << kH - kMargin + 16
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << csv::format_double(xr.lo)
        << "</text>\n";
    out << "<text x=\"" << kW - kMargin << "\" y=\"" << kH - kMargin + 16
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
        << csv::format_double(xr.hi) << "</text>\n";
    out << "<text x=\"" << kMargin - 6 << "\" y=\"" << kH - kMargin
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
        << csv::format_double(yr.lo) << "</text>\n";
    out << "<text x=\"" << kMargin - 6 << "\" y=\"" << kMargin + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
        << csv::format_double(yr.hi) << "</text>\n";

    for (const auto& s : series) {
        if (s.points.empty()) continue;
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\""
            << s.width << "\" stroke-opacity=\"" << s.opacity << "\" points=\"";
        for (const auto& [x, y] : s.points)
            out << xr.map(x, kMargin, kW - kMargin) << ","
                << yr.map(y, kH - kMargin, kMargin) << " ";
        out << "\"/>\n";
    }
    out << "</svg>\n";
}

void plot_training_curves(const std::vector<double>& train_loss,
                          const std::vector<double>& val_loss,
                          const std::string& path) {
    SvgSeries train{"#1f77b4", 1.0, 2.0, {}};
    SvgSeries val{"#d62728", 1.0, 2.0, {}};
    for (std::size_t i = 0; i < train_loss.size(); ++i)
        train.points.emplace_back(static_cast<double>(i), train_loss[i]);
    for (std::size_t i = 0; i < val_loss.size(); ++i)
        val.points.emplace_back(static_cast<double>(i), val_loss[i]);
    write_svg_chart(path, "training and validation loss", "epoch", "loss",
                    {train, val});
}

void plot_roc(const std::vector<double>& scores, const std::vector<int>& labels,
              const std::string& path) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    long n1 = 0, n0 = 0;
    for (int l : labels) (l == 1 ? n1 : n0) += 1;
    SvgSeries curve{"#1f77b4", 1.0, 2.0, {{0.0, 0.0}}};
    SvgSeries diag{"#999999", 1.0, 1.0, {{0.0, 0.0}, {1.0, 1.0}}};
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) (labels[order[k]] == 1 ? tp : fp) += 1;
        curve.points.emplace_back(n0 ? static_cast<double>(fp) / n0 : 0.0,
                                  n1 ? static_cast<double>(tp) / n1 : 0.0);
        i = j;
    }
    write_svg_chart(path, "ROC", "false positive rate", "true positive rate",
                    {diag, curve});
}

void plot_spaghetti(const cohort::CohortDataset& cohort, cohort::Center center,
                    const std::string& path) {
    std::vector<SvgSeries> series;
    for (const auto& subj : cohort.subjects) {
        if (subj.record.center != center) continue;
        SvgSeries s;
        if (subj.label)
            s.color = *subj.label == cohort::Label::high ? "#d62728" : "#1f77b4";
        else
            s.color = "#777777";
        s.opacity = 0.45;
        s.width = 1.0;
        for (const auto& obs : subj.series.observations)
            s.points.emplace_back(obs.time_months, obs.score);
        series.push_back(std::move(s));
    }
    write_svg_chart(path, "score trajectories, center " + cohort::center_name(center),
                    "months since implantation", "score", series);
}

}  // namespace cipred::eval
