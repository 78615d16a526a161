#pragma once

#include <string>
#include <vector>

namespace bhc::report {

/// Minimal self-contained SVG writer for the project's static figures.
/// No renderer dependencies; documents are plain XML with inline styling.
class SvgCanvas {
public:
    SvgCanvas(double width, double height);

    void line(double x1, double y1, double x2, double y2, const std::string& color = "#444",
              double width = 1.0);
    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& extra_attrs = "");
    void circle(double cx, double cy, double r, const std::string& fill);
    void text(double x, double y, const std::string& s, double size = 12.0,
              const std::string& anchor = "start");

    std::string finish() const;

private:
    double width_, height_;
    std::vector<std::string> elements_;
};

std::string xml_escape(const std::string& s);

/// Equal-width histogram bins over [min, max]; the counting primitive
/// behind histogram figures (bar elements carry data-count attributes).
std::vector<long> histogram_counts(const std::vector<double>& values, int nbins, double lo, double hi);

/// Histogram figure; one panel. Bars annotated with data-count.
std::string render_histogram(const std::vector<double>& values, int nbins, const std::string& title,
                             const std::string& x_label);

/// Multi-panel histogram (one per named series), shared bin policy per panel.
std::string render_histogram_panels(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                                    int nbins, const std::string& title);

struct BoxStats {
    double lo_whisker, q1, median, q3, hi_whisker;
    std::vector<double> outliers;
};

BoxStats box_stats(std::vector<double> values);

/// Box plot of one group per x position.
std::string render_boxplot(const std::vector<std::pair<std::string, std::vector<double>>>& groups,
                           const std::string& title, const std::string& y_label);

/// Scatter colored by integer class label (PCA figures).
std::string render_scatter(const std::vector<double>& x, const std::vector<double>& y,
                           const std::vector<int>& label, const std::string& title,
                           const std::string& x_label, const std::string& y_label);

/// One stacked bar per subject showing per-cluster proportions.
std::string render_stacked_bars(const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                                const std::string& title);

/// Scatter for Q-Q style figures (no classes).
std::string render_qq(const std::vector<std::pair<double, double>>& pairs, const std::string& title);

} // namespace bhc::report
