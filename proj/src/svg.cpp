#include "bhc/svg.hpp"

#include "bhc/csv.hpp"
#include "bhc/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bhc::report {

namespace {

const char* kPalette[] = {"#4C72B0", "#DD8452", "#55A868", "#C44E52", "#8172B3",
                          "#937860", "#DA8BC3", "#8C8C8C", "#CCB974", "#64B5CD"};
constexpr int kPaletteSize = 10;

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

struct Frame {
    double x0, y0, x1, y1; // plot area in canvas coordinates
    double vx0, vx1, vy0, vy1; // value ranges

    double px(double v) const { return x0 + (v - vx0) / (vx1 - vx0) * (x1 - x0); }
    double py(double v) const { return y1 - (v - vy0) / (vy1 - vy0) * (y1 - y0); }
};

void draw_axes(SvgCanvas& c, const Frame& f, const std::string& x_label, const std::string& y_label) {
    c.line(f.x0, f.y1, f.x1, f.y1);
    c.line(f.x0, f.y0, f.x0, f.y1);
    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        const double vx = f.vx0 + (f.vx1 - f.vx0) * i / ticks;
        const double vy = f.vy0 + (f.vy1 - f.vy0) * i / ticks;
        c.line(f.px(vx), f.y1, f.px(vx), f.y1 + 4);
        c.text(f.px(vx), f.y1 + 16, num(vx), 10, "middle");
        c.line(f.x0 - 4, f.py(vy), f.x0, f.py(vy));
        c.text(f.x0 - 6, f.py(vy) + 3, num(vy), 10, "end");
    }
    if (!x_label.empty()) c.text((f.x0 + f.x1) / 2, f.y1 + 34, x_label, 12, "middle");
    if (!y_label.empty()) c.text(12, (f.y0 + f.y1) / 2, y_label, 12, "start");
}

} // namespace

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(ch);
        }
    }
    return out;
}

SvgCanvas::SvgCanvas(double width, double height) : width_(width), height_(height) {}

void SvgCanvas::line(double x1, double y1, double x2, double y2, const std::string& color, double w) {
    elements_.push_back("<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) +
                        "\" y2=\"" + num(y2) + "\" stroke=\"" + color + "\" stroke-width=\"" +
                        num(w) + "\"/>");
}

void SvgCanvas::rect(double x, double y, double w, double h, const std::string& fill,
                     const std::string& extra_attrs) {
    elements_.push_back("<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
                        "\" height=\"" + num(h) + "\" fill=\"" + fill + "\" stroke=\"#333\"" +
                        (extra_attrs.empty() ? "" : " " + extra_attrs) + "/>");
}

void SvgCanvas::circle(double cx, double cy, double r, const std::string& fill) {
    elements_.push_back("<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
                        "\" fill=\"" + fill + "\" fill-opacity=\"0.75\"/>");
}

void SvgCanvas::text(double x, double y, const std::string& s, double size, const std::string& anchor) {
    elements_.push_back("<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
                        "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\">" +
                        xml_escape(s) + "</text>");
}

std::string SvgCanvas::finish() const {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) + "\" height=\"" +
           num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + num(width_) + "\" height=\"" + num(height_) +
           "\" fill=\"white\"/>\n";
    for (const auto& e : elements_) {
        out += e;
        out += '\n';
    }
    out += "</svg>\n";
    return out;
}

std::vector<long> histogram_counts(const std::vector<double>& values, int nbins, double lo, double hi) {
    if (nbins < 1) throw ValidationError("histogram_counts: nbins must be >= 1");
    std::vector<long> counts(static_cast<size_t>(nbins), 0);
    const double width = hi > lo ? (hi - lo) / nbins : 1.0;
    for (double v : values) {
        if (v < lo || v > hi) continue;
        int b = static_cast<int>((v - lo) / width);
        b = std::clamp(b, 0, nbins - 1);
        ++counts[static_cast<size_t>(b)];
    }
    return counts;
}

std::string render_histogram(const std::vector<double>& values, int nbins, const std::string& title,
                             const std::string& x_label) {
    double lo = 0.0, hi = 1.0;
    if (!values.empty()) {
        lo = *std::min_element(values.begin(), values.end());
        hi = *std::max_element(values.begin(), values.end());
        if (hi <= lo) hi = lo + 1.0;
    }
    const auto counts = histogram_counts(values, nbins, lo, hi);
    const long cmax = std::max<long>(1, *std::max_element(counts.begin(), counts.end()));

    SvgCanvas c(800, 520);
    Frame f{70, 50, 770, 460, lo, hi, 0.0, static_cast<double>(cmax)};
    c.text(400, 28, title, 15, "middle");
    draw_axes(c, f, x_label, "count");
    const double bw = (hi - lo) / nbins;
    for (int b = 0; b < nbins; ++b) {
        const double x = f.px(lo + b * bw);
        const double y = f.py(static_cast<double>(counts[static_cast<size_t>(b)]));
        c.rect(x, y, (f.x1 - f.x0) / nbins, f.y1 - y, kPalette[0],
               "data-count=\"" + std::to_string(counts[static_cast<size_t>(b)]) + "\"");
    }
    return c.finish();
}

std::string render_histogram_panels(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                                    int nbins, const std::string& title) {
    const int n = static_cast<int>(series.size());
    const double panel_h = 180.0;
    SvgCanvas c(800, 60 + panel_h * n);
    c.text(400, 28, title, 15, "middle");
    for (int s = 0; s < n; ++s) {
        const auto& [name, values] = series[static_cast<size_t>(s)];
        double lo = 0.0, hi = 1.0;
        if (!values.empty()) {
            lo = *std::min_element(values.begin(), values.end());
            hi = *std::max_element(values.begin(), values.end());
            if (hi <= lo) hi = lo + 1.0;
        }
        const auto counts = histogram_counts(values, nbins, lo, hi);
        const long cmax = std::max<long>(1, *std::max_element(counts.begin(), counts.end()));
        const double top = 50 + panel_h * s;
        Frame f{70, top, 770, top + panel_h - 46, lo, hi, 0.0, static_cast<double>(cmax)};
        c.text(76, top + 12, name, 12, "start");
        draw_axes(c, f, "", "");
        const double bw = (hi - lo) / nbins;
        for (int b = 0; b < nbins; ++b) {
            const double x = f.px(lo + b * bw);
            const double y = f.py(static_cast<double>(counts[static_cast<size_t>(b)]));
            c.rect(x, y, (f.x1 - f.x0) / nbins, f.y1 - y, kPalette[s % kPaletteSize],
                   "data-count=\"" + std::to_string(counts[static_cast<size_t>(b)]) + "\"");
        }
    }
    return c.finish();
}

BoxStats box_stats(std::vector<double> values) {
    if (values.empty()) throw ValidationError("box_stats: empty group");
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const size_t i = static_cast<size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        if (i + 1 >= values.size()) return values.back();
        return values[i] * (1.0 - frac) + values[i + 1] * frac;
    };
    BoxStats b{};
    b.q1 = quantile(0.25);
    b.median = quantile(0.5);
    b.q3 = quantile(0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
    b.lo_whisker = b.q1;
    b.hi_whisker = b.q3;
    for (double v : values) {
        if (v >= lo_fence && v < b.lo_whisker) b.lo_whisker = v;
        if (v <= hi_fence && v > b.hi_whisker) b.hi_whisker = v;
        if (v < lo_fence || v > hi_fence) b.outliers.push_back(v);
    }
    return b;
}

std::string render_boxplot(const std::vector<std::pair<std::string, std::vector<double>>>& groups,
                           const std::string& title, const std::string& y_label) {
    if (groups.empty()) throw ValidationError("render_boxplot: no groups");
    double vlo = 1e300, vhi = -1e300;
    for (const auto& [name, vals] : groups)
        for (double v : vals) {
            vlo = std::min(vlo, v);
            vhi = std::max(vhi, v);
        }
    if (!(vhi > vlo)) {
        vhi = vlo + 1.0;
        vlo -= 1.0;
    }
    const double pad = 0.05 * (vhi - vlo);

    SvgCanvas c(800, 520);
    Frame f{70, 50, 770, 460, 0.0, static_cast<double>(groups.size()), vlo - pad, vhi + pad};
    c.text(400, 28, title, 15, "middle");
    c.line(f.x0, f.y1, f.x1, f.y1);
    c.line(f.x0, f.y0, f.x0, f.y1);
    for (int i = 0; i <= 5; ++i) {
        const double vy = f.vy0 + (f.vy1 - f.vy0) * i / 5;
        c.line(f.x0 - 4, f.py(vy), f.x0, f.py(vy));
        c.text(f.x0 - 6, f.py(vy) + 3, num(vy), 10, "end");
    }
    c.text(12, 255, y_label, 12, "start");

    const double slot = (f.x1 - f.x0) / static_cast<double>(groups.size());
    for (size_t g = 0; g < groups.size(); ++g) {
        const auto& [name, vals] = groups[g];
        if (vals.empty()) continue;
        const BoxStats b = box_stats(vals);
        const double cx = f.x0 + slot * (static_cast<double>(g) + 0.5);
        const double half = slot * 0.3;
        c.line(cx, f.py(b.lo_whisker), cx, f.py(b.q1));
        c.line(cx, f.py(b.q3), cx, f.py(b.hi_whisker));
        c.line(cx - half / 2, f.py(b.lo_whisker), cx + half / 2, f.py(b.lo_whisker));
        c.line(cx - half / 2, f.py(b.hi_whisker), cx + half / 2, f.py(b.hi_whisker));
        c.rect(cx - half, f.py(b.q3), 2 * half, std::max(0.5, f.py(b.q1) - f.py(b.q3)),
               kPalette[g % kPaletteSize]);
        c.line(cx - half, f.py(b.median), cx + half, f.py(b.median), "#111", 2.0);
        for (double o : b.outliers) c.circle(cx, f.py(o), 2.0, "#555");
        c.text(cx, f.y1 + 16, name, 11, "middle");
    }
    return c.finish();
}

std::string render_scatter(const std::vector<double>& x, const std::vector<double>& y,
                           const std::vector<int>& label, const std::string& title,
                           const std::string& x_label, const std::string& y_label) {
    if (x.size() != y.size() || x.empty()) throw ValidationError("render_scatter: bad inputs");
    double xlo = *std::min_element(x.begin(), x.end()), xhi = *std::max_element(x.begin(), x.end());
    double ylo = *std::min_element(y.begin(), y.end()), yhi = *std::max_element(y.begin(), y.end());
    if (!(xhi > xlo)) xhi = xlo + 1.0;
    if (!(yhi > ylo)) yhi = ylo + 1.0;
    const double xp = 0.05 * (xhi - xlo), yp = 0.05 * (yhi - ylo);

    SvgCanvas c(800, 520);
    Frame f{70, 50, 770, 460, xlo - xp, xhi + xp, ylo - yp, yhi + yp};
    c.text(400, 28, title, 15, "middle");
    draw_axes(c, f, x_label, y_label);
    for (size_t i = 0; i < x.size(); ++i) {
        const int cls = label.empty() ? 0 : label[i];
        c.circle(f.px(x[i]), f.py(y[i]), 2.4, kPalette[cls % kPaletteSize]);
    }
    return c.finish();
}

std::string render_stacked_bars(const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                                const std::string& title) {
    if (rows.empty()) throw ValidationError("render_stacked_bars: no rows");
    SvgCanvas c(800, 520);
    Frame f{70, 50, 770, 460, 0.0, static_cast<double>(rows.size()), 0.0, 1.0};
    c.text(400, 28, title, 15, "middle");
    c.line(f.x0, f.y1, f.x1, f.y1);
    c.line(f.x0, f.y0, f.x0, f.y1);
    c.text(12, 255, "proportion", 12, "start");

    const double slot = (f.x1 - f.x0) / static_cast<double>(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        const auto& [name, props] = rows[r];
        const double x = f.x0 + slot * static_cast<double>(r) + slot * 0.1;
        double acc = 0.0;
        for (size_t k = 0; k < props.size(); ++k) {
            const double y0 = f.py(acc);
            acc += props[k];
            const double y1 = f.py(acc);
            if (props[k] > 0)
                c.rect(x, y1, slot * 0.8, std::max(0.3, y0 - y1), kPalette[k % kPaletteSize]);
        }
        if (rows.size() <= 40) c.text(x + slot * 0.4, f.y1 + 16, name, 9, "middle");
    }
    return c.finish();
}

std::string render_qq(const std::vector<std::pair<double, double>>& pairs, const std::string& title) {
    if (pairs.empty()) throw ValidationError("render_qq: no points");
    std::vector<double> x, y;
    std::vector<int> lbl;
    for (const auto& [a, b] : pairs) {
        x.push_back(a);
        y.push_back(b);
        lbl.push_back(0);
    }
    return render_scatter(x, y, lbl, title, "theoretical quantile", "sample quantile");
}

} // namespace bhc::report
