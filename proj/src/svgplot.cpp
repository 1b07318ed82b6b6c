#include "sparseprior/svgplot.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "sparseprior/textio.hpp"

namespace sparseprior::plot {

namespace {

const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr int palette_size = 10;

}  // namespace

std::string scatter_svg(const std::vector<double>& xy, long n, const std::vector<int>& labels,
                        const std::vector<std::string>& label_names, int width, int height) {
    if (static_cast<long>(xy.size()) != 2 * n)
        throw std::invalid_argument("scatter: expected 2 coordinates per point");
    if (static_cast<long>(labels.size()) != n)
        throw std::invalid_argument("scatter: expected one label per point");
    for (int l : labels)
        if (l < 0 || l >= static_cast<int>(label_names.size()))
            throw std::invalid_argument("scatter: label index outside the name table");

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (n > 0) {
        xmin = xmax = xy[0];
        ymin = ymax = xy[1];
        for (long i = 0; i < n; ++i) {
            xmin = std::min(xmin, xy[2 * i]);
            xmax = std::max(xmax, xy[2 * i]);
            ymin = std::min(ymin, xy[2 * i + 1]);
            ymax = std::max(ymax, xy[2 * i + 1]);
        }
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;

    const double margin = 48.0, legend_w = 130.0;
    const double plot_w = width - 2 * margin - legend_w;
    const double plot_h = height - 2 * margin;
    auto sx = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * plot_w; };
    auto sy = [&](double y) { return height - margin - (y - ymin) / (ymax - ymin) * plot_h; };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // axes
    s += "<line x1=\"" + fmt_fixed(margin, 1) + "\" y1=\"" + fmt_fixed(height - margin, 1) +
         "\" x2=\"" + fmt_fixed(margin + plot_w, 1) + "\" y2=\"" + fmt_fixed(height - margin, 1) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + fmt_fixed(margin, 1) + "\" y1=\"" + fmt_fixed(height - margin, 1) +
         "\" x2=\"" + fmt_fixed(margin, 1) + "\" y2=\"" + fmt_fixed(margin, 1) +
         "\" stroke=\"black\"/>\n";
    auto tick = [&](double v, bool is_x) {
        std::string t = "<text font-size=\"10\" fill=\"black\"";
        if (is_x)
            t += " x=\"" + fmt_fixed(sx(v) - 10, 1) + "\" y=\"" +
                 fmt_fixed(height - margin + 14, 1) + "\"";
        else
            t += " x=\"" + fmt_fixed(4.0, 1) + "\" y=\"" + fmt_fixed(sy(v) + 3, 1) + "\"";
        t += ">" + fmt_fixed(v, 2) + "</text>\n";
        return t;
    };
    s += tick(xmin, true) + tick(xmax, true) + tick(ymin, false) + tick(ymax, false);

    for (long i = 0; i < n; ++i) {
        s += "<circle cx=\"" + fmt_fixed(sx(xy[2 * i]), 3) + "\" cy=\"" +
             fmt_fixed(sy(xy[2 * i + 1]), 3) + "\" r=\"2.5\" fill=\"" +
             palette[labels[i] % palette_size] + "\" fill-opacity=\"0.75\"/>\n";
    }

    // legend
    for (std::size_t k = 0; k < label_names.size(); ++k) {
        const double ly = margin + 18.0 * static_cast<double>(k);
        s += "<rect x=\"" + fmt_fixed(width - legend_w, 1) + "\" y=\"" + fmt_fixed(ly, 1) +
             "\" width=\"12\" height=\"12\" fill=\"" +
             palette[static_cast<int>(k) % palette_size] + "\"/>\n";
        s += "<text font-size=\"11\" fill=\"black\" x=\"" + fmt_fixed(width - legend_w + 16, 1) +
             "\" y=\"" + fmt_fixed(ly + 10, 1) + "\">" + label_names[k] + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

void write_scatter_svg(const std::string& path, const std::vector<double>& xy, long n,
                       const std::vector<int>& labels,
                       const std::vector<std::string>& label_names) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << scatter_svg(xy, n, labels, label_names);
}

}  // namespace sparseprior::plot
