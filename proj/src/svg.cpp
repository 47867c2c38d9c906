#include "pcv/svg.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

namespace pcv {

namespace {

std::string num(double v) {
    // fixed precision keeps the output byte-stable
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
    return std::string(buf, p);
}

}  // namespace

void plot_accuracy_curve(const SweepReport& report, const std::string& path) {
    if (report.rows.size() < 2)
        throw std::invalid_argument("plot_accuracy_curve: need at least 2 rows");

    const double W = 640, H = 480, ML = 60, MR = 20, MT = 30, MB = 50;
    const double x0 = report.rows.front().epsilon;
    const double x1 = report.rows.back().epsilon;
    const double span = (x1 > x0) ? (x1 - x0) : 1.0;
    auto px = [&](double eps) { return ML + (eps - x0) / span * (W - ML - MR); };
    auto py = [&](double acc) { return MT + (1.0 - acc) * (H - MT - MB); };

    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    // axes
    os << "<line x1=\"" << num(ML) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(W - MR)
       << "\" y2=\"" << num(py(0)) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << num(ML) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(ML)
       << "\" y2=\"" << num(py(1)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(W / 2) << "\" y=\"" << num(H - 10)
       << "\" text-anchor=\"middle\" font-size=\"14\">epsilon</text>\n";
    os << "<text x=\"15\" y=\"" << num(H / 2)
       << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 15 " << num(H / 2)
       << ")\">accuracy</text>\n";
    // tipping threshold (relative rule drawn against the clean accuracy)
    const double thresh = 0.5 * report.rows.front().clean_accuracy;
    os << "<line class=\"threshold\" x1=\"" << num(ML) << "\" y1=\"" << num(py(thresh))
       << "\" x2=\"" << num(W - MR) << "\" y2=\"" << num(py(thresh))
       << "\" stroke=\"red\" stroke-dasharray=\"6 4\"/>\n";
    // curve
    os << "<polyline class=\"curve\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < report.rows.size(); ++i) {
        if (i) os << " ";
        os << num(px(report.rows[i].epsilon)) << "," << num(py(report.rows[i].perturbed_accuracy));
    }
    os << "\"/>\n";
    for (const SweepRow& r : report.rows)
        os << "<circle class=\"marker\" cx=\"" << num(px(r.epsilon)) << "\" cy=\""
           << num(py(r.perturbed_accuracy)) << "\" r=\"4\" fill=\"steelblue\"/>\n";
    // x tick labels
    for (const SweepRow& r : report.rows)
        os << "<text x=\"" << num(px(r.epsilon)) << "\" y=\"" << num(H - MB + 20)
           << "\" text-anchor=\"middle\" font-size=\"11\">" << num(r.epsilon) << "</text>\n";
    os << "</svg>\n";
    if (!os) throw std::runtime_error("write failed for " + path);
}

void render_cloud_gallery(const std::vector<GalleryPair>& pairs, const std::string& path) {
    if (pairs.empty()) throw std::invalid_argument("render_cloud_gallery: need at least one pair");
    const double panel = 200, pad = 20, title_h = 30;
    const double row_h = panel + title_h + pad;
    const double W = 2 * (panel + pad) + pad;
    const double H = pairs.size() * row_h + pad;

    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

    for (size_t r = 0; r < pairs.size(); ++r) {
        const GalleryPair& pr = pairs[r];
        const double top = pad + r * row_h;
        os << "<text x=\"" << num(W / 2) << "\" y=\"" << num(top + 15)
           << "\" text-anchor=\"middle\" font-size=\"14\">eps=" << num(pr.epsilon) << "  "
           << pr.i_pred << " -&gt; " << pr.f_pred << "</text>\n";
        const PointCloud* clouds[2] = {&pr.clean, &pr.perturbed};
        for (int col = 0; col < 2; ++col) {
            const double left = pad + col * (panel + pad);
            const double py0 = top + title_h;
            os << "<g class=\"panel\">\n";
            os << "<rect x=\"" << num(left) << "\" y=\"" << num(py0) << "\" width=\"" << panel
               << "\" height=\"" << panel << "\" fill=\"none\" stroke=\"gray\"/>\n";
            const PointCloud& c = *clouds[col];
            for (int i = 0; i < c.size(); ++i) {
                // orthographic XY projection; y runs up the page
                const double cx = left + c.points.at(i, 0) * panel;
                const double cy = py0 + (1.0 - c.points.at(i, 1)) * panel;
                os << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy)
                   << "\" r=\"1.5\" fill=\"black\"/>\n";
            }
            os << "</g>\n";
        }
    }
    os << "</svg>\n";
    if (!os) throw std::runtime_error("write failed for " + path);
}

}  // namespace pcv
