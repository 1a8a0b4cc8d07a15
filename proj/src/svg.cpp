#include "caplab/svg.hpp"

#include <algorithm>
#include <cstdio>

#include "caplab/errors.hpp"

namespace caplab {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      default:
        out += ch;
    }
  }
  return out;
}

}  // namespace

std::string corners_svg(const PolytopeEstimate& estimate, std::string_view note) {
  if (estimate.center.size() < 2) throw ContractViolation("corners_svg needs at least two logits");
  constexpr double width = 480.0;
  constexpr double height = 480.0;
  constexpr double margin = 48.0;

  double xmin = estimate.center[0], xmax = xmin, ymin = estimate.center[1], ymax = ymin;
  for (const Tensor& c : estimate.corners) {
    xmin = std::min(xmin, c[0]);
    xmax = std::max(xmax, c[0]);
    ymin = std::min(ymin, c[1]);
    ymax = std::max(ymax, c[1]);
  }
  // Square extent so distances are not distorted.
  const double extent = std::max({xmax - xmin, ymax - ymin, 1e-9}) * 1.1;
  const double cx = 0.5 * (xmin + xmax);
  const double cy = 0.5 * (ymin + ymax);
  const double plot = width - 2 * margin;
  auto sx = [&](double v) { return margin + ((v - cx) / extent + 0.5) * plot; };
  auto sy = [&](double v) { return height - margin - ((v - cy) / extent + 0.5) * plot; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
                    num(height + (note.empty() ? 0 : 24)) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<rect x=\"" + num(margin) + "\" y=\"" + num(margin) + "\" width=\"" + num(plot) + "\" height=\"" +
         num(plot) + "\" fill=\"none\" stroke=\"#888\"/>\n";
  svg += "<text x=\"" + num(width / 2) + "\" y=\"" + num(height - 12) +
         "\" text-anchor=\"middle\" font-size=\"12\">logit 0 [" + num(cx - extent / 2) + ", " +
         num(cx + extent / 2) + "]</text>\n";
  svg += "<text x=\"14\" y=\"" + num(height / 2) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " +
         num(height / 2) + ")\">logit 1 [" + num(cy - extent / 2) + ", " + num(cy + extent / 2) + "]</text>\n";
  for (const Tensor& c : estimate.corners) {
    const double px = sx(c[0]);
    const double py = sy(c[1]);
    svg += "<path d=\"M" + num(px - 5) + " " + num(py - 5) + " L" + num(px + 5) + " " + num(py + 5) + " M" +
           num(px - 5) + " " + num(py + 5) + " L" + num(px + 5) + " " + num(py - 5) +
           "\" stroke=\"red\" stroke-width=\"2\"/>\n";
  }
  svg += "<circle cx=\"" + num(sx(estimate.center[0])) + "\" cy=\"" + num(sy(estimate.center[1])) +
         "\" r=\"5\" fill=\"blue\"/>\n";
  svg += "<text x=\"" + num(margin) + "\" y=\"" + num(margin - 12) + "\" font-size=\"12\">" +
         std::to_string(estimate.corners.size()) + " corners, diameter " + num(estimate.diameter) + "</text>\n";
  if (!note.empty()) {
    svg += "<text x=\"" + num(margin) + "\" y=\"" + num(height + 12) + "\" font-size=\"12\">" + escape(note) +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace caplab
