// Minimal SVG writer for figure output (cost maps with path polylines,
// line charts of cost curves and training traces).
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "terrasense/common.hpp"

namespace terra {

class SvgWriter {
 public:
  SvgWriter(double width, double height) : w_(width), h_(height) {}

  void rect(double x, double y, double w, double h, const std::string& fill,
            double opacity = 1.0) {
    body_ += "<rect x=\"" + fmt_num(x) + "\" y=\"" + fmt_num(y) + "\" width=\"" +
             fmt_num(w) + "\" height=\"" + fmt_num(h) + "\" fill=\"" + fill +
             "\"";
    if (opacity != 1.0) body_ += " fill-opacity=\"" + fmt_num(opacity) + "\"";
    body_ += "/>\n";
  }

  void image_ref(const std::string& href, double x, double y, double w,
                 double h) {
    body_ += "<image href=\"" + href + "\" x=\"" + fmt_num(x) + "\" y=\"" +
             fmt_num(y) + "\" width=\"" + fmt_num(w) + "\" height=\"" +
             fmt_num(h) + "\" image-rendering=\"pixelated\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts,
                const std::string& stroke, double stroke_width,
                const std::string& dash = "") {
    body_ += "<polyline fill=\"none\" stroke=\"" + stroke +
             "\" stroke-width=\"" + fmt_num(stroke_width) + "\"";
    if (!dash.empty()) body_ += " stroke-dasharray=\"" + dash + "\"";
    body_ += " points=\"";
    for (const auto& [x, y] : pts)
      body_ += fmt_num(x) + "," + fmt_num(y) + " ";
    body_ += "\"/>\n";
  }

  void circle(double x, double y, double r, const std::string& fill) {
    body_ += "<circle cx=\"" + fmt_num(x) + "\" cy=\"" + fmt_num(y) +
             "\" r=\"" + fmt_num(r) + "\" fill=\"" + fill + "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2,
            const std::string& stroke, double stroke_width = 1.0) {
    body_ += "<line x1=\"" + fmt_num(x1) + "\" y1=\"" + fmt_num(y1) +
             "\" x2=\"" + fmt_num(x2) + "\" y2=\"" + fmt_num(y2) +
             "\" stroke=\"" + stroke + "\" stroke-width=\"" +
             fmt_num(stroke_width) + "\"/>\n";
  }

  void text(double x, double y, const std::string& s, double size = 12.0,
            const std::string& fill = "#222", const std::string& anchor = "start") {
    body_ += "<text x=\"" + fmt_num(x) + "\" y=\"" + fmt_num(y) +
             "\" font-size=\"" + fmt_num(size) +
             "\" font-family=\"sans-serif\" fill=\"" + fill +
             "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write svg: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_num(w_)
        << "\" height=\"" << fmt_num(h_) << "\" viewBox=\"0 0 " << fmt_num(w_)
        << " " << fmt_num(h_) << "\">\n"
        << body_ << "</svg>\n";
  }

 private:
  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '<') out += "&lt;";
      else if (c == '>') out += "&gt;";
      else if (c == '&') out += "&amp;";
      else out += c;
    }
    return out;
  }

  double w_, h_;
  std::string body_;
};

}  // namespace terra
