// 8-bit RGB raster with binary PPM (P6) I/O and a false-color ramp for
// scalar fields (cost maps, friction maps).
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "terrasense/common.hpp"

namespace terra {

class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {0, 0, 0})
      : w_(width), h_(height), px_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return w_; }
  int height() const { return h_; }

  Rgb& at(int row, int col) { return px_[static_cast<std::size_t>(row) * w_ + col]; }
  const Rgb& at(int row, int col) const {
    return px_[static_cast<std::size_t>(row) * w_ + col];
  }

  bool inside(int row, int col) const {
    return row >= 0 && row < h_ && col >= 0 && col < w_;
  }

  const std::vector<Rgb>& pixels() const { return px_; }

  void save_ppm(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write image: " + path);
    out << "P6\n" << w_ << " " << h_ << "\n255\n";
    out.write(reinterpret_cast<const char*>(px_.data()),
              static_cast<std::streamsize>(px_.size() * 3));
    if (!out) throw ConfigError("short write on image: " + path);
  }

  static Image load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open image: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw ConfigError(path + ": not a P6 ppm");
    int w = read_token(in, path);
    int h = read_token(in, path);
    int maxval = read_token(in, path);
    if (maxval != 255) throw ConfigError(path + ": unsupported maxval");
    in.get();  // single whitespace after maxval
    Image img(w, h);
    in.read(reinterpret_cast<char*>(img.px_.data()),
            static_cast<std::streamsize>(img.px_.size() * 3));
    if (!in) throw ConfigError(path + ": truncated pixel data");
    return img;
  }

  // Draws a filled disc; used for path overlay markers.
  void fill_disc(int row, int col, int radius, Rgb c) {
    for (int r = row - radius; r <= row + radius; ++r)
      for (int q = col - radius; q <= col + radius; ++q)
        if (inside(r, q) &&
            (r - row) * (r - row) + (q - col) * (q - col) <= radius * radius)
          at(r, q) = c;
  }

  // Bresenham segment; used for path overlay polylines.
  void draw_line(int r0, int c0, int r1, int c1, Rgb c, int thickness = 1) {
    int dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
    int sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
    int err = (dc > dr ? dc : -dr) / 2;
    while (true) {
      if (thickness <= 1) {
        if (inside(r0, c0)) at(r0, c0) = c;
      } else {
        fill_disc(r0, c0, thickness / 2, c);
      }
      if (r0 == r1 && c0 == c1) break;
      int e2 = err;
      if (e2 > -dr) { err -= dc; r0 += sr; }
      if (e2 < dc) { err += dr; c0 += sc; }
    }
  }

 private:
  static int read_token(std::ifstream& in, const std::string& path) {
    // Skips whitespace and '#' comments between header fields.
    int c = in.peek();
    while (c == '#' || std::isspace(c)) {
      if (c == '#') {
        std::string junk;
        std::getline(in, junk);
      } else {
        in.get();
      }
      c = in.peek();
    }
    int v = -1;
    in >> v;
    if (!in || v < 0) throw ConfigError(path + ": bad ppm header");
    return v;
  }

  int w_ = 0;
  int h_ = 0;
  std::vector<Rgb> px_;
};

// Perceptually-ordered blue->green->yellow->red ramp for t in [0, 1].
inline Rgb false_color(double t) {
  t = clamp(t, 0.0, 1.0);
  struct Stop { double t; double r, g, b; };
  static const Stop stops[] = {
      {0.00, 0.190, 0.072, 0.232},
      {0.25, 0.127, 0.425, 0.530},
      {0.50, 0.128, 0.658, 0.519},
      {0.75, 0.618, 0.851, 0.182},
      {1.00, 0.993, 0.906, 0.144},
  };
  for (int i = 0; i < 4; ++i) {
    if (t <= stops[i + 1].t) {
      double u = (t - stops[i].t) / (stops[i + 1].t - stops[i].t);
      auto mix = [&](double a, double b) { return a + (b - a) * u; };
      return Rgb{static_cast<std::uint8_t>(255.0 * mix(stops[i].r, stops[i + 1].r) + 0.5),
                 static_cast<std::uint8_t>(255.0 * mix(stops[i].g, stops[i + 1].g) + 0.5),
                 static_cast<std::uint8_t>(255.0 * mix(stops[i].b, stops[i + 1].b) + 0.5)};
    }
  }
  return Rgb{253, 231, 37};
}

}  // namespace terra
