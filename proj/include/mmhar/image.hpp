// Grayscale image support: binary PGM read/write and the model-facing frame
// preprocessing (square center crop, luminance grayscale, bilinear resize,
// scale to [0,1]).
#pragma once

#include "mmhar/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace mmhar {

struct ColorImage {
  ImageU8 r, g, b;

  Eigen::Index rows() const { return r.rows(); }
  Eigen::Index cols() const { return r.cols(); }
};

inline void pgm_write(const std::filesystem::path& path, const ImageU8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()),
            static_cast<std::streamsize>(img.size()));
  if (!out) throw IoError("short write: " + path.string());
}

inline ImageU8 pgm_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || w <= 0 || h <= 0)
    throw IoError("unsupported PGM header in " + path.string());
  in.get();  // single whitespace after maxval
  ImageU8 img(h, w);
  in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!in) throw IoError("short read: " + path.string());
  return img;
}

namespace detail {

// Bilinear resize with half-pixel centers. A same-size resize reproduces the
// input exactly.
inline Mat<double> resize_bilinear(const Mat<double>& src, int target) {
  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());
  if (h == target && w == target) return src;
  Mat<double> dst(target, target);
  const double sy = static_cast<double>(h) / target;
  const double sx = static_cast<double>(w) / target;
  for (int i = 0; i < target; ++i) {
    double fy = (i + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int j = 0; j < target; ++j) {
      double fx = (j + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      const double top = src(y0, x0) * (1.0 - wx) + src(y0, x1) * wx;
      const double bot = src(y1, x0) * (1.0 - wx) + src(y1, x1) * wx;
      dst(i, j) = top * (1.0 - wy) + bot * wy;
    }
  }
  return dst;
}

inline Mat<double> center_crop_square(const Mat<double>& img) {
  const Eigen::Index h = img.rows();
  const Eigen::Index w = img.cols();
  const Eigen::Index side = std::min(h, w);
  const Eigen::Index top = (h - side) / 2;
  const Eigen::Index left = (w - side) / 2;
  return img.block(top, left, side, side);
}

inline void check_frame_dims(Eigen::Index h, Eigen::Index w, int target) {
  if (h < 2 || w < 2) throw Error("degenerate image: " + std::to_string(h) + "x" + std::to_string(w));
  if (target < 8) throw Error("preprocess target too small: " + std::to_string(target));
}

}  // namespace detail

// Grayscale path: crop, resize, scale to [0,1]. Values are computed in double
// so the same bytes in produce the same floats out everywhere.
inline Mat<double> preprocess_frame(const ImageU8& img, int target) {
  detail::check_frame_dims(img.rows(), img.cols(), target);
  Mat<double> gray = img.cast<double>();
  gray = detail::center_crop_square(gray);
  gray = detail::resize_bilinear(gray, target);
  return gray / 255.0;
}

// 3-channel path: luminance conversion happens before the resize.
inline Mat<double> preprocess_frame(const ColorImage& img, int target) {
  detail::check_frame_dims(img.rows(), img.cols(), target);
  if (img.g.rows() != img.rows() || img.b.rows() != img.rows() ||
      img.g.cols() != img.cols() || img.b.cols() != img.cols())
    throw ShapeMismatch("color planes differ in size");
  Mat<double> gray = 0.299 * img.r.cast<double>() + 0.587 * img.g.cast<double>() +
                     0.114 * img.b.cast<double>();
  gray = detail::center_crop_square(gray);
  gray = detail::resize_bilinear(gray, target);
  return gray / 255.0;
}

}  // namespace mmhar
