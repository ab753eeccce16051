/*
 * Copyright 2026 The faasmesh Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "faasmesh/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "faasmesh/errors.hpp"
#include "faasmesh/util.hpp"

namespace faasmesh::grid {

namespace {

[[noreturn]] void malformed(const std::string& why) {
  throw Error(ErrorCode::ValidationError, "MalformedGrid: " + why);
}

class Lines {
 public:
  explicit Lines(std::string_view text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++number_;
    return true;
  }

  int number() const { return number_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int number_ = 0;
};

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    auto start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc{} && ptr == tok.data() + tok.size();
}

}  // namespace

GridImage parse(std::string_view text) {
  Lines lines(text);
  std::string_view line;
  if (!lines.next(line) || line != "FGRID 1") malformed("line 1 must be 'FGRID 1'");
  if (!lines.next(line)) malformed("missing dimensions line");
  auto dims = tokens(line);
  GridImage img;
  if (dims.size() != 2 || !parse_number(dims[0], img.height) ||
      !parse_number(dims[1], img.width) || img.height == 0 || img.width == 0) {
    malformed("line 2 must hold two positive integers");
  }
  img.pixels.reserve(img.height * img.width);
  for (std::size_t r = 0; r < img.height; ++r) {
    if (!lines.next(line)) malformed(fmt::format("expected {} rows, got {}", img.height, r));
    auto row = tokens(line);
    if (row.size() != img.width) {
      malformed(fmt::format("line {}: expected {} values, got {}", lines.number(), img.width,
                            row.size()));
    }
    for (auto tok : row) {
      double v = 0;
      if (!parse_number(tok, v) || !std::isfinite(v)) {
        malformed(fmt::format("line {}: bad value '{}'", lines.number(), tok));
      }
      img.pixels.push_back(v);
    }
  }
  while (lines.next(line)) {
    if (!tokens(line).empty()) malformed(fmt::format("line {}: trailing data", lines.number()));
  }
  return img;
}

std::string format(const GridImage& image) {
  std::string out = fmt::format("FGRID 1\n{} {}\n", image.height, image.width);
  for (std::size_t r = 0; r < image.height; ++r) {
    for (std::size_t c = 0; c < image.width; ++c) {
      if (c) out += ' ';
      // shortest round-trip representation
      out += fmt::format("{}", image.at(r, c));
    }
    out += '\n';
  }
  return out;
}

GridImage read(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::NotFound, fmt::format("FileNotFound: {}", path.string()));
  }
  return parse(read_file(path));
}

void write(const std::filesystem::path& path, const GridImage& image) {
  write_file_atomic(path, format(image));
}

std::array<std::array<double, 3>, 3> gaussian_kernel_3x3(double sigma) {
  std::array<std::array<double, 3>, 3> k{};
  double sum = 0.0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k[dy + 1][dx + 1] = w;
      sum += w;
    }
  }
  for (auto& row : k) {
    for (auto& w : row) w /= sum;
  }
  return k;
}

GridImage gaussian_blur(const GridImage& image, double sigma) {
  const auto k = gaussian_kernel_3x3(sigma);
  GridImage out = image;
  const auto h = static_cast<long>(image.height);
  const auto w = static_cast<long>(image.width);
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const long rr = std::clamp(r + dy, 0L, h - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const long cc = std::clamp(c + dx, 0L, w - 1);
          acc += k[dy + 1][dx + 1] * image.at(rr, cc);
        }
      }
      out.at(r, c) = acc;
    }
  }
  return out;
}

GridImage flag(const GridImage& image, double threshold) {
  GridImage out = image;
  for (auto& v : out.pixels) {
    if (std::fabs(v) > threshold) v = 0.0;
  }
  return out;
}

GridImage calibrate(const GridImage& image, double gain) {
  GridImage out = image;
  for (auto& v : out.pixels) v *= gain;
  return out;
}

}  // namespace faasmesh::grid
