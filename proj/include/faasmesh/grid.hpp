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

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace faasmesh::grid {

/// Content type used when a grid is returned as a binary payload.
inline constexpr std::string_view kContentType = "application/x-fgrid";

/// Row-major 2-D image. Stands in for the FITS images handled by the real
/// imaging tools.
struct GridImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  double& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }

  bool operator==(const GridImage&) const = default;
};

/// Text format:
///   FGRID 1
///   <height> <width>
///   <width numbers>   (height lines)
/// Throws Error(ValidationError) with a "MalformedGrid" message on bad input.
GridImage parse(std::string_view text);
std::string format(const GridImage& image);

GridImage read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const GridImage& image);

/// 3x3 Gaussian kernel sampled at offsets {-1,0,1} and normalised to sum 1.
std::array<std::array<double, 3>, 3> gaussian_kernel_3x3(double sigma);

/// Convolution with the 3x3 kernel above; out-of-range taps replicate the
/// nearest edge pixel.
GridImage gaussian_blur(const GridImage& image, double sigma = 1.5);

/// Zeroes every pixel whose magnitude exceeds `threshold`.
GridImage flag(const GridImage& image, double threshold);

GridImage calibrate(const GridImage& image, double gain);

}  // namespace faasmesh::grid
