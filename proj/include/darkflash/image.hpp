#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "darkflash/error.hpp"

namespace darkflash {

enum class CfaPattern { rggb, bggr, grbg, gbrg };

// Site classes of a Bayer quad. g_r is a green pixel whose row neighbors are
// red; g_b is a green pixel whose row neighbors are blue.
enum class CfaSite { r, g_r, g_b, b };

CfaSite cfa_site_at(CfaPattern pattern, int x, int y);
int cfa_channel(CfaSite site);  // 0 = R, 1 = G, 2 = B

std::string to_string(CfaPattern pattern);
CfaPattern cfa_pattern_from_string(const std::string& s);

// Row-major interleaved float image in linear radiometric units.
class LinearImage {
 public:
  LinearImage() = default;
  LinearImage(int width, int height, int channels, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  float& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_shape(const LinearImage& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

LinearImage extract_channel(const LinearImage& img, int channel);
bool all_finite(const LinearImage& img);

// Sums 3-channel linear RGB into a single luma plane (BT.601 weights).
LinearImage luma(const LinearImage& rgb);

}  // namespace darkflash
