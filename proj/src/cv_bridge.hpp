#pragma once

#include <opencv2/core.hpp>

#include "eoescope/image.hpp"

namespace eoescope::detail {

/// RGB float image as a CV_32FC3 matrix (channel order kept as RGB).
inline cv::Mat to_mat(const Image& image) {
  cv::Mat m(image.height, image.width, CV_32FC3);
  std::copy(image.data.begin(), image.data.end(), m.ptr<float>(0));
  return m;
}

inline Image from_mat(const cv::Mat& m) {
  cv::Mat src = m.isContinuous() ? m : m.clone();
  Image out(src.cols, src.rows);
  std::copy_n(src.ptr<float>(0), out.data.size(), out.data.begin());
  return out;
}

}  // namespace eoescope::detail
