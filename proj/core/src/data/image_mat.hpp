#pragma once

#include <opencv2/core.hpp>

#include "dfbench/tensor.hpp"

namespace dfbench::data {

// [3,H,W] <-> H x W CV_64FC3 (RGB channel order), values untouched.
cv::Mat to_mat(const Tensor& chw);
Tensor from_mat(const cv::Mat& rgb);

}  // namespace dfbench::data
